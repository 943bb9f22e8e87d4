import os
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
if str(HERE) not in sys.path:
    sys.path.insert(0, str(HERE))

os.environ.setdefault("ILLUSION_FORGE_PERMUTATIONS", "2000")

from config import settings  # noqa: E402
from dataset import build  # noqa: E402
from failure_tracker import failure_tracker  # noqa: E402
from models import DatasetSpec  # noqa: E402


@pytest.fixture(autouse=True, scope="session")
def isolated_output_dirs(tmp_path_factory):
    """Log files and default outputs go to a session temp directory."""
    log_dir = tmp_path_factory.mktemp("logs")
    patch = pytest.MonkeyPatch()
    patch.setattr(settings, "LOG_DIR", str(log_dir))
    patch.setattr(settings, "OUT_DIR", str(tmp_path_factory.mktemp("runs")))
    patch.setattr(failure_tracker, "failures_log_path", log_dir / "failures.log")
    yield log_dir
    patch.undo()


@pytest.fixture
def tiny_spec() -> DatasetSpec:
    """Two families, four pairs each, stored at 32 px."""
    return DatasetSpec(
        families=["muller_lyer", "zollner"],
        pairs_per_family=4,
        master_seed=7,
        resolution=32,
    )


@pytest.fixture
def tiny_dataset(tmp_path, tiny_spec):
    root = tmp_path / "illusion"
    records = build(tiny_spec, root)
    return root, records
