import argparse
import hashlib
import logging
import sys
import tempfile
from pathlib import Path

from dataset import build, family_counts, plan_pairs
from geometry import ElementRole
from illusions import IllusionParams, generate
from models import DatasetSpec

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def _tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(path.relative_to(root).as_posix().encode())
        h.update(path.read_bytes())
    return h.hexdigest()


def check_counts(spec: DatasetSpec, records) -> bool:
    expected = spec.label_counts()
    totals = {0: 0, 1: 0}
    for labels in family_counts(records).values():
        for label, count in labels.items():
            totals[label] += count
    want = {label: count * len(spec.families) for label, count in expected.items()}
    if totals == want:
        logger.info(f"SUCCESS: {totals[1]} positives and {totals[0]} negatives")
        return True
    logger.error(f"FAILURE: counts {totals}, expected {want}")
    return False


def check_controls(spec: DatasetSpec) -> bool:
    """Each control equals its illusory mate with the Context strokes removed."""
    mismatches = 0
    for job in plan_pairs(spec, "."):
        pair = generate(IllusionParams(job.family, job.strength, job.perception_diff, job.layout_seed))
        if pair.illusory.without_role(ElementRole.CONTEXT) != pair.control:
            mismatches += 1
    if mismatches == 0:
        logger.info("SUCCESS: every control differs from its illusory mate only in Context segments")
    else:
        logger.error(f"FAILURE: {mismatches} pairs differ outside the Context role")
    return mismatches == 0


def test_full_scale(pairs: int, seed: int, jobs: int) -> bool:
    spec = DatasetSpec(pairs_per_family=pairs, master_seed=seed)
    with tempfile.TemporaryDirectory() as tmp:
        first = build(spec, Path(tmp) / "a", jobs=jobs)
        second = build(spec, Path(tmp) / "b", jobs=jobs)
        ok = check_counts(spec, first)
        ok = check_controls(spec) and ok
        if _tree_digest(Path(tmp) / "a") == _tree_digest(Path(tmp) / "b") and first == second:
            logger.info("SUCCESS: rebuild with the same master seed is byte-identical")
        else:
            logger.error("FAILURE: rebuild differs")
            ok = False
    return ok


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Dataset build counts, controls and determinism")
    parser.add_argument("--pairs", type=int, default=200, help="Pairs per family (12000 for the full-scale build)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=4)
    args = parser.parse_args()

    try:
        passed = test_full_scale(args.pairs, args.seed, args.jobs)
    except Exception as e:
        logger.error(f"An error occurred: {e}")
        passed = False
    sys.exit(0 if passed else 1)
