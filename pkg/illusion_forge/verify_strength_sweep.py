import argparse
import hashlib
import logging
import sys
import tempfile
from pathlib import Path

from models import RunConfig
from services import AnalysisService, StrengthSweepService

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

ARTIFACTS = ["sweep_points.csv", "fit_strength/fit.json", "fit_strength/plot_data.csv", "fit_strength/fit.svg"]


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _pipeline(config: RunConfig, out: Path) -> dict:
    points = StrengthSweepService.run(config, out, jobs=config.run.jobs or 1)
    strength = AnalysisService.fit_points(config, points, out / "fit_strength")
    diff_config = config.model_copy(update={"fit": config.fit.model_copy(update={"x": "perception_diff", "degree": 1})})
    AnalysisService.fit_points(diff_config, points, out / "fit_perception_diff")
    logger.info(f"Strength fit: coefficients={strength.coefficients} vertex={strength.vertex} R2={strength.r_squared:.3f}")
    return {name: _digest(out / name) for name in ARTIFACTS}


def test_strength_sweep(pairs: int, epochs: int, seeds: list, jobs: int) -> bool:
    config = RunConfig.load(
        None,
        {
            "sweep": {"pairs_per_bin": pairs},
            "model": {"hidden": [128, 128], "epochs": epochs, "batch_size": 32},
            "run": {"seeds": seeds, "jobs": jobs},
        },
    )
    with tempfile.TemporaryDirectory() as tmp:
        first = _pipeline(config, Path(tmp) / "a")
        second = _pipeline(config, Path(tmp) / "b")

    ok = True
    for name in ARTIFACTS:
        if first[name] == second[name]:
            logger.info(f"SUCCESS: {name} is byte-identical across runs")
        else:
            logger.error(f"FAILURE: {name} differs between runs")
            ok = False
    return ok


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Nine-bin strength sweep, fit and determinism")
    parser.add_argument("--pairs", type=int, default=40, help="Pairs per family in each strength bin")
    parser.add_argument("--epochs", type=int, default=15)
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    try:
        passed = test_strength_sweep(args.pairs, args.epochs, [int(s) for s in args.seeds.split(",")], args.jobs)
    except Exception as e:
        logger.error(f"An error occurred: {e}")
        passed = False
    sys.exit(0 if passed else 1)
