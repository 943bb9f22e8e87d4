import argparse
import logging
import sys
import tempfile
from pathlib import Path

from models import RunConfig
from services import DepthService

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def test_depth_delay(pairs: int, epochs: int, seeds: list) -> bool:
    config = RunConfig.load(
        None,
        {
            "dataset": {"pairs_per_family": pairs},
            "target": {"per_class": pairs},
            "model": {"epochs": epochs, "batch_size": 64, "cycle_length": 600},
            "sweep": {"depths": [2, 4, 8], "threshold": 0.9},
            "run": {"seeds": seeds},
        },
    )
    ok = True
    with tempfile.TemporaryDirectory() as tmp:
        summary = DepthService.run(config, Path(tmp))

    illusion = summary["tasks"]["illusion"]
    logger.info(f"Illusion task mean epochs by depth: {illusion['mean_epochs_by_depth']}")
    if illusion["non_decreasing"]:
        logger.info("SUCCESS: epochs-to-recall-0.9 is non-decreasing in depth on illusion data")
    else:
        logger.error("FAILURE: deeper networks reached the threshold sooner on illusion data")
        ok = False

    digits = summary["tasks"]["digits"]
    p = digits.get("p_value_positive", 1.0)
    logger.info(f"Digits task mean epochs by depth: {digits['mean_epochs_by_depth']}, one-sided p={p:.3g}")
    if p >= 0.05:
        logger.info("SUCCESS: no significantly positive depth ordering on the digits control")
    else:
        logger.error(f"FAILURE: digits control shows a depth delay (p={p:.3g})")
        ok = False
    return ok


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Convergence delay with depth, illusion data vs digits control")
    parser.add_argument("--pairs", type=int, default=400, help="Pairs per family and digit images per class")
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--seeds", default="0,1,2")
    args = parser.parse_args()

    try:
        passed = test_depth_delay(args.pairs, args.epochs, [int(s) for s in args.seeds.split(",")])
    except Exception as e:
        logger.error(f"An error occurred: {e}")
        passed = False
    sys.exit(0 if passed else 1)
