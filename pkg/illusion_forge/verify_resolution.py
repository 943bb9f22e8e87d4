import argparse
import logging
import sys
import tempfile
from pathlib import Path

from dataset import build
from fusion import LabelSpace
from illusions import IllusionFamily, IllusionParams, generate
from models import DatasetSpec, FusionMode, MlpConfig, PreprocSpec, Split
from raster import downsample, occupied_orientation_bins, rasterize
from trainer import ArraySet, fit

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def check_orientation_bins(samples: int = 20) -> bool:
    """Zöllner strokes lose distinct orientations when rendered at 32 px."""
    failures = 0
    for seed in range(samples):
        image = rasterize(generate(IllusionParams(IllusionFamily.ZOLLNER, 0.5, 0.5, seed)).illusory)
        full = occupied_orientation_bins(image)
        small = occupied_orientation_bins(downsample(image, 32))
        if not small < full:
            failures += 1
            logger.error(f"FAILURE: seed {seed} keeps {small} occupied bins at 32 px vs {full} at 224 px")
    if failures == 0:
        logger.info(f"SUCCESS: all {samples} Zöllner renders have fewer occupied orientation bins at 32 px")
    return failures == 0


def _held_out_accuracy(resolution: int, pairs: int, epochs: int, seed: int, tmp: Path) -> float:
    root = tmp / f"r{resolution}"
    records = build(DatasetSpec(pairs_per_family=pairs, master_seed=seed, resolution=resolution), root)
    preproc = PreprocSpec(size=56)
    space = LabelSpace(FusionMode.BASE, 2)
    train = ArraySet.from_records([r for r in records if r.split == Split.TRAIN], root, space, preproc, True)
    test = ArraySet.from_records([r for r in records if r.split == Split.TEST], root, space, preproc, True)
    config = MlpConfig(hidden=[256, 256], epochs=epochs, batch_size=64, cycle_length=600, seed=seed)
    run, _ = fit(config, space, train, preproc, test, illusion_as_target=True)
    return run.epoch_metrics[-1].illusion_accuracy


def test_resolution_degradation(pairs: int, epochs: int, seed: int) -> bool:
    with tempfile.TemporaryDirectory() as tmp:
        full = _held_out_accuracy(224, pairs, epochs, seed, Path(tmp))
        small = _held_out_accuracy(32, pairs, epochs, seed, Path(tmp))
    logger.info(f"Held-out accuracy: 224 px stored -> {full:.3f}, 32 px stored -> {small:.3f}")
    if full - small >= 0.15:
        logger.info(f"SUCCESS: 32 px inputs score {100 * (full - small):.1f} points lower")
        return True
    logger.error(f"FAILURE: gap of {100 * (full - small):.1f} points is below 15")
    return False


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Accuracy loss from 32 px renders")
    parser.add_argument("--pairs", type=int, default=1000)
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    passed = check_orientation_bins()
    try:
        passed = test_resolution_degradation(args.pairs, args.epochs, args.seed) and passed
    except Exception as e:
        logger.error(f"An error occurred: {e}")
        passed = False
    sys.exit(0 if passed else 1)
