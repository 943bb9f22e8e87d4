import argparse
import logging
import sys
import tempfile
from pathlib import Path

import numpy as np

from dataset import build
from fusion import LabelSpace, SampleOrigin
from models import DatasetSpec, FusionMode, MlpConfig, PreprocSpec, Split
from trainer import ArraySet, compute_metrics, fit

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def check_majority_baseline() -> bool:
    """Always answering 'control' on a 40/60 split scores the negative share."""
    space = LabelSpace(FusionMode.MULTI, 10)
    origins = [SampleOrigin.illusion(1)] * 400 + [SampleOrigin.illusion(0)] * 600
    heads = [np.zeros((1000, 10)), np.tile([1.0, 0.0], (1000, 1))]
    metrics = compute_metrics(space, heads, origins, ["zollner"] * 1000)
    if metrics.illusion_accuracy == 0.6 and metrics.majority_baseline == 0.6:
        logger.info("SUCCESS: constant-negative predictor on 40/60 scores exactly 0.60")
        return True
    logger.error(f"FAILURE: majority baseline {metrics.majority_baseline}, accuracy {metrics.illusion_accuracy}")
    return False


def test_learnability(pairs_per_family: int, epochs: int, seed: int) -> bool:
    preproc = PreprocSpec(size=56)
    config = MlpConfig(hidden=[256, 256], epochs=epochs, batch_size=64, cycle_length=600, seed=seed)
    ok = True

    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp) / "illusion"
        logger.info(f"--- Building {pairs_per_family * 10} samples ---")
        records = build(DatasetSpec(pairs_per_family=pairs_per_family, master_seed=seed), root)
        train = [r for r in records if r.split == Split.TRAIN]
        test = [r for r in records if r.split == Split.TEST]

        logger.info("--- 1. Binary head, depth 2, 56x56 ---")
        binary = LabelSpace(FusionMode.BASE, 2)
        run, _ = fit(
            config,
            binary,
            ArraySet.from_records(train, root, binary, preproc, True),
            preproc,
            ArraySet.from_records(test, root, binary, preproc, True),
            illusion_as_target=True,
        )
        accuracies = [m.illusion_accuracy for m in run.epoch_metrics]
        best = max(accuracies)
        logger.info(f"Held-out illusion accuracy per epoch: {[round(a, 3) for a in accuracies]}")
        if best >= 0.9:
            logger.info(f"SUCCESS: reached {best:.3f} >= 0.90 within {epochs} epochs")
        else:
            logger.error(f"FAILURE: best held-out accuracy {best:.3f} < 0.90")
            ok = False
        if run.epoch_losses[-1] < run.epoch_losses[0]:
            logger.info("SUCCESS: final-epoch train loss below first-epoch loss")
        else:
            logger.error(f"FAILURE: loss went from {run.epoch_losses[0]:.4f} to {run.epoch_losses[-1]:.4f}")
            ok = False

        logger.info("--- 2. Single-mode restricted decision vs binary head ---")
        single = LabelSpace(FusionMode.SINGLE, 1)
        single_run, _ = fit(
            config,
            single,
            ArraySet.from_records(train, root, single, preproc),
            preproc,
            ArraySet.from_records(test, root, single, preproc),
        )
        gap = abs(single_run.epoch_metrics[-1].illusion_accuracy - run.epoch_metrics[-1].illusion_accuracy)
        if gap < 0.05:
            logger.info(f"SUCCESS: Single and binary accuracies differ by {gap:.3f}")
        else:
            logger.error(f"FAILURE: Single and binary accuracies differ by {gap:.3f} (>= 0.05)")
            ok = False
    return ok


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Held-out learnability of the illusion task")
    parser.add_argument("--pairs", type=int, default=1000, help="Pairs per family (10 samples per pair across families)")
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    passed = check_majority_baseline()
    try:
        passed = test_learnability(args.pairs, args.epochs, args.seed) and passed
    except Exception as e:
        logger.error(f"An error occurred: {e}")
        passed = False
    sys.exit(0 if passed else 1)
