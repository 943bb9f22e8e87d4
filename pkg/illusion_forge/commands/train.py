import argparse
from pathlib import Path

from commands import add_common, add_seeds, job_count, load_config, optional, output_dir
from errors import InvalidParams
from input_validation import ParamValidator
from models import FusionMode
from services import TrainingService

MODES = [m.value for m in FusionMode]


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train the reference MLP once per seed")
    add_common(parser, jobs=True)
    add_seeds(parser)
    parser.add_argument("--manifest", help="Training manifest (train split trains, test split evaluates)")
    parser.add_argument("--mode", help=f"Fusion mode: {', '.join(MODES)}")
    parser.add_argument("--epochs", help="Training epochs")
    parser.add_argument("--hidden", help="Comma-separated hidden widths; empty string for a linear model")
    parser.add_argument("--input-size", dest="input_size", help="Side of the grayscale input after resizing")
    parser.set_defaults(handler=run)


def model_overrides(args: argparse.Namespace) -> dict:
    hidden = None
    if getattr(args, "hidden", None) is not None:
        hidden = [] if not args.hidden.strip() else ParamValidator.int_list("--hidden", args.hidden)
    return {
        "epochs": optional(getattr(args, "epochs", None), lambda v: ParamValidator.positive_int("--epochs", v)),
        "hidden": hidden,
    }


def fusion_overrides(args: argparse.Namespace) -> dict:
    return {"mode": optional(getattr(args, "mode", None), lambda v: ParamValidator.choice("--mode", v, MODES))}


def run(args: argparse.Namespace) -> int:
    config = load_config(
        args,
        {
            "run": {"manifest": args.manifest},
            "model": model_overrides(args),
            "fusion": fusion_overrides(args),
            "preproc": {"size": optional(args.input_size, lambda v: ParamValidator.positive_int("--input-size", v))},
        },
    )
    if not config.run.manifest:
        raise InvalidParams("--manifest: a training manifest is required")

    out = output_dir(config, "train")
    summary = TrainingService.train_seeds(config, Path(config.run.manifest), out, jobs=job_count(config))
    for key in ("top1", "illusion_accuracy"):
        if key in summary:
            agg = summary[key]
            print(f"{key}: {agg['mean']:.4f} ± {agg['std']:.4f} (max {agg['max']:.4f}, n={agg['n']})")
    config.write_resolved(out)
    return 0
