import argparse
from pathlib import Path

from commands import add_common, load_config, optional, output_dir
from commands.train import fusion_overrides
from errors import InvalidParams
from input_validation import ParamValidator
from services import TrainingService


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Evaluate saved parameters on a manifest's test split")
    add_common(parser)
    parser.add_argument("--params", help="Parameter file written by train")
    parser.add_argument("--manifest", help="Manifest to evaluate (test split, or every row if none)")
    parser.add_argument("--mode", help="Fusion mode the parameters were trained with")
    parser.add_argument("--input-size", dest="input_size", help="Input side the parameters were trained with")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(
        args,
        {
            "run": {"params": args.params, "manifest": args.manifest},
            "fusion": fusion_overrides(args),
            "preproc": {"size": optional(args.input_size, lambda v: ParamValidator.positive_int("--input-size", v))},
        },
    )
    if not config.run.params or not config.run.manifest:
        raise InvalidParams("--params/--manifest: both are required")

    out = output_dir(config, "eval")
    metrics = TrainingService.evaluate_params(config, Path(config.run.params), Path(config.run.manifest), out)
    for name in ("top1", "top5", "macro_recall", "illusion_accuracy", "majority_baseline"):
        value = getattr(metrics, name)
        if value is not None:
            print(f"{name}: {value:.4f}")
    config.write_resolved(out)
    return 0
