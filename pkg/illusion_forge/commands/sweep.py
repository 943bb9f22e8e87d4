import argparse

from commands import add_common, add_resolution, add_seeds, job_count, load_config, optional, output_dir
from commands.train import model_overrides
from input_validation import ParamValidator
from services import StrengthSweepService


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="Strength-bin sweep: generate, train per bin and seed, evaluate")
    add_common(parser, jobs=True)
    add_seeds(parser)
    add_resolution(parser)
    parser.add_argument("--bins", help="Comma-separated strength bins (default 0.1..0.9)")
    parser.add_argument("--pairs", help="Scene pairs per family and bin")
    parser.add_argument("--epochs", help="Training epochs per run")
    parser.add_argument("--hidden", help="Comma-separated hidden widths")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    sweep = {
        "bins": optional(args.bins, lambda v: [ParamValidator.unit_interval("--bins", b) for b in ParamValidator.float_list("--bins", v)]),
        "pairs_per_bin": optional(args.pairs, lambda v: ParamValidator.positive_int("--pairs", v)),
    }
    config = load_config(args, {"sweep": sweep, "model": model_overrides(args)})
    out = output_dir(config, "sweep")
    path = StrengthSweepService.run(config, out, jobs=job_count(config))
    print(f"sweep points: {path}")
    config.write_resolved(out)
    return 0
