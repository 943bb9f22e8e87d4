import argparse
import logging

from commands import add_common, add_resolution, job_count, load_config, optional, output_dir
from input_validation import ParamValidator
from services import GenerationService

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen", help="Generate an illusion dataset (or a target stand-in set)")
    add_common(parser, jobs=True)
    add_resolution(parser)
    parser.add_argument("--families", help="Comma-separated families (default: all five)")
    parser.add_argument("--pairs", help="Scene pairs per family")
    parser.add_argument("--strength", help="Strength: fixed value or 'low,high' uniform range")
    parser.add_argument("--bins", help="Comma-separated strength bin centers, cycled by pair index")
    parser.add_argument("--diff", help="Perception difference: fixed value or 'low,high' uniform range")
    parser.add_argument("--seed", help="Master seed")
    parser.add_argument("--train-fraction", dest="train_fraction", help="Share of each stratum in the train split")
    parser.add_argument("--target", choices=["blobs", "digits", "folder"], help="Build a target set of this kind instead")
    parser.set_defaults(handler=run)


def _dataset_overrides(args: argparse.Namespace) -> dict:
    dataset = {
        "families": optional(args.families, lambda v: [f.strip() for f in v.split(",") if f.strip()]),
        "pairs_per_family": optional(args.pairs, lambda v: ParamValidator.positive_int("--pairs", v)),
        "master_seed": ParamValidator.optional_seed("--seed", args.seed),
        "train_fraction": optional(args.train_fraction, lambda v: ParamValidator.open_fraction("--train-fraction", v)),
    }
    if args.bins is not None:
        bins = [ParamValidator.unit_interval("--bins", b) for b in ParamValidator.float_list("--bins", args.bins)]
        dataset["strength"] = {"kind": "bins", "bins": bins}
    elif args.strength is not None:
        low, high = ParamValidator.unit_range("--strength", args.strength)
        dataset["strength"] = {"kind": "uniform", "low": low, "high": high}
    if args.diff is not None:
        low, high = ParamValidator.unit_range("--diff", args.diff)
        dataset["diff"] = {"low": low, "high": high}
    return dataset


def run(args: argparse.Namespace) -> int:
    overrides = {"dataset": _dataset_overrides(args)}
    if args.target is not None:
        overrides["target"] = {"kind": args.target}
    config = load_config(args, overrides)
    out = output_dir(config, "gen")

    if args.target is not None:
        records = GenerationService.generate_targets(config, out)
        print(f"target ({config.target.kind}): {len(records)} images")
    else:
        _, counts = GenerationService.generate_dataset(config.dataset, out, jobs=job_count(config))
        for family, labels in counts.items():
            print(f"{family}: {labels.get(1, 0)} positive, {labels.get(0, 0)} negative")
    config.write_resolved(out)
    print(f"manifest: {out / 'manifest.jsonl'}")
    return 0
