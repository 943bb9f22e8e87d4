import argparse
from pathlib import Path

from commands import add_common, load_config, optional, output_dir
from dataset import family_counts
from errors import InvalidParams
from input_validation import ParamValidator
from services import MixService


def register(subparsers) -> None:
    parser = subparsers.add_parser("mix", help="Mix an illusion subset into a target manifest")
    add_common(parser)
    parser.add_argument("--target-manifest", dest="target_manifest", help="Target-set manifest.jsonl")
    parser.add_argument("--illusion-manifest", dest="illusion_manifest", help="Illusion manifest.jsonl")
    parser.add_argument("--fraction", help="Illusion share of the combined train set, in [0, 1]")
    parser.add_argument("--positive-share", dest="positive_share", help="Positive share among illusion samples")
    parser.add_argument("--seed", help="Sampling seed (vary per run to resample the subset)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    mix = {
        "target_manifest": args.target_manifest,
        "illusion_manifest": args.illusion_manifest,
        "illusion_fraction": optional(args.fraction, lambda v: ParamValidator.unit_interval("--fraction", v)),
        "positive_share": optional(args.positive_share, lambda v: ParamValidator.unit_interval("--positive-share", v)),
        "seed": ParamValidator.optional_seed("--seed", args.seed),
    }
    config = load_config(args, {"mix": mix})
    section = config.mix
    if not section.target_manifest or not section.illusion_manifest:
        raise InvalidParams("--target-manifest/--illusion-manifest: both manifests are required")

    out = output_dir(config, "mix")
    records = MixService.mix_manifests(
        Path(section.target_manifest),
        Path(section.illusion_manifest),
        section.illusion_fraction,
        section.positive_share,
        section.seed,
        out,
    )
    for family, labels in family_counts(records).items():
        print(f"{family}: " + ", ".join(f"label {k}: {v}" for k, v in sorted(labels.items())))
    config.write_resolved(out)
    return 0
