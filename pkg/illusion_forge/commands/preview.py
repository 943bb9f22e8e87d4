import argparse

from commands import add_common, load_config, output_dir
from illusions import IllusionParams, describe_params, family_parameter_doc
from input_validation import ParamValidator
from services import GenerationService


def register(subparsers) -> None:
    parser = subparsers.add_parser("preview", help="Render one illusory/control pair (optionally a five-family montage)")
    parser.add_argument("family", help="Illusion family or alias (hering, muller, pogg, vh, zoellner)")
    parser.add_argument("strength", help="Illusion strength s in [0, 1]")
    parser.add_argument("diff", help="Perception difference d in [0, 1]")
    parser.add_argument("seed", help="Layout seed")
    parser.add_argument("--montage", action="store_true", help="Also write a 2x5 montage of all families (PNG + SVG)")
    add_common(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    strength = ParamValidator.unit_interval("--strength", args.strength)
    diff = ParamValidator.unit_interval("--diff", args.diff)
    seed = ParamValidator.optional_seed("--seed", args.seed)
    params = IllusionParams(args.family, strength, diff, seed)

    config = load_config(args)
    out = output_dir(config, "preview")
    paths = GenerationService.preview(params, out)
    doc = family_parameter_doc(params.family)
    print(f"{params.family.value}: {doc.description}")
    print(f"  strength -> {doc.source}; diff -> {doc.diff}")
    for name, value in describe_params(params).items():
        print(f"  {name} = {value:g}")
    for label, path in paths.items():
        print(f"{label}: {path}")
    if args.montage:
        for label, path in GenerationService.preview_montage(strength, diff, seed, out).items():
            print(f"montage {label}: {path}")
    config.write_resolved(out)
    return 0
