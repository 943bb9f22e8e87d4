import argparse
from pathlib import Path

from commands import add_common, load_config, optional, output_dir
from errors import InvalidParams
from input_validation import ParamValidator
from services import AnalysisService


def register(subparsers) -> None:
    parser = subparsers.add_parser("fit", help="Polynomial fit of accuracy against strength or perception difference")
    add_common(parser)
    parser.add_argument("--points", help="CSV of points (sweep_points.csv or columns named after --x and --y)")
    parser.add_argument("--x", choices=["strength", "perception_diff"], help="Independent variable")
    parser.add_argument("--degree", choices=["1", "2"], help="Polynomial degree")
    parser.add_argument("--permutations", help="Permutations for the p-value")
    parser.add_argument("--seed", help="Permutation seed")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    fit = {
        "points": args.points,
        "x": args.x,
        "degree": optional(args.degree, int),
        "permutations": optional(args.permutations, lambda v: ParamValidator.positive_int("--permutations", v)),
        "seed": ParamValidator.optional_seed("--seed", args.seed),
    }
    config = load_config(args, {"fit": fit})
    if not config.fit.points:
        raise InvalidParams("--points: a points CSV is required")

    out = output_dir(config, "fit")
    result = AnalysisService.fit_points(config, Path(config.fit.points), out)
    print("coefficients (ascending): " + ", ".join(f"{c:.6g}" for c in result.coefficients))
    print(f"R2: {result.r_squared:.4f}")
    if result.pearson_r is not None:
        print(f"pearson r: {result.pearson_r:.4f}")
    if result.p_value is not None:
        print(f"p-value: {result.p_value:.3g}")
    if result.vertex is not None:
        print(f"vertex: {result.vertex:.4f}")
    config.write_resolved(out)
    return 0
