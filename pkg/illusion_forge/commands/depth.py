import argparse

from commands import add_common, add_resolution, add_seeds, job_count, load_config, optional, output_dir
from commands.train import model_overrides
from input_validation import ParamValidator
from services import DepthService


def register(subparsers) -> None:
    parser = subparsers.add_parser("depth", help="Depth-delay study on illusion data and the digits control")
    add_common(parser, jobs=True)
    add_seeds(parser)
    add_resolution(parser)
    parser.add_argument("--depths", help="Comma-separated hidden-layer counts, e.g. 2,4,8")
    parser.add_argument("--threshold", help="Recall threshold in (0, 1)")
    parser.add_argument("--pairs", help="Scene pairs per family for the illusion task")
    parser.add_argument("--epochs", help="Training epochs per run")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    sweep = {
        "depths": optional(args.depths, lambda v: ParamValidator.int_list("--depths", v)),
        "threshold": optional(args.threshold, lambda v: ParamValidator.open_fraction("--threshold", v)),
    }
    dataset = {"pairs_per_family": optional(args.pairs, lambda v: ParamValidator.positive_int("--pairs", v))}
    config = load_config(args, {"sweep": sweep, "dataset": dataset, "model": model_overrides(args)})
    out = output_dir(config, "depth")
    summary = DepthService.run(config, out, jobs=job_count(config))
    for task, entry in summary["tasks"].items():
        line = f"{task}: epochs to recall {summary['threshold']} by depth {entry['mean_epochs_by_depth']}"
        if "spearman_rho" in entry:
            line += f", rho={entry['spearman_rho']:.3f} (p={entry['p_value_positive']:.2g})"
        print(line)
    config.write_resolved(out)
    return 0
