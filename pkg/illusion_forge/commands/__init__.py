"""One module per CLI subcommand; each exposes ``register(subparsers)``.

Shared flag handling lives here: every command accepts ``--config`` and
``--out``; flag values override the matching TOML keys and the merged
configuration is written next to the outputs.
"""

import argparse
from pathlib import Path
from typing import Any, Dict, Optional

from config import settings
from input_validation import ParamValidator
from models import RunConfig


def add_common(parser: argparse.ArgumentParser, jobs: bool = False) -> None:
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--out", help="Output directory")
    if jobs:
        parser.add_argument("--jobs", help="Worker processes (default: ILLUSION_FORGE_THREADS)")


def add_seeds(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seeds", help="Seed count (3 = seeds 0,1,2) or comma-separated seeds, e.g. 4,7")


def add_resolution(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--resolution", choices=["224", "32"], help="Stored render size")


def load_config(args: argparse.Namespace, overrides: Optional[Dict[str, Dict[str, Any]]] = None) -> RunConfig:
    overrides = dict(overrides or {})
    run = dict(overrides.get("run", {}))
    run["out"] = getattr(args, "out", None)
    if getattr(args, "jobs", None) is not None:
        run["jobs"] = ParamValidator.positive_int("--jobs", args.jobs)
    if getattr(args, "seeds", None) is not None:
        run["seeds"] = ParamValidator.seed_list("--seeds", args.seeds)
    overrides["run"] = run
    if getattr(args, "resolution", None) is not None:
        dataset = dict(overrides.get("dataset", {}))
        dataset["resolution"] = int(args.resolution)
        overrides["dataset"] = dataset
    return RunConfig.load(getattr(args, "config", None), overrides)


def output_dir(config: RunConfig, command: str) -> Path:
    return Path(config.run.out) if config.run.out else settings.out_path / command


def job_count(config: RunConfig) -> int:
    return config.run.jobs or settings.THREADS


def optional(value: Optional[str], convert):
    return None if value is None else convert(value)
