import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from commands import depth, evaluate, fit, gen, mix, preview, sweep, train
from errors import ForgeError
from failure_tracker import failure_tracker
from logging_config import setup_logging

logger = logging.getLogger(__name__)

COMMANDS = [gen, preview, mix, train, evaluate, sweep, depth, fit]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="illusion-forge",
        description="Geometric-illusion datasets, label-fusion training and accuracy/strength analysis",
    )
    parser.add_argument("--log-level", dest="log_level", help="Override LOG_LEVEL for this run")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for module in COMMANDS:
        module.register(subparsers)
    return parser


def error_line(exc: BaseException) -> str:
    """One-line message for stderr; pydantic errors report the first offending key."""
    if isinstance(exc, ValidationError):
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first.get("loc", ()))
        return f"{location}: {first.get('msg', 'invalid value')}" if location else first.get("msg", "invalid value")
    text = str(exc).strip()
    return text.splitlines()[0] if text else exc.__class__.__name__


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level, args.command)

    try:
        return args.handler(args)
    except (ForgeError, OSError, ValidationError) as exc:
        print(f"error: {error_line(exc)}", file=sys.stderr)
        logger.error(f"Command {args.command} failed: {exc}")
        failure_tracker.track_command_failure(
            args.command, exc, {k: v for k, v in vars(args).items() if k != "handler"}
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
