# logging_config.py

"""Logging setup shared by the CLI and the worker processes.

Usage::

    from logging_config import setup_logging
    setup_logging(command="gen")

JSON lines go to stderr and to ``<LOG_DIR>/app.log`` (rotating). Each line
carries the subcommand name. ``DEBUG=true`` switches stderr to a plain
``time | level | logger | message`` layout.
"""

from __future__ import annotations

import logging
import logging.config
import time
from pathlib import Path
from typing import Optional

from config import settings

QUIET_LOGGERS = ("matplotlib", "PIL", "png")


def _formatters(command: Optional[str]) -> dict:
    return {
        "json": {
            "()": "pythonjsonlogger.jsonlogger.JsonFormatter",
            "format": "%(asctime)s %(levelname)s %(name)s %(processName)s %(message)s",
            "datefmt": "%Y-%m-%dT%H:%M:%S",
            "static_fields": {"command": command} if command else {},
        },
        "plain": {
            "format": "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
            "datefmt": "%H:%M:%S",
        },
    }


def setup_logging(level: Optional[str] = None, command: Optional[str] = None) -> Path:
    """Configure the root logger once per process; returns the log file path."""
    log_level = (level or settings.LOG_LEVEL).upper()
    log_dir = Path(settings.LOG_DIR)
    log_dir.mkdir(parents=True, exist_ok=True)
    log_file = log_dir / "app.log"

    logging.config.dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": _formatters(command),
            "handlers": {
                "stderr": {
                    "class": "logging.StreamHandler",
                    "formatter": "plain" if settings.DEBUG else "json",
                    "stream": "ext://sys.stderr",
                },
                "app_file": {
                    "class": "logging.handlers.RotatingFileHandler",
                    "formatter": "json",
                    "filename": str(log_file),
                    "maxBytes": 10 * 1024 * 1024,
                    "backupCount": 3,
                    "encoding": "utf-8",
                },
            },
            "root": {"level": log_level, "handlers": ["stderr", "app_file"]},
        }
    )

    if settings.LOG_USE_UTC:
        for handler in logging.getLogger().handlers:
            if handler.formatter is not None:
                handler.formatter.converter = time.gmtime

    if log_level not in ("DEBUG", "NOTSET"):
        for name in QUIET_LOGGERS:
            logging.getLogger(name).setLevel(logging.WARNING)
    return log_file
