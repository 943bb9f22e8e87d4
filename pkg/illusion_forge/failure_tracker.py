"""Failure tracking for generation, training and analysis jobs.

Failed commands and worker tasks are appended to a dedicated JSON log so a
long sweep can be audited after the fact without grepping the main log.
"""

import json
import logging
from datetime import datetime
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Optional

from config import settings

logger = logging.getLogger(__name__)


class FailureTracker:
    """Centralized failure tracking system."""

    def __init__(self, log_dir: Optional[str] = None):
        self.failures_log_path = Path(log_dir or settings.LOG_DIR) / "failures.log"
        self._handler_ready = False

        self.failure_logger = logging.getLogger("failures")
        self.failure_logger.setLevel(logging.ERROR)
        self.failure_logger.propagate = False

    def _ensure_handler(self) -> None:
        # Deferred so importing the module never touches the filesystem.
        if self._handler_ready:
            return
        self.failures_log_path.parent.mkdir(parents=True, exist_ok=True)
        if not self.failure_logger.handlers:
            failure_handler = TimedRotatingFileHandler(
                filename=str(self.failures_log_path),
                when="midnight",
                interval=1,
                backupCount=30,
                utc=settings.LOG_USE_UTC,
                encoding="utf-8",
            )
            failure_handler.setLevel(logging.ERROR)
            formatter = logging.Formatter(
                '{"timestamp": "%(asctime)s", "level": "%(levelname)s", "message": %(message)s}',
                datefmt="%Y-%m-%d %H:%M:%S",
            )
            failure_handler.setFormatter(formatter)
            self.failure_logger.addHandler(failure_handler)
        self._handler_ready = True

    def track_failure(
        self,
        operation: str,
        error: BaseException,
        additional_context: Optional[Dict[str, Any]] = None,
    ) -> None:
        """Track a failure with detailed context.

        Args:
            operation: The operation that failed (e.g., "gen", "train", "render_pair")
            error: The exception that occurred
            additional_context: Additional context information
        """
        failure_data: Dict[str, Any] = {
            "operation": operation,
            "error_type": type(error).__name__,
            "error_message": str(error),
            "timestamp": datetime.now().isoformat(timespec="seconds"),
        }
        if additional_context:
            failure_data["context"] = additional_context

        try:
            self._ensure_handler()
            self.failure_logger.error(json.dumps(failure_data, default=str))
        except OSError as exc:
            logger.warning(f"Could not write failure log {self.failures_log_path}: {exc}")

        logger.error(f"FAILURE_TRACKED: {operation} failed: {error}")

    def track_generation_failure(
        self,
        family: str,
        pair_index: int,
        error: BaseException,
        master_seed: Optional[int] = None,
    ) -> None:
        """Track a failed pair render inside a dataset build."""
        self.track_failure(
            operation="render_pair",
            error=error,
            additional_context={
                "family": family,
                "pair_index": pair_index,
                "master_seed": master_seed,
            },
        )

    def track_training_failure(
        self,
        mode: str,
        seed: int,
        error: BaseException,
        depth: Optional[int] = None,
    ) -> None:
        """Track a failed training run of a seed or depth sweep."""
        self.track_failure(
            operation="train",
            error=error,
            additional_context={"mode": mode, "seed": seed, "depth": depth},
        )

    def track_command_failure(
        self,
        command: str,
        error: BaseException,
        arguments: Optional[Dict[str, Any]] = None,
    ) -> None:
        """Track a CLI command that exited with status 1."""
        self.track_failure(
            operation=f"cli.{command}",
            error=error,
            additional_context={"arguments": arguments},
        )


# Global failure tracker instance
failure_tracker = FailureTracker()
