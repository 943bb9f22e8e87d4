import logging
import math
import re
from typing import List, Optional, Sequence, Tuple

from errors import InvalidParams

logger = logging.getLogger(__name__)


class ParamValidator:
    """Validation of user-supplied command-line values.

    Every failure raises ``InvalidParams`` whose message starts with the flag
    name, so the CLI can print it unchanged.
    """

    FLOAT_PATTERN = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")

    @staticmethod
    def parse_float(flag: str, value: str | float) -> float:
        if isinstance(value, (int, float)):
            number = float(value)
        else:
            text = str(value).strip()
            if not ParamValidator.FLOAT_PATTERN.match(text):
                raise InvalidParams(f"{flag}: expected a number, got {value!r}")
            number = float(text)
        if not math.isfinite(number):
            raise InvalidParams(f"{flag}: value must be finite, got {value!r}")
        return number

    @staticmethod
    def unit_interval(flag: str, value: str | float) -> float:
        """Closed interval [0, 1]."""
        number = ParamValidator.parse_float(flag, value)
        if not 0.0 <= number <= 1.0:
            logger.warning(f"Rejected {flag}={number}: outside [0, 1]")
            raise InvalidParams(f"{flag}: must lie in [0, 1], got {number}")
        return number

    @staticmethod
    def open_fraction(flag: str, value: str | float) -> float:
        """Open interval (0, 1)."""
        number = ParamValidator.parse_float(flag, value)
        if not 0.0 < number < 1.0:
            raise InvalidParams(f"{flag}: must lie strictly between 0 and 1, got {number}")
        return number

    @staticmethod
    def positive_int(flag: str, value: str | int) -> int:
        try:
            number = int(value)
        except (TypeError, ValueError):
            raise InvalidParams(f"{flag}: expected an integer, got {value!r}")
        if number <= 0:
            raise InvalidParams(f"{flag}: must be positive, got {number}")
        return number

    @staticmethod
    def float_list(flag: str, text: str) -> List[float]:
        """Comma-separated floats, e.g. ``0.1,0.2,0.3``."""
        parts = [p for p in (piece.strip() for piece in str(text).split(",")) if p]
        if not parts:
            raise InvalidParams(f"{flag}: expected a comma-separated list of numbers")
        return [ParamValidator.parse_float(flag, p) for p in parts]

    @staticmethod
    def int_list(flag: str, text: str) -> List[int]:
        parts = [p for p in (piece.strip() for piece in str(text).split(",")) if p]
        if not parts:
            raise InvalidParams(f"{flag}: expected a comma-separated list of integers")
        try:
            return [int(p) for p in parts]
        except ValueError:
            raise InvalidParams(f"{flag}: expected integers, got {text!r}")

    @staticmethod
    def unit_range(flag: str, text: str) -> Tuple[float, float]:
        """Either a single value ``0.4`` (fixed) or ``lo,hi`` inside [0, 1]."""
        values = [ParamValidator.unit_interval(flag, v) for v in ParamValidator.float_list(flag, text)]
        if len(values) == 1:
            return values[0], values[0]
        if len(values) != 2 or values[0] > values[1]:
            raise InvalidParams(f"{flag}: expected 'value' or 'low,high' with low <= high, got {text!r}")
        return values[0], values[1]

    @staticmethod
    def choice(flag: str, value: str, allowed: Sequence[str]) -> str:
        normalized = str(value).strip().lower()
        if normalized not in allowed:
            raise InvalidParams(f"{flag}: expected one of {', '.join(allowed)}, got {value!r}")
        return normalized

    @staticmethod
    def optional_seed(flag: str, value: Optional[str | int]) -> Optional[int]:
        if value is None:
            return None
        try:
            seed = int(value)
        except (TypeError, ValueError):
            raise InvalidParams(f"{flag}: expected an integer seed, got {value!r}")
        if seed < 0 or seed >= 2**64:
            raise InvalidParams(f"{flag}: seed must be a 64-bit unsigned integer, got {seed}")
        return seed

    @staticmethod
    def seed_list(flag: str, text: str) -> List[int]:
        """``3`` means seeds 0, 1, 2; a comma list (``4,7`` or ``5,``) names the seeds."""
        if "," not in str(text):
            count = ParamValidator.positive_int(flag, text)
            return list(range(count))
        seeds = ParamValidator.int_list(flag, text)
        for seed in seeds:
            ParamValidator.optional_seed(flag, seed)
        return seeds
