"""
Layered command configuration: flags, then a key=value file, then defaults.

The file uses the long flag names with dashes replaced by underscores, e.g.

    eta_a=0.7
    gamma1=0,0.25
"""

import logging
import math
from pathlib import Path
from typing import Any, Callable, Optional

from dotenv import dotenv_values

from hybrid_bell.errors import ConfigurationError

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "HYBRID_BELL_CONFIG"

KNOWN_KEYS = frozenset(
    {
        "state",
        "r",
        "r_min",
        "r_max",
        "r_step",
        "alpha0",
        "alpha0_min",
        "alpha0_max",
        "alpha0_step",
        "eta_a",
        "eta_b",
        "phi1",
        "phi2",
        "gamma1",
        "gamma2",
        "seed",
        "out",
        "format",
        "count",
        "starts",
        "optimizer",
        "x_min",
        "x_max",
        "x_points",
        "table",
        "workers",
        "grid_points",
        "refine",
        "setting_i",
        "setting_j",
        "dichotomize",
    }
)


def parse_complex(text: str) -> complex:
    """'re,im' or a bare real part."""
    parts = [p.strip() for p in str(text).split(",")]
    try:
        if len(parts) == 1:
            value = complex(float(parts[0]), 0.0)
        elif len(parts) == 2:
            value = complex(float(parts[0]), float(parts[1]))
        else:
            raise ValueError(text)
    except ValueError:
        raise ConfigurationError(f"expected a complex number as 're,im', got {text!r}")
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ConfigurationError(f"complex value must be finite, got {text!r}")
    return value


def parse_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigurationError(f"expected a number, got {text!r}")
    if not math.isfinite(value):
        raise ConfigurationError(f"expected a finite number, got {text!r}")
    return value


def parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigurationError(f"expected an integer, got {text!r}")


def parse_bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"expected true or false, got {text!r}")


def load_config_file(path: Optional[Path]) -> dict[str, str]:
    """Reads a key=value file; None yields an empty layer."""
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"configuration file not found: {path}")
    values = {k.strip().lower(): v for k, v in dotenv_values(path).items()}
    unknown = sorted(set(values) - KNOWN_KEYS)
    if unknown:
        raise ConfigurationError(f"{path}: unknown configuration keys {unknown}")
    missing = sorted(k for k, v in values.items() if v is None or v == "")
    if missing:
        raise ConfigurationError(f"{path}: keys without a value {missing}")
    logger.debug(f"Loaded {len(values)} configuration values from {path}")
    return values


class Layered:
    """Resolves one value per key with precedence flag > file > default."""

    def __init__(self, file_values: dict[str, str]):
        self.file_values = file_values

    def get(
        self,
        key: str,
        flag: Any,
        default: Any,
        parse: Callable[[str], Any] = str,
    ) -> Any:
        if key not in KNOWN_KEYS:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        if flag is not None:
            return self._parse(key, parse, flag) if isinstance(flag, str) else flag
        if key in self.file_values:
            return self._parse(key, parse, self.file_values[key])
        return default

    @staticmethod
    def _parse(key: str, parse: Callable[[str], Any], text: str) -> Any:
        try:
            return parse(text)
        except ConfigurationError:
            raise
        except ValueError:
            raise ConfigurationError(f"invalid value {text!r} for {key}")
