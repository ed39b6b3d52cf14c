import json
import logging
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

import pandas as pd
import typer

from hybrid_bell.errors import ConfigurationError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


def rows_to_frame(rows: Iterable, columns: list[str]) -> pd.DataFrame:
    """Builds a frame with a fixed column order from dataclass rows or dicts."""
    records = [asdict(row) if is_dataclass(row) else dict(row) for row in rows]
    return pd.DataFrame(records, columns=columns)


def render(frame: pd.DataFrame, fmt: OutputFormat) -> str:
    """
    CSV with 17 significant digits, or JSON as an array of records.

    JSON floats use Python's shortest round-trip representation, which is
    lossless as well.
    """
    if fmt is OutputFormat.CSV:
        return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    if fmt is OutputFormat.JSON:
        return json.dumps(frame.to_dict(orient="records"), indent=2) + "\n"
    raise ConfigurationError(f"unknown output format {fmt!r}")


def write_table(
    frame: pd.DataFrame, out: Optional[Path], fmt: OutputFormat = OutputFormat.CSV
) -> None:
    """Writes to `out`, or to stdout when no path is given."""
    text = render(frame, OutputFormat(fmt))
    if out is None:
        typer.echo(text, nl=False)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    logger.info(f"Exported {len(frame)} rows to {out}")
