"""
Frontier Storage
Frontier and plot-data CSV files (pandas) and the grid config parser.

Floats are written with repr so that reading a file back gives the same
values and re-running a grid gives a byte-identical file.
"""
import itertools
import logging
import os
import re
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, ValidationError

from app.core.exceptions import FrontierParseError, GridConfigError, OutputPathError
from app.services.frontier import (
    FRONTIER_COLUMNS,
    PLOT_COLUMNS,
    FrontierRecord,
    HyperParams,
    PlotRow,
    sort_records,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Value parser per grid key, applied before HyperParams validation
GRID_KEYS = {
    "signature": str,
    "arch": str,
    "q": float,
    "eta": float,
    "sigma": float,
    "clip_c": float,
    "n_rounds": int,
    "local_steps": int,
}


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _to_frame(rows: Sequence[BaseModel], columns: List[str]) -> pd.DataFrame:
    return pd.DataFrame(
        [[_format_cell(getattr(row, column)) for column in columns] for row in rows],
        columns=columns,
        dtype=str,
    )


def _parser_error_line(exc: pd.errors.ParserError) -> Optional[int]:
    """1-based file line named by a pandas tokenizer error"""
    match = re.search(r"line (\d+)", str(exc))
    return int(match.group(1)) if match else None


def ensure_writable(path: PathLike) -> Path:
    """
    Fail early when an output file cannot be created

    Args:
        path: Output file

    Returns:
        The path, with its parent directory created
    """
    path = Path(path)
    if path.is_dir():
        raise OutputPathError(f"{path} is a directory")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputPathError(f"Cannot create {path.parent}: {exc}") from exc
    if not os.access(path.parent, os.W_OK) or (path.exists() and not os.access(path, os.W_OK)):
        raise OutputPathError(f"{path} is not writable")
    return path


def write_frontier(records: Sequence[FrontierRecord], path: PathLike) -> Path:
    """Write records sorted by (delta, epsilon) with the frontier column order"""
    path = ensure_writable(path)
    _to_frame(sort_records(records), FRONTIER_COLUMNS).to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(records)} frontier record(s) to {path}")
    return path


def read_frontier(path: PathLike) -> List[FrontierRecord]:
    """
    Parse a frontier CSV

    Raises:
        FrontierParseError: bad header or row, naming the 1-based file line
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise FrontierParseError("empty frontier file", line=1)
    except pd.errors.ParserError as exc:
        message = "row has more fields than the header" if "Expected" in str(exc) else str(exc).strip()
        raise FrontierParseError(message, line=_parser_error_line(exc)) from exc

    if list(frame.columns) != FRONTIER_COLUMNS:
        raise FrontierParseError(f"expected columns {','.join(FRONTIER_COLUMNS)}", line=1)

    records = []
    for index, row in frame.iterrows():
        line = int(index) + 2
        if row.isna().any():
            raise FrontierParseError("row has missing fields", line=line)
        try:
            records.append(FrontierRecord.model_validate(row.to_dict()))
        except ValidationError as exc:
            fields = ", ".join(str(error["loc"][0]) for error in exc.errors() if error["loc"])
            raise FrontierParseError(f"invalid value in {fields or 'row'}", line=line) from exc
    return records


def write_plot_data(rows: Sequence[PlotRow], path: PathLike) -> Path:
    path = ensure_writable(path)
    _to_frame(rows, PLOT_COLUMNS).to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(rows)} plot row(s) to {path}")
    return path


def read_plot_data(path: PathLike) -> pd.DataFrame:
    """Plot data as a typed frame; infeasible cells are NaN"""
    return pd.read_csv(path)


def parse_grid_config(text: str) -> List[HyperParams]:
    """
    Parse a grid config into the Cartesian product of its value lists

    Format: one ``key = v1, v2, ...`` line per hyperparameter, ``#`` starts a
    comment. Every key of GRID_KEYS is required; points are generated in
    GRID_KEYS order, the last key varying fastest.
    """
    values: Dict[str, list] = {}
    for line, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise GridConfigError(f"expected 'key = values', found '{content}'", line=line)
        key, _, listed = (part.strip() for part in content.partition("="))
        if key not in GRID_KEYS:
            raise GridConfigError(f"unknown key '{key}'", line=line)
        if key in values:
            raise GridConfigError(f"duplicate key '{key}'", line=line)
        items = [item.strip() for item in listed.split(",")]
        if not items or any(not item for item in items):
            raise GridConfigError(f"empty value in '{key}'", line=line)
        try:
            values[key] = [GRID_KEYS[key](item) for item in items]
        except ValueError:
            raise GridConfigError(f"invalid {GRID_KEYS[key].__name__} value for '{key}'", line=line)

    missing = [key for key in GRID_KEYS if key not in values]
    if missing:
        raise GridConfigError(f"missing key(s): {', '.join(missing)}")

    grid = []
    for combination in itertools.product(*(values[key] for key in GRID_KEYS)):
        try:
            grid.append(HyperParams(**dict(zip(GRID_KEYS, combination))))
        except ValidationError as exc:
            raise GridConfigError(f"invalid grid point {dict(zip(GRID_KEYS, combination))}: {exc}") from exc
    return grid


def load_grid_config(path: PathLike) -> List[HyperParams]:
    return parse_grid_config(Path(path).read_text())
