"""
Dataset readers and writers.

Writers emit CSV (with a '#'-comment header carrying the toolkit version
and config hash) or JSON ({"meta": ..., "records": [...]}). Readers load
tabulated responses and tomography problems with numpy.genfromtxt.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ParameterError

logger = logging.getLogger(__name__)

TABULATED_COLUMNS = ("q_tilde", "theta_q", "value")
# Superconductor response maps name their O / omega_tilde column after the conductivity
TABULATED_ALIASES = {"value": "re_sigma_over_sigma_n"}
GEOMETRY_COLUMNS = ("D", "z")
MEASUREMENT_COLUMNS = ("channel", "value")


def _format(value: Any, precision: int) -> Any:
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    return f"{float(value):.{precision}g}"


def _json_value(value: Any, precision: int) -> Any:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if not math.isfinite(number):
            return None
        return float(f"{number:.{precision}g}")
    return value


def render_dataset(
    records: Sequence[Mapping[str, Any]],
    columns: Sequence[str],
    meta: Mapping[str, Any],
    fmt: str = "csv",
    precision: int = 9,
) -> str:
    """Serialize records deterministically; identical inputs give identical text."""
    if fmt == "json":
        payload = {
            "meta": dict(meta),
            "records": [{c: _json_value(r[c], precision) for c in columns} for r in records],
        }
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"
    if fmt != "csv":
        raise ParameterError(f"unknown output format '{fmt}'")

    buffer = io.StringIO()
    for key, value in meta.items():
        buffer.write(f"# {key}: {value}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for record in records:
        writer.writerow([_format(record[c], precision) for c in columns])
    return buffer.getvalue()


def write_dataset(
    records: Sequence[Mapping[str, Any]],
    columns: Sequence[str],
    meta: Mapping[str, Any],
    path: Optional[str] = None,
    fmt: str = "csv",
    precision: int = 9,
) -> None:
    """Write to path (parents created) or to stdout when path is None."""
    text = render_dataset(records, columns, meta, fmt, precision)
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    logger.info("wrote %d records to %s", len(records), target)


def _read_table(
    path: str | Path, columns: Sequence[str], aliases: Optional[Mapping[str, str]] = None
) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"data file not found at {path}")
    # genfromtxt would read a leading comment line as the header
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if len(lines) < 2:
        raise ConfigError(f"{path} has no data rows")
    data = np.genfromtxt(io.StringIO("\n".join(lines)), delimiter=",", names=True, dtype=float, encoding="utf-8")
    names = data.dtype.names or ()
    source = {c: c for c in columns}
    for column, alias in (aliases or {}).items():
        if column not in names and alias in names:
            source[column] = alias
    missing = [c for c in columns if source[c] not in names]
    if missing:
        raise ConfigError(f"{path} lacks columns {', '.join(missing)}; expected header {','.join(columns)}")
    table = {c: np.atleast_1d(data[source[c]]).astype(float) for c in columns}
    if any(not np.all(np.isfinite(v)) for v in table.values()):
        raise ConfigError(f"{path} contains non-numeric entries")
    return table


def load_tabulated_csv(path: str | Path) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Read a long-format `q_tilde,theta_q,value` table into grid form. A superconductor
    response map, headed `re_sigma_over_sigma_n`, loads as is.

    Every (q_tilde, theta_q) pair of the outer product must appear exactly once.
    """
    table = _read_table(path, TABULATED_COLUMNS, TABULATED_ALIASES)
    q_values = np.unique(table["q_tilde"])
    theta_values = np.unique(table["theta_q"])
    if q_values.size * theta_values.size != table["value"].size:
        raise ConfigError(f"{path} is not a complete (q_tilde, theta_q) grid")
    grid = np.full((q_values.size, theta_values.size), np.nan)
    rows = np.searchsorted(q_values, table["q_tilde"])
    cols = np.searchsorted(theta_values, table["theta_q"])
    grid[rows, cols] = table["value"]
    if np.any(np.isnan(grid)):
        raise ConfigError(f"{path} repeats a (q_tilde, theta_q) node")
    logger.debug("tabulated response %s: %d q x %d theta", path, q_values.size, theta_values.size)
    return q_values, theta_values, grid


def load_geometries(path: str | Path) -> List[Tuple[float, float]]:
    table = _read_table(path, GEOMETRY_COLUMNS)
    return list(zip(table["D"].tolist(), table["z"].tolist()))


def load_measurements(path: str | Path, channel: int) -> np.ndarray:
    """Measured Phi_c^2n values for one channel index, in file order."""
    table = _read_table(path, MEASUREMENT_COLUMNS)
    mask = table["channel"].astype(int) == int(channel)
    if not np.any(mask):
        raise ConfigError(f"{path} holds no measurements for channel {channel}")
    return table["value"][mask]
