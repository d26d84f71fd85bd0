"""
SQLite helpers for the conductivity-map cache.

This module centralizes:
- Opening a connection with foreign key enforcement.
- Applying the schema from schema.sql.
- Explicit bulk inserts that never overwrite an existing cell.
- ConductivityCache, the write-once store behind conductivity_map.

The cache is optional: a path of None keeps everything in an in-memory
database for the lifetime of the cache object.
"""

from __future__ import annotations

import logging
import sqlite3
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterable, Iterator, Optional, Sequence, Tuple

from .config import CACHE_CONFIG

logger = logging.getLogger(__name__)

BASE_DIR = Path(__file__).resolve().parent.parent.parent
SCHEMA_PATH = BASE_DIR / "schema.sql"

MEMORY = ":memory:"

# Keys are rounded to this many significant digits before lookup.
KEY_DIGITS = 12


def _ensure_parent_dir(path: Path) -> None:
    """Ensure the parent directory for the SQLite file exists."""
    if not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)


def get_connection(db_path: str | None = None) -> sqlite3.Connection:
    """
    Create a SQLite connection with foreign keys enabled.

    Defaults to the configured cache path; ":memory:" opens a private
    in-memory database.
    """
    if db_path is None:
        db_path = CACHE_CONFIG.path or MEMORY

    if db_path != MEMORY:
        _ensure_parent_dir(Path(db_path))

    conn = sqlite3.connect(str(db_path))
    conn.row_factory = sqlite3.Row

    # Off by default in SQLite.
    conn.execute("PRAGMA foreign_keys = ON;")
    return conn


def apply_schema(conn: sqlite3.Connection) -> None:
    if not SCHEMA_PATH.exists():
        raise FileNotFoundError(f"Schema file not found at {SCHEMA_PATH}")

    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        conn.executescript(f.read())

    conn.commit()


def bulk_insert(
    conn: sqlite3.Connection,
    table: str,
    columns: Sequence[str],
    rows: Iterable[Sequence[object]],
) -> int:
    """
    Insert rows into a table, skipping rows whose primary key already exists.

    Returns the number of rows actually written.
    """
    rows = list(rows)
    if not rows:
        return 0

    cols_sql = ", ".join(columns)
    placeholders = ", ".join(["?"] * len(columns))
    sql = f"INSERT OR IGNORE INTO {table} ({cols_sql}) VALUES ({placeholders})"

    before = conn.total_changes
    conn.executemany(sql, rows)
    conn.commit()
    return conn.total_changes - before


@contextmanager
def db_session(db_path: str | None = None) -> Iterator[sqlite3.Connection]:
    """
    Context manager that yields a connection with the schema applied.

    Usage:
        with db_session() as conn:
            ...
    """
    conn = get_connection(db_path)
    try:
        apply_schema(conn)
        yield conn
    finally:
        conn.close()


def round_key(value: float, digits: int = KEY_DIGITS) -> float:
    """Round to a fixed number of significant digits so float keys are stable."""
    value = float(value)
    if value == 0.0:
        return 0.0
    return float(f"{value:.{digits - 1}e}")


CellKey = Tuple[float, float, float]


class ConductivityCache:
    """
    Write-once store of Re sigma_T / sigma_n cells keyed by
    (params_key, omega_tilde, q_tilde, theta_q).
    """

    def __init__(self, path: Optional[str] = None) -> None:
        self.path = path or MEMORY
        self._conn = get_connection(self.path)
        apply_schema(self._conn)

    def close(self) -> None:
        self._conn.close()

    def __enter__(self) -> "ConductivityCache":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    def register(self, params_key: str, description: str) -> None:
        bulk_insert(self._conn, "parameter_sets", ("params_key", "description"), [(params_key, description)])

    def lookup(self, params_key: str, omega_tilde: float, q_tilde: float, theta_q: float) -> Optional[float]:
        row = self._conn.execute(
            "SELECT value FROM conductivity_cells "
            "WHERE params_key = ? AND omega_tilde = ? AND q_tilde = ? AND theta_q = ?",
            (params_key, round_key(omega_tilde), round_key(q_tilde), round_key(theta_q)),
        ).fetchone()
        return None if row is None else float(row["value"])

    def lookup_many(self, params_key: str, omega_tilde: float, cells: Iterable[Tuple[float, float]]) -> Dict[Tuple[float, float], float]:
        """Cached values for (q_tilde, theta_q) cells; misses are simply absent."""
        found: Dict[Tuple[float, float], float] = {}
        for q, theta in cells:
            value = self.lookup(params_key, omega_tilde, q, theta)
            if value is not None:
                found[(q, theta)] = value
        logger.debug("cache hits: %d for params %s", len(found), params_key)
        return found

    def store(self, params_key: str, omega_tilde: float, q_tilde: float, theta_q: float, value: float) -> bool:
        """Store one cell; returns False if the cell already existed."""
        return self.store_many(params_key, omega_tilde, [(q_tilde, theta_q, value)]) == 1

    def store_many(self, params_key: str, omega_tilde: float, cells: Iterable[Tuple[float, float, float]]) -> int:
        self.register(params_key, params_key)
        omega_key = round_key(omega_tilde)
        rows = [(params_key, omega_key, round_key(q), round_key(theta), float(value)) for q, theta, value in cells]
        return bulk_insert(
            self._conn,
            "conductivity_cells",
            ("params_key", "omega_tilde", "q_tilde", "theta_q", "value"),
            rows,
        )
