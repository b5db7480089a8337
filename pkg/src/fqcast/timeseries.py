"""Panel ingestion, stationarity transforms and rolling calibration windows."""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "IngestError",
    "Panel",
    "WindowSpec",
    "demean",
    "load_panel",
    "rolling_windows",
    "save_panel",
    "to_stationary",
]

TRANSFORMS = ("log_returns", "simple_returns", "first_difference")


class IngestError(ValueError):
    """Raised when a CSV panel cannot be ingested."""


@dataclass(frozen=True)
class Panel:
    """
    Dated T x n matrix of observations.

    Parameters
    ----------
    dates : sequence
        Strictly increasing date labels, one per row.
    names : sequence of str
        Column identifiers.
    values : ndarray
        T by n array of finite observations.
    dropped : int
        Number of input rows removed during ingest because of missing cells.
    """

    dates: tuple
    names: tuple[str, ...]
    values: np.ndarray
    dropped: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("values must be two-dimensional")
        t, n = values.shape
        if t < 1 or n < 1:
            raise ValueError("panel needs at least one row and one column")
        dates = tuple(self.dates)
        names = tuple(str(c) for c in self.names)
        if len(dates) != t:
            raise ValueError(f"{len(dates)} dates for {t} rows")
        if len(names) != n:
            raise ValueError(f"{len(names)} names for {n} columns")
        for a, b in zip(dates[:-1], dates[1:]):
            if not a < b:
                raise ValueError(f"dates must be strictly increasing ({a!r} >= {b!r})")
        values.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def rows(self, start: int, stop: int) -> Panel:
        """Sub-panel of rows ``start:stop``."""
        return Panel(self.dates[start:stop], self.names, self.values[start:stop])

    def select(self, names: Sequence[str]) -> Panel:
        idx = [self.names.index(c) for c in names]
        return Panel(self.dates, tuple(names), self.values[:, idx])


@dataclass(frozen=True)
class WindowSpec:
    length: int
    step: int = 1

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError("window length must be positive")
        if self.step < 1:
            raise ValueError("window step must be positive")


def parse_date(text: str, fmt: str | None = None) -> dt.date:
    text = text.strip()
    if fmt is None:
        return dt.date.fromisoformat(text)
    return dt.datetime.strptime(text, fmt).date()


def load_panel(
    path: str | Path,
    date_column: str | None = None,
    date_format: str | None = None,
    columns: Sequence[str] | None = None,
) -> Panel:
    """
    Read a CSV file with a header row, one date column and numeric columns.

    Rows containing any blank or ``NA``/``NaN`` cell are dropped and counted in
    ``Panel.dropped``. The result is sorted by date.

    Parameters
    ----------
    path : str or Path
        CSV file.
    date_column : str, optional
        Name of the date column. Defaults to the first column.
    date_format : str, optional
        ``strptime`` format. ISO-8601 (``YYYY-MM-DD``) when omitted.
    columns : sequence of str, optional
        Subset of numeric columns to keep, in order.

    Raises
    ------
    IngestError
        On malformed rows, unparseable dates, duplicate dates or non-numeric
        cells. The message names the offending row and column.
    """
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if len(header) < 2:
            raise IngestError(f"{path}: need a date column and at least one numeric column")
        date_col = header[0] if date_column is None else date_column
        if date_col not in header:
            raise IngestError(f"{path}: date column {date_col!r} not in header")
        di = header.index(date_col)
        numeric = [h for i, h in enumerate(header) if i != di]
        keep = numeric if columns is None else list(columns)
        missing = [c for c in keep if c not in numeric]
        if missing:
            raise IngestError(f"{path}: columns not found: {missing}")
        idx = [header.index(c) for c in keep]

        rows: list[tuple[dt.date, list[float]]] = []
        dropped = 0
        seen: dict[dt.date, int] = {}
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise IngestError(
                    f"{path}: row {lineno} has {len(record)} fields, expected {len(header)}"
                )
            try:
                date = parse_date(record[di], date_format)
            except ValueError:
                raise IngestError(
                    f"{path}: row {lineno}, column {date_col!r}: unparseable date {record[di]!r}"
                ) from None
            if date in seen:
                raise IngestError(
                    f"{path}: row {lineno}: duplicate date {date.isoformat()} "
                    f"(first seen on row {seen[date]})"
                )
            seen[date] = lineno
            vals: list[float] = []
            incomplete = False
            for j in idx:
                cell = record[j].strip()
                if cell == "" or cell.lower() in ("na", "nan", "null"):
                    incomplete = True
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise IngestError(
                        f"{path}: row {lineno}, column {header[j]!r}: non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    incomplete = True
                vals.append(v)
            if incomplete:
                dropped += 1
                continue
            rows.append((date, vals))
    if not rows:
        raise IngestError(f"{path}: no complete rows")
    rows.sort(key=lambda r: r[0])
    return Panel(
        tuple(r[0] for r in rows),
        tuple(keep),
        np.array([r[1] for r in rows], dtype=float),
        dropped=dropped,
    )


def save_panel(panel: Panel, path: str | Path, date_column: str = "date") -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([date_column, *panel.names])
        for d, row in zip(panel.dates, panel.values):
            label = d.isoformat() if hasattr(d, "isoformat") else str(d)
            writer.writerow([label, *(repr(float(v)) for v in row)])


def to_stationary(
    panel: Panel,
    method: str | dict[str, str] = "log_returns",
    multiplier: float | dict[str, float] = 1.0,
) -> Panel:
    """
    Transform price or level series into returns or changes.

    ``method`` may be a single transform name or a per-column mapping, so that
    FX/commodity prices get returns while interest-rate levels get first
    differences. Row ``t`` of the output is dated at ``t + 1`` of the input.
    ``multiplier`` rescales the output (e.g. 100 to express rate changes in
    basis points when levels are in percent).
    """
    if isinstance(method, str):
        methods = {name: method for name in panel.names}
    else:
        methods = dict(method)
        unknown = set(methods) - set(panel.names)
        if unknown:
            raise ValueError(f"transform given for unknown columns {sorted(unknown)}")
        for name in panel.names:
            methods.setdefault(name, "log_returns")
    if isinstance(multiplier, dict):
        mult = np.array([float(multiplier.get(c, 1.0)) for c in panel.names])
    else:
        mult = np.full(panel.n, float(multiplier))
    if panel.T < 2:
        raise ValueError("need at least two rows to difference")

    v = panel.values
    out = np.empty((panel.T - 1, panel.n))
    for j, name in enumerate(panel.names):
        kind = methods[name]
        col = v[:, j]
        if kind == "log_returns":
            if np.any(col <= 0):
                bad = int(np.argmax(col <= 0))
                raise ValueError(
                    f"log_returns needs positive prices; column {name!r} row {bad} is {col[bad]}"
                )
            out[:, j] = np.log(col[1:] / col[:-1])
        elif kind == "simple_returns":
            if np.any(col[:-1] == 0):
                raise ValueError(f"simple_returns undefined for zero price in {name!r}")
            out[:, j] = col[1:] / col[:-1] - 1.0
        elif kind == "first_difference":
            out[:, j] = col[1:] - col[:-1]
        else:
            raise ValueError(f"unknown transform {kind!r}; expected one of {TRANSFORMS}")
    return Panel(panel.dates[1:], panel.names, out * mult)


def rolling_windows(panel: Panel, spec: WindowSpec) -> Iterator[tuple[Panel, int]]:
    """
    Yield ``(window, target_index)`` pairs.

    Window ``k`` covers rows ``[k*step, k*step + length)`` and the target is
    row ``k*step + length``; iteration stops when the target passes the end.
    """
    if spec.length >= panel.T:
        raise ValueError(
            f"window length {spec.length} leaves no target row in a panel of {panel.T} rows"
        )
    start = 0
    while start + spec.length < panel.T:
        yield panel.rows(start, start + spec.length), start + spec.length
        start += spec.step


def demean(window: Panel) -> tuple[Panel, np.ndarray]:
    means = window.values.mean(axis=0)
    centered = window.values - means
    # second pass removes the O(eps) residual mean left by the first
    centered -= centered.mean(axis=0)
    return Panel(window.dates, window.names, centered), means
