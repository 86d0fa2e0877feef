"""Boundary-condition series: inflow, meteorology, withdrawal.

Files are daily CSVs. A missing day is an absent row; a missing value is an
empty field. ``load_series`` keeps gaps (as NaN on the day grid) so callers
can see them; ``fill_gaps`` produces the gap-free series the engine samples.
Sampling is piecewise linear in real time, with wind direction interpolated
along the shortest arc of the circle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    GapTooLong,
    InsufficientData,
    OutOfHorizon,
    ParseError,
    RangeViolation,
)

INFLOW_HEADER = ["day", "q_in_m3s", "t_in_c", "do_in_mgl", "bod_in_mgl"]
MET_HEADER = ["day", "t_air_c", "t_dew_c", "wind_ms", "wind_dir_deg", "cloud_frac"]
WITHDRAWAL_HEADER = ["day", "q_out_m3s", "intake_elev_m"]

MAX_GAP_DAYS = 30  # gaps this long or longer cannot be interpolated


@dataclass(frozen=True)
class InflowRecord:
    day: float
    q_in_m3s: float
    t_in_c: float
    do_in_mgl: float
    bod_in_mgl: float


@dataclass(frozen=True)
class MetRecord:
    day: float
    t_air_c: float
    t_dew_c: float
    wind_ms: float
    wind_dir_deg: float
    cloud_frac: float


@dataclass(frozen=True)
class WithdrawalRecord:
    day: float
    q_out_m3s: float
    intake_elev_m: float


@dataclass(frozen=True)
class SeriesTable:
    """One daily series on its integer-day grid.

    ``day`` holds every day in [first, last]; ``values[field]`` holds NaN
    where the file had no value; ``filled`` marks rows touched by
    ``fill_gaps``.
    """

    name: str
    fields: tuple[str, ...]
    day: np.ndarray
    values: dict[str, np.ndarray]
    filled: np.ndarray

    @property
    def first_day(self) -> float:
        return float(self.day[0])

    @property
    def last_day(self) -> float:
        return float(self.day[-1])

    @property
    def n_records(self) -> int:
        """Rows with at least one value present (what the file provided)."""
        present = np.zeros(len(self.day), dtype=bool)
        for field in self.fields:
            present |= ~np.isnan(self.values[field])
        return int(present.sum())

    def has_gaps(self) -> bool:
        return any(np.isnan(self.values[f]).any() for f in self.fields)

    def trapezoid(self, field: str, t0: float, t1: float) -> float:
        """Exact integral of the piecewise-linear series over [t0, t1] days."""
        v = self.values[field]
        if np.isnan(v).any():
            raise ParseError(f"{self.name}.{field}: trapezoid needs a gap-free series")
        ts = np.linspace(t0, t1, 2)
        grid = np.unique(np.concatenate([self.day[(self.day > t0) & (self.day < t1)], ts]))
        vals = np.interp(grid, self.day, v)
        return float(np.trapezoid(vals, grid))


@dataclass(frozen=True)
class ForcingSeries:
    """Inflow + met + withdrawal tables sharing a usable horizon."""

    inflow: SeriesTable
    met: SeriesTable
    withdrawal: SeriesTable

    @property
    def horizon(self) -> tuple[float, float]:
        """(first, last) day usable by every table."""
        first = max(self.inflow.first_day, self.met.first_day, self.withdrawal.first_day)
        last = min(self.inflow.last_day, self.met.last_day, self.withdrawal.last_day)
        return first, last

    def tables(self) -> tuple[SeriesTable, SeriesTable, SeriesTable]:
        return self.inflow, self.met, self.withdrawal


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

# field -> (lo, hi, lo_inclusive, hi_inclusive); None = unbounded
_RANGES: dict[str, tuple[float | None, float | None, bool, bool]] = {
    "q_in_m3s": (0.0, None, True, True),
    "t_in_c": (-2.0, 45.0, True, True),
    "do_in_mgl": (0.0, None, True, True),
    "bod_in_mgl": (0.0, None, True, True),
    "t_air_c": (-50.0, 60.0, True, True),
    "t_dew_c": (-50.0, 60.0, True, True),
    "wind_ms": (0.0, None, True, True),
    "wind_dir_deg": (0.0, 360.0, True, False),
    "cloud_frac": (0.0, 1.0, True, True),
    "q_out_m3s": (0.0, None, True, True),
    "intake_elev_m": (None, None, True, True),
}


def _check_range(name: str, day: float, field: str, value: float) -> None:
    lo, hi, lo_inc, hi_inc = _RANGES[field]
    bad = (
        (lo is not None and (value < lo or (not lo_inc and value == lo)))
        or (hi is not None and (value > hi or (not hi_inc and value == hi)))
    )
    if bad:
        raise RangeViolation(f"{name} day {day}: {field}={value} outside allowed range")


def _load_table(path: str | Path, name: str, header: list[str]) -> SeriesTable:
    path = Path(path)
    fields = tuple(header[1:])
    days: list[float] = []
    raw: dict[str, list[float]] = {f: [] for f in fields}
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            got = next(reader, None)
            if got is None:
                raise ParseError(f"{path}: empty file")
            if [h.strip() for h in got] != header:
                raise ParseError(f"{path}: expected header {','.join(header)}")
            for ln, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise ParseError(f"{path}:{ln}: expected {len(header)} fields")
                try:
                    day = float(row[0])
                except ValueError:
                    raise ParseError(f"{path}:{ln}: bad day {row[0]!r}") from None
                if day < 0:
                    raise RangeViolation(f"{name} line {ln}: day {day} < 0")
                days.append(day)
                for field, cell in zip(fields, row[1:]):
                    cell = cell.strip()
                    if not cell:
                        raw[field].append(math.nan)
                        continue
                    try:
                        value = float(cell)
                    except ValueError:
                        raise ParseError(f"{path}:{ln}: bad {field} {cell!r}") from None
                    if math.isnan(value):
                        raw[field].append(math.nan)
                        continue
                    _check_range(name, day, field, value)
                    raw[field].append(value)
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not days:
        raise ParseError(f"{path}: no data rows")
    day_arr = np.asarray(days)
    if (np.diff(day_arr) <= 0).any():
        raise ParseError(f"{path}: days must be strictly increasing")

    # spread the file rows onto the full integer-day grid when days are
    # integral; otherwise keep the rows as-is (fill_gaps will reject)
    if np.all(day_arr == np.round(day_arr)):
        lo, hi = int(day_arr[0]), int(day_arr[-1])
        grid = np.arange(lo, hi + 1, dtype=np.float64)
        values = {}
        idx = (day_arr - lo).astype(np.int64)
        for field in fields:
            col = np.full(len(grid), np.nan)
            col[idx] = raw[field]
            values[field] = col
    else:
        grid = day_arr
        values = {f: np.asarray(raw[f]) for f in fields}

    table = SeriesTable(
        name=name,
        fields=fields,
        day=grid,
        values=values,
        filled=np.zeros(len(grid), dtype=bool),
    )
    _check_dew_le_air(table)
    return table


def _check_dew_le_air(table: SeriesTable) -> None:
    if "t_dew_c" not in table.fields:
        return
    air = table.values["t_air_c"]
    dew = table.values["t_dew_c"]
    both = ~np.isnan(air) & ~np.isnan(dew)
    if (dew[both] > air[both]).any():
        j = int(np.argwhere(both & (dew > air))[0][0])
        raise RangeViolation(
            f"met day {table.day[j]}: t_dew_c={dew[j]} exceeds t_air_c={air[j]}"
        )


def load_series(
    inflow_path: str | Path, met_path: str | Path, withdrawal_path: str | Path
) -> ForcingSeries:
    """Load the three forcing files; gaps are preserved, not filled."""
    return ForcingSeries(
        inflow=_load_table(inflow_path, "inflow", INFLOW_HEADER),
        met=_load_table(met_path, "met", MET_HEADER),
        withdrawal=_load_table(withdrawal_path, "withdrawal", WITHDRAWAL_HEADER),
    )


# ---------------------------------------------------------------------------
# gap filling
# ---------------------------------------------------------------------------

def _gap_runs(missing: np.ndarray) -> list[tuple[int, int]]:
    """Contiguous runs of True as (start, stop) index pairs, stop exclusive."""
    runs = []
    j = 0
    n = len(missing)
    while j < n:
        if missing[j]:
            k = j
            while k < n and missing[k]:
                k += 1
            runs.append((j, k))
            j = k
        else:
            j += 1
    return runs


def _interp_linear(day: np.ndarray, col: np.ndarray, name: str, field: str) -> tuple[np.ndarray, np.ndarray]:
    missing = np.isnan(col)
    touched = missing.copy()
    if not missing.any():
        return col, touched
    known = np.flatnonzero(~missing)
    if len(known) < 2:
        raise InsufficientData(f"{name}.{field}: need at least 2 values to fill gaps")
    out = col.copy()
    for start, stop in _gap_runs(missing):
        length = stop - start
        if length >= MAX_GAP_DAYS:
            raise GapTooLong(
                f"{name}.{field}: {length}-day gap at day {day[start]} (limit {MAX_GAP_DAYS - 1})"
            )
        if start == 0:
            out[start:stop] = col[stop]  # leading: nearest value
        elif stop == len(col):
            out[start:stop] = col[start - 1]  # trailing: nearest value
        else:
            d0, d1 = day[start - 1], day[stop]
            v0, v1 = col[start - 1], col[stop]
            frac = (day[start:stop] - d0) / (d1 - d0)
            out[start:stop] = v0 + frac * (v1 - v0)
    return out, touched


def _interp_circular(day: np.ndarray, col: np.ndarray, name: str, field: str) -> tuple[np.ndarray, np.ndarray]:
    """Like _interp_linear but on the 0..360 circle along the shortest arc."""
    missing = np.isnan(col)
    touched = missing.copy()
    if not missing.any():
        return col, touched
    known = np.flatnonzero(~missing)
    if len(known) < 2:
        raise InsufficientData(f"{name}.{field}: need at least 2 values to fill gaps")
    out = col.copy()
    for start, stop in _gap_runs(missing):
        length = stop - start
        if length >= MAX_GAP_DAYS:
            raise GapTooLong(
                f"{name}.{field}: {length}-day gap at day {day[start]} (limit {MAX_GAP_DAYS - 1})"
            )
        if start == 0:
            out[start:stop] = col[stop]
        elif stop == len(col):
            out[start:stop] = col[start - 1]
        else:
            d0, d1 = day[start - 1], day[stop]
            v0, v1 = col[start - 1], col[stop]
            delta = (v1 - v0 + 180.0) % 360.0 - 180.0  # shortest arc, ties toward +
            frac = (day[start:stop] - d0) / (d1 - d0)
            out[start:stop] = (v0 + frac * delta) % 360.0
    return out, touched


def _fill_table(table: SeriesTable) -> SeriesTable:
    if not table.has_gaps():
        return table
    if np.any(table.day != np.round(table.day)):
        raise ParseError(f"{table.name}: gap filling needs integer day stamps")
    values = {}
    touched_any = np.zeros(len(table.day), dtype=bool)
    for field in table.fields:
        fn = _interp_circular if field == "wind_dir_deg" else _interp_linear
        col, touched = fn(table.day, table.values[field], table.name, field)
        values[field] = col
        touched_any |= touched
    if "t_dew_c" in values:
        # independent interpolation can nudge dew past air; pin it back
        over = values["t_dew_c"] > values["t_air_c"]
        if over.any():
            values["t_dew_c"] = np.where(over, values["t_air_c"], values["t_dew_c"])
            touched_any |= over
    return replace(table, values=values, filled=table.filled | touched_any)


def fill_gaps(series: ForcingSeries) -> ForcingSeries:
    """Return a gap-free copy of the series.

    Interior gaps are linearly interpolated (shortest arc for wind
    direction); leading/trailing gaps take the nearest value. Gaps of
    MAX_GAP_DAYS or more raise GapTooLong. Filled rows are flagged.
    Applying fill_gaps to a gap-free series returns it unchanged.
    """
    return ForcingSeries(
        inflow=_fill_table(series.inflow),
        met=_fill_table(series.met),
        withdrawal=_fill_table(series.withdrawal),
    )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _sample_table(table: SeriesTable, t_days: float) -> dict[str, float]:
    if t_days < table.first_day or t_days > table.last_day:
        raise OutOfHorizon(
            f"{table.name}: t={t_days} outside [{table.first_day}, {table.last_day}]"
        )
    out: dict[str, float] = {}
    j = int(np.searchsorted(table.day, t_days, side="right")) - 1
    j = min(max(j, 0), len(table.day) - 2) if len(table.day) > 1 else 0
    for field in table.fields:
        col = table.values[field]
        if np.isnan(col).any():
            raise ParseError(f"{table.name}.{field}: sample needs a gap-free series (run fill_gaps)")
        if len(table.day) == 1:
            out[field] = float(col[0])
            continue
        d0, d1 = float(table.day[j]), float(table.day[j + 1])
        v0, v1 = float(col[j]), float(col[j + 1])
        frac = 0.0 if d1 == d0 else (t_days - d0) / (d1 - d0)
        if field == "wind_dir_deg":
            delta = (v1 - v0 + 180.0) % 360.0 - 180.0
            out[field] = (v0 + frac * delta) % 360.0
        else:
            out[field] = v0 + frac * (v1 - v0)
    return out


def sample(series: ForcingSeries, t_days: float) -> tuple[InflowRecord, MetRecord, WithdrawalRecord]:
    """Piecewise-linear sample of all three tables at a real time in days."""
    inf = _sample_table(series.inflow, t_days)
    met = _sample_table(series.met, t_days)
    wdr = _sample_table(series.withdrawal, t_days)
    return (
        InflowRecord(day=t_days, **inf),
        MetRecord(day=t_days, **met),
        WithdrawalRecord(day=t_days, **wdr),
    )
