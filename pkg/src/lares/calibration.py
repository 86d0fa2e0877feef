"""Error metrics, profile matching, and parameter search.

Observed profiles are (day, station, depth, value) records with either
constituent optionally missing. ``match_profiles`` pairs them with model
output: nearest recorded snapshot in time, linear interpolation between
wet-layer centers in the vertical. ``calibrate`` minimizes a weighted sum of
absolute-mean errors with a full-factorial coarse pass followed by
coordinate descent; evaluations within one phase are independent and can
run across processes, and the result does not depend on the degree of
parallelism.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np

from .engine import RunConfig, RunOutput, Snapshot, run
from .errors import (
    BudgetExhausted,
    DayOutsideHorizon,
    EmptyInput,
    InputError,
    LengthMismatch,
    ParseError,
    StationUnknown,
)
from .grid import Grid

OBSERVATION_HEADER = ["day", "station", "depth_m", "temp_c", "do_mgl"]

DEFAULT_AXIS_NAMES = (
    "kz_max", "eta_wind", "light_extinction", "k_bod_20", "sod_20", "k_a_base",
)


# ---------------------------------------------------------------------------
# error metrics
# ---------------------------------------------------------------------------

def _paired(predicted, observed) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(list(predicted), dtype=np.float64)
    o = np.asarray(list(observed), dtype=np.float64)
    if p.shape != o.shape:
        raise LengthMismatch(f"{p.size} predictions vs {o.size} observations")
    if p.size == 0:
        raise EmptyInput("error metrics need at least one pair")
    return p, o


def ame(predicted, observed) -> float:
    """Absolute mean error: mean of |predicted - observed|."""
    p, o = _paired(predicted, observed)
    return float(np.abs(p - o).sum() / p.size)


def rmse(predicted, observed) -> float:
    """Root mean square error."""
    p, o = _paired(predicted, observed)
    d = p - o
    return math.sqrt(float((d * d).sum()) / p.size)


# ---------------------------------------------------------------------------
# observations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Observation:
    """One measured profile point; NaN marks a constituent not measured."""

    day: float
    station: str
    depth_m: float
    temp_c: float = float("nan")
    do_mgl: float = float("nan")


def load_observations(path: str | Path) -> list[Observation]:
    """Read an observation CSV (header ``day,station,depth_m,temp_c,do_mgl``)."""
    path = Path(path)
    out: list[Observation] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != OBSERVATION_HEADER:
            raise ParseError(f"{path.name}: expected header {','.join(OBSERVATION_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(OBSERVATION_HEADER):
                raise ParseError(f"{path.name}:{lineno}: expected {len(OBSERVATION_HEADER)} fields")
            try:
                day = float(row[0])
                depth = float(row[2])
                t = float(row[3]) if row[3].strip() else float("nan")
                d = float(row[4]) if row[4].strip() else float("nan")
            except ValueError as exc:
                raise ParseError(f"{path.name}:{lineno}: {exc}") from None
            if depth < 0.0:
                raise ParseError(f"{path.name}:{lineno}: negative depth")
            out.append(Observation(day, row[1].strip(), depth, t, d))
    return out


# ---------------------------------------------------------------------------
# matching model output to observations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchReport:
    """Paired values plus the observations that could not be matched."""

    temp_pairs: list[tuple[float, float]]   # (predicted, observed)
    do_pairs: list[tuple[float, float]]
    skipped_below_bed: int
    matched_days: int


def _column_profile(grid: Grid, snap: Snapshot, segment: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Depths of wet-layer centers (surface down) and T, DO values there."""
    e = snap.elevation_m
    kt = grid.top_wet_layer(e)
    kb = int(grid.bed_layer[segment - 1])
    ks = np.arange(kt, kb + 1)
    zc = 0.5 * (np.minimum(grid.z_top_m[ks], e) + grid.z_bottom_m[ks])
    depth = e - zc
    wet_depth = e - float(grid.z_bottom_m[kb])
    return depth, snap.temp_c[ks, segment - 1], snap.do_mgl[ks, segment - 1], wet_depth


def match_profiles(
    output: RunOutput,
    grid: Grid,
    stations: dict[str, int],
    observations: list[Observation],
    *,
    start_day: float,
    end_day: float,
) -> MatchReport:
    """Pair observations with the nearest snapshot, interpolated in depth.

    Observations deeper than the local bed are skipped and counted rather
    than extrapolated; depths between the surface and the first layer
    center, or between the last center and the bed, clamp to the end value.
    """
    if not output.snapshots:
        raise EmptyInput("run output holds no snapshots to match against")
    snap_days = np.array([s.day for s in output.snapshots])
    temp_pairs: list[tuple[float, float]] = []
    do_pairs: list[tuple[float, float]] = []
    skipped = 0
    used_days: set[float] = set()
    for obs in observations:
        if obs.station not in stations:
            raise StationUnknown(f"station {obs.station!r} not defined by the run")
        if obs.day < start_day - 1e-9 or obs.day > end_day + 1e-9:
            raise DayOutsideHorizon(f"observation day {obs.day} outside [{start_day}, {end_day}]")
        snap = output.snapshots[int(np.argmin(np.abs(snap_days - obs.day)))]
        depth, t_prof, do_prof, wet_depth = _column_profile(grid, snap, stations[obs.station])
        if obs.depth_m > wet_depth + 1e-9:
            skipped += 1
            continue
        used_days.add(snap.day)
        if not math.isnan(obs.temp_c):
            temp_pairs.append((float(np.interp(obs.depth_m, depth, t_prof)), obs.temp_c))
        if not math.isnan(obs.do_mgl):
            do_pairs.append((float(np.interp(obs.depth_m, depth, do_prof)), obs.do_mgl))
    return MatchReport(temp_pairs, do_pairs, skipped, len(used_days))


def stage_ame(output: RunOutput, days, elevations_m) -> float:
    """Absolute mean error of water-surface elevation at snapshot days."""
    days = list(days)
    obs = list(elevations_m)
    if len(days) != len(obs):
        raise LengthMismatch(f"{len(days)} days vs {len(obs)} elevations")
    if not output.snapshots:
        raise EmptyInput("run output holds no snapshots")
    snap_days = np.array([s.day for s in output.snapshots])
    pred = [output.snapshots[int(np.argmin(np.abs(snap_days - d)))].elevation_m for d in days]
    return ame(pred, obs)


# ---------------------------------------------------------------------------
# parameter search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Axis:
    """One searchable parameter with its physical bounds."""

    name: str
    lo: float
    hi: float

    def validate(self) -> None:
        if not self.hi > self.lo:
            raise InputError(f"axis {self.name}: bounds [{self.lo}, {self.hi}] empty")


@dataclass(frozen=True)
class CalibrationSpec:
    """Search axes, objective weights, and the evaluation budget."""

    axes: tuple[Axis, ...]
    budget: int = 200
    coarse_points: int = 3
    w_temp: float = 1.0
    w_do: float = 1.0
    # descent stops when every axis step falls under this fraction of range
    min_step_frac: float = 0.01

    def validate(self) -> None:
        if not self.axes:
            raise EmptyInput("calibration needs at least one axis")
        if self.budget <= 0:
            raise BudgetExhausted("evaluation budget must be positive")
        if self.coarse_points < 2:
            raise InputError("coarse grid needs at least 2 points per axis")
        seen = set()
        for ax in self.axes:
            ax.validate()
            if ax.name in seen:
                raise InputError(f"duplicate axis {ax.name}")
            seen.add(ax.name)
        if self.coarse_points ** len(self.axes) > self.budget:
            raise BudgetExhausted(
                f"budget {self.budget} cannot cover the "
                f"{self.coarse_points ** len(self.axes)}-point coarse grid"
            )


@dataclass(frozen=True)
class Evaluation:
    """Metrics of one parameter vector."""

    values: tuple[float, ...]
    ame_t: float
    ame_do: float
    rmse_t: float
    rmse_do: float
    objective: float


@dataclass
class CalibrationResult:
    """Best point found plus the full evaluation trace."""

    spec: CalibrationSpec
    best: Evaluation
    trace: list[Evaluation] = field(default_factory=list)

    @property
    def best_values(self) -> dict[str, float]:
        return {ax.name: v for ax, v in zip(self.spec.axes, self.best.values)}

    @property
    def n_evaluations(self) -> int:
        return len(self.trace)


def _evaluate(args) -> Evaluation:
    """Run the model at one parameter vector and score it (worker entry)."""
    config, names, values, observations, w_temp, w_do = args
    cfg = replace(config, params=config.params.with_values(**dict(zip(names, values))))
    out = run(cfg)
    report = match_profiles(
        out, cfg.grid, cfg.stations, observations,
        start_day=cfg.start_day, end_day=cfg.end_day,
    )
    if not report.temp_pairs and not report.do_pairs:
        raise EmptyInput("no observation could be matched to the run")
    ame_t = ame(*zip(*report.temp_pairs)) if report.temp_pairs else 0.0
    rmse_t = rmse(*zip(*report.temp_pairs)) if report.temp_pairs else 0.0
    ame_do = ame(*zip(*report.do_pairs)) if report.do_pairs else 0.0
    rmse_do = rmse(*zip(*report.do_pairs)) if report.do_pairs else 0.0
    return Evaluation(
        values=tuple(values),
        ame_t=ame_t,
        ame_do=ame_do,
        rmse_t=rmse_t,
        rmse_do=rmse_do,
        objective=w_temp * ame_t + w_do * ame_do,
    )


class _Search:
    """Caching evaluator: each distinct point costs one budget unit."""

    def __init__(self, config, spec, observations, jobs):
        self.config = config
        self.spec = spec
        self.obs = observations
        self.jobs = max(1, jobs)
        self.names = tuple(ax.name for ax in spec.axes)
        self.cache: dict[tuple[float, ...], Evaluation] = {}
        self.trace: list[Evaluation] = []

    def remaining(self) -> int:
        return self.spec.budget - len(self.cache)

    def evaluate(self, points: list[tuple[float, ...]]) -> list[Evaluation]:
        """Evaluate points, fresh ones concurrently, in deterministic order."""
        fresh = []
        for p in points:
            if p not in self.cache and p not in fresh:
                fresh.append(p)
        fresh = fresh[: max(0, self.remaining())]
        if fresh:
            args = [
                (self.config, self.names, p, self.obs, self.spec.w_temp, self.spec.w_do)
                for p in fresh
            ]
            if self.jobs > 1 and len(fresh) > 1:
                with ProcessPoolExecutor(max_workers=min(self.jobs, len(fresh))) as pool:
                    evs = list(pool.map(_evaluate, args))
            else:
                evs = [_evaluate(a) for a in args]
            for p, ev in zip(fresh, evs):
                self.cache[p] = ev
                self.trace.append(ev)
        return [self.cache[p] for p in points if p in self.cache]


def _better(a: Evaluation, b: Evaluation | None) -> bool:
    """Strict improvement; ties break toward lower parameter values."""
    if b is None:
        return True
    if a.objective != b.objective:
        return a.objective < b.objective
    return a.values < b.values


def calibrate(
    config: RunConfig,
    spec: CalibrationSpec,
    observations: list[Observation],
    jobs: int = 1,
) -> CalibrationResult:
    """Search the axes for the lowest weighted error against observations.

    A full-factorial coarse grid seeds a coordinate descent that walks one
    axis at a time with a shrinking step. Results are deterministic and
    independent of ``jobs``; the budget caps distinct model runs.
    """
    spec.validate()
    if not observations:
        raise EmptyInput("calibration needs observations")
    search = _Search(config, spec, observations, jobs)

    grids = [
        tuple(np.linspace(ax.lo, ax.hi, spec.coarse_points)) for ax in spec.axes
    ]
    coarse = [tuple(float(v) for v in p) for p in product(*grids)]
    best: Evaluation | None = None
    for ev in search.evaluate(coarse):
        if _better(ev, best):
            best = ev
    assert best is not None

    ranges = [ax.hi - ax.lo for ax in spec.axes]
    steps = [r / (spec.coarse_points - 1) / 2.0 for r in ranges]
    point = list(best.values)
    while search.remaining() > 0:
        if all(s < f * spec.min_step_frac for s, f in zip(steps, ranges)):
            break
        moved = False
        for i, ax in enumerate(spec.axes):
            if search.remaining() <= 0:
                break
            if steps[i] < ranges[i] * spec.min_step_frac:
                continue
            candidates = []
            for v in (point[i] - steps[i], point[i] + steps[i]):
                v = min(max(v, ax.lo), ax.hi)
                cand = tuple(point[:i] + [v] + point[i + 1:])
                if cand != tuple(point):
                    candidates.append(cand)
            improved = False
            for ev in search.evaluate(candidates):
                if _better(ev, best):
                    best = ev
                    point = list(ev.values)
                    improved = moved = True
            if not improved:
                steps[i] /= 2.0
        if not moved and all(s < f * spec.min_step_frac for s, f in zip(steps, ranges)):
            break

    return CalibrationResult(spec=spec, best=best, trace=search.trace)
