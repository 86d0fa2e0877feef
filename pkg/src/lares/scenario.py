"""Flash-flood experiments: perturbed forcing, paired runs, and the
diagnostics used to compare them.

A scenario is a triangular inflow pulse layered on baseline forcing: the
discharge multiplier ramps 1 -> peak -> 1 across the window, the inflow BOD
multiplier and temperature offset hold flat across it. Everything outside
the window, and the inflow DO concentration everywhere, stays baseline, so
an identity spec reproduces the baseline run bit for bit.

``run_pair`` executes the baseline and flood runs (concurrently when asked),
forces state snapshots just before, at the middle of, and just after the
window, and reduces each snapshot to per-segment mixed-layer depth,
stratification index, anoxic extent, and a mean oxygen level for the upper
water column. The directional check suites encode the qualitative responses
expected of a deep monomictic basin and of a shallow warm one.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .engine import RunConfig, RunOutput, Snapshot, run
from .errors import InputError, RuntimeFailure, WindowOutsideHorizon
from .forcing import ForcingSeries
from .grid import Grid
from .oxygen import AnoxiaSummary, anoxia_mask

MLD_THRESHOLD_C = 1.0   # temperature band defining the surface mixed layer


# ---------------------------------------------------------------------------
# scenario specification and forcing perturbation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    """A flash-flood perturbation and the geometry of its evaluation.

    ``peak_multiplier`` scales inflow discharge on a triangle peaking at the
    window center; ``bod_multiplier`` and ``t_in_offset_c`` apply uniformly
    across the window. Multipliers below one would describe a drought, not a
    flood, and are rejected.

    The three threshold fields configure where the directional diagnostics
    look: ``upstream_distance_m`` bounds the reach counted as upstream,
    ``reference_distance_m`` fixes the column whose anoxic thickness is
    tracked, and ``upper_min_temp_c`` splits the water column into the
    epilimnion + metalimnion mass (at or above it) and the hypolimnion
    (below it) for the mean-oxygen diagnostic. A temperature class rather
    than a fixed depth keeps the diagnostic attached to the water masses
    when a flood raises the surface by meters.
    """

    start_day: float
    end_day: float
    peak_multiplier: float
    bod_multiplier: float = 1.0
    t_in_offset_c: float = 0.0
    upstream_distance_m: float = 3000.0
    reference_distance_m: float = 2000.0
    upper_min_temp_c: float = 15.0

    @property
    def center_day(self) -> float:
        return 0.5 * (self.start_day + self.end_day)

    @property
    def snapshot_days(self) -> tuple[float, float, float]:
        """Days whose snapshots a paired run must record: before, during, after."""
        return (self.start_day - 1.0, self.center_day, self.end_day + 1.0)

    def validate(self) -> None:
        if self.end_day <= self.start_day:
            raise InputError("scenario window must have positive length")
        if self.peak_multiplier < 1.0:
            raise InputError(f"peak_multiplier {self.peak_multiplier} < 1")
        if self.bod_multiplier < 1.0:
            raise InputError(f"bod_multiplier {self.bod_multiplier} < 1")


def flood_factor(day: np.ndarray | float, spec: ScenarioSpec) -> np.ndarray | float:
    """Discharge multiplier at ``day``: 1 outside the window, triangular inside."""
    half = 0.5 * (spec.end_day - spec.start_day)
    tri = np.clip(1.0 - np.abs(np.asarray(day, dtype=np.float64) - spec.center_day) / half, 0.0, None)
    return 1.0 + (spec.peak_multiplier - 1.0) * tri


def build_flood_forcing(base: ForcingSeries, spec: ScenarioSpec) -> ForcingSeries:
    """Baseline forcing with the flood pulse applied to the inflow table.

    Met and withdrawal pass through untouched. With an identity spec
    (peak 1, bod 1, offset 0) every value comes back equal to baseline.
    """
    spec.validate()
    first, last = base.horizon
    if spec.start_day < first - 1e-9 or spec.end_day > last + 1e-9:
        raise WindowOutsideHorizon(
            f"flood window [{spec.start_day}, {spec.end_day}] outside forcing "
            f"horizon [{first}, {last}]"
        )
    tbl = base.inflow
    day = tbl.day
    inside = (day >= spec.start_day) & (day <= spec.end_day)
    values = {f: tbl.values[f].copy() for f in tbl.fields}
    values["q_in_m3s"] = values["q_in_m3s"] * flood_factor(day, spec)
    values["bod_in_mgl"] = np.where(
        inside, values["bod_in_mgl"] * spec.bod_multiplier, values["bod_in_mgl"]
    )
    values["t_in_c"] = np.where(
        inside, values["t_in_c"] + spec.t_in_offset_c, values["t_in_c"]
    )
    return ForcingSeries(
        inflow=replace(tbl, values=values),
        met=base.met,
        withdrawal=base.withdrawal,
    )


# ---------------------------------------------------------------------------
# column diagnostics
# ---------------------------------------------------------------------------

def mixed_layer_depth(
    temp_col: np.ndarray,
    wet_thickness_m: np.ndarray,
    kt: int,
    kb: int,
    threshold_c: float = MLD_THRESHOLD_C,
) -> float:
    """Depth of the surface mixed layer in one column.

    Scans down from the surface and returns the depth of the upper interface
    of the first layer whose temperature leaves the surface value by more
    than the threshold; the full wet depth when none does.
    """
    t_surf = temp_col[kt]
    depth = 0.0
    for k in range(kt, kb + 1):
        if abs(temp_col[k] - t_surf) > threshold_c:
            return depth
        depth += wet_thickness_m[k]
    return depth


def stratification_index(temp_col: np.ndarray, kt: int, kb: int) -> float:
    """Surface minus bottom temperature of one column."""
    return float(temp_col[kt] - temp_col[kb])


@dataclass(frozen=True)
class SnapshotDiagnostics:
    """Per-segment reductions of one snapshot."""

    day: float
    elevation_m: float
    mld_m: np.ndarray           # (N,) mixed-layer depth; NaN for dry columns
    strat_c: np.ndarray         # (N,) surface minus bottom temperature
    anoxic_vol_m3: np.ndarray   # (N,) volume under the oxygen threshold
    anoxic_th_m: np.ndarray     # (N,) vertical extent of that volume
    bottom_do_mgl: np.ndarray   # (N,) oxygen in the deepest wet cell
    upper_do_mgl: float         # volume-weighted mean DO at or above upper_min_temp_c
    anoxia: AnoxiaSummary


def diagnose(grid: Grid, snap: Snapshot, spec: ScenarioSpec) -> SnapshotDiagnostics:
    """Reduce one snapshot to the comparison metrics."""
    e = snap.elevation_m
    kt = grid.top_wet_layer(e)
    wet = grid.wet_thickness_m(e)
    vol = grid.cell_volumes_m3(e)
    summary = anoxia_mask(snap.do_mgl, grid, e)
    anox_vol = (vol * summary.mask).sum(axis=0)
    anox_th = (wet[:, None] * summary.mask).sum(axis=0)

    n = grid.n_segments
    mld = np.full(n, np.nan)
    strat = np.full(n, np.nan)
    bottom = np.full(n, np.nan)
    for j in range(n):
        kb = int(grid.bed_layer[j])
        if kb < kt:
            continue
        mld[j] = mixed_layer_depth(snap.temp_c[:, j], wet, kt, kb)
        strat[j] = stratification_index(snap.temp_c[:, j], kt, kb)
        bottom[j] = snap.do_mgl[kb, j]

    upper = (snap.temp_c >= spec.upper_min_temp_c) & (vol > 0.0)
    v_up = vol[upper].sum()
    upper_do = float((snap.do_mgl[upper] * vol[upper]).sum() / v_up) if v_up > 0 else float("nan")

    return SnapshotDiagnostics(
        day=snap.day,
        elevation_m=e,
        mld_m=mld,
        strat_c=strat,
        anoxic_vol_m3=anox_vol,
        anoxic_th_m=anox_th,
        bottom_do_mgl=bottom,
        upper_do_mgl=upper_do,
        anoxia=summary,
    )


# ---------------------------------------------------------------------------
# paired runs
# ---------------------------------------------------------------------------

@dataclass
class RunComparison:
    """Baseline and flood runs with diagnostics at the forced snapshots.

    Diagnostic lists are ordered before / during / after the window.
    """

    spec: ScenarioSpec
    base: RunOutput
    flood: RunOutput
    base_diag: list[SnapshotDiagnostics]
    flood_diag: list[SnapshotDiagnostics]


def _pick_snapshot(out: RunOutput, day: float, dt_days: float) -> Snapshot:
    best = min(out.snapshots, key=lambda s: abs(s.day - day))
    if abs(best.day - day) > dt_days + 1e-9:
        raise RuntimeFailure(f"no snapshot near day {day}")
    return best


def run_pair(config: RunConfig, spec: ScenarioSpec, jobs: int = 2) -> RunComparison:
    """Run baseline and flood variants of one configuration and compare them.

    The flood window, padded by the day of lead snapshot on each side, must
    fit inside the run window. The two runs are independent, so with
    ``jobs >= 2`` they execute in separate processes; results do not depend
    on the choice.
    """
    spec.validate()
    days = spec.snapshot_days
    if days[0] < config.start_day - 1e-9 or days[-1] > config.end_day + 1e-9:
        raise WindowOutsideHorizon(
            f"scenario snapshots {days} outside run window "
            f"[{config.start_day}, {config.end_day}]"
        )
    snap_days = tuple(sorted(set(config.snapshot_days) | set(days)))
    base_cfg = replace(config, snapshot_days=snap_days)
    flood_cfg = replace(base_cfg, forcing=build_flood_forcing(config.forcing, spec))

    if jobs >= 2:
        with ProcessPoolExecutor(max_workers=2) as pool:
            base_out, flood_out = list(pool.map(run, [base_cfg, flood_cfg]))
    else:
        base_out = run(base_cfg)
        flood_out = run(flood_cfg)

    dt_days = config.dt_s / 86400.0
    base_diag = [diagnose(config.grid, _pick_snapshot(base_out, d, dt_days), spec) for d in days]
    flood_diag = [diagnose(config.grid, _pick_snapshot(flood_out, d, dt_days), spec) for d in days]
    return RunComparison(spec, base_out, flood_out, base_diag, flood_diag)


def station_delta_profile(
    grid: Grid, base_snap: Snapshot, flood_snap: Snapshot, segment: int
) -> list[tuple[float, float, float, float]]:
    """(elevation, depth below baseline surface, dT, dDO) rows for one column.

    Differences are taken layer by layer at fixed elevation over the cells
    wet in both snapshots, surface first.
    """
    j = segment - 1
    e = min(base_snap.elevation_m, flood_snap.elevation_m)
    kt = grid.top_wet_layer(e)
    kb = int(grid.bed_layer[j])
    rows = []
    for k in range(kt, kb + 1):
        zc = 0.5 * (min(float(grid.z_top_m[k]), e) + float(grid.z_bottom_m[k]))
        rows.append((
            zc,
            base_snap.elevation_m - zc,
            float(flood_snap.temp_c[k, j] - base_snap.temp_c[k, j]),
            float(flood_snap.do_mgl[k, j] - base_snap.do_mgl[k, j]),
        ))
    return rows


# ---------------------------------------------------------------------------
# directional checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionalCheck:
    """Outcome of one qualitative expectation about a paired run."""

    name: str
    passed: bool
    value: float
    bound: float
    detail: str


def _upstream(grid: Grid, spec: ScenarioSpec) -> np.ndarray:
    return grid.distance_from_dam_m > spec.upstream_distance_m


def _mid_reach(grid: Grid) -> np.ndarray:
    d = grid.distance_from_dam_m
    span = d.max()
    return (d > span / 3.0) & (d < 2.0 * span / 3.0)


def _ref_segment(grid: Grid, spec: ScenarioSpec) -> int:
    return int(np.argmin(np.abs(grid.distance_from_dam_m - spec.reference_distance_m)))


def check_upstream_mld_deepening(
    cmp: RunComparison, grid: Grid, min_deepen_m: float = 5.0
) -> DirectionalCheck:
    """Flood mixes the upstream reach: mixed layer deepens mid-window."""
    sel = _upstream(grid, cmp.spec)
    delta = cmp.flood_diag[1].mld_m[sel] - cmp.base_diag[1].mld_m[sel]
    value = float(np.nanmean(delta))
    return DirectionalCheck(
        name="upstream_mld_deepening",
        passed=bool(value >= min_deepen_m),
        value=value,
        bound=min_deepen_m,
        detail=f"mean mixed-layer deepening beyond {cmp.spec.upstream_distance_m:.0f} m "
               f"from the dam at the window center: {value:.2f} m (need >= {min_deepen_m:.1f})",
    )


def check_upper_do_drop(cmp: RunComparison, min_drop_mgl: float = 2.0) -> DirectionalCheck:
    """The organic load depresses upper-water-column DO across the window."""
    value = cmp.flood_diag[0].upper_do_mgl - cmp.flood_diag[2].upper_do_mgl
    return DirectionalCheck(
        name="upper_do_drop",
        passed=bool(value >= min_drop_mgl),
        value=float(value),
        bound=min_drop_mgl,
        detail=f"upper-column mean DO drop across the flood window: {value:.2f} mg/L "
               f"(need >= {min_drop_mgl:.1f})",
    )


def check_anoxic_migration(cmp: RunComparison, grid: Grid) -> DirectionalCheck:
    """The anoxic zone shifts toward the dam without thickening at the
    reference column.

    The near edge is compared across the flood window within the flood run.
    Thickness is compared against the baseline after the window: seasonal
    bed demand keeps eating oxygen through any summer window in both runs,
    so the baseline is the control that separates flood-driven thickening
    from that drift.
    """
    before = cmp.flood_diag[0]
    after = cmp.flood_diag[2]
    jref = _ref_segment(grid, cmp.spec)
    d0 = before.anoxia.distance_min_m
    d1 = after.anoxia.distance_min_m
    th_base = float(cmp.base_diag[2].anoxic_th_m[jref])
    th_flood = float(after.anoxic_th_m[jref])
    moved = bool(np.isfinite(d0) and np.isfinite(d1) and d1 < d0)
    held = bool(th_flood <= th_base + 1e-9)
    return DirectionalCheck(
        name="anoxic_migration",
        passed=moved and held,
        value=float(d1 - d0) if np.isfinite(d0) and np.isfinite(d1) else float("nan"),
        bound=0.0,
        detail=f"anoxic near edge moved {d0:.0f} -> {d1:.0f} m from the dam; "
               f"thickness at {cmp.spec.reference_distance_m:.0f} m after the "
               f"window: {th_flood:.2f} m flood vs {th_base:.2f} m baseline",
    )


def check_bottom_do_drop(cmp: RunComparison, grid: Grid) -> DirectionalCheck:
    """After the flood the deep water holds less oxygen than baseline."""
    sel = _mid_reach(grid)
    delta = cmp.flood_diag[2].bottom_do_mgl[sel] - cmp.base_diag[2].bottom_do_mgl[sel]
    value = float(np.nanmean(delta))
    return DirectionalCheck(
        name="bottom_do_drop",
        passed=bool(value < 0.0),
        value=value,
        bound=0.0,
        detail=f"mid-reach bottom DO change after the window, flood minus "
               f"baseline: {value:.3f} mg/L (need < 0)",
    )


def check_stratification_hold(cmp: RunComparison, grid: Grid) -> DirectionalCheck:
    """The flood does not erode mid-reach stratification."""
    sel = _mid_reach(grid)
    delta = cmp.flood_diag[2].strat_c[sel] - cmp.base_diag[2].strat_c[sel]
    value = float(np.nanmean(delta))
    return DirectionalCheck(
        name="stratification_hold",
        passed=bool(value >= -1e-9),
        value=value,
        bound=0.0,
        detail=f"mid-reach stratification index change after the window, flood "
               f"minus baseline: {value:.3f} C (need >= 0)",
    )


def deep_reservoir_checks(
    cmp: RunComparison, grid: Grid, *, mld_deepen_m: float = 5.0, do_drop_mgl: float = 2.0
) -> list[DirectionalCheck]:
    """Expected flood response of a deep monomictic basin."""
    return [
        check_upstream_mld_deepening(cmp, grid, mld_deepen_m),
        check_upper_do_drop(cmp, do_drop_mgl),
        check_anoxic_migration(cmp, grid),
    ]


def shallow_reservoir_checks(cmp: RunComparison, grid: Grid) -> list[DirectionalCheck]:
    """Expected flood response of a shallow warm basin."""
    return [
        check_bottom_do_drop(cmp, grid),
        check_stratification_hold(cmp, grid),
    ]
