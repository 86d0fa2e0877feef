"""Hourly time integration of the coupled reservoir model.

One :class:`Simulation` owns the full state (temperature, DO, BOD on the
grid plus the pool elevation) and advances it with a fixed step:

1. sample forcing (met at the step midpoint, flows averaged over the step)
2. evaluate the surface heat budget at the old surface temperatures;
   its latent term fixes the evaporation volume for the water budget
3. move the pool, route the flows, advect all constituents
4. deposit surface heat, then vertical diffusion / convection / wind mixing
5. oxygen kinetics

Every step is deterministic; repeated runs of the same config produce
bit-identical output. Budgets for water, heat and DO close to roundoff
and are checked at the end of :meth:`Simulation.run`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import _kernels
from .errors import InputError, RuntimeFailure
from .forcing import ForcingSeries
from .grid import AreaVolumeCurve, Grid, area_volume_curve
from .hydro import (
    STABILITY_TOL,
    CellField,
    TransportAudit,
    advect_adaptive,
    build_flow_field,
    friction_velocity_water,
    kz_profile,
    update_surface,
    water_density,
)
from .oxygen import KineticsAudit, kinetics_step
from .params import CP_WATER, GRAVITY, PhysicsParams, RHO0
from .thermal import apply_surface_flux, surface_heat_flux

SECONDS_PER_DAY = 86400.0


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Everything a run needs. Plain data so it pickles across processes."""

    grid: Grid
    forcing: ForcingSeries
    start_day: float
    end_day: float
    elevation0_m: float
    latitude_deg: float
    dt_s: float = 3600.0
    # initial profiles vs depth below the starting surface; linearly
    # interpolated at cell centers, end values extended
    profile_depth_m: tuple[float, ...] = (0.0,)
    profile_temp_c: tuple[float, ...] = (15.0,)
    profile_do_mgl: tuple[float, ...] = (8.0,)
    profile_bod_mgl: tuple[float, ...] = (1.0,)
    initial_state: CellField | None = None
    params: PhysicsParams = field(default_factory=PhysicsParams)
    stations: dict[str, int] = field(default_factory=dict)   # name -> segment
    snapshot_days: tuple[float, ...] = ()
    station_stride_steps: int = 1
    balance_stride_steps: int = 24

    @property
    def n_steps(self) -> int:
        return int(round((self.end_day - self.start_day) * SECONDS_PER_DAY / self.dt_s))

    def validate(self) -> None:
        g = self.grid
        if self.end_day <= self.start_day:
            raise InputError("end_day must exceed start_day")
        n = self.n_steps
        landed = self.start_day + n * self.dt_s / SECONDS_PER_DAY
        if n < 1 or abs(landed - self.end_day) > 1e-9:
            raise InputError(
                f"dt {self.dt_s} s does not tile [{self.start_day}, {self.end_day}] days"
            )
        first, last = self.forcing.horizon
        if self.start_day < first - 1e-9 or self.end_day > last + 1e-9:
            raise InputError(
                f"run window [{self.start_day}, {self.end_day}] outside forcing "
                f"horizon [{first}, {last}]"
            )
        for tbl in self.forcing.tables():
            if tbl.has_gaps():
                raise InputError(f"{tbl.name} has gaps; run fill_gaps first")
        if not g.datum_m < self.elevation0_m <= g.crest_m:
            raise InputError(
                f"start elevation {self.elevation0_m} outside ({g.datum_m}, {g.crest_m}]"
            )
        for d in self.snapshot_days:
            if d < self.start_day - 1e-9 or d > self.end_day + 1e-9:
                raise InputError(f"snapshot day {d} outside the run window")
        for name, seg in self.stations.items():
            if not 1 <= seg <= g.n_segments:
                raise InputError(f"station {name}: segment {seg} not on the grid")
        if self.station_stride_steps < 1 or self.balance_stride_steps < 1:
            raise InputError("recording strides must be >= 1 step")
        lens = {len(self.profile_depth_m), len(self.profile_temp_c),
                len(self.profile_do_mgl), len(self.profile_bod_mgl)}
        if len(lens) != 1:
            raise InputError("initial profile arrays differ in length")


def initial_state(config: RunConfig) -> CellField:
    """Cell field interpolated from the configured depth profiles."""
    if config.initial_state is not None:
        return config.initial_state.copy()
    g = config.grid
    zc = 0.5 * (np.minimum(g.z_top_m, config.elevation0_m) + g.z_bottom_m)
    depth = np.clip(config.elevation0_m - zc, 0.0, None)
    xp = np.asarray(config.profile_depth_m, dtype=np.float64)
    t = np.interp(depth, xp, np.asarray(config.profile_temp_c))
    d = np.interp(depth, xp, np.asarray(config.profile_do_mgl))
    b = np.interp(depth, xp, np.asarray(config.profile_bod_mgl))
    ones = np.ones((1, g.n_segments))
    return CellField(t[:, None] * ones, d[:, None] * ones, b[:, None] * ones)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Snapshot:
    """Full state at one instant."""

    day: float
    elevation_m: float
    temp_c: np.ndarray
    do_mgl: np.ndarray
    bod_mgl: np.ndarray


@dataclass(frozen=True)
class StationSample:
    day: float
    station: str
    depth_m: float
    temp_c: float
    do_mgl: float


@dataclass
class RunOutput:
    """Results plus the audit trail that proves the budgets closed."""

    snapshots: list[Snapshot]
    station_samples: list[StationSample]
    balance: np.ndarray            # rows (day, volume_m3, heat_j, do_kg)
    transport: TransportAudit
    kinetics: KineticsAudit
    surface_heat_j: float
    inflow_m3: float
    outflow_m3: float
    evaporated_m3: float
    state: CellField
    elevation_m: float
    n_steps: int
    max_substeps: int
    runtime_s: float

    def volume_residual_m3(self) -> float:
        dv = self.balance[-1, 1] - self.balance[0, 1]
        return float(dv - (self.inflow_m3 - self.outflow_m3 - self.evaporated_m3))

    def heat_residual_j(self) -> float:
        dh = self.balance[-1, 2] - self.balance[0, 2]
        tr = self.transport
        advected = RHO0 * CP_WATER * (
            tr.insertion[0] - tr.withdrawal[0] - tr.evaporation[0] + tr.clipped[0]
        )
        return float(dh - advected - self.surface_heat_j)

    def do_residual_kg(self) -> float:
        dm = self.balance[-1, 3] - self.balance[0, 3]
        tr = self.transport
        k = self.kinetics
        grams = (
            tr.insertion[1] - tr.withdrawal[1] - tr.evaporation[1] + tr.clipped[1]
            + k.reaeration_g - k.bod_consumed_g - k.sod_consumed_g
        )
        return float(dm - grams / 1000.0)

    def closure_report(self) -> dict[str, float]:
        """Relative budget residuals; all should sit at roundoff."""
        v_scale = max(abs(self.balance[0, 1]), abs(self.balance[-1, 1]), 1.0)
        h_scale = max(abs(self.balance[0, 2]), abs(self.balance[-1, 2]), 1.0)
        m_scale = max(abs(self.balance[0, 3]), abs(self.balance[-1, 3]), 1.0)
        return {
            "volume": abs(self.volume_residual_m3()) / v_scale,
            "heat": abs(self.heat_residual_j()) / h_scale,
            "do": abs(self.do_residual_kg()) / m_scale,
        }


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

class _StepForcing:
    """All forcing pre-sampled onto the step grid (one array lookup per step).

    Flows are averaged over each step from its endpoint samples; met fields
    are taken at the step midpoint. Sample times are clamped to the forcing
    horizon so roundoff at the window edge cannot fall outside it.
    """

    def __init__(self, series: ForcingSeries, start_day: float, n_steps: int,
                 dt_s: float):
        dt_d = dt_s / SECONDS_PER_DAY
        first, last = series.horizon
        ends = np.clip(start_day + np.arange(n_steps + 1) * dt_d, first, last)
        mids = np.clip(start_day + (np.arange(n_steps) + 0.5) * dt_d, first, last)

        def averaged(tbl, fld):
            v = np.interp(ends, tbl.day, tbl.values[fld])
            return 0.5 * (v[:-1] + v[1:])

        inf, met, wdr = series.tables()
        self.q_in = averaged(inf, "q_in_m3s")
        self.t_in = averaged(inf, "t_in_c")
        self.do_in = averaged(inf, "do_in_mgl")
        self.bod_in = averaged(inf, "bod_in_mgl")
        self.q_out = averaged(wdr, "q_out_m3s")
        self.intake = averaged(wdr, "intake_elev_m")
        self.t_air = np.interp(mids, met.day, met.values["t_air_c"])
        self.t_dew = np.interp(mids, met.day, met.values["t_dew_c"])
        self.wind = np.interp(mids, met.day, met.values["wind_ms"])
        self.cloud = np.interp(mids, met.day, met.values["cloud_frac"])
        self.mid_day = start_day + (np.arange(n_steps) + 0.5) * dt_d


class Simulation:
    """Owns the evolving state; :meth:`run` drives it and records output."""

    def __init__(self, config: RunConfig):
        config.validate()
        self.config = config
        self.grid = config.grid
        self.curve: AreaVolumeCurve = area_volume_curve(config.grid)
        self.params: PhysicsParams = config.params

        g = self.grid
        self._contact = g.sediment_contact_area_m2()
        # horizontal area shared by layers k and k+1: the narrower lower cell;
        # already zero wherever the interface sits at or below the bed
        self._iface_area = g.plan_area_m2[1:, :]
        self._cols = np.arange(g.n_segments)

        self.t_days = config.start_day
        self.elevation_m = config.elevation0_m
        self.state = initial_state(config)
        self.volumes = g.cell_volumes_m3(config.elevation0_m)
        self.step_index = 0
        self._f = _StepForcing(config.forcing, config.start_day, config.n_steps,
                               config.dt_s)

        # running budget terms
        self._adv = np.zeros((4, 3))   # insertion, withdrawal, evaporation, clipped
        self._kin = np.zeros(5)
        self._heat_j = 0.0
        self._in_m3 = 0.0
        self._out_m3 = 0.0
        self._ev_m3 = 0.0
        self._max_sub = 0

    # -- one step -----------------------------------------------------------

    def step(self) -> None:
        cfg = self.config
        g = self.grid
        dt = cfg.dt_s
        i = self.step_index
        t1 = cfg.start_day + (i + 1) * dt / SECONDS_PER_DAY

        f = self._f
        q_in, t_in = float(f.q_in[i]), float(f.t_in[i])
        do_in, bod_in = float(f.do_in[i]), float(f.bod_in[i])
        q_out, intake = float(f.q_out[i]), float(f.intake[i])
        wind = float(f.wind[i])

        # heat budget first: its latent term sets the evaporation volume
        kt0 = g.top_wet_layer(self.elevation_m)
        ts = self.state.temp_c[kt0, :]
        flux = surface_heat_flux(
            float(f.t_air[i]), float(f.t_dew[i]), wind, float(f.cloud[i]), ts,
            float(f.mid_day[i]), cfg.latitude_deg, self.params.thermal,
        )
        evap_ms = np.asarray(flux.evaporation_ms, dtype=np.float64)
        ev_m3s = float((evap_ms * g.plan_area_m2[kt0, :]).sum())

        e1 = update_surface(self.curve, self.elevation_m, q_in, q_out, ev_m3s, dt)
        ff = build_flow_field(
            g, self.state.temp_c, self.elevation_m, e1, dt,
            q_in, t_in, q_out, intake, evap_ms,
        )
        self.state, adv, n_sub = advect_adaptive(
            self.state, ff, t_in, do_in, bod_in, self.params.hydro
        )

        # geometry after the surface move
        kt1 = g.top_wet_layer(e1)
        v1 = ff.v_end
        kb = g.bed_layer
        wet_th = g.wet_thickness_m(e1)
        depth_top = np.maximum(e1 - g.z_top_m, 0.0)
        depth_bot = e1 - g.z_bottom_m
        area_top = g.plan_area_m2[kt1, :]

        t_f, d_f, b_f = self.state.temp_c, self.state.do_mgl, self.state.bod_mgl
        heat_j = apply_surface_flux(
            t_f, np.asarray(flux.shortwave_net), np.asarray(flux.net - flux.shortwave_net),
            v1, area_top, depth_top, depth_bot, kt1, kb, dt,
            self.params.thermal.light_extinction,
        )

        # vertical mixing: settle, diffuse (implicit, shared matrix), settle,
        # wind entrainment, settle
        _kernels.convective_adjust(t_f, d_f, b_f, v1, kt1, kb, STABILITY_TOL)
        cond = self._conductance(t_f, wet_th, kt1)
        _kernels.thomas_diffuse3(t_f, d_f, b_f, v1, cond, kt1, kb, dt)
        _kernels.convective_adjust(t_f, d_f, b_f, v1, kt1, kb, STABILITY_TOL)
        energy = self._wind_energy(
            wind, flux.net, t_f[kt1, :], area_top, float(wet_th[kt1]), dt
        )
        if energy.any():
            zc = 0.5 * (np.minimum(g.z_top_m, e1) + g.z_bottom_m)
            zc2 = np.ascontiguousarray(np.broadcast_to(zc[:, None], t_f.shape))
            _kernels.wind_entrain(t_f, d_f, b_f, v1, zc2, kt1, kb, energy, GRAVITY)
            _kernels.convective_adjust(t_f, d_f, b_f, v1, kt1, kb, STABILITY_TOL)

        kin = kinetics_step(
            t_f, d_f, b_f, v1, self._contact, np.full(g.n_segments, wet_th[kt1]),
            kt1, kb, wind, dt, self.params.oxygen,
        )

        self.elevation_m = e1
        self.volumes = v1
        self.step_index += 1
        self.t_days = t1

        self._adv[0] += adv.insertion
        self._adv[1] += adv.withdrawal
        self._adv[2] += adv.evaporation
        self._adv[3] += adv.clipped
        self._kin += [kin.bod_consumed_g, kin.sod_consumed_g, kin.reaeration_g,
                      kin.discarded_demand_g, kin.bod_decayed_g]
        self._heat_j += heat_j
        self._in_m3 += q_in * dt
        self._out_m3 += q_out * dt
        self._ev_m3 += ev_m3s * dt
        self._max_sub = max(self._max_sub, n_sub)

        if self.step_index % 24 == 0:
            self._check_state()

    def _conductance(self, temp: np.ndarray, wet_th: np.ndarray,
                     kt: int) -> np.ndarray:
        # rows above the surface have zero wet thickness; keep the division
        # finite, the kt slice below zeroes those interfaces anyway
        dzc = np.maximum(0.5 * (wet_th[:-1] + wet_th[1:]), 1e-12)
        # dry cells hold stale but finite values; every interface they touch
        # either has zero area or lies above kt
        rho = water_density(temp)
        n2 = (GRAVITY / RHO0) * (rho[1:, :] - rho[:-1, :]) / dzc[:, None]
        kz = kz_profile(np.maximum(n2, 0.0), self.params.hydro)
        cond = np.zeros_like(temp)
        cond[:-1, :] = kz * self._iface_area / dzc[:, None]
        cond[:kt, :] = 0.0
        return cond

    def _wind_energy(self, wind_ms, q_net, ts, area_top, dz_top, dt):
        p = self.params.hydro
        ustar = friction_velocity_water(float(wind_ms), p)
        rho_lo = water_density(np.maximum(ts - 0.25, -2.0))
        rho_hi = water_density(np.minimum(ts + 0.25, 50.0))
        alpha = -(rho_hi - rho_lo) / (0.5 * RHO0)
        b_flux = GRAVITY * alpha * np.maximum(np.asarray(q_net), 0.0) / (RHO0 * CP_WATER)
        rate = p.eta_wind * ustar**3 - 0.5 * np.maximum(b_flux, 0.0) * dz_top
        return RHO0 * dt * np.maximum(rate, 0.0) * area_top

    def _check_state(self) -> None:
        wet = self.volumes > 0.0
        for name, f in (("temperature", self.state.temp_c),
                        ("DO", self.state.do_mgl), ("BOD", self.state.bod_mgl)):
            if not np.isfinite(f[wet]).all():
                raise RuntimeFailure(
                    f"non-finite {name} at day {self.t_days:.3f}"
                )
        if (self.state.do_mgl[wet] < -1e-9).any() or (self.state.bod_mgl[wet] < -1e-9).any():
            raise RuntimeFailure(f"negative concentration at day {self.t_days:.3f}")

    # -- recording ----------------------------------------------------------

    def _balance_row(self) -> tuple[float, float, float, float]:
        v = self.volumes
        heat = RHO0 * CP_WATER * float((v * self.state.temp_c).sum())
        do_kg = float((v * self.state.do_mgl).sum()) / 1000.0
        return (self.t_days, float(v.sum()), heat, do_kg)

    def _snapshot(self) -> Snapshot:
        return Snapshot(
            day=self.t_days, elevation_m=self.elevation_m,
            temp_c=self.state.temp_c.copy(), do_mgl=self.state.do_mgl.copy(),
            bod_mgl=self.state.bod_mgl.copy(),
        )

    def _station_rows(self) -> Iterable[StationSample]:
        """One row per wet layer: the station's profile at this instant."""
        g = self.grid
        e = self.elevation_m
        kt = g.top_wet_layer(e)
        for name, seg in self.config.stations.items():
            j = seg - 1
            for k in range(kt, int(g.bed_layer[j]) + 1):
                zc = 0.5 * (min(float(g.z_top_m[k]), e) + float(g.z_bottom_m[k]))
                yield StationSample(
                    self.t_days, name, e - zc,
                    float(self.state.temp_c[k, j]), float(self.state.do_mgl[k, j]),
                )

    # -- driver -------------------------------------------------------------

    def run(self) -> RunOutput:
        cfg = self.config
        started = time.perf_counter()
        n = cfg.n_steps
        snap_at = {
            min(n, max(0, int(round((d - cfg.start_day) * SECONDS_PER_DAY / cfg.dt_s))))
            for d in cfg.snapshot_days
        }

        snapshots: list[Snapshot] = []
        # station cadence counts steps, not instants: a 10-day run at stride 1
        # gives exactly 240 sample times per station
        stations: list[StationSample] = []
        balance: list[tuple[float, float, float, float]] = [self._balance_row()]
        if 0 in snap_at:
            snapshots.append(self._snapshot())

        for i in range(1, n + 1):
            self.step()
            if i in snap_at:
                snapshots.append(self._snapshot())
            if i % cfg.station_stride_steps == 0 or i == n:
                stations.extend(self._station_rows())
            if i % cfg.balance_stride_steps == 0 or i == n:
                balance.append(self._balance_row())

        out = RunOutput(
            snapshots=snapshots, station_samples=stations,
            balance=np.array(balance, dtype=np.float64),
            transport=TransportAudit(*(row.copy() for row in self._adv)),
            kinetics=KineticsAudit(*self._kin.tolist()),
            surface_heat_j=self._heat_j,
            inflow_m3=self._in_m3, outflow_m3=self._out_m3, evaporated_m3=self._ev_m3,
            state=self.state, elevation_m=self.elevation_m,
            n_steps=n, max_substeps=self._max_sub,
            runtime_s=time.perf_counter() - started,
        )
        worst = max(out.closure_report().values())
        if worst > 1e-6:
            raise RuntimeFailure(f"budget drift {worst:.3g} exceeds roundoff band")
        return out


def run(config: RunConfig) -> RunOutput:
    """Build a simulation from the config and integrate the whole window."""
    return Simulation(config).run()
