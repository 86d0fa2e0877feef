"""Hydrodynamics: density routing, continuity flow fields, transport, mixing.

The model carries no momentum equation. The surface is a level pool moved
by the volume budget, inflow enters the head segment at its
neutral-buoyancy depth, the flux crossing each segment interface is
re-distributed against the receiving column's density profile (underflow
on a shallow bed turns into an interflow where the water column is deep
enough to be neutrally buoyant, the paper-order behaviour of a river
plume), and vertical fluxes close each column's continuity exactly.
Transport is first-order upwind and mass conservative under CFL. Vertical
mixing is three staged closures: convective adjustment, a
stratification-limited implicit diffusion, and wind-driven mixed-layer
entrainment with a turbulent-kinetic-energy budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    CflViolation,
    DryPath,
    OutOfRange,
    ReservoirEmpty,
    ReservoirOverflow,
    RuntimeFailure,
    SingularSystem,
)
from .grid import AreaVolumeCurve, Grid
from .params import GRAVITY, RHO0, RHO_AIR, HydroParams

DENSITY_T_MIN = -2.0
DENSITY_T_MAX = 50.0
CFL_TARGET = 0.9
STABILITY_TOL = 1.0e-12  # kg m-3, static-stability tolerance after mixing


def water_density(t_c):
    """Fresh-water density (kg m-3); exactly 1000.0 at t = 3.9863 C.

    Accepts scalars or arrays; raises OutOfRange outside [-2, 50] C.
    """
    t = np.asarray(t_c, dtype=np.float64)
    if np.any(t < DENSITY_T_MIN) or np.any(t > DENSITY_T_MAX):
        raise OutOfRange(
            f"temperature outside [{DENSITY_T_MIN}, {DENSITY_T_MAX}] C for density"
        )
    rho = 1000.0 * (
        1.0 - ((t + 288.9414) / (508929.2 * (t + 68.12963))) * (t - 3.9863) ** 2
    )
    return float(rho) if np.isscalar(t_c) else rho


def thermal_expansion(t_c: float) -> float:
    """Local expansion coefficient -(drho/dT)/rho0 (K-1), finite difference."""
    lo = max(t_c - 0.25, DENSITY_T_MIN)
    hi = min(t_c + 0.25, DENSITY_T_MAX)
    return float(-(water_density(hi) - water_density(lo)) / ((hi - lo) * RHO0))


@dataclass
class CellField:
    """Cell-centered state (L, N): temperature, DO, BOD. Dry cells hold 0."""

    temp_c: np.ndarray
    do_mgl: np.ndarray
    bod_mgl: np.ndarray

    def copy(self) -> "CellField":
        return CellField(self.temp_c.copy(), self.do_mgl.copy(), self.bod_mgl.copy())

    @classmethod
    def zeros(cls, n_layers: int, n_segments: int) -> "CellField":
        return cls(
            np.zeros((n_layers, n_segments)),
            np.zeros((n_layers, n_segments)),
            np.zeros((n_layers, n_segments)),
        )


@dataclass(frozen=True)
class SurfaceState:
    """Level-pool surface at one instant."""

    elevation_m: float
    top_layer: int
    plan_area_m2: np.ndarray     # (N,), area of the top wet cell per segment
    evaporation_ms: np.ndarray   # (N,), evaporation rate


@dataclass
class FlowField:
    """Continuity-closed advective fluxes for one step (m3 s-1).

    ``qh[k, i]`` crosses the interface between segments i and i+1 toward
    the dam (always >= 0). ``u[k, i]`` crosses the top interface of layer
    k, positive upward. ``insertion`` carries the river inflow,
    ``withdrawal`` the dam extraction, ``evaporation`` leaves the top wet
    layer. ``dvdt`` is each cell's volume tendency; v_start/v_end are the
    cell volumes the field connects.
    """

    qh: np.ndarray
    u: np.ndarray
    insertion: np.ndarray
    withdrawal: np.ndarray
    evaporation: np.ndarray
    dvdt: np.ndarray
    ktop: int
    kbot: np.ndarray
    v_start: np.ndarray
    v_end: np.ndarray
    elevation_start: float
    elevation_end: float
    dt_s: float

    def outflow_rate(self) -> np.ndarray:
        """Per-cell total advective outflux (m3 s-1), mirroring the kernel."""
        n_layers, n_seg = self.insertion.shape
        out = np.zeros((n_layers, n_seg))
        out[:, :-1] += self.qh
        out += self.withdrawal
        out[self.ktop, :] += self.evaporation
        out += np.maximum(self.u, 0.0)
        u_below = np.vstack([self.u[1:, :], np.zeros((1, n_seg))])
        out += np.maximum(-u_below, 0.0)
        return out

    def continuity_residual(self) -> float:
        """Max cell imbalance relative to the field's flow scale."""
        n_layers, n_seg = self.insertion.shape
        u_below = np.vstack([self.u[1:, :], np.zeros((1, n_seg))])
        resid = self.insertion.copy()
        resid[:, 1:] += self.qh
        resid[:, :-1] -= self.qh
        resid += u_below - self.u
        resid -= self.withdrawal
        resid[self.ktop, :] -= self.evaporation
        resid -= self.dvdt
        scale = max(
            float(self.insertion.sum() + self.withdrawal.sum() + np.abs(self.dvdt).sum()),
            1e-12,
        )
        return float(np.abs(resid).max() / scale)


@dataclass(frozen=True)
class TransportAudit:
    """Boundary mass moved by one advection call (concentration * m3)."""

    insertion: np.ndarray    # (3,) for T, DO, BOD
    withdrawal: np.ndarray
    evaporation: np.ndarray
    clipped: np.ndarray


# ---------------------------------------------------------------------------
# density placement
# ---------------------------------------------------------------------------

def placement_center(densities: np.ndarray, rho_in: float) -> int:
    """Neutral-buoyancy layer index for a wet column (top-down densities).

    Overflow wins ties at the surface, underflow at the bed; otherwise the
    center is the shallower member of the first bracketing pair from the
    top.
    """
    rho = np.asarray(densities, dtype=np.float64)
    if rho.ndim != 1 or rho.size == 0:
        raise OutOfRange("placement needs a non-empty 1-D density column")
    if rho_in <= rho[0]:
        return 0
    if rho_in >= rho[-1]:
        return int(rho.size - 1)
    m = int(np.argmax(rho >= rho_in))  # first layer at least as dense
    return m - 1


def placement_weights(n: int, center: int) -> np.ndarray:
    """Triangular kernel of half-width 2 around ``center``, truncated to
    [0, n) and renormalized."""
    k = np.arange(n, dtype=np.float64)
    w = np.maximum(0.0, 1.0 - np.abs(k - center) / 2.0)
    total = w.sum()
    if total <= 0.0:
        w[:] = 0.0
        w[min(max(center, 0), n - 1)] = 1.0
        return w
    return w / total


def inflow_placement(densities: np.ndarray, rho_in: float) -> np.ndarray:
    """Distribution weights of an inflow over a wet column.

    Pure underflow/overflow collapse onto the bed/surface layer; an
    interflow spreads a triangular kernel around the neutral layer.
    """
    rho = np.asarray(densities, dtype=np.float64)
    center = placement_center(rho, rho_in)
    if center == 0 and rho_in <= rho[0]:
        w = np.zeros(rho.size)
        w[0] = 1.0
        return w
    if center == rho.size - 1 and rho_in >= rho[-1]:
        w = np.zeros(rho.size)
        w[-1] = 1.0
        return w
    return placement_weights(rho.size, center)


# ---------------------------------------------------------------------------
# surface update and flow field
# ---------------------------------------------------------------------------

def update_surface(
    curve: AreaVolumeCurve,
    elevation_m: float,
    q_in_m3s: float,
    q_out_m3s: float,
    evap_m3s: float,
    dt_s: float,
) -> float:
    """Move the level pool through the stage curve by the volume budget."""
    v0 = curve.volume_at(elevation_m)
    v1 = v0 + dt_s * (q_in_m3s - q_out_m3s - evap_m3s)
    if v1 < 0.0:
        raise ReservoirEmpty(f"volume budget went negative ({v1:.3g} m3)")
    if v1 > float(curve.volume_m3[-1]):
        raise ReservoirOverflow(
            f"volume {v1:.6g} m3 exceeds grid capacity {float(curve.volume_m3[-1]):.6g} m3"
        )
    return curve.elevation_at(v1)


def build_flow_field(
    grid: Grid,
    temp_c: np.ndarray,
    elevation_start: float,
    elevation_end: float,
    dt_s: float,
    q_in_m3s: float,
    t_in_c: float,
    q_out_m3s: float,
    intake_elev_m: float,
    evap_ms: np.ndarray,
) -> FlowField:
    """Route the step's flows: insertion, interface placement, closure.

    Sweeps upstream to dam. The flux crossing each interface is the head
    inflow minus everything stored or extracted upstream of it, distributed
    over the mutually wet layers by the density-placement kernel against
    the receiving column (the plume keeps the river density along the
    path). Vertical fluxes close every column's continuity.
    """
    n_layers, n_seg = grid.n_layers, grid.n_segments
    kt0 = grid.top_wet_layer(elevation_start)
    # boundary fluxes ride the layer that holds water for the whole step;
    # a sliver that dries (or a layer still filling) cannot carry them
    kt = max(kt0, grid.top_wet_layer(elevation_end))
    kb = grid.bed_layer
    if (kb < kt).any():
        i = int(np.argwhere(kb < kt)[0][0])
        raise DryPath(f"segment {i + 1} is dry at surface {elevation_start:.3f} m")
    # nor can a film barely covering an interface: forcing the whole head
    # inflow through centimeters of water would demand thousands of CFL
    # sub-steps. Route through the first layer holding at least half its
    # nominal thickness; the vertical closure tops the film up.
    e_low = min(elevation_start, elevation_end)
    while (
        kt < n_layers - 1
        and bool((kb > kt).all())
        and e_low - grid.z_bottom_m[kt] < 0.5 * grid.dz_m[kt]
    ):
        kt += 1

    v0 = grid.cell_volumes_m3(elevation_start)
    v1 = grid.cell_volumes_m3(elevation_end)
    dvdt = (v1 - v0) / dt_s

    # the volume evaporated is set by the exposed area at the start of the
    # step (what the surface budget saw); the flux row is kt so it never
    # pulls from a cell that dries mid-step
    area_top = grid.plan_area_m2[kt0, :]
    ev = np.asarray(evap_ms, dtype=np.float64) * area_top

    # the elevations must come from the same volume budget the fluxes
    # describe, otherwise the closure sweep invents or destroys water
    imbalance = q_in_m3s - q_out_m3s - ev.sum() - dvdt.sum()
    scale = max(abs(q_in_m3s), abs(q_out_m3s), abs(float(dvdt.sum())), 1.0)
    if abs(imbalance) > 1e-6 * scale:
        raise RuntimeFailure(
            f"surface move inconsistent with flows: residual {imbalance:.6g} m3/s"
        )

    rho = np.zeros((n_layers, n_seg))
    wet = v0 > 0.0
    rho[wet] = water_density(temp_c[wet])
    rho_in = water_density(t_in_c)

    # head insertion against the first column
    w0 = np.zeros((n_layers, 1))
    _kernels.placement_field(
        rho, kt, kb[:1], kb[:1], rho_in, np.zeros(1, dtype=np.int64), w0
    )
    insertion = np.zeros((n_layers, n_seg))
    insertion[:, 0] = q_in_m3s * w0[:, 0]

    # withdrawal from the intake layer at the dam
    withdrawal = np.zeros((n_layers, n_seg))
    k_int = int(np.clip(
        np.searchsorted(-grid.z_bottom_m, -intake_elev_m, side="right"), kt, kb[-1]
    ))
    withdrawal[k_int, n_seg - 1] = q_out_m3s

    # interface throughflow: head inflow minus upstream sinks and storage
    col_sink = ev + dvdt.sum(axis=0) + withdrawal.sum(axis=0)
    q_int = q_in_m3s - np.cumsum(col_sink)[:-1]
    q_int = np.where(q_int > 0.0, q_int, 0.0)

    qh = np.zeros((n_layers, n_seg - 1))
    if n_seg > 1:
        kb_mutual = np.minimum(kb[:-1], kb[1:])
        w = np.zeros((n_layers, n_seg - 1))
        _kernels.placement_field(
            rho, kt, kb[1:], kb_mutual, rho_in, np.arange(1, n_seg, dtype=np.int64), w
        )
        qh = w * q_int[None, :]

    resid = insertion.copy()
    resid[:, 1:] += qh
    resid[:, :-1] -= qh
    resid -= withdrawal
    resid[kt, :] -= ev
    resid -= dvdt
    u = np.cumsum(resid[::-1, :], axis=0)[::-1, :]
    u[0, :] = 0.0  # level-pool closure: no advective flux through the surface

    return FlowField(
        qh=qh, u=u, insertion=insertion, withdrawal=withdrawal, evaporation=ev,
        dvdt=dvdt, ktop=kt, kbot=kb.copy(), v_start=v0, v_end=v1,
        elevation_start=elevation_start, elevation_end=elevation_end, dt_s=dt_s,
    )


# ---------------------------------------------------------------------------
# transport
# ---------------------------------------------------------------------------

def cfl_substeps(flow: FlowField, params: HydroParams | None = None) -> int:
    """Sub-step count keeping every donor cell under the CFL target.

    A cell may export at most ``CFL_TARGET`` of the volume it holds at the
    start of each sub-step. Volume it loses to the falling surface counts
    toward that allowance (a pure drain is exactly stable at any rate), so
    the bound per cell is::

        load <= target * (n * v_end + (v_start - v_end))    (draining)
        load <= target * n * v_start                        (filling)

    Cells that start or end dry are exempt; the kernel's downward flush
    moves their remnant conservatively.
    """
    params = params or HydroParams()
    worst = _kernels.cfl_worst(
        flow.qh, flow.u, flow.withdrawal, flow.evaporation,
        flow.ktop, flow.v_start, flow.v_end, flow.dt_s, CFL_TARGET,
    )
    n = max(1, int(np.ceil(worst)))
    if n > params.max_substeps:
        raise CflViolation(
            f"advection needs {n} sub-steps (limit {params.max_substeps})"
        )
    return n


def _advect_core(
    state: CellField, flow: FlowField, t_in_c: float, do_in_mgl: float,
    bod_in_mgl: float, n_substeps: int,
) -> tuple[CellField, TransportAudit]:
    src = state.copy()
    dst = CellField.zeros(*state.temp_c.shape)
    audit = np.zeros((3, 4))
    dt_sub = flow.dt_s / n_substeps
    dv = flow.v_end - flow.v_start
    for j in range(n_substeps):
        v_a = flow.v_start + dv * (j / n_substeps)
        v_b = flow.v_start + dv * ((j + 1) / n_substeps)
        if j == n_substeps - 1:
            v_b = flow.v_end
        _kernels.advect_pass(
            src.temp_c, src.do_mgl, src.bod_mgl,
            dst.temp_c, dst.do_mgl, dst.bod_mgl,
            flow.qh, flow.u, flow.insertion, flow.withdrawal, flow.evaporation,
            v_a, v_b,
            flow.ktop, flow.kbot, dt_sub,
            float(t_in_c), float(do_in_mgl), float(bod_in_mgl),
            audit,
        )
        src, dst = dst, src
    return src, TransportAudit(
        insertion=audit[:, 0].copy(),
        withdrawal=audit[:, 1].copy(),
        evaporation=audit[:, 2].copy(),
        clipped=audit[:, 3].copy(),
    )


def advect(
    state: CellField,
    flow: FlowField,
    t_in_c: float,
    do_in_mgl: float,
    bod_in_mgl: float,
    *,
    n_substeps: int | None = None,
) -> tuple[CellField, TransportAudit]:
    """Upwind transport of T/DO/BOD through a flow field.

    Raises CflViolation when a single pass would exceed the CFL bound and
    no sub-stepping was requested. Volumes move linearly from v_start to
    v_end across the sub-steps.
    """
    needed = cfl_substeps(flow)
    if n_substeps is None:
        if needed > 1:
            raise CflViolation(
                f"step needs {needed} sub-steps; pass n_substeps or shrink dt"
            )
        n_substeps = 1
    elif n_substeps < needed:
        raise CflViolation(f"{n_substeps} sub-steps given, {needed} required")
    return _advect_core(state, flow, t_in_c, do_in_mgl, bod_in_mgl, n_substeps)


def advect_adaptive(
    state: CellField,
    flow: FlowField,
    t_in_c: float,
    do_in_mgl: float,
    bod_in_mgl: float,
    params: HydroParams | None = None,
) -> tuple[CellField, TransportAudit, int]:
    """Like :func:`advect` but picks the sub-step count itself.

    Returns the count it used; still refuses fields needing more than
    ``params.max_substeps``.
    """
    n = cfl_substeps(flow, params)
    field, audit = _advect_core(state, flow, t_in_c, do_in_mgl, bod_in_mgl, n)
    return field, audit, n


# ---------------------------------------------------------------------------
# vertical mixing
# ---------------------------------------------------------------------------

def buoyancy_frequency_sq(
    temp_c: np.ndarray, dz_center_m: np.ndarray
) -> np.ndarray:
    """N^2 (s-2) at the interface below each layer; last row unused.

    ``dz_center_m`` is the center-to-center distance between layer k and
    k+1. Negative (unstable) values are clamped to zero.
    """
    rho = water_density(temp_c)
    drho = rho[1:] - rho[:-1] if temp_c.ndim == 1 else rho[1:, :] - rho[:-1, :]
    n2 = (GRAVITY / RHO0) * drho / dz_center_m
    return np.maximum(n2, 0.0)


def kz_profile(n2: np.ndarray, params: HydroParams) -> np.ndarray:
    """Stratification-limited vertical diffusivity (m2 s-1)."""
    return params.kz_min + (params.kz_max - params.kz_min) / (1.0 + params.sigma_n2 * n2)


def friction_velocity_water(wind_ms: float, params: HydroParams) -> float:
    """Water-side friction velocity from the 10 m wind (m s-1)."""
    return float(wind_ms) * np.sqrt(params.drag_coeff * RHO_AIR / RHO0)


def wind_energy_per_area(
    wind_ms: float, buoyancy_flux_m2s3: float, dz_top_m: float, dt_s: float,
    params: HydroParams,
) -> float:
    """TKE available for entrainment over one step (J m-2).

    A stabilizing surface buoyancy flux (positive, heating) consumes part
    of the wind work before it can deepen the layer.
    """
    ustar = friction_velocity_water(wind_ms, params)
    rate = params.eta_wind * ustar**3 - 0.5 * max(buoyancy_flux_m2s3, 0.0) * dz_top_m
    return RHO0 * dt_s * max(rate, 0.0)


def vertical_mixing(
    temp_c: np.ndarray,
    do_mgl: np.ndarray,
    bod_mgl: np.ndarray,
    volume_m3: np.ndarray,
    thickness_m: np.ndarray,
    z_center_m: np.ndarray,
    interface_area_m2: np.ndarray,
    wind_ms: float,
    buoyancy_flux_m2s3: float,
    dt_s: float,
    params: HydroParams | None = None,
    *,
    diffuse_temperature: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mix one wet column: convective adjustment, Kz diffusion, wind work.

    Arrays are top-down over the wet cells only; ``interface_area_m2``
    describes the n-1 interior interfaces. Returns the mixed
    (temp, do, bod). Conserves each constituent's volume-weighted total to
    roundoff and leaves the column statically stable.
    """
    params = params or HydroParams()
    n = temp_c.size
    t = np.ascontiguousarray(temp_c, dtype=np.float64).reshape(n, 1).copy()
    d = np.ascontiguousarray(do_mgl, dtype=np.float64).reshape(n, 1).copy()
    b = np.ascontiguousarray(bod_mgl, dtype=np.float64).reshape(n, 1).copy()
    v = np.ascontiguousarray(volume_m3, dtype=np.float64).reshape(n, 1)
    if np.any(v <= 0.0):
        raise SingularSystem("vertical_mixing needs strictly positive cell volumes")
    dz = np.asarray(thickness_m, dtype=np.float64).reshape(n)
    zc = np.ascontiguousarray(z_center_m, dtype=np.float64).reshape(n, 1)
    kbot = np.array([n - 1], dtype=np.int64)

    _kernels.convective_adjust(t, d, b, v, 0, kbot, STABILITY_TOL)

    if n > 1:
        dzc = 0.5 * (dz[:-1] + dz[1:])
        n2 = buoyancy_frequency_sq(t[:, 0], dzc)
        kz = kz_profile(n2, params)
        cond = np.zeros((n, 1))
        cond[:-1, 0] = kz * np.asarray(interface_area_m2) / dzc
        if diffuse_temperature:
            _kernels.thomas_diffuse(t, v, cond, 0, kbot, dt_s)
        _kernels.thomas_diffuse(d, v, cond, 0, kbot, dt_s)
        _kernels.thomas_diffuse(b, v, cond, 0, kbot, dt_s)
        _kernels.convective_adjust(t, d, b, v, 0, kbot, STABILITY_TOL)

    if n > 1 and wind_ms > 0.0:
        e_area = wind_energy_per_area(
            wind_ms, buoyancy_flux_m2s3, float(dz[0]), dt_s, params
        )
        area_top = float(v[0, 0]) / float(dz[0])
        energy = np.array([e_area * area_top])
        _kernels.wind_entrain(t, d, b, v, zc, 0, kbot, energy, GRAVITY)
        # entrainment can nudge a near-4C profile past neutral; settle it
        _kernels.convective_adjust(t, d, b, v, 0, kbot, STABILITY_TOL)

    return t[:, 0], d[:, 0], b[:, 0]
