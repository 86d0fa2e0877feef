import numpy as np
import pytest

from lares import hydro as H
from lares.errors import (
    CflViolation,
    DryPath,
    OutOfRange,
    ReservoirEmpty,
    ReservoirOverflow,
    RuntimeFailure,
)
from lares.grid import area_volume_curve, total_volume

from conftest import make_grid


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------

def test_density_maximum_anchor():
    assert H.water_density(3.9863) == 1000.0


def test_density_reference_values():
    # frozen from a longhand evaluation of the polynomial
    assert H.water_density(25.0) == pytest.approx(997.0751176664442, rel=1e-12)
    assert H.water_density(10.0) == pytest.approx(999.7281079900911, rel=1e-12)
    assert H.water_density(0.0) == pytest.approx(999.8675791619049, rel=1e-12)


def test_density_decreases_above_maximum():
    t = np.linspace(4.5, 40.0, 200)
    rho = H.water_density(t)
    assert np.all(np.diff(rho) < 0)


def test_density_range_guard():
    with pytest.raises(OutOfRange):
        H.water_density(-3.0)
    with pytest.raises(OutOfRange):
        H.water_density(np.array([10.0, 55.0]))


def test_thermal_expansion_sign():
    assert H.thermal_expansion(25.0) > 0
    assert H.thermal_expansion(3.9863) == pytest.approx(0.0, abs=1e-5)


# ---------------------------------------------------------------------------
# placement
# ---------------------------------------------------------------------------

def _placement_reference(rho, rho_in):
    """Longhand restatement of the placement rule."""
    if rho_in <= rho[0]:
        return 0, "over"
    if rho_in >= rho[-1]:
        return len(rho) - 1, "under"
    m = next(j for j in range(len(rho)) if rho[j] >= rho_in)
    return m - 1, "inter"


def test_placement_against_reference_scan():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        n = rng.integers(1, 12)
        rho = rng.uniform(995.0, 1000.0, size=n)
        rho_in = rng.uniform(994.0, 1001.0)
        want, kind = _placement_reference(rho, rho_in)
        got = H.placement_center(rho, rho_in)
        assert got == want, (rho, rho_in)
        w = H.inflow_placement(rho, rho_in)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        if kind == "over":
            assert w[0] == 1.0
        elif kind == "under":
            assert w[-1] == 1.0
        else:
            tri = np.maximum(0.0, 1.0 - np.abs(np.arange(n) - want) / 2.0)
            np.testing.assert_allclose(w, tri / tri.sum(), atol=1e-12)


def test_overflow_wins_surface_tie():
    rho = np.array([998.0, 998.0, 999.0])
    assert H.placement_center(rho, 998.0) == 0
    w = H.inflow_placement(rho, 998.0)
    assert w[0] == 1.0


def test_interflow_kernel_shape():
    rho = np.array([996.0, 997.0, 998.0, 999.0, 1000.0])
    w = H.inflow_placement(rho, 997.5)  # bracket (1, 2), center 1
    np.testing.assert_allclose(w, [0.25, 0.5, 0.25, 0.0, 0.0], atol=1e-12)


def test_interflow_kernel_truncates_at_surface():
    rho = np.array([996.0, 997.0, 998.0, 999.0])
    w = H.inflow_placement(rho, 996.5)  # center 0, upper lobe cut off
    np.testing.assert_allclose(w, [2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0], atol=1e-12)


# ---------------------------------------------------------------------------
# surface update
# ---------------------------------------------------------------------------

def test_update_surface_budget_round_trip(wedge_grid):
    curve = area_volume_curve(wedge_grid)
    e0 = 5.3
    e1 = H.update_surface(curve, e0, 20.0, 5.0, 0.5, 3600.0)
    assert curve.volume_at(e1) == pytest.approx(
        curve.volume_at(e0) + 3600.0 * 14.5, rel=1e-12
    )
    # zero budget leaves the surface where it was
    assert H.update_surface(curve, e0, 5.0, 5.0, 0.0, 3600.0) == pytest.approx(e0)


def test_update_surface_empty_and_overflow(wedge_grid):
    curve = area_volume_curve(wedge_grid)
    with pytest.raises(ReservoirEmpty):
        H.update_surface(curve, 0.5, 0.0, 500.0, 0.0, 3600.0)
    with pytest.raises(ReservoirOverflow):
        H.update_surface(curve, 5.99, 500.0, 0.0, 0.0, 3600.0)


# ---------------------------------------------------------------------------
# flow field
# ---------------------------------------------------------------------------

def _consistent_field(grid, temp, e0, q_in, t_in, q_out, intake, ev_ms, dt=3600.0):
    curve = area_volume_curve(grid)
    kt = grid.top_wet_layer(e0)
    ev_vol = float((ev_ms * grid.plan_area_m2[kt, :]).sum())
    e1 = H.update_surface(curve, e0, q_in, q_out, ev_vol, dt)
    return H.build_flow_field(grid, temp, e0, e1, dt, q_in, t_in, q_out, intake, ev_ms)


def test_flow_field_closes_continuity(wedge_grid):
    temp = np.full((6, 4), 15.0)
    temp[3:, :] = 8.0
    ff = _consistent_field(wedge_grid, temp, 5.3, 20.0, 12.0, 15.0, 2.5, np.full(4, 1e-8))
    assert ff.continuity_residual() < 1e-12
    assert np.all(ff.qh >= 0.0)
    assert np.all(ff.u[0, :] == 0.0)
    assert ff.insertion.sum() == pytest.approx(20.0, rel=1e-12)
    assert ff.withdrawal.sum() == pytest.approx(15.0, rel=1e-12)


def test_flow_field_many_random_cases():
    rng = np.random.default_rng(7)
    for _ in range(40):
        g = make_grid(
            n_layers=int(rng.integers(3, 9)),
            n_segments=int(rng.integers(2, 7)),
            top_width=float(rng.uniform(60, 140)),
            width_step_layer=float(rng.uniform(2, 9)),
            width_step_seg=float(rng.uniform(0, 6)),
        )
        e0 = float(g.datum_m + rng.uniform(0.55, 0.75) * (g.crest_m - g.datum_m))
        headroom = total_volume(g, g.crest_m) - total_volume(g, e0)
        stored = total_volume(g, e0)
        temp = np.clip(
            25.0 - rng.uniform(0.0, 2.0) * np.arange(g.n_layers)[:, None]
            + rng.normal(0, 0.3, size=(g.n_layers, g.n_segments)),
            5.0, 35.0,
        )
        q_in = float(rng.uniform(0.0, 0.2 * headroom / 3600.0))
        q_out = float(rng.uniform(0.0, 0.2 * stored / 3600.0))
        t_in = float(rng.uniform(6.0, 30.0))
        intake = float(rng.uniform(g.datum_m, e0))
        ev = np.full(g.n_segments, float(rng.uniform(0.0, 5e-8)))
        ff = _consistent_field(g, temp, e0, q_in, t_in, q_out, intake, ev)
        assert ff.continuity_residual() < 1e-11
        assert np.all(ff.qh >= 0.0)


def test_flow_field_rejects_inconsistent_surface_move(wedge_grid):
    temp = np.full((6, 4), 15.0)
    with pytest.raises(RuntimeFailure):
        H.build_flow_field(
            wedge_grid, temp, 5.3, 5.31, 3600.0, 20.0, 12.0, 15.0, 2.5, np.zeros(4)
        )


def test_flow_field_rejects_dry_column():
    g = make_grid(n_layers=6, top_width=100.0, width_step_layer=10.0, width_step_seg=0.0)
    g.width_m[2:, 1] = 0.0  # segment 2 bed at layer index 1
    g.bed_layer[1] = 1
    temp = np.full((6, 4), 15.0)
    with pytest.raises(DryPath):
        # surface below segment 2's bed splits the pool
        H.build_flow_field(g, temp, 3.5, 3.5, 3600.0, 0.0, 12.0, 0.0, 1.5, np.zeros(4))


def test_cold_inflow_travels_deep(wedge_grid):
    # strongly stratified: warm over cold; river colder than everything
    temp = np.linspace(28.0, 8.0, 6)[:, None] * np.ones((1, 4))
    ff = _consistent_field(wedge_grid, temp, 6.0, 10.0, 7.0, 10.0, 0.5, np.zeros(4))
    # all interface transport hugs the deepest shared layers
    k_flux = np.argmax(ff.qh, axis=0)
    assert np.all(k_flux == 5)
    assert ff.insertion[5, 0] == pytest.approx(10.0)


def test_warm_inflow_rides_surface(wedge_grid):
    temp = np.linspace(28.0, 8.0, 6)[:, None] * np.ones((1, 4))
    ff = _consistent_field(wedge_grid, temp, 6.0, 10.0, 30.0, 10.0, 0.5, np.zeros(4))
    assert ff.insertion[0, 0] == pytest.approx(10.0)
    k_flux = np.argmax(ff.qh, axis=0)
    assert np.all(k_flux == 0)


def test_interflow_spreads_at_matching_depth(wedge_grid):
    temp = np.linspace(28.0, 8.0, 6)[:, None] * np.ones((1, 4))
    t_in = float(temp[3, 0])  # matches layer index 3 exactly
    ff = _consistent_field(wedge_grid, temp, 6.0, 10.0, t_in, 10.0, 0.5, np.zeros(4))
    w = ff.insertion[:, 0] / 10.0
    # neutral depth sits in the bracket around layer 2/3
    assert w[2] + w[3] > 0.6
    assert w[0] == pytest.approx(0.0, abs=1e-12)


def test_withdrawal_taps_intake_layer(wedge_grid):
    temp = np.full((6, 4), 15.0)
    ff = _consistent_field(wedge_grid, temp, 6.0, 5.0, 15.0, 5.0, 1.5, np.zeros(4))
    k = int(np.argwhere(ff.withdrawal > 0)[0][0])
    # intake at 1.5 m sits in the layer spanning [1, 2)
    assert k == 4
    assert ff.withdrawal[k, -1] == pytest.approx(5.0)


def test_withdrawal_clamps_to_wet_range(wedge_grid):
    temp = np.full((6, 4), 15.0)
    ff = _consistent_field(wedge_grid, temp, 3.5, 5.0, 15.0, 5.0, 9.0, np.zeros(4))
    assert ff.withdrawal[wedge_grid.top_wet_layer(3.5), -1] == pytest.approx(5.0)


# ---------------------------------------------------------------------------
# advection
# ---------------------------------------------------------------------------

def _random_state(rng, shape):
    return H.CellField(
        temp_c=rng.uniform(6.0, 30.0, size=shape),
        do_mgl=rng.uniform(0.0, 12.0, size=shape),
        bod_mgl=rng.uniform(0.0, 6.0, size=shape),
    )


def _mass_closure(state0, state1, ff, audit):
    errs = []
    for j, (f0, f1) in enumerate(
        [(state0.temp_c, state1.temp_c), (state0.do_mgl, state1.do_mgl),
         (state0.bod_mgl, state1.bod_mgl)]
    ):
        m0 = (f0 * ff.v_start).sum()
        m1 = (f1 * ff.v_end).sum()
        dm = audit.insertion[j] - audit.withdrawal[j] - audit.evaporation[j] + audit.clipped[j]
        errs.append(abs(m1 - m0 - dm) / max(abs(m0), abs(m1), 1.0))
    return max(errs)


def test_advect_conserves_every_constituent(wedge_grid):
    rng = np.random.default_rng(3)
    temp = np.full((6, 4), 15.0)
    temp[3:, :] = 8.0
    ff = _consistent_field(wedge_grid, temp, 5.3, 20.0, 12.0, 15.0, 2.5, np.full(4, 1e-8))
    state = _random_state(rng, (6, 4))
    state.temp_c = temp.copy()
    out, audit = H.advect(state, ff, 12.0, 9.0, 5.0, n_substeps=H.cfl_substeps(ff))
    assert _mass_closure(state, out, ff, audit) < 1e-12


def test_advect_respects_bounds(wedge_grid):
    rng = np.random.default_rng(11)
    temp = np.full((6, 4), 15.0)
    ff = _consistent_field(wedge_grid, temp, 5.5, 8.0, 15.0, 8.0, 2.5, np.zeros(4))
    state = _random_state(rng, (6, 4))
    out, _ = H.advect(state, ff, 15.0, 9.0, 5.0, n_substeps=H.cfl_substeps(ff))
    wet = ff.v_end > 0
    for f0, f1, b in [
        (state.temp_c, out.temp_c, 15.0),
        (state.do_mgl, out.do_mgl, 9.0),
        (state.bod_mgl, out.bod_mgl, 5.0),
    ]:
        lo = min(f0[ff.v_start > 0].min(), b)
        hi = max(f0[ff.v_start > 0].max(), b)
        assert f1[wet].min() >= lo - 1e-10
        assert f1[wet].max() <= hi + 1e-10


def test_advect_flags_cfl_violation(wedge_grid):
    temp = np.full((6, 4), 15.0)
    # a large throughflow turns the thin surface cells over fast
    ff = _consistent_field(wedge_grid, temp, 5.5, 120.0, 15.0, 120.0, 5.5, np.zeros(4))
    assert H.cfl_substeps(ff) > 1
    state = H.CellField(temp.copy(), np.full((6, 4), 8.0), np.zeros((6, 4)))
    with pytest.raises(CflViolation):
        H.advect(state, ff, 15.0, 8.0, 0.0)
    out, _ = H.advect(state, ff, 15.0, 8.0, 0.0, n_substeps=H.cfl_substeps(ff))
    assert np.isfinite(out.temp_c).all()


def test_advect_withdrawal_carries_intake_concentration(wedge_grid):
    rng = np.random.default_rng(5)
    temp = np.full((6, 4), 15.0)
    ff = _consistent_field(wedge_grid, temp, 6.0, 5.0, 15.0, 5.0, 1.5, np.zeros(4))
    state = _random_state(rng, (6, 4))
    k = int(np.argwhere(ff.withdrawal > 0)[0][0])
    _, audit = H.advect(state, ff, 15.0, 9.0, 5.0, n_substeps=1)
    expect = 5.0 * 3600.0 * state.do_mgl[k, -1]
    assert audit.withdrawal[1] == pytest.approx(expect, rel=1e-12)


def test_advect_evaporation_carries_surface_concentration(wedge_grid):
    rng = np.random.default_rng(6)
    temp = np.full((6, 4), 15.0)
    ev = np.full(4, 2e-8)
    ff = _consistent_field(wedge_grid, temp, 6.0, 5.0, 15.0, 5.0, 1.5, ev)
    state = _random_state(rng, (6, 4))
    _, audit = H.advect(state, ff, 15.0, 9.0, 5.0, n_substeps=1)
    expect = (ff.evaporation * 3600.0 * state.bod_mgl[0, :]).sum()
    assert audit.evaporation[2] == pytest.approx(expect, rel=1e-12)
    # evaporation removes water at local strength: no concentration creep
    out, _ = H.advect(
        H.CellField(temp.copy(), np.full((6, 4), 8.0), np.full((6, 4), 3.0)),
        ff, 15.0, 8.0, 3.0, n_substeps=1,
    )
    assert out.do_mgl[0, 0] == pytest.approx(8.0, abs=1e-12)


def test_advect_conserves_through_a_drying_layer():
    g = make_grid(n_layers=6, n_segments=3, width_step_seg=0.0)
    rng = np.random.default_rng(9)
    temp = np.full((6, 3), 15.0)
    # surface starts a hair above an interface and falls through it
    ff = _consistent_field(g, temp, 5.02, 0.0, 15.0, 60.0, 2.5, np.zeros(3), dt=3600.0)
    assert g.top_wet_layer(ff.elevation_start) == 0
    assert g.top_wet_layer(ff.elevation_end) >= 1
    state = _random_state(rng, (6, 3))
    out, audit = H.advect(state, ff, 15.0, 9.0, 5.0, n_substeps=H.cfl_substeps(ff))
    assert _mass_closure(state, out, ff, audit) < 1e-12
    assert np.all(ff.v_end[0, :] == 0.0)


def test_advect_fills_a_new_top_layer():
    g = make_grid(n_layers=6, n_segments=3, width_step_seg=0.0)
    rng = np.random.default_rng(13)
    temp = np.full((6, 3), 15.0)
    ff = _consistent_field(g, temp, 4.98, 30.0, 15.0, 0.0, 2.5, np.zeros(3), dt=3600.0)
    assert g.top_wet_layer(ff.elevation_start) == 1
    assert g.top_wet_layer(ff.elevation_end) == 0
    state = _random_state(rng, (6, 3))
    state.temp_c = temp.copy()
    out, audit = H.advect(state, ff, 15.0, 9.0, 5.0, n_substeps=H.cfl_substeps(ff))
    assert _mass_closure(state, out, ff, audit) < 1e-12
    # the fresh layer holds water risen from below, not garbage
    wet_new = ff.v_end[0, :] > 0
    assert out.temp_c[0, wet_new] == pytest.approx(15.0, abs=1e-9)


# ---------------------------------------------------------------------------
# vertical mixing
# ---------------------------------------------------------------------------

def _column(n=6):
    v = np.array([1200.0, 1100.0, 1000.0, 900.0, 800.0, 700.0])[:n]
    zc = np.arange(n - 1, -1, -1.0) + 0.5
    th = np.ones(n)
    ia = 0.5 * (v[:-1] + v[1:])  # volumes are area*1m, so this is area-ish
    return v, th, zc, ia


def test_unstable_column_fully_homogenizes():
    v, th, zc, ia = _column(4)
    t = np.array([8.0, 10.0, 12.0, 14.0])  # cold over warm
    d = np.array([2.0, 4.0, 6.0, 8.0])
    b = np.zeros(4)
    tm, dm, bm = H.vertical_mixing(t, d, b, v, th, zc, ia, 0.0, 0.0, 3600.0)
    want = (t * v).sum() / v.sum()
    np.testing.assert_allclose(tm, want, rtol=1e-12)
    assert np.all(np.diff(H.water_density(tm)) >= -H.STABILITY_TOL)
    # the passengers blend with the same volume weights
    assert dm[0] == pytest.approx((d * v).sum() / v.sum(), rel=1e-12)


def test_mixing_conserves_all_constituents():
    rng = np.random.default_rng(17)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        v = rng.uniform(200.0, 2000.0, size=n)
        th = rng.uniform(0.5, 2.0, size=n)
        zc = np.cumsum(th[::-1])[::-1] - th / 2.0
        ia = rng.uniform(100.0, 1500.0, size=n - 1)
        t = rng.uniform(5.0, 30.0, size=n)
        d = rng.uniform(0.0, 12.0, size=n)
        b = rng.uniform(0.0, 5.0, size=n)
        wind = float(rng.uniform(0.0, 12.0))
        tm, dm, bm = H.vertical_mixing(t, d, b, v, th, zc, ia, wind, 0.0, 3600.0)
        for f0, f1 in ((t, tm), (d, dm), (b, bm)):
            assert (f1 * v).sum() == pytest.approx((f0 * v).sum(), rel=1e-12)
        assert np.all(np.diff(H.water_density(tm)) >= -1e-9)


def test_stronger_wind_mixes_deeper():
    v, th, zc, ia = _column(6)
    t = np.linspace(26.0, 10.0, 6)

    def mld(wind):
        tm, _, _ = H.vertical_mixing(
            t.copy(), np.zeros(6), np.zeros(6), v, th, zc, ia, wind, 0.0, 3600.0,
        )
        below = np.flatnonzero(np.abs(tm - tm[0]) > 1.0)
        return 6.0 if len(below) == 0 else float(below[0])

    depths = [mld(w) for w in (0.0, 4.0, 8.0, 16.0, 30.0)]
    assert depths == sorted(depths)
    assert depths[-1] > depths[0]


def test_surface_heating_suppresses_entrainment():
    v, th, zc, ia = _column(6)
    t = np.linspace(26.0, 10.0, 6)
    free = H.vertical_mixing(
        t.copy(), np.zeros(6), np.zeros(6), v, th, zc, ia, 14.0, 0.0, 3600.0
    )[0]
    capped = H.vertical_mixing(
        t.copy(), np.zeros(6), np.zeros(6), v, th, zc, ia, 14.0, 1e-5, 3600.0
    )[0]
    # a strong stabilizing buoyancy flux keeps the profile closer to its start
    assert np.abs(free - t).sum() > np.abs(capped - t).sum() + 0.01


def test_implicit_diffusion_matches_small_step_explicit():
    # same equation, same tiny step: backward and forward Euler agree to
    # second order, which pins the tridiagonal algebra
    n = 6
    v = np.array([1200.0, 1100.0, 1000.0, 900.0, 800.0, 700.0])
    cond = np.array([8.5e-3, 8.0e-3, 7.5e-3, 7.0e-3, 6.5e-3, 0.0])[:, None]
    t_imp = np.linspace(24.0, 10.0, n)[:, None].copy()
    t_exp = t_imp.copy()
    dt = 0.25
    kbot = np.array([n - 1], dtype=np.int64)
    from lares import _kernels

    for _ in range(14400):
        _kernels.thomas_diffuse(t_imp, v[:, None], cond, 0, kbot, dt)
        flux = cond[:-1, 0] * (t_exp[1:, 0] - t_exp[:-1, 0])
        t_new = t_exp[:, 0].copy()
        t_new[:-1] += dt * flux / v[:-1]
        t_new[1:] -= dt * flux / v[1:]
        t_exp[:, 0] = t_new
    np.testing.assert_allclose(t_imp, t_exp, atol=1e-6)
    assert (t_imp[:, 0] * v).sum() == pytest.approx(
        (np.linspace(24.0, 10.0, n) * v).sum(), rel=1e-12
    )


def test_diffusion_flattens_in_the_long_run():
    n = 5
    v = np.full(n, 1000.0)
    cond = np.full((n, 1), 50.0)
    cond[-1, 0] = 0.0
    t = np.linspace(30.0, 10.0, n)[:, None].copy()
    from lares import _kernels

    _kernels.thomas_diffuse(t, v[:, None], cond, 0, np.array([n - 1], dtype=np.int64), 1e9)
    np.testing.assert_allclose(t[:, 0], 20.0, atol=1e-6)


def test_kz_profile_limits():
    p = H.HydroParams()
    assert H.kz_profile(np.array([0.0]), p)[0] == pytest.approx(p.kz_max)
    assert H.kz_profile(np.array([1.0]), p)[0] < 2.0 * p.kz_min
    n2 = np.array([0.0, 1e-6, 1e-4, 1e-2])
    kz = H.kz_profile(n2, p)
    assert np.all(np.diff(kz) < 0)
