import numpy as np
import pytest

from lares import thermal as T
from lares.errors import OutOfRange, SingularSystem
from lares.params import CP_WATER, RHO0


def test_vapor_pressure_anchor_and_reference():
    assert T.saturation_vapor_pressure_hpa(0.0) == 6.112
    assert T.saturation_vapor_pressure_hpa(20.0) == pytest.approx(
        23.32596022097807, rel=1e-12
    )
    t = np.linspace(-10.0, 40.0, 50)
    assert np.all(np.diff(T.saturation_vapor_pressure_hpa(t)) > 0)


def test_clear_sky_solar_reference_values():
    # frozen from a longhand evaluation
    assert T.clear_sky_solar(172, 36.7) == pytest.approx(372.9095304863122, rel=1e-12)
    assert T.clear_sky_solar(355, 36.7) == pytest.approx(130.31200821775184, rel=1e-12)
    assert T.clear_sky_solar(80, 36.7) == pytest.approx(258.9025109988489, rel=1e-12)
    assert T.clear_sky_solar(172, 0.0) == pytest.approx(298.11550881134696, rel=1e-12)


def test_clear_sky_solar_seasonal_shape():
    lat = 36.7
    days = np.arange(1, 366)
    s = np.array([T.clear_sky_solar(d, lat) for d in days])
    assert s.argmax() in range(150, 200)  # peaks near the June solstice
    assert s.argmin() + 1 in range(335, 366) or s.argmin() + 1 in range(1, 30)
    assert s.min() > 0
    with pytest.raises(OutOfRange):
        T.clear_sky_solar(100, 80.0)


def test_surface_heat_flux_reference_case():
    fb = T.surface_heat_flux(25.0, 18.0, 3.0, 0.3, 24.0, 200, 36.7)
    assert fb.shortwave_net == pytest.approx(319.943045650411, rel=1e-12)
    assert fb.longwave_atm == pytest.approx(357.21512656664146, rel=1e-12)
    assert fb.longwave_back == pytest.approx(428.83123352018845, rel=1e-12)
    assert fb.latent == pytest.approx(122.3890697567161, rel=1e-12)
    assert fb.sensible == pytest.approx(-8.1374, rel=1e-12)
    assert fb.net == pytest.approx(134.07526894014788, rel=1e-12)
    assert fb.evaporation_ms == pytest.approx(4.999361534186028e-08, rel=1e-12)


def test_heat_flux_responds_the_right_way():
    base = T.surface_heat_flux(25.0, 18.0, 3.0, 0.3, 24.0, 200, 36.7)
    hotter_water = T.surface_heat_flux(25.0, 18.0, 3.0, 0.3, 28.0, 200, 36.7)
    assert hotter_water.net < base.net  # warmer surface loses more
    cloudier = T.surface_heat_flux(25.0, 18.0, 3.0, 0.9, 24.0, 200, 36.7)
    assert cloudier.shortwave_net < base.shortwave_net
    assert cloudier.longwave_atm > base.longwave_atm
    windier = T.surface_heat_flux(25.0, 18.0, 9.0, 0.3, 24.0, 200, 36.7)
    assert windier.latent > base.latent
    assert windier.evaporation_ms > base.evaporation_ms


def test_condensation_does_not_evaporate():
    # cold surface under humid air: latent flux reverses, evaporation stops
    fb = T.surface_heat_flux(28.0, 26.0, 4.0, 0.2, 12.0, 200, 36.7)
    assert fb.latent < 0
    assert fb.evaporation_ms == 0.0


def test_heat_flux_vectorizes_over_surface_temperature():
    ts = np.array([20.0, 24.0, 28.0])
    fb = T.surface_heat_flux(25.0, 18.0, 3.0, 0.3, ts, 200, 36.7)
    assert fb.net.shape == (3,)
    assert np.all(np.diff(fb.net) < 0)
    one = T.surface_heat_flux(25.0, 18.0, 3.0, 0.3, 24.0, 200, 36.7)
    assert fb.net[1] == pytest.approx(one.net, rel=1e-12)


def test_buoyancy_flux_sign():
    assert T.buoyancy_flux(200.0, 25.0) > 0
    assert T.buoyancy_flux(-200.0, 25.0) == 0.0


def _three_layer_setup():
    temp = np.full((3, 1), 10.0)
    vol = np.full((3, 1), 1000.0)
    area = np.array([1000.0])
    d_top = np.array([0.0, 1.0, 2.0])
    d_bot = np.array([1.0, 2.0, 3.0])
    kbot = np.array([2])
    return temp, vol, area, d_top, d_bot, kbot


def test_nonsolar_flux_warms_the_top_metre():
    temp, vol, area, d_top, d_bot, kbot = _three_layer_setup()
    heat = T.apply_surface_flux(
        temp, np.zeros(1), np.full(1, 100.0), vol, area, d_top, d_bot, 0, kbot,
        3600.0, 0.45,
    )
    # 100 W/m2 for one hour into a 1 m cell
    want = 100.0 * 3600.0 / (RHO0 * CP_WATER * 1.0)
    assert temp[0, 0] - 10.0 == pytest.approx(want, rel=1e-12)
    assert temp[1, 0] == 10.0
    assert heat == pytest.approx(100.0 * 1000.0 * 3600.0, rel=1e-12)


def test_solar_fractions_tile_the_column():
    _, _, _, d_top, d_bot, kbot = _three_layer_setup()
    frac = T.solar_fractions(d_top, d_bot, 0, kbot, 0.45)
    assert frac[:, 0].sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(frac[:2, 0]) < 0)  # decays downward
    # light reaching the bed lands in the bottom cell
    assert frac[2, 0] > np.exp(-0.45 * 2.0) - np.exp(-0.45 * 3.0)


def test_solar_heating_decays_with_depth():
    temp, vol, area, d_top, d_bot, kbot = _three_layer_setup()
    T.apply_surface_flux(
        temp, np.full(1, 200.0), np.zeros(1), vol, area, d_top, d_bot, 0, kbot,
        3600.0, 0.45,
    )
    dT = temp[:, 0] - 10.0
    assert dT[0] > dT[1]
    assert np.all(dT > 0)


def test_shallow_columns_share_one_ladder():
    # two segments, one with a higher bed; fractions close independently
    temp = np.full((3, 2), 10.0)
    vol = np.full((3, 2), 1000.0)
    vol[2, 1] = 0.0
    area = np.array([1000.0, 800.0])
    d_top = np.array([0.0, 1.0, 2.0])
    d_bot = np.array([1.0, 2.0, 3.0])
    kbot = np.array([2, 1])
    heat = T.apply_surface_flux(
        temp, np.full(2, 200.0), np.full(2, 50.0), vol, area, d_top, d_bot, 0, kbot,
        3600.0, 0.45,
    )
    assert temp[2, 1] == 10.0  # below the shorter column's bed: untouched
    want = 3600.0 * (area * 250.0).sum()
    assert heat == pytest.approx(want, rel=1e-12)
    frac = T.solar_fractions(d_top, d_bot, 0, kbot, 0.45)
    np.testing.assert_allclose(frac.sum(axis=0), 1.0, atol=1e-12)


def test_sliver_surface_cell_does_not_blow_up():
    # surface a hair above an interface: the non-solar load spreads through
    # a half-metre window instead of one paper-thin cell
    temp = np.full((3, 1), 25.0)
    area = np.array([1000.0])
    sliver = 0.002
    vol = np.array([[sliver * 1000.0], [1000.0], [1000.0]])
    d_top = np.array([0.0, sliver, sliver + 1.0])
    d_bot = np.array([sliver, sliver + 1.0, sliver + 2.0])
    kbot = np.array([2])
    T.apply_surface_flux(
        temp, np.full(1, 300.0), np.full(1, 300.0), vol, area, d_top, d_bot, 0, kbot,
        3600.0, 0.45,
    )
    assert temp[0, 0] - 25.0 < 2.0


def test_temperature_diffusion_conserves_and_validates():
    temp = np.linspace(24.0, 10.0, 6)[:, None].copy()
    vol = np.full((6, 1), 1000.0)
    cond = np.full((6, 1), 5.0)
    cond[-1, 0] = 0.0
    kbot = np.array([5])
    before = (temp[:, 0] * vol[:, 0]).sum()
    T.diffuse_temperature(temp, vol, cond, 0, kbot, 3600.0)
    assert (temp[:, 0] * vol[:, 0]).sum() == pytest.approx(before, rel=1e-12)
    assert np.all(np.diff(temp[:, 0]) < 0)  # still monotone, just flatter
    with pytest.raises(SingularSystem):
        T.diffuse_temperature(temp, vol, -cond, 0, kbot, 3600.0)
