import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lares.errors import (
    ElevationOutOfRange,
    MissingCell,
    NegativeGeometry,
    NonMonotonicWidth,
    ParseError,
)
from lares.grid import (
    BATHYMETRY_HEADER,
    area_volume_curve,
    load_bathymetry,
    total_volume,
    write_bathymetry,
)

from conftest import make_grid


def test_header_layout():
    assert BATHYMETRY_HEADER == [
        "segment", "layer", "elevation_bottom_m", "thickness_m", "width_m", "length_m",
    ]


def test_segment_accessor_is_one_based(wedge_grid):
    s1 = wedge_grid.segment(1)
    s4 = wedge_grid.segment(4)
    assert s1.segment == 1
    assert s1.width_m[0] == 100.0
    assert s4.width_m[0] == 85.0
    with pytest.raises(IndexError):
        wedge_grid.segment(0)
    with pytest.raises(IndexError):
        wedge_grid.segment(5)


def test_distance_is_measured_from_dam_face(wedge_grid):
    # four 500 m segments; the dam face is the downstream edge of the last
    assert wedge_grid.distance_from_dam_m[-1] == 250.0
    assert wedge_grid.distance_from_dam_m[0] == 3 * 500.0 + 250.0
    assert np.all(np.diff(wedge_grid.distance_from_dam_m) < 0)


def test_bed_layer_stops_at_zero_width():
    g = make_grid(n_layers=6, top_width=45.0, width_step_layer=10.0, width_step_seg=0.0)
    # widths 45,35,25,15,5,0 -> deepest open layer is index 4
    assert np.all(g.bed_layer == 4)


def test_top_wet_layer_interface_belongs_to_layer_below(wedge_grid):
    # ladder interfaces at 1..6; surface exactly on an interface resolves to
    # the full layer under it
    assert wedge_grid.top_wet_layer(6.0) == 0
    assert wedge_grid.top_wet_layer(5.5) == 0
    assert wedge_grid.top_wet_layer(5.0) == 1
    assert wedge_grid.top_wet_layer(0.5) == 5
    with pytest.raises(ElevationOutOfRange):
        wedge_grid.top_wet_layer(0.0)
    with pytest.raises(ElevationOutOfRange):
        wedge_grid.top_wet_layer(6.5)


def test_wet_thickness_prorates_top_layer(wedge_grid):
    wt = wedge_grid.wet_thickness_m(5.25)
    assert wt[0] == 0.25
    assert np.all(wt[1:] == 1.0)
    assert np.all(wedge_grid.wet_thickness_m(6.0) == 1.0)


def test_cell_volumes_match_plan_area_times_wet_thickness(wedge_grid):
    v = wedge_grid.cell_volumes_m3(5.25)
    assert v[0, 0] == pytest.approx(100.0 * 500.0 * 0.25)
    assert v[1, 0] == pytest.approx(90.0 * 500.0)
    assert total_volume(wedge_grid, 5.25) == pytest.approx(v.sum())


def test_sediment_contact_covers_each_footprint_once(wedge_grid):
    contact = wedge_grid.sediment_contact_area_m2()
    # shelves plus the bottom cell tile the top footprint exactly
    np.testing.assert_allclose(
        contact.sum(axis=0), wedge_grid.plan_area_m2[0, :], rtol=0.0, atol=1e-9
    )
    assert contact[5, 0] == pytest.approx(50.0 * 500.0)  # bottom cell: full width


def test_area_volume_curve_inverts_exactly(wedge_grid):
    curve = area_volume_curve(wedge_grid)
    assert np.all(np.diff(curve.volume_m3) > 0)
    for e in (0.5, 1.0, 2.75, 5.9999, 6.0):
        v = total_volume(wedge_grid, e)
        assert curve.volume_at(e) == pytest.approx(v, rel=1e-12)
        assert curve.elevation_at(v) == pytest.approx(e, abs=1e-9)
    with pytest.raises(ElevationOutOfRange):
        curve.volume_at(6.5)
    with pytest.raises(ElevationOutOfRange):
        curve.elevation_at(curve.volume_m3[-1] * 1.01)


def test_bathymetry_round_trip(tmp_path, wedge_grid):
    path = tmp_path / "bathy.csv"
    write_bathymetry(wedge_grid, path)
    g2 = load_bathymetry(path)
    np.testing.assert_array_equal(g2.width_m, wedge_grid.width_m)
    np.testing.assert_array_equal(g2.z_bottom_m, wedge_grid.z_bottom_m)
    np.testing.assert_array_equal(g2.dz_m, wedge_grid.dz_m)
    np.testing.assert_array_equal(g2.length_m, wedge_grid.length_m)


def _write_rows(path, rows, header=None):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header or BATHYMETRY_HEADER)
        w.writerows(rows)


def _rows_for(grid):
    rows = []
    for i in range(grid.n_segments):
        for k in range(grid.n_layers):
            rows.append(
                [i + 1, k + 1, grid.z_bottom_m[k], grid.dz_m[k], grid.width_m[k, i], grid.length_m[i]]
            )
    return rows


def test_load_rejects_wrong_header(tmp_path, wedge_grid):
    path = tmp_path / "bad.csv"
    _write_rows(path, _rows_for(wedge_grid), header=["seg", "lay", "e", "t", "w", "l"])
    with pytest.raises(ParseError):
        load_bathymetry(path)


def test_load_rejects_missing_cell(tmp_path, wedge_grid):
    rows = _rows_for(wedge_grid)
    path = tmp_path / "bad.csv"
    _write_rows(path, rows[:-1])
    with pytest.raises(MissingCell):
        load_bathymetry(path)


def test_load_rejects_duplicate_cell(tmp_path, wedge_grid):
    rows = _rows_for(wedge_grid)
    path = tmp_path / "bad.csv"
    _write_rows(path, rows + [rows[0]])
    with pytest.raises(ParseError):
        load_bathymetry(path)


def test_load_rejects_width_growing_with_depth(tmp_path, wedge_grid):
    g = make_grid()
    g.width_m[3, 1] = g.width_m[2, 1] + 1.0
    path = tmp_path / "bad.csv"
    _write_rows(path, _rows_for(g))
    with pytest.raises(NonMonotonicWidth):
        load_bathymetry(path)


def test_load_rejects_nonpositive_thickness(tmp_path, wedge_grid):
    rows = _rows_for(wedge_grid)
    rows[2][3] = 0.0
    path = tmp_path / "bad.csv"
    _write_rows(path, rows)
    with pytest.raises(NegativeGeometry):
        load_bathymetry(path)


def test_load_rejects_unstacked_ladder(tmp_path, wedge_grid):
    g = make_grid()
    rows = []
    for i in range(g.n_segments):
        for k in range(g.n_layers):
            z = g.z_bottom_m[k] + (0.5 if k == 2 else 0.0)
            rows.append([i + 1, k + 1, z, g.dz_m[k], g.width_m[k, i], g.length_m[i]])
    path = tmp_path / "bad.csv"
    _write_rows(path, rows)
    with pytest.raises(ParseError):
        load_bathymetry(path)


def test_load_rejects_fully_closed_segment(tmp_path):
    g = make_grid()
    g.width_m[:, 2] = 0.0
    path = tmp_path / "closed.csv"
    _write_rows(path, _rows_for(g))
    with pytest.raises(ParseError):
        load_bathymetry(path)


@settings(max_examples=50, deadline=None)
@given(
    n_layers=st.integers(2, 8),
    n_segments=st.integers(1, 6),
    dz=st.floats(0.25, 3.0),
    seed=st.integers(0, 2**31 - 1),
)
def test_round_trip_preserves_geometry(tmp_path_factory, n_layers, n_segments, dz, seed):
    rng = np.random.default_rng(seed)
    from lares.grid import Grid

    # random non-increasing width stacks, at least the top layer open
    width = np.zeros((n_layers, n_segments))
    for i in range(n_segments):
        w = np.sort(rng.uniform(0.0, 200.0, size=n_layers))[::-1]
        w[0] = max(w[0], 1.0)
        cut = rng.integers(0, n_layers)  # close some bottom layers
        if cut:
            w[n_layers - cut:] = 0.0
        width[:, i] = w
    z_bot = np.arange(n_layers - 1, -1, -1.0) * dz
    g = Grid(
        width_m=width,
        length_m=rng.uniform(50.0, 800.0, size=n_segments),
        dz_m=np.full(n_layers, dz),
        z_bottom_m=z_bot,
    )
    path = tmp_path_factory.mktemp("bathy") / "g.csv"
    write_bathymetry(g, path)
    g2 = load_bathymetry(path)
    np.testing.assert_array_equal(g2.width_m, g.width_m)
    np.testing.assert_array_equal(g2.length_m, g.length_m)
    # the storage curve inverts to the elevation it came from
    curve = area_volume_curve(g2)
    for e in np.linspace(g2.datum_m + 1e-6, g2.crest_m, 7):
        if total_volume(g2, float(e)) == 0.0:
            continue
        assert curve.elevation_at(curve.volume_at(float(e))) == pytest.approx(
            float(e), abs=1e-8
        )
