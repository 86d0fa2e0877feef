"""Deterministic reference inputs: bathymetry, a synthetic forcing year, and
ready-to-run configurations for three fixture reservoirs.

* ``deep``: a 95-segment, 45-layer canyon reservoir (crest 110 m, datum
  65 m) scaled to a 165e6 m3 full pool. Steep walls near the dam, broad
  sediment shelves mid-reach, a shallowing upstream arm. Its year of
  forcing drives one full stratification/overturn cycle.
* ``shallow``: a warmer 32-segment, 32-layer basin (1.5 m layers, varied
  segment lengths) scaled to 270e6 m3, with a drier, hotter climate.
* ``twin``: a small pond used by calibration experiments where many model
  runs must stay cheap.

Everything here is a closed-form function of day number and cell index, so
regenerating the files reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .config import physics_sections, write_ini
from .forcing import INFLOW_HEADER, MET_HEADER, WITHDRAWAL_HEADER
from .grid import Grid, total_volume, write_bathymetry
from .oxygen import do_saturation
from .params import PhysicsParams

DEEP_CAPACITY_M3 = 165e6
SHALLOW_CAPACITY_M3 = 270e6

YEAR_DAYS = 365


# ---------------------------------------------------------------------------
# bathymetry
# ---------------------------------------------------------------------------

def _scaled_grid(width: np.ndarray, length: np.ndarray, dz: np.ndarray,
                 z_bottom: np.ndarray, capacity_m3: float) -> Grid:
    raw = Grid(width, length, dz, z_bottom)
    scale = capacity_m3 / total_volume(raw, raw.crest_m)
    return Grid(width * scale, length, dz, z_bottom)


def deep_reservoir_grid() -> Grid:
    """Canyon reservoir: 95 x 50 m segments, 45 x 1 m layers, 165e6 m3."""
    n_seg, n_lay = 95, 45
    dz = np.ones(n_lay)
    z_bottom = 65.0 + np.arange(n_lay)[::-1].astype(np.float64)  # 109 .. 65
    length = np.full(n_seg, 50.0)
    x = np.arange(n_seg) / (n_seg - 1)          # 0 at the head, 1 at the dam
    bed = 65.0 + 23.0 * (1.0 - x) ** 1.3        # 88 m head, 65 m dam
    w_top = 420.0 + 1380.0 * x ** 0.8           # width at crest level
    # wall-slope exponent: near 1 the cross-section is a broad shelf, near 0
    # a vertical wall; shelving peaks mid-reach so sediment contact per unit
    # volume is largest there
    alpha = 0.30 + 0.50 * np.sin(math.pi * x) ** 2
    crest = 110.0
    zc = z_bottom + 0.5
    width = np.zeros((n_lay, n_seg))
    for j in range(n_seg):
        open_k = z_bottom >= bed[j] - 1e-9
        f = (zc[open_k] - bed[j]) / (crest - bed[j])
        width[open_k, j] = w_top[j] * f ** alpha[j]
    return _scaled_grid(width, length, dz, z_bottom, DEEP_CAPACITY_M3)


def shallow_reservoir_grid() -> Grid:
    """Warm basin: 32 segments of varied length, 32 x 1.5 m layers, 270e6 m3."""
    n_seg, n_lay = 32, 32
    dz = np.full(n_lay, 1.5)
    z_bottom = 1.5 * np.arange(n_lay)[::-1].astype(np.float64)  # 46.5 .. 0
    x = np.arange(n_seg) / (n_seg - 1)
    length = 350.0 - 250.0 * np.cos(2.0 * math.pi * x)          # 100 .. 600 m
    bed = 26.0 * (1.0 - x) ** 1.2                               # 26 m head, 0 dam
    w_top = 420.0 + 2280.0 * x ** 0.7
    alpha = 0.45 + 0.35 * np.sin(math.pi * x) ** 2
    crest = 48.0
    zc = z_bottom + 0.75
    width = np.zeros((n_lay, n_seg))
    for j in range(n_seg):
        open_k = z_bottom >= bed[j] - 1e-9
        f = (zc[open_k] - bed[j]) / (crest - bed[j])
        width[open_k, j] = w_top[j] * f ** alpha[j]
    return _scaled_grid(width, length, dz, z_bottom, SHALLOW_CAPACITY_M3)


def twin_pond_grid() -> Grid:
    """Small pond for calibration experiments: 16 x 100 m, 18 x 1 m layers."""
    n_seg, n_lay = 16, 18
    dz = np.ones(n_lay)
    z_bottom = np.arange(n_lay)[::-1].astype(np.float64)        # 17 .. 0
    length = np.full(n_seg, 100.0)
    x = np.arange(n_seg) / (n_seg - 1)
    bed = 8.0 * (1.0 - x) ** 1.2
    w_top = 120.0 + 280.0 * x ** 0.8
    alpha = 0.4 + 0.3 * np.sin(math.pi * x) ** 2
    crest = 18.0
    zc = z_bottom + 0.5
    width = np.zeros((n_lay, n_seg))
    for j in range(n_seg):
        open_k = z_bottom >= bed[j] - 1e-9
        f = (zc[open_k] - bed[j]) / (crest - bed[j])
        width[open_k, j] = w_top[j] * f ** alpha[j]
    return Grid(width, length, dz, z_bottom)


# ---------------------------------------------------------------------------
# forcing years
# ---------------------------------------------------------------------------

def _annual(day: np.ndarray, mean: float, amplitude: float, peak_day: float) -> np.ndarray:
    """Sinusoidal annual cycle peaking at ``peak_day``."""
    return mean + amplitude * np.sin(2.0 * math.pi * (day - peak_day + 91.25) / 365.0)


def _freshet(day: np.ndarray, peak: float, center: float, width: float) -> np.ndarray:
    return peak * np.exp(-0.5 * ((day - center) / width) ** 2)


def deep_reservoir_forcing(first_day: int = 0, last_day: int = YEAR_DAYS) -> dict[str, np.ndarray]:
    """Daily forcing columns for the deep reservoir's synthetic year."""
    d = np.arange(first_day, last_day + 1, dtype=np.float64)
    t_air = _annual(d, 19.0, 9.0, 201.0)
    # a broad braided channel: strong insolation pushes the river above air
    # temperature in summer, and springs floor it near the basin's winter
    # surface temperature. An inflow much colder than the column would
    # plunge and keep a cold pool under the intake that the winter overturn
    # cannot erase.
    t_in = np.maximum(t_air + _annual(d, 1.0, 2.6, 190.0), 11.0)
    # storm-season baseflow peaks in late summer; flash floods ride on top
    # of exactly this period
    q_in = 6.2 + _freshet(d, 10.2, 190.0, 18.0) + 0.8 * np.sin(2.0 * math.pi * (d - 150.0) / 365.0)
    # irrigation demand peaks a week behind the monsoon and nearly cancels
    # it, so the pool holds its level through the storm season
    q_out = 5.29 + _freshet(d, 9.2, 197.0, 30.0)
    return {
        "day": d,
        "q_in_m3s": q_in,
        "t_in_c": t_in,
        "do_in_mgl": 0.95 * do_saturation(t_in),
        # organic washoff rides the storm hydrograph: near 0.9 mg/L at
        # baseflow, peaking with the freshet when the basin flushes
        "bod_in_mgl": 0.9 + 0.6 * _freshet(d, 1.0, 190.0, 24.0),
        "t_air_c": t_air,
        "t_dew_c": t_air - 8.0,
        "wind_ms": 2.8 + 0.7 * np.sin(2.0 * math.pi * (d - 30.0) / 365.0),
        "wind_dir_deg": 180.0 + 60.0 * np.sin(2.0 * math.pi * d / 73.0),
        "cloud_frac": 0.35 + 0.2 * np.sin(2.0 * math.pi * (d + 50.0) / 365.0),
        "q_out_m3s": q_out,
        "intake_elev_m": np.full_like(d, 72.0),
    }


def shallow_reservoir_forcing(first_day: int = 0, last_day: int = YEAR_DAYS) -> dict[str, np.ndarray]:
    """Daily forcing columns for the shallow reservoir: hotter and drier."""
    d = np.arange(first_day, last_day + 1, dtype=np.float64)
    t_air = _annual(d, 25.0, 9.0, 201.0)
    t_in = np.maximum(0.85 * t_air - 1.0, 6.0)
    q_in = 4.0 + _freshet(d, 6.0, 60.0, 18.0) + 1.0 * np.sin(2.0 * math.pi * (d - 60.0) / 365.0)
    q_out = 3.1 + 0.4 * _freshet(d, 6.0, 72.0, 18.0)
    return {
        "day": d,
        "q_in_m3s": q_in,
        "t_in_c": t_in,
        "do_in_mgl": 0.92 * do_saturation(t_in),
        "bod_in_mgl": 2.2 + 0.8 * np.sin(2.0 * math.pi * (d - 210.0) / 365.0),
        "t_air_c": t_air,
        "t_dew_c": t_air - 12.0,
        "wind_ms": 3.2 + 0.8 * np.sin(2.0 * math.pi * (d - 15.0) / 365.0),
        "wind_dir_deg": 200.0 + 40.0 * np.sin(2.0 * math.pi * d / 61.0),
        "cloud_frac": 0.15 + 0.1 * np.sin(2.0 * math.pi * (d + 50.0) / 365.0),
        "q_out_m3s": q_out,
        "intake_elev_m": np.full_like(d, 6.0),
    }


def twin_pond_forcing(first_day: int = 0, last_day: int = 70) -> dict[str, np.ndarray]:
    """A warm-season stretch for the calibration pond."""
    d = np.arange(first_day, last_day + 1, dtype=np.float64)
    t_air = 24.0 + 3.0 * np.sin(2.0 * math.pi * d / 365.0) + 1.5 * np.sin(2.0 * math.pi * d / 20.0)
    t_in = 0.8 * t_air - 1.0
    return {
        "day": d,
        "q_in_m3s": np.full_like(d, 0.25) + 0.1 * np.sin(2.0 * math.pi * d / 15.0),
        "t_in_c": t_in,
        "do_in_mgl": 0.95 * do_saturation(t_in),
        "bod_in_mgl": np.full_like(d, 2.0),
        "t_air_c": t_air,
        "t_dew_c": t_air - 9.0,
        "wind_ms": 2.5 + 0.8 * np.sin(2.0 * math.pi * d / 11.0),
        "wind_dir_deg": np.full_like(d, 180.0),
        "cloud_frac": np.full_like(d, 0.25),
        "q_out_m3s": np.full_like(d, 0.25),
        "intake_elev_m": np.full_like(d, 3.0),
    }


def write_forcing_csvs(columns: dict[str, np.ndarray], directory: str | Path) -> None:
    """Write inflow/met/withdrawal CSVs from one column dictionary."""
    directory = Path(directory)
    for name, header in (
        ("inflow.csv", INFLOW_HEADER),
        ("met.csv", MET_HEADER),
        ("withdrawal.csv", WITHDRAWAL_HEADER),
    ):
        with (directory / name).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in zip(*(columns[f] for f in header)):
                writer.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------

def _run_sections(paths_prefix: str, run: dict[str, object],
                  stations: dict[str, int]) -> dict[str, dict[str, object]]:
    sections: dict[str, dict[str, object]] = {
        "paths": {
            "bathymetry": f"{paths_prefix}/bathymetry.csv",
            "inflow": f"{paths_prefix}/inflow.csv",
            "met": f"{paths_prefix}/met.csv",
            "withdrawal": f"{paths_prefix}/withdrawal.csv",
        },
        "run": run,
        "stations": stations,
    }
    sections.update(physics_sections(PhysicsParams()))
    return sections


def deep_year_sections() -> dict[str, dict[str, object]]:
    """Full-year run: one stratification/overturn cycle from a mixed start."""
    run = {
        "start_day": 0.0,
        "end_day": 365.0,
        "elevation0_m": 101.0,
        "latitude_deg": 36.3,
        "dt_s": 3600.0,
        "capacity_m3": DEEP_CAPACITY_M3,
        "profile_depth_m": (0.0,),
        "profile_temp_c": (12.0,),
        "profile_do_mgl": (9.5,),
        "profile_bod_mgl": (1.0,),
        "snapshot_days": (40.0, 110.0, 205.0, 290.0, 355.0),
        "station_stride_steps": 24,
        "balance_stride_steps": 24,
    }
    stations = {"head": 12, "mid": 48, "dam": 95}
    return _run_sections("../data/deep_reservoir", run, stations)


def deep_flood_run_sections() -> dict[str, dict[str, object]]:
    """Midsummer window starting from a committed stratified profile."""
    run = {
        "start_day": 150.0,
        "end_day": 210.0,
        "elevation0_m": 98.0,
        "latitude_deg": 36.3,
        "dt_s": 3600.0,
        "capacity_m3": DEEP_CAPACITY_M3,
        # early-summer stratification with a metalimnetic oxygen minimum:
        # the warm shelf beds upstream drain toward anoxia over the month
        # before the flood window while the cold deep pool holds its oxygen
        "profile_depth_m": (0.0, 9.0, 13.0, 17.0, 22.0, 33.0),
        "profile_temp_c": (24.8, 24.2, 18.5, 14.2, 12.8, 12.3),
        "profile_do_mgl": (8.2, 7.9, 5.5, 3.8, 4.6, 5.6),
        "profile_bod_mgl": (1.1, 1.1, 1.1, 1.1, 1.1, 1.1),
        "snapshot_days": (160.0,),
        "station_stride_steps": 24,
        "balance_stride_steps": 24,
    }
    stations = {"head": 12, "mid": 48, "dam": 95}
    return _run_sections("../data/deep_reservoir", run, stations)


def deep_flood_scenario_sections() -> dict[str, dict[str, object]]:
    """Ten-day triangular pulse against the deep reservoir."""
    return {
        "scenario": {
            "start_day": 185.0,
            "end_day": 195.0,
            "peak_multiplier": 10.0,
            "bod_multiplier": 5.0,
            "t_in_offset_c": -3.0,
            "upstream_distance_m": 3000.0,
            "reference_distance_m": 2600.0,
            "upper_min_temp_c": 15.0,
            "suite": "deep",
        }
    }


def shallow_flood_run_sections() -> dict[str, dict[str, object]]:
    run = {
        "start_day": 150.0,
        "end_day": 205.0,
        "elevation0_m": 40.0,
        "latitude_deg": 27.1,
        "dt_s": 3600.0,
        "capacity_m3": SHALLOW_CAPACITY_M3,
        "profile_depth_m": (0.0, 6.0, 10.0, 16.0, 30.0, 48.0),
        "profile_temp_c": (29.0, 28.0, 23.0, 18.0, 16.5, 16.0),
        "profile_do_mgl": (7.5, 7.2, 5.5, 4.5, 4.0, 3.8),
        "profile_bod_mgl": (1.5, 1.5, 1.5, 1.5, 1.5, 1.5),
        "snapshot_days": (160.0,),
        "station_stride_steps": 24,
        "balance_stride_steps": 24,
    }
    stations = {"head": 6, "mid": 16, "dam": 32}
    return _run_sections("../data/shallow_reservoir", run, stations)


def shallow_flood_scenario_sections() -> dict[str, dict[str, object]]:
    return {
        "scenario": {
            "start_day": 185.0,
            "end_day": 195.0,
            "peak_multiplier": 12.0,
            "bod_multiplier": 4.0,
            "t_in_offset_c": -1.0,
            "upstream_distance_m": 6000.0,
            "reference_distance_m": 3000.0,
            "upper_min_temp_c": 20.0,
            "suite": "shallow",
        }
    }


def twin_run_sections() -> dict[str, dict[str, object]]:
    run = {
        "start_day": 0.0,
        "end_day": 60.0,
        "elevation0_m": 16.0,
        "latitude_deg": 36.3,
        "dt_s": 3600.0,
        "profile_depth_m": (0.0, 5.0, 9.0, 16.0),
        "profile_temp_c": (24.0, 23.0, 17.0, 14.0),
        "profile_do_mgl": (8.0, 7.8, 6.0, 5.0),
        "profile_bod_mgl": (1.5, 1.5, 1.5, 1.5),
        "snapshot_days": (10.0, 20.0, 30.0, 40.0, 50.0),
        "station_stride_steps": 24,
        "balance_stride_steps": 24,
    }
    stations = {"mid": 8, "dam": 16}
    return _run_sections("../data/twin_pond", run, stations)


def twin_calibration_sections() -> dict[str, dict[str, object]]:
    return {
        "calibration": {
            "budget": 120,
            "coarse_points": 4,
            "w_temp": 1.0,
            "w_do": 1.0,
            "min_step_frac": 0.01,
            "axis_kz_max": (2e-05, 0.0005),
            "axis_sod_20": (0.1, 2.0),
        }
    }


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def write_all(root: str | Path) -> list[Path]:
    """Write every fixture under ``root`` (data/ and configs/ trees)."""
    root = Path(root)
    written: list[Path] = []

    fixtures = (
        ("deep_reservoir", deep_reservoir_grid, deep_reservoir_forcing),
        ("shallow_reservoir", shallow_reservoir_grid, shallow_reservoir_forcing),
        ("twin_pond", twin_pond_grid, twin_pond_forcing),
    )
    for name, make_grid, make_forcing in fixtures:
        directory = root / "data" / name
        directory.mkdir(parents=True, exist_ok=True)
        write_bathymetry(make_grid(), directory / "bathymetry.csv")
        write_forcing_csvs(make_forcing(), directory)
        written += sorted(directory.iterdir())

    configs = {
        "deep_year.ini": deep_year_sections(),
        "deep_flood_run.ini": deep_flood_run_sections(),
        "deep_flood_scenario.ini": deep_flood_scenario_sections(),
        "shallow_flood_run.ini": shallow_flood_run_sections(),
        "shallow_flood_scenario.ini": shallow_flood_scenario_sections(),
        "twin_run.ini": twin_run_sections(),
        "twin_calibration.ini": twin_calibration_sections(),
    }
    cfg_dir = root / "configs"
    cfg_dir.mkdir(parents=True, exist_ok=True)
    for filename, sections in configs.items():
        write_ini(cfg_dir / filename, sections)
        written.append(cfg_dir / filename)
    return written
