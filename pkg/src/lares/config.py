"""Plain-text configuration: flat ``key = value`` pairs under ``[section]``
headers.

A run configuration carries file paths (resolved relative to the config
file), the run window, initial profiles, stations, and overrides for any
physics coefficient under its module's section (``[hydro]``, ``[thermal]``,
``[oxygen]``). Scenario and calibration specifications are separate files
with a single section each, so one baseline run config can serve many
experiments.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path

from .calibration import Axis, CalibrationSpec
from .engine import RunConfig
from .errors import ConfigError, LaresError
from .forcing import fill_gaps, load_series
from .grid import load_bathymetry
from .params import HydroParams, OxygenParams, PhysicsParams, ThermalParams
from .scenario import ScenarioSpec

_PHYSICS_SECTIONS = {
    "hydro": HydroParams,
    "thermal": ThermalParams,
    "oxygen": OxygenParams,
}

# physics fields that must stay integers through the float round-trip
_INT_FIELDS = {"max_substeps"}

SUITES = ("deep", "shallow")


def _parser(path: Path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # station names and parameter names are case-sensitive
    try:
        with path.open() as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path.name}: {exc.message.splitlines()[0]}") from None
    return cp


def _get_float(cp, section: str, key: str, path: Path, default=None) -> float:
    if not cp.has_option(section, key):
        if default is not None:
            return default
        raise ConfigError(f"{path.name}: missing [{section}] {key}")
    raw = cp.get(section, key)
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{path.name}: [{section}] {key} = {raw!r} is not a number") from None


def _get_float_list(cp, section: str, key: str, path: Path) -> tuple[float, ...]:
    raw = cp.get(section, key)
    try:
        return tuple(float(tok) for tok in raw.split(","))
    except ValueError:
        raise ConfigError(f"{path.name}: [{section}] {key} = {raw!r} is not a number list") from None


def _physics_from(cp, path: Path) -> PhysicsParams:
    updates: dict[str, float] = {}
    for section, cls in _PHYSICS_SECTIONS.items():
        if not cp.has_section(section):
            continue
        known = {f.name for f in fields(cls)}
        for key, raw in cp.items(section):
            if key not in known:
                raise ConfigError(f"{path.name}: [{section}] has no parameter {key!r}")
            try:
                value = float(raw)
            except ValueError:
                raise ConfigError(
                    f"{path.name}: [{section}] {key} = {raw!r} is not a number"
                ) from None
            updates[key] = int(value) if key in _INT_FIELDS else value
    return PhysicsParams().with_values(**updates)


@dataclass
class RunSetup:
    """A run configuration with its loaded inputs and check targets."""

    config: RunConfig
    capacity_m3: float | None      # declared full-pool storage, if any
    bathymetry_path: Path
    config_path: Path


def load_run_setup(path: str | Path) -> RunSetup:
    """Load a run config file plus the grid and forcing it points at."""
    path = Path(path)
    cp = _parser(path)
    for section in ("paths", "run"):
        if not cp.has_section(section):
            raise ConfigError(f"{path.name}: missing [{section}] section")

    base = path.parent
    resolved: dict[str, Path] = {}
    for key in ("bathymetry", "inflow", "met", "withdrawal"):
        if not cp.has_option("paths", key):
            raise ConfigError(f"{path.name}: missing [paths] {key}")
        p = base / cp.get("paths", key)
        if not p.is_file():
            raise ConfigError(f"{path.name}: [paths] {key} = {p} does not exist")
        resolved[key] = p

    grid = load_bathymetry(resolved["bathymetry"])
    forcing = fill_gaps(load_series(resolved["inflow"], resolved["met"], resolved["withdrawal"]))

    stations: dict[str, int] = {}
    if cp.has_section("stations"):
        for name, raw in cp.items("stations"):
            try:
                stations[name] = int(raw)
            except ValueError:
                raise ConfigError(
                    f"{path.name}: [stations] {name} = {raw!r} is not a segment number"
                ) from None

    snapshot_days: tuple[float, ...] = ()
    if cp.has_option("run", "snapshot_days"):
        snapshot_days = _get_float_list(cp, "run", "snapshot_days", path)

    profiles = {}
    for key in ("profile_depth_m", "profile_temp_c", "profile_do_mgl", "profile_bod_mgl"):
        if cp.has_option("run", key):
            profiles[key] = _get_float_list(cp, "run", key, path)

    config = RunConfig(
        grid=grid,
        forcing=forcing,
        start_day=_get_float(cp, "run", "start_day", path),
        end_day=_get_float(cp, "run", "end_day", path),
        elevation0_m=_get_float(cp, "run", "elevation0_m", path),
        latitude_deg=_get_float(cp, "run", "latitude_deg", path),
        dt_s=_get_float(cp, "run", "dt_s", path, default=3600.0),
        params=_physics_from(cp, path),
        stations=stations,
        snapshot_days=snapshot_days,
        station_stride_steps=int(_get_float(cp, "run", "station_stride_steps", path, default=1.0)),
        balance_stride_steps=int(_get_float(cp, "run", "balance_stride_steps", path, default=24.0)),
        **profiles,
    )
    try:
        config.validate()
    except LaresError as exc:
        raise ConfigError(f"{path.name}: {exc}") from None

    capacity = None
    if cp.has_option("run", "capacity_m3"):
        capacity = _get_float(cp, "run", "capacity_m3", path)
    return RunSetup(config=config, capacity_m3=capacity,
                    bathymetry_path=resolved["bathymetry"], config_path=path)


def load_scenario_spec(path: str | Path) -> tuple[ScenarioSpec, str]:
    """Load a scenario file; returns the spec and its directional suite name."""
    path = Path(path)
    cp = _parser(path)
    if not cp.has_section("scenario"):
        raise ConfigError(f"{path.name}: missing [scenario] section")
    spec = ScenarioSpec(
        start_day=_get_float(cp, "scenario", "start_day", path),
        end_day=_get_float(cp, "scenario", "end_day", path),
        peak_multiplier=_get_float(cp, "scenario", "peak_multiplier", path),
        bod_multiplier=_get_float(cp, "scenario", "bod_multiplier", path, default=1.0),
        t_in_offset_c=_get_float(cp, "scenario", "t_in_offset_c", path, default=0.0),
        upstream_distance_m=_get_float(cp, "scenario", "upstream_distance_m", path, default=3000.0),
        reference_distance_m=_get_float(cp, "scenario", "reference_distance_m", path, default=2000.0),
        upper_min_temp_c=_get_float(cp, "scenario", "upper_min_temp_c", path, default=15.0),
    )
    suite = cp.get("scenario", "suite", fallback="deep")
    if suite not in SUITES:
        raise ConfigError(f"{path.name}: unknown directional suite {suite!r}")
    try:
        spec.validate()
    except LaresError as exc:
        raise ConfigError(f"{path.name}: {exc}") from None
    return spec, suite


def load_calibration_spec(path: str | Path) -> CalibrationSpec:
    """Load a calibration file: axis bounds plus search settings."""
    path = Path(path)
    cp = _parser(path)
    if not cp.has_section("calibration"):
        raise ConfigError(f"{path.name}: missing [calibration] section")
    axes = []
    for key, raw in cp.items("calibration"):
        if not key.startswith("axis_"):
            continue
        name = key[len("axis_"):]
        bounds = _get_float_list(cp, "calibration", key, path)
        if len(bounds) != 2:
            raise ConfigError(f"{path.name}: {key} needs exactly 'lo, hi'")
        axes.append(Axis(name, bounds[0], bounds[1]))
    spec = CalibrationSpec(
        axes=tuple(axes),
        budget=int(_get_float(cp, "calibration", "budget", path, default=200.0)),
        coarse_points=int(_get_float(cp, "calibration", "coarse_points", path, default=3.0)),
        w_temp=_get_float(cp, "calibration", "w_temp", path, default=1.0),
        w_do=_get_float(cp, "calibration", "w_do", path, default=1.0),
        min_step_frac=_get_float(cp, "calibration", "min_step_frac", path, default=0.01),
    )
    try:
        spec.validate()
    except LaresError as exc:
        raise ConfigError(f"{path.name}: {exc}") from None
    return spec


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def format_value(value) -> str:
    """Render one config value; float formatting matches what repr reloads."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(format_value(v) for v in value)
    return str(value)


def write_ini(path: str | Path, sections: dict[str, dict[str, object]]) -> None:
    """Write sections in the given order as flat ``key = value`` text."""
    path = Path(path)
    lines = []
    for name, body in sections.items():
        lines.append(f"[{name}]")
        for key, value in body.items():
            lines.append(f"{key} = {format_value(value)}")
        lines.append("")
    path.write_text("\n".join(lines))


def physics_sections(params: PhysicsParams) -> dict[str, dict[str, object]]:
    """Every physics coefficient under its module's section."""
    out: dict[str, dict[str, object]] = {}
    for section, cls in _PHYSICS_SECTIONS.items():
        bundle = getattr(params, section)
        out[section] = {f.name: getattr(bundle, f.name) for f in fields(cls)}
    return out


def params_fragment(values: dict[str, float]) -> dict[str, dict[str, object]]:
    """Sections holding just the given parameters (calibration output)."""
    from .params import _PARAM_HOMES

    out: dict[str, dict[str, object]] = {}
    for name, value in values.items():
        home = _PARAM_HOMES.get(name)
        if home is None:
            raise ConfigError(f"unknown physics parameter {name!r}")
        out.setdefault(home, {})[name] = value
    return out
