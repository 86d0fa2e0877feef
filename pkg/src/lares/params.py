"""Physics closure parameters and their defaults.

Every tunable coefficient used by the hydrodynamic, thermal, and oxygen
closures lives here so configuration files and the calibration axes address
one flat namespace. Units are noted per field; temperatures are Celsius.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

# fixed physical constants (not configurable)
GRAVITY = 9.81            # m s-2
RHO0 = 998.0              # kg m-3, reference water density for heat capacity
CP_WATER = 4184.0         # J kg-1 K-1
RHO_AIR = 1.2             # kg m-3
STEFAN_BOLTZMANN = 5.670374419e-8  # W m-2 K-4
LATENT_VAPOR = 2.453e6    # J kg-1, latent heat of vaporization
SOLAR_CONSTANT = 1361.0   # W m-2


@dataclass(frozen=True)
class HydroParams:
    """Mixing and drag closure coefficients."""

    kz_min: float = 1.0e-7        # m2 s-1, background vertical diffusivity
    kz_max: float = 1.0e-4        # m2 s-1, neutral-column vertical diffusivity
    sigma_n2: float = 1.0e5       # s2, stratification shutdown scale for Kz
    eta_wind: float = 0.4         # fraction of u*^3 available for entrainment
    drag_coeff: float = 1.3e-3    # air-water momentum drag
    max_substeps: int = 100000    # advection sub-step guard


@dataclass(frozen=True)
class ThermalParams:
    """Surface heat budget and light penetration coefficients."""

    transmissivity: float = 0.75      # clear-sky atmospheric transmissivity
    albedo: float = 0.06              # shortwave water-surface reflectance
    cloud_sw_coeff: float = 0.65      # shortwave reduction by cloud^2
    emissivity_water: float = 0.97
    lw_atm_c1: float = 0.51           # clear-sky atmospheric emissivity offset
    lw_atm_c2: float = 0.066          # vapor-pressure emissivity slope, hPa^-1/2
    lw_cloud_coeff: float = 0.17      # longwave boost by cloud^2
    wind_fn_a: float = 9.2            # evaporation wind function, W m-2 hPa-1
    wind_fn_b: float = 0.46           # evaporation wind function, W m-2 hPa-1 (m/s)^-2
    bowen_coeff: float = 0.61         # hPa K-1
    light_extinction: float = 0.45    # m-1, shortwave decay with depth


@dataclass(frozen=True)
class OxygenParams:
    """Oxygen-demand and reaeration kinetics."""

    k_bod_20: float = 0.2         # d-1, BOD decay at 20 C
    theta_bod: float = 1.047      # BOD Arrhenius base
    sod_20: float = 0.5           # g m-2 d-1, sediment demand at 20 C
    theta_sod: float = 1.065      # SOD Arrhenius base
    k_a_base: float = 0.6         # m d-1, still-air reaeration velocity
    k_a_wind_coeff: float = 0.24  # m d-1 (m/s)^-2, wind boost to reaeration
    theta_rea: float = 1.024      # reaeration Arrhenius base
    k_a_cap: float = 50.0         # d-1, reaeration rate clamp


# calibration axes address parameters by these names
_PARAM_HOMES: dict[str, str] = {}
for _cls, _home in ((HydroParams, "hydro"), (ThermalParams, "thermal"), (OxygenParams, "oxygen")):
    for _f in fields(_cls):
        _PARAM_HOMES[_f.name] = _home


@dataclass(frozen=True)
class PhysicsParams:
    """The three closure bundles, addressable by flat parameter name."""

    hydro: HydroParams = field(default_factory=HydroParams)
    thermal: ThermalParams = field(default_factory=ThermalParams)
    oxygen: OxygenParams = field(default_factory=OxygenParams)

    def get(self, name: str) -> float:
        home = _PARAM_HOMES.get(name)
        if home is None:
            raise KeyError(f"unknown physics parameter {name!r}")
        return getattr(getattr(self, home), name)

    def with_values(self, **updates: float) -> "PhysicsParams":
        """Copy with named parameters replaced (calibration entry point)."""
        groups: dict[str, dict[str, float]] = {"hydro": {}, "thermal": {}, "oxygen": {}}
        for name, value in updates.items():
            home = _PARAM_HOMES.get(name)
            if home is None:
                raise KeyError(f"unknown physics parameter {name!r}")
            groups[home][name] = value
        out = self
        if groups["hydro"]:
            out = replace(out, hydro=replace(out.hydro, **groups["hydro"]))
        if groups["thermal"]:
            out = replace(out, thermal=replace(out.thermal, **groups["thermal"]))
        if groups["oxygen"]:
            out = replace(out, oxygen=replace(out.oxygen, **groups["oxygen"]))
        return out


def parameter_names() -> list[str]:
    return sorted(_PARAM_HOMES)
