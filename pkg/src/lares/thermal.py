"""Surface heat exchange and in-column heat transport.

All fluxes are W m-2, positive into the water unless named as a loss.
The budget is bulk-aerodynamic: clear-sky daily-mean solar scaled by
cloud cover and albedo, atmospheric and back longwave, and wind-function
latent and sensible terms. Shortwave penetrates with a single extinction
coefficient; everything else lands in a thin surface window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import OutOfRange, SingularSystem
from .hydro import thermal_expansion
from .params import (
    CP_WATER,
    GRAVITY,
    LATENT_VAPOR,
    RHO0,
    SOLAR_CONSTANT,
    STEFAN_BOLTZMANN,
    ThermalParams,
)

# non-penetrating fluxes heat the top of the column through this window,
# which keeps the temperature tendency bounded when the surface sits a
# hair above a layer interface
SURFACE_WINDOW_M = 0.5


def saturation_vapor_pressure_hpa(t_c):
    """Magnus formula over water, hPa."""
    t = np.asarray(t_c, dtype=np.float64)
    e = 6.112 * np.exp(17.62 * t / (243.12 + t))
    return float(e) if np.isscalar(t_c) else e


def clear_sky_solar(day_of_year: float, latitude_deg: float) -> float:
    """Daily-mean clear-sky shortwave at the surface (W m-2).

    Extraterrestrial radiation for the declination of ``day_of_year``
    times a fixed atmospheric transmissivity. Valid for |latitude| < 66.5
    (no polar day/night handling).
    """
    if not -66.5 < latitude_deg < 66.5:
        raise OutOfRange("latitude outside +-66.5 deg")
    phi = np.deg2rad(latitude_deg)
    decl = 0.409 * np.sin(2.0 * np.pi * day_of_year / 365.0 - 1.39)
    ws = np.arccos(np.clip(-np.tan(phi) * np.tan(decl), -1.0, 1.0))
    ra = (SOLAR_CONSTANT / np.pi) * (
        ws * np.sin(phi) * np.sin(decl) + np.cos(phi) * np.cos(decl) * np.sin(ws)
    )
    return float(ThermalParams().transmissivity * max(ra, 0.0))


@dataclass(frozen=True)
class HeatFluxBreakdown:
    """One surface-exchange evaluation. Fields may be scalars or (N,) arrays.

    ``net`` = shortwave_net + longwave_atm - longwave_back - latent -
    sensible; latent, sensible and longwave_back are positive as losses.
    """

    shortwave_net: np.ndarray
    longwave_atm: np.ndarray
    longwave_back: np.ndarray
    latent: np.ndarray
    sensible: np.ndarray
    net: np.ndarray
    evaporation_ms: np.ndarray


def surface_heat_flux(
    t_air_c: float,
    t_dew_c: float,
    wind_ms: float,
    cloud_frac: float,
    t_surface_c,
    day_of_year: float,
    latitude_deg: float,
    params: ThermalParams | None = None,
) -> HeatFluxBreakdown:
    """Bulk surface heat budget against one or many surface temperatures."""
    p = params or ThermalParams()
    ts = np.asarray(t_surface_c, dtype=np.float64)
    c2 = cloud_frac * cloud_frac

    sw = clear_sky_solar(day_of_year, latitude_deg) * (1.0 - p.cloud_sw_coeff * c2)
    sw_net = sw * (1.0 - p.albedo) * np.ones_like(ts)

    e_air = saturation_vapor_pressure_hpa(t_dew_c)
    t_air_k = t_air_c + 273.15
    lw_atm = (
        p.emissivity_water * STEFAN_BOLTZMANN * t_air_k**4
        * (p.lw_atm_c1 + p.lw_atm_c2 * np.sqrt(e_air))
        * (1.0 + p.lw_cloud_coeff * c2)
    ) * np.ones_like(ts)
    lw_back = p.emissivity_water * STEFAN_BOLTZMANN * (ts + 273.15) ** 4

    wind_fn = p.wind_fn_a + p.wind_fn_b * wind_ms * wind_ms
    latent = wind_fn * (saturation_vapor_pressure_hpa(ts) - e_air)
    sensible = p.bowen_coeff * wind_fn * (ts - t_air_c)

    net = sw_net + lw_atm - lw_back - latent - sensible
    evap = np.maximum(latent, 0.0) / (RHO0 * LATENT_VAPOR)
    if np.isscalar(t_surface_c):
        return HeatFluxBreakdown(
            float(sw_net), float(lw_atm), float(lw_back), float(latent),
            float(sensible), float(net), float(evap),
        )
    return HeatFluxBreakdown(sw_net, lw_atm, lw_back, latent, sensible, net, evap)


def buoyancy_flux(q_net_wm2: float, t_surface_c: float) -> float:
    """Stabilizing surface buoyancy flux (m2 s-3); zero when cooling."""
    alpha = thermal_expansion(t_surface_c)
    return GRAVITY * alpha * max(q_net_wm2, 0.0) / (RHO0 * CP_WATER)


def solar_fractions(
    depth_top_m: np.ndarray,
    depth_bot_m: np.ndarray,
    ktop: int,
    kbot: np.ndarray,
    extinction_per_m: float,
) -> np.ndarray:
    """Beer-Lambert absorption fraction per cell (L, N); columns sum to 1.

    Light reaching the bed is absorbed by the bottom wet cell.
    """
    n_layers = depth_top_m.size
    n_seg = kbot.size
    rows = np.arange(n_layers)[:, None]
    wet = (rows >= ktop) & (rows <= kbot[None, :])
    f_top = np.exp(-extinction_per_m * np.maximum(depth_top_m, 0.0))
    f_bot = np.exp(-extinction_per_m * np.maximum(depth_bot_m, 0.0))
    frac = np.where(wet, (f_top - f_bot)[:, None], 0.0)
    cols = np.arange(n_seg)
    frac[kbot, cols] += f_bot[kbot]
    return frac


def apply_surface_flux(
    temp_c: np.ndarray,
    sw_wm2: np.ndarray,
    nonsolar_wm2: np.ndarray,
    volume_m3: np.ndarray,
    area_top_m2: np.ndarray,
    depth_top_m: np.ndarray,
    depth_bot_m: np.ndarray,
    ktop: int,
    kbot: np.ndarray,
    dt_s: float,
    extinction_per_m: float,
) -> float:
    """Heat the water column by one step of surface exchange, in place.

    Shortwave decays exponentially with depth; the non-solar net flux
    warms the top SURFACE_WINDOW_M of water. Returns the total heat added
    in joules (the audit term).
    """
    n_layers = depth_top_m.size
    frac_sw = solar_fractions(depth_top_m, depth_bot_m, ktop, kbot, extinction_per_m)

    depth_col = depth_bot_m[kbot]                       # (N,) water depth
    window = np.minimum(SURFACE_WINDOW_M, depth_col)    # (N,)
    top = np.minimum(depth_top_m[:, None], window[None, :])
    bot = np.minimum(depth_bot_m[:, None], window[None, :])
    rows = np.arange(n_layers)[:, None]
    wet = (rows >= ktop) & (rows <= kbot[None, :])
    frac_ns = np.where(wet, (bot - top) / window[None, :], 0.0)

    q_cell = area_top_m2[None, :] * (
        sw_wm2[None, :] * frac_sw + nonsolar_wm2[None, :] * frac_ns
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        dT = np.where(
            wet & (volume_m3 > 0.0),
            q_cell * dt_s / (RHO0 * CP_WATER * np.maximum(volume_m3, 1e-300)),
            0.0,
        )
    temp_c += dT
    return float((dt_s * area_top_m2 * (sw_wm2 + nonsolar_wm2)).sum())


def diffuse_temperature(
    temp_c: np.ndarray,
    volume_m3: np.ndarray,
    conductance_m3s: np.ndarray,
    ktop: int,
    kbot: np.ndarray,
    dt_s: float,
) -> None:
    """Implicit conservative vertical diffusion of temperature, in place.

    ``conductance_m3s[k, i]`` couples layers k and k+1 (Kz * A / dz).
    Zero-flux at the surface and the bed.
    """
    if np.any(conductance_m3s < 0.0):
        raise SingularSystem("negative interface conductance")
    rows = np.arange(temp_c.shape[0])[:, None]
    wet = (rows >= ktop) & (rows <= np.asarray(kbot)[None, :])
    if np.any(volume_m3[wet] <= 0.0):
        raise SingularSystem("non-positive wet cell volume in diffusion")
    _kernels.thomas_diffuse(
        temp_c, volume_m3, conductance_m3s, ktop, np.asarray(kbot, dtype=np.int64), dt_s
    )
