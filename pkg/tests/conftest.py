import numpy as np
import pytest

from lares.forcing import ForcingSeries, SeriesTable
from lares.grid import Grid


def make_grid(n_layers=6, n_segments=4, dz=1.0, length=500.0, top_width=100.0,
              width_step_layer=10.0, width_step_seg=5.0):
    """Small wedge grid: widths shrink with depth and toward the head."""
    z_bot = np.arange(n_layers - 1, -1, -1.0) * dz
    width = np.zeros((n_layers, n_segments))
    for i in range(n_segments):
        for k in range(n_layers):
            width[k, i] = max(top_width - width_step_layer * k - width_step_seg * i, 0.0)
    return Grid(
        width_m=width,
        length_m=np.full(n_segments, float(length)),
        dz_m=np.full(n_layers, float(dz)),
        z_bottom_m=z_bot,
    )


def _table(name, fields, day, cols):
    day = np.asarray(day, dtype=np.float64)
    values = {}
    for f in fields:
        v = cols[f]
        values[f] = np.full(day.size, float(v)) if np.isscalar(v) else np.asarray(
            v, dtype=np.float64
        )
    return SeriesTable(
        name=name, fields=tuple(fields), day=day, values=values,
        filled=np.zeros(day.size, dtype=bool),
    )


def make_forcing(first_day, last_day, *, q_in=5.0, t_in=15.0, do_in=8.0, bod_in=1.0,
                 t_air=20.0, t_dew=12.0, wind=3.0, wind_dir=180.0, cloud=0.3,
                 q_out=5.0, intake=2.5):
    """Gap-free daily forcing; scalars or per-day arrays."""
    day = np.arange(int(first_day), int(last_day) + 1, dtype=np.float64)
    inflow = _table(
        "inflow", ["q_in_m3s", "t_in_c", "do_in_mgl", "bod_in_mgl"], day,
        {"q_in_m3s": q_in, "t_in_c": t_in, "do_in_mgl": do_in, "bod_in_mgl": bod_in},
    )
    met = _table(
        "met", ["t_air_c", "t_dew_c", "wind_ms", "wind_dir_deg", "cloud_frac"], day,
        {"t_air_c": t_air, "t_dew_c": t_dew, "wind_ms": wind,
         "wind_dir_deg": wind_dir, "cloud_frac": cloud},
    )
    withdrawal = _table(
        "withdrawal", ["q_out_m3s", "intake_elev_m"], day,
        {"q_out_m3s": q_out, "intake_elev_m": intake},
    )
    return ForcingSeries(inflow=inflow, met=met, withdrawal=withdrawal)


@pytest.fixture
def wedge_grid():
    return make_grid()
