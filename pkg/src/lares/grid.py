"""Reservoir geometry: segments, the shared layer ladder, and storage curves.

Coordinate conventions used everywhere in this package:

* Segments are numbered 1..N in the bathymetry file, segment 1 at the
  upstream end and segment N against the dam face. Distance is measured
  from the dam face to the segment center.
* Layers are numbered 1..L with layer 1 at the water surface (top of the
  ladder). Internally arrays are indexed ``[k, i]`` with ``k = layer - 1``
  increasing downward and ``i = segment - 1`` increasing toward the dam.
* Every segment shares the same vertical ladder (per-layer bottom elevation
  and thickness). A segment's local bed is expressed by zero widths below
  it; widths never increase with depth, so the open cells of a column form
  a contiguous block from the top of the ladder down to the bed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ElevationOutOfRange,
    MissingCell,
    NegativeGeometry,
    NonMonotonicWidth,
    ParseError,
)

BATHYMETRY_HEADER = ["segment", "layer", "elevation_bottom_m", "thickness_m", "width_m", "length_m"]


@dataclass(frozen=True)
class SegmentGeom:
    """Geometry of one longitudinal segment (top-down layer order)."""

    segment: int
    distance_from_dam_m: float
    length_m: float
    elevation_bottom_m: np.ndarray
    thickness_m: np.ndarray
    width_m: np.ndarray


@dataclass
class Grid:
    """Laterally averaged reservoir grid.

    ``width_m`` has shape (L, N); ``dz_m``, ``z_bottom_m``, ``z_top_m`` have
    shape (L,); ``length_m`` and ``distance_from_dam_m`` have shape (N,).
    ``bed_layer`` holds, per segment, the index of the deepest open layer.
    """

    width_m: np.ndarray
    length_m: np.ndarray
    dz_m: np.ndarray
    z_bottom_m: np.ndarray

    z_top_m: np.ndarray = field(init=False)
    distance_from_dam_m: np.ndarray = field(init=False)
    bed_layer: np.ndarray = field(init=False)
    datum_m: float = field(init=False)
    crest_m: float = field(init=False)

    def __post_init__(self) -> None:
        self.width_m = np.asarray(self.width_m, dtype=np.float64)
        self.length_m = np.asarray(self.length_m, dtype=np.float64)
        self.dz_m = np.asarray(self.dz_m, dtype=np.float64)
        self.z_bottom_m = np.asarray(self.z_bottom_m, dtype=np.float64)
        self.z_top_m = self.z_bottom_m + self.dz_m
        # distance from the dam face to each segment center; the dam face is
        # the downstream edge of the last segment
        tail = np.concatenate([np.cumsum(self.length_m[::-1])[::-1][1:], [0.0]])
        self.distance_from_dam_m = tail + 0.5 * self.length_m
        open_mask = self.width_m > 0.0
        self.bed_layer = np.where(
            open_mask.any(axis=0), open_mask.shape[0] - 1 - np.argmax(open_mask[::-1, :], axis=0), -1
        ).astype(np.int64)
        self.datum_m = float(self.z_bottom_m[-1])
        self.crest_m = float(self.z_top_m[0])
        self._plan_area_m2 = self.width_m * self.length_m[np.newaxis, :]

    @property
    def n_layers(self) -> int:
        return self.width_m.shape[0]

    @property
    def n_segments(self) -> int:
        return self.width_m.shape[1]

    @property
    def plan_area_m2(self) -> np.ndarray:
        """Per-cell horizontal footprint, shape (L, N)."""
        return self._plan_area_m2

    def segment(self, segment: int) -> SegmentGeom:
        """One-based accessor mirroring the bathymetry file layout."""
        i = segment - 1
        if not 0 <= i < self.n_segments:
            raise IndexError(f"segment {segment} outside 1..{self.n_segments}")
        ladder_bottom = self.z_bottom_m.copy()
        return SegmentGeom(
            segment=segment,
            distance_from_dam_m=float(self.distance_from_dam_m[i]),
            length_m=float(self.length_m[i]),
            elevation_bottom_m=ladder_bottom,
            thickness_m=self.dz_m.copy(),
            width_m=self.width_m[:, i].copy(),
        )

    def top_wet_layer(self, surface_elevation_m: float) -> int:
        """Index of the layer containing the surface elevation.

        A surface exactly on an interface belongs to the layer below it, so
        the returned layer always holds water (possibly a full layer).
        """
        if not self.datum_m < surface_elevation_m <= self.crest_m:
            raise ElevationOutOfRange(
                f"surface {surface_elevation_m} outside ({self.datum_m}, {self.crest_m}]"
            )
        k = int(np.searchsorted(-self.z_bottom_m, -surface_elevation_m, side="right"))
        return min(k, self.n_layers - 1)

    def wet_thickness_m(self, surface_elevation_m: float) -> np.ndarray:
        """Water-filled thickness of each ladder layer, shape (L,)."""
        if not self.datum_m <= surface_elevation_m <= self.crest_m:
            raise ElevationOutOfRange(
                f"surface {surface_elevation_m} outside [{self.datum_m}, {self.crest_m}]"
            )
        return np.clip(surface_elevation_m - self.z_bottom_m, 0.0, self.dz_m)

    def cell_volumes_m3(self, surface_elevation_m: float) -> np.ndarray:
        """Per-cell volume at the given level-pool elevation, shape (L, N)."""
        wet = self.wet_thickness_m(surface_elevation_m)
        return self.plan_area_m2 * wet[:, np.newaxis]

    def sediment_contact_area_m2(self) -> np.ndarray:
        """Per-cell bed contact area, shape (L, N).

        Each layer touches sediment over the shelf its width loses to the
        layer below; the deepest open cell touches its full footprint. The
        column total equals the top-layer footprint.
        """
        below = np.vstack([self.width_m[1:, :], np.zeros((1, self.n_segments))])
        return np.maximum(self.width_m - below, 0.0) * self.length_m[np.newaxis, :]


@dataclass(frozen=True)
class AreaVolumeCurve:
    """Stage curve: one row per layer interface elevation, bottom first."""

    elevation_m: np.ndarray
    plan_area_m2: np.ndarray
    volume_m3: np.ndarray

    def volume_at(self, elevation_m: float) -> float:
        """Storage at an elevation, linear between interface rows."""
        lo = float(self.elevation_m[0])
        hi = float(self.elevation_m[-1])
        if not lo <= elevation_m <= hi:
            raise ElevationOutOfRange(f"elevation {elevation_m} outside [{lo}, {hi}]")
        return float(np.interp(elevation_m, self.elevation_m, self.volume_m3))

    def elevation_at(self, volume_m3: float) -> float:
        """Lowest elevation holding the given storage (inverse of volume_at)."""
        if volume_m3 < 0.0 or volume_m3 > float(self.volume_m3[-1]):
            raise ElevationOutOfRange(
                f"volume {volume_m3} outside [0, {float(self.volume_m3[-1])}]"
            )
        j = int(np.searchsorted(self.volume_m3, volume_m3, side="left"))
        if j == 0:
            return float(self.elevation_m[0])
        v0, v1 = float(self.volume_m3[j - 1]), float(self.volume_m3[j])
        e0, e1 = float(self.elevation_m[j - 1]), float(self.elevation_m[j])
        if v1 == v0:
            return e0
        return e0 + (e1 - e0) * (volume_m3 - v0) / (v1 - v0)


def load_bathymetry(path: str | Path) -> Grid:
    """Read a bathymetry CSV and validate the shared-ladder geometry.

    The file carries one row per (segment, layer) cell with layer 1 at the
    surface. Raises ParseError for malformed files, MissingCell for an
    incomplete segment x layer matrix, NegativeGeometry and
    NonMonotonicWidth for inconsistent geometry.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ParseError(f"{path}: empty file")
            if [h.strip() for h in header] != BATHYMETRY_HEADER:
                raise ParseError(
                    f"{path}: expected header {','.join(BATHYMETRY_HEADER)}, got {','.join(header)}"
                )
            rows = []
            for ln, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 6:
                    raise ParseError(f"{path}:{ln}: expected 6 fields, got {len(row)}")
                try:
                    rows.append(
                        (int(row[0]), int(row[1]), float(row[2]), float(row[3]), float(row[4]), float(row[5]))
                    )
                except ValueError as exc:
                    raise ParseError(f"{path}:{ln}: {exc}") from None
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")

    segments = sorted({r[0] for r in rows})
    layers = sorted({r[1] for r in rows})
    n_seg, n_lay = len(segments), len(layers)
    if segments != list(range(1, n_seg + 1)):
        raise MissingCell(f"{path}: segment ids must be 1..{n_seg}, got {segments[:5]}...")
    if layers != list(range(1, n_lay + 1)):
        raise MissingCell(f"{path}: layer ids must be 1..{n_lay}, got {layers[:5]}...")

    seen = np.zeros((n_lay, n_seg), dtype=bool)
    elev = np.full((n_lay, n_seg), np.nan)
    thick = np.full((n_lay, n_seg), np.nan)
    width = np.full((n_lay, n_seg), np.nan)
    length = np.full(n_seg, np.nan)
    for seg, lay, e, t, w, ln_m in rows:
        k, i = lay - 1, seg - 1
        if seen[k, i]:
            raise ParseError(f"{path}: duplicate cell segment={seg} layer={lay}")
        seen[k, i] = True
        elev[k, i], thick[k, i], width[k, i] = e, t, w
        if np.isnan(length[i]):
            length[i] = ln_m
        elif length[i] != ln_m:
            raise ParseError(f"{path}: segment {seg} has inconsistent length_m")
    if not seen.all():
        k, i = np.argwhere(~seen)[0]
        raise MissingCell(f"{path}: missing cell segment={i + 1} layer={k + 1}")

    if (thick <= 0).any():
        raise NegativeGeometry(f"{path}: layer thickness must be positive")
    if (length <= 0).any():
        raise NegativeGeometry(f"{path}: segment length must be positive")
    if (width < 0).any():
        raise NegativeGeometry(f"{path}: widths must be non-negative")

    # shared ladder: identical bottoms/thicknesses across segments, stacked
    if not (elev == elev[:, :1]).all() or not (thick == thick[:, :1]).all():
        raise ParseError(f"{path}: layer ladder differs between segments")
    z_bot = elev[:, 0]
    dz = thick[:, 0]
    if not np.allclose(z_bot[:-1], z_bot[1:] + dz[1:], rtol=0.0, atol=1e-9):
        raise ParseError(f"{path}: layers do not stack (bottom_k != bottom_k+1 + thickness_k+1)")

    deeper = width[1:, :]
    if (deeper > width[:-1, :]).any():
        k, i = np.argwhere(deeper > width[:-1, :])[0]
        raise NonMonotonicWidth(
            f"{path}: segment {i + 1} width grows with depth at layer {k + 2}"
        )
    if (width.max(axis=0) <= 0).any():
        i = int(np.argwhere(width.max(axis=0) <= 0)[0][0])
        raise ParseError(f"{path}: segment {i + 1} has no open cells")

    return Grid(width_m=width, length_m=length, dz_m=dz, z_bottom_m=z_bot)


def write_bathymetry(grid: Grid, path: str | Path) -> None:
    """Write the grid back to CSV; floats use repr so geometry round-trips bit-exactly."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BATHYMETRY_HEADER)
        for i in range(grid.n_segments):
            for k in range(grid.n_layers):
                writer.writerow(
                    [
                        i + 1,
                        k + 1,
                        repr(float(grid.z_bottom_m[k])),
                        repr(float(grid.dz_m[k])),
                        repr(float(grid.width_m[k, i])),
                        repr(float(grid.length_m[i])),
                    ]
                )


def total_volume(grid: Grid, surface_elevation_m: float) -> float:
    """Storage at a level-pool surface elevation (partial top layer prorated)."""
    return float(grid.cell_volumes_m3(surface_elevation_m).sum())


def area_volume_curve(grid: Grid) -> AreaVolumeCurve:
    """Stage curve with one row per layer interface elevation.

    The area column carries the plan area of the layer below each interface
    (the bottom row repeats the deepest layer's area), so storage is linear
    in elevation between consecutive rows and the curve inverts exactly.
    """
    elevations = np.concatenate([[grid.datum_m], grid.z_top_m[::-1]])
    layer_area = grid.plan_area_m2.sum(axis=1)  # (L,)
    areas = np.concatenate([[layer_area[-1]], layer_area[::-1]])
    volumes = np.array([total_volume(grid, float(e)) for e in elevations])
    return AreaVolumeCurve(elevation_m=elevations, plan_area_m2=areas, volume_m3=volumes)
