"""
Core grid model: geotransforms, bands, rasters, masks and regions.

Everything here is immutable after construction. Arrays handed to the
constructors are copied and frozen (``writeable=False``), so operations can
share them freely between threads.

Coordinates are projected meters. A grid is north-up: column ``c`` and row
``r`` have their pixel center at::

    x = origin_x + (c + 0.5) * pixel_size_x
    y = origin_y - (r + 0.5) * pixel_size_y
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from floodscope.errors import DegeneratePolygon, GridMismatch, ParseError

GEOGRAPHIC_CRS = frozenset(
    {"EPSG:4326", "EPSG:4269", "EPSG:4258", "EPSG:4979", "OGC:CRS84", "CRS84", "WGS84"}
)


def _frozen(array, dtype=None):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GeoTransform:
    origin_x: float
    origin_y: float
    pixel_size_x: float
    pixel_size_y: float
    crs_id: str = ""

    def __post_init__(self):
        for name in ("origin_x", "origin_y", "pixel_size_x", "pixel_size_y"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.pixel_size_x <= 0 or self.pixel_size_y <= 0:
            raise ValueError(
                f"pixel sizes must be positive, got ({self.pixel_size_x}, {self.pixel_size_y})"
            )

    @property
    def is_geographic(self) -> bool:
        return self.crs_id.strip().upper() in GEOGRAPHIC_CRS

    def pixel_center(self, col, row):
        """Map pixel indices (scalars or arrays) to the CRS coordinates of their centers."""
        x = self.origin_x + (np.asarray(col, dtype=float) + 0.5) * self.pixel_size_x
        y = self.origin_y - (np.asarray(row, dtype=float) + 0.5) * self.pixel_size_y
        return x, y

    def pixel_index(self, x, y):
        """Inverse of pixel_center: the (col, row) of the pixel containing (x, y)."""
        col = np.floor((np.asarray(x, dtype=float) - self.origin_x) / self.pixel_size_x)
        row = np.floor((self.origin_y - np.asarray(y, dtype=float)) / self.pixel_size_y)
        return col.astype(np.int64), row.astype(np.int64)


class Band:
    """
    One named layer of a raster.

    Values are float32 (ingested reflectance, class maps) or float64 (derived
    indices). Invalid pixels are NaN internally; ``nodata`` records the
    sentinel used when the band is written to an integer file format.
    """

    __slots__ = ("name", "values", "nodata", "units")

    def __init__(self, name: str, values, nodata: float = math.nan, units: str = ""):
        arr = np.asarray(values)
        if arr.ndim != 2:
            raise ValueError(f"band {name!r}: values must be 2-D, got shape {arr.shape}")
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if np.isinf(arr).any():
            raise ValueError(f"band {name!r}: values must be finite or NaN")
        object.__setattr__(self, "name", str(name))
        object.__setattr__(self, "values", _frozen(arr))
        object.__setattr__(self, "nodata", float(nodata))
        object.__setattr__(self, "units", str(units))

    def __setattr__(self, key, value):
        raise AttributeError("Band is immutable")

    @property
    def shape(self):
        return self.values.shape

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def with_values(self, values, name=None) -> "Band":
        return Band(self.name if name is None else name, values, self.nodata, self.units)

    def __eq__(self, other):
        if not isinstance(other, Band):
            return NotImplemented
        same_nodata = self.nodata == other.nodata or (
            math.isnan(self.nodata) and math.isnan(other.nodata)
        )
        return (
            self.name == other.name
            and self.units == other.units
            and same_nodata
            and self.values.dtype == other.values.dtype
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    def __repr__(self):
        return f"Band({self.name!r}, shape={self.shape}, dtype={self.values.dtype})"


class RasterGrid:
    """An aligned stack of bands sharing one geotransform."""

    __slots__ = ("width", "height", "geotransform", "bands", "acquisition_date")

    def __init__(
        self,
        geotransform: GeoTransform,
        bands: Sequence[Band],
        acquisition_date: Optional[str] = None,
    ):
        bands = tuple(bands)
        if not bands:
            raise ValueError("a raster needs at least one band")
        height, width = bands[0].shape
        if width < 1 or height < 1:
            raise ValueError("raster dimensions must be at least 1x1")
        names = [b.name for b in bands]
        if len(set(names)) != len(names):
            raise ValueError(f"band names must be unique, got {names}")
        for b in bands:
            if b.shape != (height, width):
                raise GridMismatch(
                    f"band {b.name!r} has shape {b.shape}, expected {(height, width)}"
                )
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "height", height)
        object.__setattr__(self, "geotransform", geotransform)
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "acquisition_date", acquisition_date)

    def __setattr__(self, key, value):
        raise AttributeError("RasterGrid is immutable")

    @classmethod
    def from_arrays(cls, geotransform, arrays: dict, acquisition_date=None, nodata=math.nan):
        bands = [Band(name, values, nodata) for name, values in arrays.items()]
        return cls(geotransform, bands, acquisition_date)

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def band_names(self):
        return [b.name for b in self.bands]

    def band(self, name: str) -> Band:
        for b in self.bands:
            if b.name == name:
                return b
        from floodscope.errors import MissingBand

        raise MissingBand(f"band {name!r} not in grid (have {self.band_names})")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.band(name).values

    def __eq__(self, other):
        if not isinstance(other, RasterGrid):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.geotransform == other.geotransform
            and self.acquisition_date == other.acquisition_date
            and self.bands == other.bands
        )

    def __repr__(self):
        return (
            f"RasterGrid({self.width}x{self.height}, bands={self.band_names}, "
            f"date={self.acquisition_date})"
        )


class Mask:
    """Boolean layer aligned to a grid."""

    __slots__ = ("bits", "geotransform")

    def __init__(self, bits, geotransform: GeoTransform):
        arr = np.asarray(bits)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "bits", _frozen(arr, dtype=bool))
        object.__setattr__(self, "geotransform", geotransform)

    def __setattr__(self, key, value):
        raise AttributeError("Mask is immutable")

    @classmethod
    def empty_like(cls, other) -> "Mask":
        return cls(np.zeros((other.height, other.width), dtype=bool), other.geotransform)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self):
        return self.bits.shape

    def popcount(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __and__(self, other):
        return mask_combine(self, other, MaskOp.AND)

    def __or__(self, other):
        return mask_combine(self, other, MaskOp.OR)

    def __sub__(self, other):
        return mask_combine(self, other, MaskOp.AND_NOT)

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return self.geotransform == other.geotransform and np.array_equal(self.bits, other.bits)

    def __repr__(self):
        return f"Mask({self.width}x{self.height}, set={self.popcount()})"


@dataclass(frozen=True)
class Region:
    """A named simple polygon (no holes) in CRS meters."""

    name: str
    polygon: tuple
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(
            self, "polygon", tuple((float(x), float(y)) for x, y in self.polygon)
        )

    @property
    def cached_mask(self) -> Optional[Mask]:
        return next(iter(self._cache.values()), None)

    def mask(self, geotransform: GeoTransform, width: int, height: int) -> Mask:
        """Rasterized membership on the given grid (memoized per grid)."""
        key = (geotransform, width, height)
        if key not in self._cache:
            self._cache[key] = rasterize_polygon(self, geotransform, width, height)
        return self._cache[key]

    def mask_like(self, like) -> Mask:
        return self.mask(like.geotransform, like.width, like.height)


def check_aligned(*layers):
    """Raise GridMismatch unless every layer has the same shape and geotransform."""
    first = layers[0]
    for other in layers[1:]:
        if (other.height, other.width) != (first.height, first.width):
            raise GridMismatch(
                f"dimension mismatch: {first.width}x{first.height} vs {other.width}x{other.height}"
            )
        if other.geotransform != first.geotransform:
            raise GridMismatch(
                f"geotransform mismatch: {first.geotransform} vs {other.geotransform}"
            )


def pixel_area_km2(gt: GeoTransform) -> float:
    return gt.pixel_size_x * gt.pixel_size_y / 1e6


def polygon_area(polygon) -> float:
    """Unsigned shoelace area of a vertex sequence."""
    pts = np.asarray(polygon, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def rasterize_polygon(region: Region, gt: GeoTransform, width: int, height: int) -> Mask:
    """
    Scanline fill of a simple polygon at pixel centers, even-odd rule.

    Edges are half-open in y (a center exactly on the top edge is inside, on
    the bottom edge outside) and in x (left boundary inside, right boundary
    outside), so regions that share an edge never claim the same pixel.
    """
    if width < 1 or height < 1:
        raise ValueError("width and height must be >= 1")
    pts = np.asarray(region.polygon, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise DegeneratePolygon(f"region {region.name!r} has {len(pts)} vertices, need >= 3")
    if polygon_area(pts) == 0.0:
        raise DegeneratePolygon(f"region {region.name!r} has zero area")

    x0, y0 = pts[:, 0], pts[:, 1]
    x1, y1 = np.roll(x0, 1), np.roll(y0, 1)
    centers_x, _ = gt.pixel_center(np.arange(width), 0)
    bits = np.zeros((height, width), dtype=bool)

    # only rows whose centers fall within the polygon's y-extent can be touched
    _, row_lo = gt.pixel_index(0.0, y0.max())
    _, row_hi = gt.pixel_index(0.0, y0.min())
    for row in range(max(int(row_lo) - 1, 0), min(int(row_hi) + 2, height)):
        _, cy = gt.pixel_center(0, row)
        crossing = (y0 >= cy) != (y1 >= cy)
        if not crossing.any():
            continue
        xa, ya, xb, yb = x0[crossing], y0[crossing], x1[crossing], y1[crossing]
        hits = np.sort(xa + (cy - ya) * (xb - xa) / (yb - ya))
        starts = np.searchsorted(centers_x, hits[0::2], side="left")
        stops = np.searchsorted(centers_x, hits[1::2], side="left")
        for start, stop in zip(starts, stops):
            bits[row, start:stop] = True
    return Mask(bits, gt)


class MaskOp(Enum):
    AND = "and"
    OR = "or"
    AND_NOT = "and_not"


def mask_combine(a: Mask, b: Mask, op) -> Mask:
    check_aligned(a, b)
    op = MaskOp(op) if not isinstance(op, MaskOp) else op
    if op is MaskOp.AND:
        bits = a.bits & b.bits
    elif op is MaskOp.OR:
        bits = a.bits | b.bits
    else:
        bits = a.bits & ~b.bits
    return Mask(bits, a.geotransform)


def mask_area_km2(m: Mask, within: Optional[Region | Mask] = None) -> float:
    """Area of set pixels, optionally restricted to a region."""
    if within is None:
        count = m.popcount()
    else:
        region_mask = within if isinstance(within, Mask) else within.mask_like(m)
        check_aligned(m, region_mask)
        count = int(np.count_nonzero(m.bits & region_mask.bits))
    return count * pixel_area_km2(m.geotransform)


def class_pixel_counts(values: np.ndarray) -> tuple[dict, int]:
    """Per-class pixel counts of a class-index array plus the NaN (nodata) count."""
    values = np.asarray(values)
    valid = ~np.isnan(values)
    classes, counts = np.unique(values[valid].astype(np.int64), return_counts=True)
    return dict(zip(classes.tolist(), counts.tolist())), int(values.size - valid.sum())


def class_areas_km2(values: np.ndarray, gt: GeoTransform) -> tuple[dict, float]:
    """Per-class areas of a class map and the area of its nodata pixels."""
    counts, nodata = class_pixel_counts(values)
    unit = pixel_area_km2(gt)
    return {c: n * unit for c, n in counts.items()}, nodata * unit


def align_nearest(grid: RasterGrid, target: GeoTransform, width: int, height: int) -> RasterGrid:
    """
    Resample onto another grid by nearest neighbor: each target pixel takes the
    source pixel containing its center; centers outside the source are nodata.
    """
    cx, _ = target.pixel_center(np.arange(width), 0)
    _, cy = target.pixel_center(0, np.arange(height))
    src_col, _ = grid.geotransform.pixel_index(cx, 0.0)
    _, src_row = grid.geotransform.pixel_index(0.0, cy)
    col_ok = (src_col >= 0) & (src_col < grid.width)
    row_ok = (src_row >= 0) & (src_row < grid.height)
    inside = row_ok[:, None] & col_ok[None, :]
    rows = np.clip(src_row, 0, grid.height - 1)
    cols = np.clip(src_col, 0, grid.width - 1)
    bands = []
    for b in grid.bands:
        out = b.values[np.ix_(rows, cols)].copy()
        out[~inside] = np.nan
        bands.append(b.with_values(out))
    return RasterGrid(target, bands, grid.acquisition_date)


def parse_regions(text: str, source: Optional[str] = None) -> list[Region]:
    """Parse ``name;x1,y1 x2,y2 ...`` lines (``#`` starts a comment)."""
    regions = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ";" not in line:
            raise ParseError("expected 'name;x1,y1 x2,y2 ...'", lineno, source)
        name, coords = line.split(";", 1)
        name = name.strip()
        if not name:
            raise ParseError("empty region name", lineno, source)
        vertices = []
        for token in coords.split():
            try:
                x, y = token.split(",")
                vertices.append((float(x), float(y)))
            except ValueError:
                raise ParseError(f"bad vertex {token!r}", lineno, source) from None
        if len(vertices) < 3:
            raise DegeneratePolygon(f"{source or '<regions>'}:{lineno}: region {name!r} needs >= 3 vertices")
        regions.append(Region(name, tuple(vertices)))
    return regions


def read_regions(path) -> list[Region]:
    path = Path(path)
    return parse_regions(path.read_text(), source=str(path))


def format_regions(regions: Iterable[Region]) -> str:
    lines = []
    for r in regions:
        coords = " ".join(f"{x!r},{y!r}" for x, y in r.polygon)
        lines.append(f"{r.name};{coords}")
    return "\n".join(lines) + "\n"
