"""
Spectral indices (NDVI, NDWI, EVI) and the threshold rules built on them.

Index arithmetic runs in float64 and the results stay float64. Invalid
pixels (NaN input, singular denominator) come out as NaN and never pass a
threshold test.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from floodscope.errors import EmptyInput, GridMismatch
from floodscope.raster import Band, GeoTransform, Mask

EVI_GAIN = 2.5
EVI_C1 = 6.0
EVI_C2 = 7.5
EVI_L = 1.0
EVI_MIN_DENOMINATOR = 1e-6

# Landsat 8/9 OLI band names for the four reflectances the indices need
LANDSAT9_BANDS = {"blue": "B2", "green": "B3", "red": "B4", "nir": "B5"}


class IndexKind(Enum):
    NDVI = "ndvi"
    NDWI = "ndwi"
    EVI = "evi"


@dataclass(frozen=True)
class IndexBand:
    kind: IndexKind
    band: Band
    geotransform: Optional[GeoTransform] = None

    @property
    def values(self) -> np.ndarray:
        return self.band.values

    @property
    def shape(self):
        return self.band.shape


def _aligned(*bands: Band):
    shape = bands[0].shape
    for b in bands[1:]:
        if b.shape != shape:
            raise GridMismatch(f"band {b.name!r} has shape {b.shape}, expected {shape}")
    return [np.asarray(b.values, dtype=np.float64) for b in bands]


def _normalized_difference(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    total = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (a - b) / total
    out[total == 0] = np.nan
    # negative reflectances can push the ratio outside [-1, 1]; such pixels are unusable
    out[np.abs(out) > 1.0] = np.nan
    return out


def compute_ndvi(nir: Band, red: Band, geotransform: Optional[GeoTransform] = None) -> IndexBand:
    n, r = _aligned(nir, red)
    return IndexBand(IndexKind.NDVI, Band("ndvi", _normalized_difference(n, r)), geotransform)


def compute_ndwi(green: Band, nir: Band, geotransform: Optional[GeoTransform] = None) -> IndexBand:
    """McFeeters NDWI, (Green - NIR) / (Green + NIR); open water is positive."""
    g, n = _aligned(green, nir)
    return IndexBand(IndexKind.NDWI, Band("ndwi", _normalized_difference(g, n)), geotransform)


def compute_evi(
    nir: Band, red: Band, blue: Band, geotransform: Optional[GeoTransform] = None
) -> IndexBand:
    """EVI with the MODIS coefficients G=2.5, C1=6, C2=7.5, L=1 (reflectance in [0, 1])."""
    n, r, b = _aligned(nir, red, blue)
    denominator = n + EVI_C1 * r - EVI_C2 * b + EVI_L
    singular = np.abs(denominator) < EVI_MIN_DENOMINATOR
    with np.errstate(divide="ignore", invalid="ignore"):
        out = EVI_GAIN * (n - r) / denominator
    out[singular] = np.nan
    return IndexBand(IndexKind.EVI, Band("evi", out), geotransform)


class Comparator(Enum):
    LESS = "less"
    GREATER_EQUAL = "greater_equal"


@dataclass(frozen=True)
class FloodRule:
    """
    Per-pixel flood decision: the NDWI test (direction set by ``ndwi_comparator``)
    and ``NDVI < ndvi_threshold`` must both hold. Both tests are strict at the
    NDVI threshold; under LESS the NDWI test is strict as well.
    """

    ndwi_threshold: float = 0.15
    ndvi_threshold: float = 0.2
    ndwi_comparator: Comparator = Comparator.LESS

    def __post_init__(self):
        object.__setattr__(self, "ndwi_comparator", Comparator(self.ndwi_comparator))
        for name in ("ndwi_threshold", "ndvi_threshold"):
            value = float(getattr(self, name))
            if not -1.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [-1, 1], got {value}")
            object.__setattr__(self, name, value)

    def ndwi_test(self, ndwi: np.ndarray) -> np.ndarray:
        if self.ndwi_comparator is Comparator.LESS:
            return ndwi < self.ndwi_threshold
        return ndwi >= self.ndwi_threshold


def _common_geotransform(indices, explicit):
    found = {i.geotransform for i in indices if i.geotransform is not None}
    if explicit is not None:
        found.add(explicit)
    if len(found) > 1:
        raise GridMismatch("index bands carry different geotransforms")
    if not found:
        raise ValueError("no geotransform: pass one or build the index bands with one")
    return found.pop()


def apply_flood_rule(
    ndwi: IndexBand,
    ndvi: IndexBand,
    rule: FloodRule = FloodRule(),
    geotransform: Optional[GeoTransform] = None,
) -> Mask:
    """Flood mask from NDWI/NDVI. NaN compares false, so nodata never floods."""
    geotransform = _common_geotransform([ndwi, ndvi], geotransform)
    w, v = _aligned(ndwi.band, ndvi.band)
    bits = rule.ndwi_test(w) & (v < rule.ndvi_threshold)
    return Mask(bits, geotransform)


def derive_permanent_water(
    pre_flood_ndwi: Sequence[IndexBand],
    water_threshold: float = 0.3,
    min_fraction: float = 1.0,
    geotransform: Optional[GeoTransform] = None,
) -> Mask:
    """
    Pixels that test as water (NDWI >= water_threshold) in at least
    ``min_fraction`` of the pre-flood scenes where they were observed.
    """
    if not pre_flood_ndwi:
        raise EmptyInput("need at least one pre-flood NDWI scene")
    if not 0.0 < min_fraction <= 1.0:
        raise ValueError(f"min_fraction must lie in (0, 1], got {min_fraction}")
    geotransform = _common_geotransform(pre_flood_ndwi, geotransform)
    stack = _aligned(*(s.band for s in pre_flood_ndwi))
    water = np.zeros(stack[0].shape, dtype=np.int64)
    observed = np.zeros(stack[0].shape, dtype=np.int64)
    for ndwi in stack:
        valid = ~np.isnan(ndwi)
        observed += valid
        water += valid & (ndwi >= water_threshold)
    with np.errstate(divide="ignore", invalid="ignore"):
        fraction = water / observed
    bits = (observed > 0) & (fraction >= min_fraction)
    return Mask(bits, geotransform)


def low_vegetation_mask(
    ndvi: IndexBand, threshold: float = 0.2, geotransform: Optional[GeoTransform] = None
) -> Mask:
    """Valid pixels with NDVI strictly below ``threshold`` (shrub, grass, bare, water)."""
    geotransform = _common_geotransform([ndvi], geotransform)
    return Mask(ndvi.values < threshold, geotransform)


def validity_mask(*bands: Band | IndexBand, geotransform: GeoTransform) -> Mask:
    arrays = _aligned(*(b.band if isinstance(b, IndexBand) else b for b in bands))
    bits = np.ones(arrays[0].shape, dtype=bool)
    for a in arrays:
        bits &= ~np.isnan(a)
    return Mask(bits, geotransform)
