"""Soil-moisture differencing, regional moisture series and a sowing-readiness indicator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from floodscope.errors import (
    BadThreshold,
    EmptyInput,
    EmptyRegion,
    EmptySeries,
    LayerMismatch,
    MixedLayers,
)
from floodscope.raster import Band, RasterGrid, Region, check_aligned
from floodscope.reports import SeriesSample, TimeSeriesReport

LAYERS = ("top", "root")  # 0-5 cm surface, 0-100 cm root zone


@dataclass(frozen=True)
class MoistureGrid:
    grid: RasterGrid
    layer: str
    epoch: str

    def __post_init__(self):
        if self.layer not in LAYERS:
            raise ValueError(f"layer must be one of {LAYERS}, got {self.layer!r}")
        if len(self.grid.bands) != 1:
            raise ValueError("a moisture grid must have exactly one band")
        v = self.values
        v = v[~np.isnan(v)]
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("volumetric moisture must lie in [0, 1]")

    @property
    def values(self) -> np.ndarray:
        return self.grid.bands[0].values

    @property
    def geotransform(self):
        return self.grid.geotransform

    @property
    def width(self):
        return self.grid.width

    @property
    def height(self):
        return self.grid.height


@dataclass(frozen=True)
class DifferenceSummary:
    mean: float
    min: float
    max: float
    count: int


def moisture_difference(a: MoistureGrid, b: MoistureGrid) -> tuple[RasterGrid, DifferenceSummary]:
    """``a - b`` where both are valid (nodata elsewhere), with summary statistics."""
    if a.layer != b.layer:
        raise LayerMismatch(f"cannot difference {a.layer!r} against {b.layer!r} moisture")
    check_aligned(a, b)
    # float64 keeps a - b == -(b - a) exact for every float32 input pair
    diff = a.values.astype(np.float64) - b.values.astype(np.float64)
    valid = ~np.isnan(diff)
    grid = RasterGrid(a.geotransform, [Band("moisture_difference", diff, units="m3/m3")])
    if valid.any():
        d = diff[valid]
        summary = DifferenceSummary(float(d.mean()), float(d.min()), float(d.max()), int(d.size))
    else:
        summary = DifferenceSummary(math.nan, math.nan, math.nan, 0)
    return grid, summary


@dataclass(frozen=True)
class MoistureSeries:
    region: str
    layer: str
    samples: tuple  # SeriesSample(epoch, mean fraction, valid pixel count)

    def __post_init__(self):
        epochs = [s.period for s in self.samples]
        if any(x >= y for x, y in zip(epochs, epochs[1:])):
            raise ValueError("epochs must be strictly increasing")
        if any(not 0.0 <= s.value <= 1.0 for s in self.samples):
            raise ValueError("mean moisture must lie in [0, 1]")

    @property
    def epochs(self):
        return [s.period for s in self.samples]

    @property
    def means(self):
        return [s.value for s in self.samples]

    def to_report(self) -> TimeSeriesReport:
        return TimeSeriesReport(self.region, self.samples, "moisture fraction")


def regional_moisture_series(grids: Sequence[MoistureGrid], region: Region) -> MoistureSeries:
    """
    Mean of valid in-region pixels per epoch. The region is rasterized on the
    moisture grid itself; epochs with no valid pixel inside it are skipped.
    """
    if not grids:
        raise EmptyInput("need at least one moisture grid")
    layers = {g.layer for g in grids}
    if len(layers) > 1:
        raise MixedLayers(f"grids mix layers {sorted(layers)}")
    check_aligned(*grids)
    rbits = region.mask_like(grids[0]).bits
    if not rbits.any():
        raise EmptyRegion(f"region {region.name!r} covers no moisture pixels")
    samples = []
    for g in sorted(grids, key=lambda g: g.epoch):
        vals = g.values[rbits]
        vals = vals[~np.isnan(vals)]
        if vals.size:
            samples.append(SeriesSample(g.epoch, float(np.mean(vals, dtype=np.float64)), int(vals.size)))
    return MoistureSeries(region.name, layers.pop(), tuple(samples))


def sowing_readiness(series: MoistureSeries, threshold: float) -> Optional[str]:
    """
    First epoch whose regional mean has dried to ``threshold`` or below, or
    None when it never does. There is deliberately no default threshold.
    """
    if not series.samples:
        raise EmptySeries("moisture series has no samples")
    if not (0.0 < threshold < 1.0):
        raise BadThreshold(f"threshold must lie in (0, 1), got {threshold}")
    for s in series.samples:
        if s.value <= threshold:
            return s.period
    return None
