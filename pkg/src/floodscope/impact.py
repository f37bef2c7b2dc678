"""Flood x land-cover overlay, per-region area accounting and NDVI time series."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from floodscope.errors import (
    BaselineGap,
    EmptyInput,
    EmptyRegion,
    GridMismatch,
    NoRegions,
    ParseError,
    UnknownCrop,
)
from floodscope.raster import Mask, RasterGrid, Region, check_aligned, mask_area_km2
from floodscope.reports import (
    AreaReport,
    CropAreaReport,
    CropAreaRow,
    ImpactRow,
    SeriesSample,
    TimeSeriesReport,
)
from floodscope.spectral import IndexBand

NON_CROP_CLASSES = frozenset({"built-up", "water", "other"})


@dataclass(frozen=True)
class ClassMap:
    """A single-band grid of class indices with an ``index -> name`` legend."""

    grid: RasterGrid
    legend: dict

    def __post_init__(self):
        if len(self.grid.bands) != 1:
            raise ValueError("a class map must have exactly one band")
        values = self.grid.bands[0].values
        present = np.unique(values[~np.isnan(values)])
        unknown = sorted(set(present.tolist()) - {float(k) for k in self.legend})
        if unknown:
            raise ValueError(f"class indices {unknown} are missing from the legend")

    @property
    def geotransform(self):
        return self.grid.geotransform

    @property
    def width(self):
        return self.grid.width

    @property
    def height(self):
        return self.grid.height

    @property
    def values(self) -> np.ndarray:
        return self.grid.bands[0].values

    def codes(self, names: Iterable[str]) -> list[int]:
        wanted = set(names)
        return sorted(k for k, v in self.legend.items() if v in wanted)

    def class_mask(self, names: Iterable[str]) -> Mask:
        return Mask(np.isin(self.values, self.codes(names)), self.geotransform)

    @property
    def crop_names(self) -> list[str]:
        return sorted({v for v in self.legend.values() if v not in NON_CROP_CLASSES})

    def crop_mask(self) -> Mask:
        return self.class_mask(self.crop_names)


def parse_legend(text: str, source: Optional[str] = None) -> dict:
    legend = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, name = line.partition("=")
        try:
            index = int(key)
        except ValueError:
            index = None
        if not sep or index is None or not name.strip():
            raise ParseError("expected 'index=name'", lineno, source)
        if index in legend:
            raise ParseError(f"duplicate class index {index}", lineno, source)
        legend[index] = name.strip()
    return legend


def read_legend(path) -> dict:
    path = Path(path)
    return parse_legend(path.read_text(), str(path))


def format_legend(legend: dict) -> str:
    return "".join(f"{k}={legend[k]}\n" for k in sorted(legend))


def flood_impact_report(
    flood: Mask, crops: ClassMap, builtup: ClassMap, regions: Sequence[Region]
) -> AreaReport:
    """
    Per region: its total area, the crop-classified area under the flood mask
    and the built-up area under the flood mask. Built-up pixels are those
    whose ``builtup`` legend entry is ``"built-up"``.
    """
    if not regions:
        raise NoRegions("at least one region is required")
    check_aligned(flood, crops, builtup)
    affected_crop = flood & crops.crop_mask()
    affected_builtup = flood & builtup.class_mask(["built-up"])
    rows = []
    for region in regions:
        rmask = region.mask_like(flood)
        rows.append(ImpactRow(
            region.name,
            mask_area_km2(rmask),
            mask_area_km2(affected_crop, rmask),
            mask_area_km2(affected_builtup, rmask),
        ))
    return AreaReport(tuple(rows))


def crop_area_by_period(
    class_maps: Sequence[tuple[str, ClassMap]], regions: Sequence[Region], crops: Sequence[str]
) -> CropAreaReport:
    """Area of each requested crop inside each region, for every labeled class map."""
    if not class_maps:
        raise EmptyInput("need at least one class map")
    if not regions:
        raise NoRegions("at least one region is required")
    check_aligned(*(cm for _, cm in class_maps))
    rows = []
    for period, cm in class_maps:
        known = set(cm.legend.values())
        for crop in crops:
            if crop not in known:
                raise UnknownCrop(f"crop {crop!r} is not in the legend for period {period!r}")
        masks = {crop: cm.class_mask([crop]) for crop in crops}
        for region in regions:
            rmask = region.mask_like(cm)
            rows.append(CropAreaRow(period, region.name, {c: mask_area_km2(masks[c], rmask) for c in crops}))
    return CropAreaReport(tuple(crops), tuple(rows))


def _month(date) -> str:
    return str(date)[:7]


def ndvi_monthly_series(scenes: Sequence[tuple[str, IndexBand]], region: Region) -> TimeSeriesReport:
    """
    Monthly regional NDVI: each scene's mean over valid in-region pixels, then
    an unweighted average of the scene means within a calendar month.
    """
    if not scenes:
        raise EmptyInput("need at least one NDVI scene")
    gts = {ix.geotransform for _, ix in scenes}
    shapes = {ix.shape for _, ix in scenes}
    if None in gts:
        raise ValueError("NDVI bands need a geotransform to place the region")
    if len(gts) > 1 or len(shapes) > 1:
        raise GridMismatch("NDVI scenes are not aligned")
    gt = gts.pop()
    h, w = shapes.pop()
    rbits = region.mask(gt, w, h).bits
    if not rbits.any():
        raise EmptyRegion(f"region {region.name!r} covers no pixels of the grid")
    by_month: dict = {}
    for date, ix in scenes:
        vals = ix.values[rbits]
        vals = vals[~np.isnan(vals)]
        if len(vals) == 0:
            continue
        by_month.setdefault(_month(date), []).append((float(np.mean(vals, dtype=np.float64)), len(vals)))
    samples = tuple(
        SeriesSample(month, float(np.mean([m for m, _ in entries])), sum(n for _, n in entries))
        for month, entries in sorted(by_month.items())
    )
    return TimeSeriesReport(region.name, samples, "mean NDVI")


def _month_of_year(period: str) -> str:
    # "2022-08" -> "08"; a bare "08" stays as is
    return period[-2:]


def ndvi_anomaly(current: TimeSeriesReport, baseline: TimeSeriesReport) -> TimeSeriesReport:
    """
    current(month) - baseline(month), matched on month of year. Several
    baseline years for one month are averaged first. Negative means the
    current season is below the baseline.
    """
    pooled: dict = {}
    for s in baseline.samples:
        pooled.setdefault(_month_of_year(s.period), []).append(s.value)
    samples = []
    for s in current.samples:
        key = _month_of_year(s.period)
        if key not in pooled:
            raise BaselineGap(f"baseline has no value for month {key} (needed by {s.period})")
        samples.append(SeriesSample(s.period, s.value - float(np.mean(pooled[key])), s.valid_pixel_count))
    return TimeSeriesReport(current.region, tuple(samples), current.statistic)
