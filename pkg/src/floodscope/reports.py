"""
Report tables and their CSV serialization.

Numbers are rounded to at most four decimals; trailing zeros are trimmed
down to a per-column minimum (so a built-up area of 0.7 prints as ``0.70``
while a total of 1020.4 stays ``1020.4``). Rows come out in a fixed order:
region name ascending, then period/category.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from floodscope.classify.metrics import MetricsReport

MAX_DECIMALS = 4

IMPACT_HEADER = ("Tehsil", "Total Area", "Area of Affected Kharif Crop", "Affected Built-Up")
IMPACT_MIN_DECIMALS = (1, 1, 2)
METRICS_HEADER = (
    "Model Name", "Training Accuracy", "Validation Accuracy", "Recall", "F1 Score", "Precision",
)
CROP_MIN_DECIMALS = 2
SERIES_MIN_DECIMALS = 2

STATISTIC_COLUMNS = {"mean NDVI": "Mean NDVI", "moisture fraction": "Mean Soil Moisture"}


def format_number(value: float, min_decimals: int = 0, max_decimals: int = MAX_DECIMALS) -> str:
    text = f"{float(value):.{max_decimals}f}"
    if "." in text:
        whole, frac = text.split(".")
        frac = frac.rstrip("0")
        frac = frac.ljust(min_decimals, "0")
        text = f"{whole}.{frac}" if frac else whole
    if text.lstrip("-").strip("0.") == "":
        text = text.lstrip("-")  # no negative zero
    return text


@dataclass(frozen=True)
class ImpactRow:
    region: str
    total_area_km2: float
    affected_crop_km2: float
    affected_builtup_km2: float

    def __post_init__(self):
        for name in ("total_area_km2", "affected_crop_km2", "affected_builtup_km2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.affected_crop_km2 > self.total_area_km2 or self.affected_builtup_km2 > self.total_area_km2:
            raise ValueError(f"affected area exceeds the total area of {self.region!r}")


@dataclass(frozen=True)
class AreaReport:
    """Per-region flood impact: total, affected crop and affected built-up area in km²."""

    rows: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(sorted(self.rows, key=lambda r: r.region)))

    def row(self, region: str) -> ImpactRow:
        for r in self.rows:
            if r.region == region:
                return r
        raise KeyError(region)


@dataclass(frozen=True)
class CropAreaRow:
    period: str
    region: str
    areas: dict  # crop -> km2


@dataclass(frozen=True)
class CropAreaReport:
    """Per (period, region) area of each crop of interest, in km²."""

    crops: tuple
    rows: tuple = ()

    def __post_init__(self):
        periods = list(dict.fromkeys(r.period for r in self.rows))
        order = {p: k for k, p in enumerate(periods)}
        object.__setattr__(
            self, "rows", tuple(sorted(self.rows, key=lambda r: (order[r.period], r.region)))
        )

    def area(self, period: str, region: str, crop: str) -> float:
        for r in self.rows:
            if r.period == period and r.region == region:
                return r.areas[crop]
        raise KeyError((period, region))


@dataclass(frozen=True)
class SeriesSample:
    period: str
    value: float
    valid_pixel_count: int


@dataclass(frozen=True)
class TimeSeriesReport:
    region: str
    samples: tuple = ()
    statistic: str = "mean NDVI"

    def __post_init__(self):
        periods = [s.period for s in self.samples]
        if any(a >= b for a, b in zip(periods, periods[1:])):
            raise ValueError("time series periods must be strictly increasing")

    @property
    def periods(self):
        return [s.period for s in self.samples]

    @property
    def values(self):
        return [s.value for s in self.samples]

    def value(self, period: str) -> float:
        for s in self.samples:
            if s.period == period:
                return s.value
        raise KeyError(period)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)  # RFC 4180: CRLF line ends, minimal quoting
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _impact_csv(report: AreaReport) -> str:
    d = IMPACT_MIN_DECIMALS
    rows = (
        (
            r.region,
            format_number(r.total_area_km2, d[0]),
            format_number(r.affected_crop_km2, d[1]),
            format_number(r.affected_builtup_km2, d[2]),
        )
        for r in report.rows
    )
    return _csv_text(IMPACT_HEADER, rows)


def _crop_csv(report: CropAreaReport) -> str:
    header = ("Month", "Tehsil", *(c.title() for c in report.crops))
    rows = (
        (r.period, r.region, *(format_number(r.areas[c], CROP_MIN_DECIMALS) for c in report.crops))
        for r in report.rows
    )
    return _csv_text(header, rows)


def _metrics_csv(rows: Sequence[MetricsReport]) -> str:
    return _csv_text(
        METRICS_HEADER,
        (
            (
                m.model_name,
                *(format_number(v, 2) for v in (
                    m.training_accuracy, m.validation_accuracy, m.macro_recall, m.macro_f1, m.macro_precision,
                )),
            )
            for m in rows
        ),
    )


def _series_csv(series: Sequence[TimeSeriesReport]) -> str:
    statistic = series[0].statistic if series else "mean NDVI"
    if any(s.statistic != statistic for s in series):
        raise ValueError("cannot mix statistics in one time-series table")
    header = ("Tehsil", "Period", STATISTIC_COLUMNS.get(statistic, statistic.title()), "Valid Pixels")
    rows = []
    for s in sorted(series, key=lambda s: s.region):
        for sample in s.samples:
            rows.append((s.region, sample.period, format_number(sample.value, SERIES_MIN_DECIMALS),
                         str(sample.valid_pixel_count)))
    return _csv_text(header, rows)


def write_csv_report(report) -> str:
    """Serialize an AreaReport, CropAreaReport, MetricsReport(s) or TimeSeriesReport(s)."""
    if isinstance(report, AreaReport):
        return _impact_csv(report)
    if isinstance(report, CropAreaReport):
        return _crop_csv(report)
    if isinstance(report, MetricsReport):
        return _metrics_csv([report])
    if isinstance(report, TimeSeriesReport):
        return _series_csv([report])
    items = list(report)
    if all(isinstance(r, MetricsReport) for r in items):
        return _metrics_csv(items)
    if all(isinstance(r, TimeSeriesReport) for r in items):
        return _series_csv(items)
    raise TypeError(f"cannot serialize {type(report).__name__} as a report")


def parse_timeseries_csv(text: str, statistic: str = "mean NDVI") -> list[TimeSeriesReport]:
    """Read back a time-series table written by write_csv_report."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or len(header) != 4:
        raise ValueError("expected a 4-column time-series table")
    grouped: dict = {}
    for row in reader:
        if not row:
            continue
        region, period, value, count = row
        grouped.setdefault(region, []).append(SeriesSample(period, float(value), int(count)))
    return [TimeSeriesReport(r, tuple(sorted(s, key=lambda x: x.period)), statistic) for r, s in sorted(grouped.items())]


@dataclass(frozen=True)
class TableText:
    """A small ad-hoc table (used for moisture summaries and readiness)."""

    header: tuple
    rows: tuple = field(default_factory=tuple)

    def to_csv(self) -> str:
        return _csv_text(self.header, self.rows)


def readiness_table(results: Sequence[tuple[str, str, float, Optional[str]]]) -> TableText:
    rows = tuple(
        (region, layer, format_number(threshold, 2), epoch if epoch is not None else "not reached")
        for region, layer, threshold, epoch in sorted(results, key=lambda r: (r[0], r[1]))
    )
    return TableText(("Tehsil", "Layer", "Threshold", "First Ready Epoch"), rows)
