"""
Stage-by-stage orchestration from a scene manifest to rasters and reports.

Each stage is computed lazily and cached on the :class:`Pipeline`, so the
CLI commands (and ``all``) share work without re-reading inputs. Outputs are
collected in memory and only written once a command has fully succeeded.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from floodscope import __version__
from floodscope.classify import (
    MODEL_DISPLAY_NAMES,
    classify_raster,
    compare_classifiers,
    load_model,
    read_samples_csv,
    serialize_model,
)
from floodscope.errors import EmptyInput, MissingFile, NoRegions
from floodscope.geotiff import atomic_write_bytes, write_geotiff
from floodscope.hydro import moisture_difference, regional_moisture_series, sowing_readiness
from floodscope.impact import (
    ClassMap,
    crop_area_by_period,
    flood_impact_report,
    format_legend,
    ndvi_anomaly,
    ndvi_monthly_series,
)
from floodscope.manifest import SceneManifest, read_scene_manifest
from floodscope.raster import Band, Mask, RasterGrid, mask_area_km2, read_regions
from floodscope.reports import (
    TableText,
    format_number,
    parse_timeseries_csv,
    readiness_table,
    write_csv_report,
)
from floodscope.spectral import (
    FloodRule,
    apply_flood_rule,
    compute_evi,
    compute_ndvi,
    compute_ndwi,
    derive_permanent_water,
    low_vegetation_mask,
)

CLASSIFIER_KINDS = ("forest", "svm", "naive_bayes", "min_distance")
DEFAULT_FEATURES = ("blue", "green", "red", "nir", "ndvi", "evi")
DEFAULT_CROPS = ("rice", "maize", "cotton", "orchards")
CLASS_NODATA = 255.0


def thread_count(requested: Optional[int] = None) -> int:
    """Worker threads: explicit value, else FLOODSCOPE_THREADS, else all cores (0 = auto)."""
    if requested is None:
        env = os.environ.get("FLOODSCOPE_THREADS", "0").strip() or "0"
        try:
            requested = int(env)
        except ValueError:
            raise ValueError(f"FLOODSCOPE_THREADS must be an integer, got {env!r}") from None
    if requested < 0:
        raise ValueError("thread count must be >= 0")
    return requested or (os.cpu_count() or 1)


@dataclass
class PipelineConfig:
    manifest: Optional[Path] = None
    regions: Optional[Path] = None
    out: Path = Path("out")
    ndwi_threshold: float = 0.15
    ndvi_threshold: float = 0.2
    ndwi_comparator: str = "less"
    water_threshold: float = 0.3
    water_fraction: float = 1.0
    low_ndvi_threshold: float = 0.2
    classifier: str = "forest"
    classifier_params: dict = field(default_factory=dict)
    feature_bands: tuple = DEFAULT_FEATURES
    crops: tuple = DEFAULT_CROPS
    samples: Optional[Path] = None
    model: Optional[Path] = None
    seed: int = 0
    validation_fraction: float = 0.2
    readiness_threshold: Optional[float] = None
    moisture_epochs: Optional[tuple] = None
    baseline: Optional[Path] = None
    threads: Optional[int] = None

    def __post_init__(self):
        self.flood_rule  # validates thresholds and comparator
        if self.classifier not in (*CLASSIFIER_KINDS, "all"):
            raise ValueError(f"unknown classifier {self.classifier!r}")
        if not 0.0 < self.water_fraction <= 1.0:
            raise ValueError("water fraction must lie in (0, 1]")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation fraction must lie in (0, 1)")
        if self.readiness_threshold is not None and not 0.0 < self.readiness_threshold < 1.0:
            raise ValueError("readiness threshold must lie in (0, 1)")

    @property
    def flood_rule(self) -> FloodRule:
        return FloodRule(self.ndwi_threshold, self.ndvi_threshold, self.ndwi_comparator)

    def as_record(self) -> dict:
        record = {}
        for f in fields(self):
            v = getattr(self, f.name)
            record[f.name] = str(v) if isinstance(v, Path) else (list(v) if isinstance(v, tuple) else v)
        return record


@dataclass(frozen=True)
class Scene:
    role: str
    date: str
    grid: RasterGrid       # reflectance bands plus ndvi, ndwi, evi
    ndvi: object
    ndwi: object


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Pipeline:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.outputs: dict[str, bytes] = {}
        self.notes: list[str] = []
        self.threads = thread_count(config.threads)

    # --- inputs ------------------------------------------------------------------

    @cached_property
    def manifest(self) -> SceneManifest:
        if self.config.manifest is None:
            raise MissingFile("a scene manifest is required (--manifest)")
        return read_scene_manifest(self.config.manifest)

    @cached_property
    def regions(self):
        path = self.config.regions
        if path is None and self.config.manifest is not None:
            path = self.manifest.region_file
        if path is None:
            raise NoRegions("no region file given (--regions or a 'regions' manifest line)")
        if not Path(path).is_file():
            raise MissingFile(f"{path}: region file not found")
        regions = read_regions(path)
        if not regions:
            raise NoRegions(f"{path}: file defines no regions")
        return regions

    def _map(self, fn, items):
        items = list(items)
        if self.threads <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(fn, items))

    def _scene(self, entry) -> Scene:
        grid = self.manifest.load_optical(entry)
        gt = grid.geotransform
        ndvi = compute_ndvi(grid.band("nir"), grid.band("red"), gt)
        ndwi = compute_ndwi(grid.band("green"), grid.band("nir"), gt)
        bands = list(grid.bands) + [ndvi.band, ndwi.band]
        if "blue" in grid.band_names:
            bands.append(compute_evi(grid.band("nir"), grid.band("red"), grid.band("blue"), gt).band)
        return Scene(entry.role, entry.date, RasterGrid(gt, bands, entry.date), ndvi, ndwi)

    @cached_property
    def scenes(self) -> list[Scene]:
        return self._map(self._scene, self.manifest.optical)

    def scenes_of(self, role: str) -> list[Scene]:
        return [s for s in self.scenes if s.role == role]

    # --- masks -------------------------------------------------------------------

    @cached_property
    def permanent_water(self) -> Mask:
        pre = self.scenes_of("pre_flood")
        if not pre:
            raise EmptyInput("permanent water needs at least one pre_flood scene")
        return derive_permanent_water(
            [s.ndwi for s in pre], self.config.water_threshold, self.config.water_fraction
        )

    @cached_property
    def flood_mask(self) -> Mask:
        post = self.scenes_of("post_flood")
        if not post:
            raise EmptyInput("manifest has no post_flood scenes")
        rule = self.config.flood_rule
        flood = None
        for s in post:
            m = apply_flood_rule(s.ndwi, s.ndvi, rule)
            flood = m if flood is None else flood | m
        return flood - self.permanent_water

    # --- classification ---------------------------------------------------------

    @cached_property
    def dataset(self):
        if self.config.samples is None:
            raise MissingFile("training samples are required (--samples)")
        ds = read_samples_csv(self.config.samples)
        wanted = [f for f in self.config.feature_bands if f in ds.feature_names]
        missing = [f for f in self.config.feature_bands if f not in ds.feature_names]
        if missing:
            raise EmptyInput(f"samples file lacks feature columns {missing}")
        cols = [ds.feature_names.index(f) for f in wanted]
        return type(ds)(ds.features[:, cols], ds.labels, ds.class_names, tuple(wanted))

    @cached_property
    def trained(self):
        kinds = CLASSIFIER_KINDS if self.config.classifier == "all" else (self.config.classifier,)
        params = {k: dict(self.config.classifier_params.get(k, {})) for k in kinds}
        if "forest" in params:
            params["forest"].setdefault("n_jobs", self.threads)
        return compare_classifiers(self.dataset, kinds, self.config.seed, params, self.config.validation_fraction)

    @cached_property
    def model(self):
        if self.config.model is not None:
            if not Path(self.config.model).is_file():
                raise MissingFile(f"{self.config.model}: model file not found")
            return load_model(self.config.model)
        models, _ = self.trained
        kind = "forest" if self.config.classifier == "all" else self.config.classifier
        return models[kind]

    def classify_scene(self, scene: Scene) -> ClassMap:
        valid = ~low_vegetation_mask(scene.ndvi, self.config.low_ndvi_threshold).bits
        if self.scenes_of("pre_flood"):
            valid &= ~self.permanent_water.bits
        gt = scene.grid.geotransform
        classes = classify_raster(self.model, scene.grid, self.model.feature_names, Mask(valid, gt))
        band = Band("class", classes.bands[0].values, nodata=CLASS_NODATA)
        legend = dict(enumerate(self.model.class_names))
        return ClassMap(RasterGrid(gt, [band], scene.date), legend)

    @cached_property
    def crop_map(self) -> ClassMap:
        """Class map of the latest pre-flood scene (the standing crop the flood hit)."""
        pre = self.scenes_of("pre_flood")
        if not pre:
            raise EmptyInput("crop classification needs at least one pre_flood scene")
        return self.classify_scene(pre[-1])

    @cached_property
    def landcover(self) -> ClassMap:
        return self.manifest.load_landcover()

    # --- reports -----------------------------------------------------------------

    def impact_report(self):
        return flood_impact_report(self.flood_mask, self.crop_map, self.landcover, self.regions)

    def crop_report(self):
        scenes = self.scenes
        if not scenes:
            raise EmptyInput("manifest has no optical scenes")
        months = [s.date[:7] for s in scenes]
        labels = months if len(set(months)) == len(months) else [s.date for s in scenes]
        latest_pre = self.scenes_of("pre_flood")[-1:] if self.scenes_of("pre_flood") else []
        maps = [
            (label, self.crop_map if latest_pre and s is latest_pre[0] else self.classify_scene(s))
            for label, s in zip(labels, scenes)
        ]
        crops = [c for c in self.config.crops if c in self.model.class_names]
        return crop_area_by_period(maps, self.regions, crops)

    def ndvi_series(self):
        scenes = [(s.date, s.ndvi) for s in self.scenes]
        if not scenes:
            raise EmptyInput("manifest has no optical scenes")
        return [ndvi_monthly_series(scenes, r) for r in self.regions]

    def flood_area_table(self) -> TableText:
        rows = tuple(
            (r.name, format_number(mask_area_km2(self.flood_mask, r), 1))
            for r in sorted(self.regions, key=lambda r: r.name)
        )
        return TableText(("Tehsil", "Flood Area"), rows)

    # --- emitters ------------------------------------------------------------------

    def emit(self, name: str, data) -> None:
        self.outputs[name] = data.encode("utf-8") if isinstance(data, str) else data

    def emit_index(self):
        for s in self.scenes:
            gt = s.grid.geotransform
            for name in ("ndvi", "ndwi", "evi"):
                if name in s.grid.band_names:
                    grid = RasterGrid(gt, [s.grid.band(name)], s.date)
                    self.emit(f"index/{s.role}_{s.date}_{name}.tif", write_geotiff(grid, "float32"))

    def emit_mask(self):
        flood = self.flood_mask
        gt = flood.geotransform
        for name, m in (("flood_mask", flood), ("permanent_water", self.permanent_water)):
            grid = RasterGrid(gt, [Band(name, m.bits.astype(np.float32))])
            self.emit(f"{name}.tif", write_geotiff(grid, "uint8"))
        try:
            self.emit("flood_area.csv", self.flood_area_table().to_csv())
        except NoRegions:
            self.notes.append("no regions given; flood_area.csv skipped")

    def emit_train(self):
        models, rows = self.trained
        if self.config.classifier == "all":
            for kind, model in models.items():
                self.emit(f"model_{kind}.fscm", serialize_model(model))
        else:
            self.emit("model.fscm", serialize_model(models[self.config.classifier]))
        self.emit("metrics.csv", write_csv_report(rows))

    def emit_classify(self):
        cm = self.crop_map
        self.emit("classmap.tif", write_geotiff(cm.grid, "uint8"))
        self.emit("classmap.legend", format_legend(cm.legend))

    def emit_overlay(self):
        self.emit("overlay.csv", write_csv_report(self.impact_report()))

    def emit_crops(self):
        self.emit("crops.csv", write_csv_report(self.crop_report()))

    def emit_timeseries(self):
        series = self.ndvi_series()
        self.emit("ndvi_timeseries.csv", write_csv_report(series))
        if self.config.baseline is not None:
            if not Path(self.config.baseline).is_file():
                raise MissingFile(f"{self.config.baseline}: baseline series not found")
            baseline = {b.region: b for b in parse_timeseries_csv(Path(self.config.baseline).read_text())}
            anomalies = []
            for s in series:
                if s.region not in baseline:
                    raise EmptyInput(f"baseline has no series for region {s.region!r}")
                anomalies.append(ndvi_anomaly(s, baseline[s.region]))
            self.emit("ndvi_anomaly.csv", write_csv_report(anomalies))

    def emit_moisture(self):
        emitted = False
        summary_rows, readiness = [], []
        for layer in ("top", "root"):
            grids = self.manifest.load_moisture(layer)
            if not grids:
                continue
            emitted = True
            series = [regional_moisture_series(grids, r) for r in self.regions]
            self.emit(f"moisture_series_{layer}.csv", write_csv_report([s.to_report() for s in series]))
            by_epoch = {g.epoch: g for g in grids}
            if self.config.moisture_epochs:
                a_epoch, b_epoch = self.config.moisture_epochs
                for e in (a_epoch, b_epoch):
                    if e not in by_epoch:
                        raise EmptyInput(f"no {layer} moisture grid for epoch {e}")
            else:
                a_epoch, b_epoch = grids[-1].epoch, grids[0].epoch
            diff, summary = moisture_difference(by_epoch[a_epoch], by_epoch[b_epoch])
            self.emit(f"moisture_difference_{layer}.tif", write_geotiff(diff, "float32"))
            summary_rows.append((
                layer, a_epoch, b_epoch,
                *(format_number(v, 2) for v in (summary.mean, summary.min, summary.max)),
                str(summary.count),
            ))
            if self.config.readiness_threshold is not None:
                t = self.config.readiness_threshold
                readiness += [(s.region, layer, t, sowing_readiness(s, t)) for s in series]
        if not emitted:
            raise EmptyInput("manifest has no moisture entries")
        header = ("Layer", "Epoch A", "Epoch B", "Mean Difference", "Min Difference", "Max Difference", "Valid Pixels")
        self.emit("moisture_summary.csv", TableText(header, tuple(summary_rows)).to_csv())
        if self.config.readiness_threshold is None:
            self.notes.append("no readiness threshold given; readiness.csv skipped")
        else:
            self.emit("readiness.csv", readiness_table(readiness).to_csv())

    # --- commit -------------------------------------------------------------------

    def input_files(self) -> list[Path]:
        files = []
        if self.config.manifest is not None:
            files.append(Path(self.config.manifest))
            files += self.manifest.input_files
        for p in (self.config.regions, self.config.samples, self.config.model, self.config.baseline):
            if p is not None and Path(p).is_file():
                files.append(Path(p))
        return list(dict.fromkeys(files))

    def commit(self, command: str, sources: Optional[dict] = None, timestamp: Optional[str] = None) -> list[Path]:
        """Write every collected output atomically, then the provenance record."""
        out = Path(self.config.out)
        written = []
        for name in sorted(self.outputs):
            atomic_write_bytes(out / name, self.outputs[name])
            written.append(out / name)
        record = {
            "tool": "floodscope",
            "version": __version__,
            "command": command,
            "seed": self.config.seed,
            "parameters": self.config.as_record(),
            "parameter_sources": sources or {},
            "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in self.input_files()],
            "outputs": sorted(self.outputs),
            "notes": self.notes,
        }
        text = json.dumps(record, indent=2, sort_keys=True) + "\n"
        atomic_write_bytes(out / f"provenance_{command}.json", text.encode())
        if timestamp is not None:
            atomic_write_bytes(out / f"provenance_{command}.time", (timestamp + "\n").encode())
        return written


STAGES = {
    "index": ("emit_index",),
    "mask": ("emit_mask",),
    "train": ("emit_train",),
    "classify": ("emit_classify",),
    "overlay": ("emit_overlay",),
    "crops": ("emit_crops",),
    "timeseries": ("emit_timeseries",),
    "moisture": ("emit_moisture",),
    "report": ("emit_overlay", "emit_crops", "emit_timeseries", "emit_moisture"),
    "all": (
        "emit_index", "emit_mask", "emit_train", "emit_classify",
        "emit_overlay", "emit_crops", "emit_timeseries", "emit_moisture",
    ),
}


def run_stages(pipeline: Pipeline, command: str) -> None:
    """Compute every output of ``command`` in memory (nothing touches disk here)."""
    for stage in STAGES[command]:
        if command in ("all", "report") and stage == "emit_moisture" and not any(
            e.role.startswith("moisture") for e in pipeline.manifest.entries
        ):
            pipeline.notes.append("no moisture entries; moisture stage skipped")
            continue
        if command == "all" and stage == "emit_train" and pipeline.config.model is not None:
            continue
        getattr(pipeline, stage)()


def config_from_dict(data: dict, base: Optional[PipelineConfig] = None) -> PipelineConfig:
    known = {f.name: f for f in fields(PipelineConfig)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ValueError(f"unknown configuration keys {unknown}")
    current = asdict(base) if base is not None else {}
    current.update(data)
    for key in ("manifest", "regions", "out", "samples", "model", "baseline"):
        if current.get(key) is not None:
            current[key] = Path(current[key])
    for key in ("feature_bands", "crops", "moisture_epochs"):
        if current.get(key) is not None:
            current[key] = tuple(current[key])
    return PipelineConfig(**current)
