"""
Synthetic scenes and datasets with exact ground truth.

All randomness comes from ``numpy.random.Generator(PCG64(SeedSequence(...)))``.
Independent streams are derived from the user seed plus a fixed stream tag
(e.g. ``SeedSequence([seed, 1, scene_index])`` for scene reflectance noise), so
each product is reproducible on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from floodscope.classify.dataset import LabeledDataset
from floodscope.errors import BadParams, BadSigma, ParseError, SpecOutOfBounds
from floodscope.raster import (
    Band,
    GeoTransform,
    Mask,
    RasterGrid,
    Region,
    mask_area_km2,
    rasterize_polygon,
)
from floodscope.spectral import Comparator, FloodRule

REFLECTANCE_BANDS = ("blue", "green", "red", "nir")

STREAM_SCENE = 1
STREAM_SAMPLES = 2
STREAM_MOISTURE = 3


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


def generate_checkerboard_dataset(
    cells_per_side: int, n: int, sigma: float = 0.0, seed: int = 0, n_classes: int = 2
) -> LabeledDataset:
    """
    Points on a ``cells_per_side`` x ``cells_per_side`` board over the unit square.

    Samples are spread evenly over the cells (cell counts differ by at most
    one) and drawn uniformly inside their cell. The label comes from the clean
    position: ``(i + j) % 2`` for two classes, else the cell index
    ``i * cells_per_side + j`` modulo ``n_classes``. Gaussian noise with
    standard deviation ``sigma`` is then added to both coordinates.
    """
    if cells_per_side < 1 or n_classes < 1:
        raise BadParams("cells_per_side and n_classes must be >= 1")
    n_cells = cells_per_side * cells_per_side
    if n < n_cells:
        raise BadParams(f"n={n} is smaller than the {n_cells} cells")
    if sigma < 0 or not math.isfinite(sigma):
        raise BadParams(f"sigma must be finite and >= 0, got {sigma}")
    rng = _rng(seed)
    cell = np.arange(n) % n_cells
    i, j = cell // cells_per_side, cell % cells_per_side
    u = rng.random((n, 2))
    x = (i + u[:, 0]) / cells_per_side
    y = (j + u[:, 1]) / cells_per_side
    if n_classes == 2:
        labels = (i + j) % 2
    else:
        labels = cell % n_classes
    n_present = int(labels.max()) + 1
    features = np.column_stack([x, y])
    if sigma > 0:
        features = features + rng.normal(0.0, sigma, size=features.shape)
    names = tuple(f"class_{c}" for c in range(min(n_classes, n_present)))
    return LabeledDataset(features, labels, names, ("x", "y"))


def checkerboard_label(x, y, cells_per_side: int, n_classes: int = 2):
    """Analytic label of clean coordinates in the unit square."""
    i = np.minimum((np.asarray(x) * cells_per_side).astype(np.int64), cells_per_side - 1)
    j = np.minimum((np.asarray(y) * cells_per_side).astype(np.int64), cells_per_side - 1)
    if n_classes == 2:
        return (i + j) % 2
    return (i * cells_per_side + j) % n_classes


# --- flood scenes ----------------------------------------------------------------

# (blue, green, red, nir) top-of-atmosphere reflectance means
# vegetated and built-up classes all keep NDVI >= 0.35 so neither polarity of
# the flood rule can fire on them
DEFAULT_SIGNATURES = {
    "other": (0.10, 0.12, 0.14, 0.36),
    "rice": (0.03, 0.10, 0.04, 0.55),
    "maize": (0.05, 0.12, 0.06, 0.48),
    "cotton": (0.08, 0.11, 0.09, 0.62),
    "orchards": (0.02, 0.06, 0.03, 0.42),
    "built-up": (0.20, 0.22, 0.24, 0.50),
    "water": (0.06, 0.10, 0.04, 0.03),
}

# water look-alike used for new flooding when the NDWI test is "less than":
# NDWI = -0.5 and NDVI = -0.25, both well inside that rule
TURBID_FLOOD_SIGNATURE = (0.08, 0.10, 0.50, 0.30)

CLASS_MAP_LEGEND = {
    0: "other",
    1: "rice",
    2: "maize",
    3: "cotton",
    4: "orchards",
    5: "built-up",
    6: "water",
}

LANDCOVER_LEGEND = {0: "other", 1: "cropland", 2: "built-up", 3: "water"}


@dataclass(frozen=True)
class CropField:
    crop: str
    rect: tuple  # (xmin, ymin, xmax, ymax) in CRS meters


@dataclass(frozen=True)
class SceneSpec:
    """
    Geometry and spectra of a synthetic flood scene.

    Polygons and rectangles are in CRS meters. Pixels take the class of the
    last layer covering them, in the order: background, crop fields, built-up,
    permanent water. Flood polygons are painted over that in the post-flood
    scene only.
    """

    width: int
    height: int
    pixel_size: float = 30.0
    origin_x: float = 500_000.0
    origin_y: float = 3_000_000.0
    crs_id: str = "EPSG:32642"
    flood_polygons: tuple = ()
    permanent_water_polygons: tuple = ()
    crop_fields: tuple = ()
    builtup_rects: tuple = ()
    regions: tuple = ()
    signatures: dict = field(default_factory=lambda: dict(DEFAULT_SIGNATURES))
    sigma: float = 0.0
    seed: int = 0
    flood_rule: FloodRule = FloodRule()
    pre_flood_dates: tuple = ("2022-05-15", "2022-06-15")
    post_flood_dates: tuple = ("2022-08-20",)

    @property
    def geotransform(self) -> GeoTransform:
        return GeoTransform(self.origin_x, self.origin_y, self.pixel_size, self.pixel_size, self.crs_id)

    @property
    def bounds(self):
        return (
            self.origin_x,
            self.origin_y - self.height * self.pixel_size,
            self.origin_x + self.width * self.pixel_size,
            self.origin_y,
        )

    def validate(self):
        if self.width < 1 or self.height < 1 or self.pixel_size <= 0:
            raise SpecOutOfBounds("width, height and pixel_size must be positive")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise BadSigma(f"sigma must be finite and >= 0, got {self.sigma}")
        xmin, ymin, xmax, ymax = self.bounds
        polygons = list(self.flood_polygons) + list(self.permanent_water_polygons)
        polygons += [_rect_polygon(f.rect) for f in self.crop_fields]
        polygons += [_rect_polygon(r) for r in self.builtup_rects]
        polygons += [r.polygon for r in self.regions]
        for poly in polygons:
            for x, y in poly:
                if not (xmin <= x <= xmax and ymin <= y <= ymax):
                    raise SpecOutOfBounds(f"vertex ({x}, {y}) lies outside the grid bounds {self.bounds}")
        for f in self.crop_fields:
            if f.crop not in self.signatures or f.crop in ("other", "built-up", "water"):
                raise SpecOutOfBounds(f"crop field class {f.crop!r} has no crop signature")
        for name, sig in self.signatures.items():
            if len(sig) != 4 or not all(0.0 <= v <= 1.0 for v in sig):
                raise SpecOutOfBounds(f"signature {name!r} must be 4 reflectances in [0, 1]")
        if not self.pre_flood_dates or not self.post_flood_dates:
            raise SpecOutOfBounds("need at least one pre-flood and one post-flood date")


def _rect_polygon(rect):
    xmin, ymin, xmax, ymax = rect
    return ((xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax))


@dataclass(frozen=True)
class GroundTruth:
    flood: Mask                 # new inundation only (permanent water removed)
    permanent_water: Mask
    crops: RasterGrid           # class indices, legend CLASS_MAP_LEGEND
    builtup: Mask
    landcover: RasterGrid       # class indices, legend LANDCOVER_LEGEND
    region_areas: dict          # region -> {"total", "flood", "affected_crop", "affected_builtup"}
    crop_areas: dict            # region -> {crop: km2}


def flood_signature(rule: FloodRule, signatures: dict) -> tuple:
    """Reflectances that the configured flood rule classifies as flood."""
    if rule.ndwi_comparator is Comparator.GREATER_EQUAL:
        return signatures["water"]
    return TURBID_FLOOD_SIGNATURE


def _truncated_normal(rng, mean: np.ndarray, sigma: float) -> np.ndarray:
    """Inverse-CDF draw from N(mean, sigma) truncated to [0, 1]."""
    if sigma == 0:
        return mean.astype(np.float64)
    lo = ndtr((0.0 - mean) / sigma)
    hi = ndtr((1.0 - mean) / sigma)
    u = rng.random(mean.shape)
    out = mean + sigma * ndtri(lo + u * (hi - lo))
    return np.clip(out, 0.0, 1.0)


def _class_index_map(spec: SceneSpec, gt: GeoTransform) -> tuple[np.ndarray, dict]:
    idx = np.zeros((spec.height, spec.width), dtype=np.int64)
    code = {name: k for k, name in CLASS_MAP_LEGEND.items()}
    masks = {}
    for f in spec.crop_fields:
        m = rasterize_polygon(Region(f.crop, _rect_polygon(f.rect)), gt, spec.width, spec.height)
        idx[m.bits] = code[f.crop]
    builtup = np.zeros_like(idx, dtype=bool)
    for r in spec.builtup_rects:
        builtup |= rasterize_polygon(Region("built-up", _rect_polygon(r)), gt, spec.width, spec.height).bits
    idx[builtup] = code["built-up"]
    water = np.zeros_like(builtup)
    for poly in spec.permanent_water_polygons:
        water |= rasterize_polygon(Region("water", poly), gt, spec.width, spec.height).bits
    idx[water] = code["water"]
    flood = np.zeros_like(builtup)
    for poly in spec.flood_polygons:
        flood |= rasterize_polygon(Region("flood", poly), gt, spec.width, spec.height).bits
    masks["water"] = water
    masks["builtup"] = builtup & ~water
    masks["flood_polygons"] = flood
    return idx, masks


def _scene(spec, gt, class_idx, date, rng, flood_bits=None) -> RasterGrid:
    names = [CLASS_MAP_LEGEND[k] for k in sorted(CLASS_MAP_LEGEND)]
    table = np.array([spec.signatures[name] for name in names], dtype=np.float64)
    means = table[class_idx]  # (h, w, 4)
    if flood_bits is not None:
        means[flood_bits] = flood_signature(spec.flood_rule, spec.signatures)
    values = _truncated_normal(rng, means, spec.sigma).astype(np.float32)
    bands = [Band(name, values[:, :, k], units="reflectance") for k, name in enumerate(REFLECTANCE_BANDS)]
    return RasterGrid(gt, bands, date)


def generate_flood_scene(spec: SceneSpec):
    """
    Returns ``(pre_scenes, post_scenes, truth)``: lists of four-band
    reflectance grids (blue, green, red, nir) per date and the ground truth.
    Post-flood scenes replace every flood-polygon pixel that is not permanent
    water with a signature the configured flood rule accepts.
    """
    spec.validate()
    gt = spec.geotransform
    class_idx, masks = _class_index_map(spec, gt)
    flood_bits = masks["flood_polygons"] & ~masks["water"]

    pre = [
        _scene(spec, gt, class_idx, date, _rng(spec.seed, STREAM_SCENE, k))
        for k, date in enumerate(spec.pre_flood_dates)
    ]
    offset = len(spec.pre_flood_dates)
    post = [
        _scene(spec, gt, class_idx, date, _rng(spec.seed, STREAM_SCENE, offset + k), flood_bits)
        for k, date in enumerate(spec.post_flood_dates)
    ]

    crops = RasterGrid(gt, [Band("class", class_idx.astype(np.float32))])
    crop_codes = [k for k, name in CLASS_MAP_LEGEND.items() if name not in ("other", "built-up", "water")]
    is_crop = np.isin(class_idx, crop_codes)
    lc = np.zeros_like(class_idx)
    lc[is_crop] = 1
    lc[masks["builtup"]] = 2
    lc[masks["water"]] = 3
    landcover = RasterGrid(gt, [Band("landcover", lc.astype(np.float32))])

    flood = Mask(flood_bits, gt)
    water = Mask(masks["water"], gt)
    builtup = Mask(masks["builtup"], gt)
    crop_mask = Mask(is_crop, gt)
    region_areas, crop_areas = {}, {}
    for region in spec.regions:
        rmask = region.mask(gt, spec.width, spec.height)
        region_areas[region.name] = {
            "total": mask_area_km2(rmask),
            "flood": mask_area_km2(flood, rmask),
            "affected_crop": mask_area_km2(flood & crop_mask, rmask),
            "affected_builtup": mask_area_km2(flood & builtup, rmask),
        }
        crop_areas[region.name] = {
            CLASS_MAP_LEGEND[c]: mask_area_km2(Mask(class_idx == c, gt), rmask) for c in crop_codes
        }
    truth = GroundTruth(flood, water, crops, builtup, landcover, region_areas, crop_areas)
    return pre, post, truth


def training_samples(
    scene: RasterGrid, truth: GroundTruth, per_class: int = 400, seed: int = 0,
    exclude: Optional[Mask] = None,
) -> tuple[np.ndarray, np.ndarray, tuple]:
    """
    Draw up to ``per_class`` labeled pixels per land class from a scene
    (water excluded). Returns (pixel row/col index array, labels, class names).
    """
    rng = _rng(seed, STREAM_SAMPLES)
    classes = truth.crops["class"].astype(np.int64)
    allowed = np.ones(classes.shape, dtype=bool) if exclude is None else ~exclude.bits
    names = tuple(CLASS_MAP_LEGEND[k] for k in sorted(CLASS_MAP_LEGEND) if CLASS_MAP_LEGEND[k] != "water")
    picks, labels = [], []
    for label, name in enumerate(names):
        code = next(k for k, v in CLASS_MAP_LEGEND.items() if v == name)
        where = np.flatnonzero((classes == code).ravel() & allowed.ravel())
        if len(where) == 0:
            continue
        chosen = np.sort(rng.choice(where, size=min(per_class, len(where)), replace=False))
        picks.append(chosen)
        labels.append(np.full(len(chosen), label))
    return np.concatenate(picks), np.concatenate(labels), names


def default_scene_spec(width: int = 1024, height: int = 1024, sigma: float = 0.0, seed: int = 42,
                       flood_rule: FloodRule = FloodRule(), pixel_size: float = 30.0) -> SceneSpec:
    """
    A four-tehsil scene: a river of permanent water, a flood lobe spilling
    from it across fields and two settlements, and crop fields of four kinds.
    Geometry scales with the grid size.
    """
    gt = GeoTransform(500_000.0, 3_000_000.0, pixel_size, pixel_size)
    W, H = width * pixel_size, height * pixel_size
    x0, ytop = gt.origin_x, gt.origin_y

    def px(fx, fy):
        return (x0 + fx * W, ytop - fy * H)

    regions = (
        Region("Dadu", (px(0, 0), px(0.5, 0), px(0.5, 0.5), px(0, 0.5))),
        Region("Larkana", (px(0.5, 0), px(1, 0), px(1, 0.5), px(0.5, 0.5))),
        Region("Mehar", (px(0, 0.5), px(0.5, 0.5), px(0.5, 1), px(0, 1))),
        Region("Moro", (px(0.5, 0.5), px(1, 0.5), px(1, 1), px(0.5, 1))),
    )
    river = (px(0.44, 0), px(0.50, 0), px(0.58, 0.35), px(0.54, 1), px(0.48, 1), px(0.52, 0.35))
    flood = (
        px(0.20, 0.30), px(0.45, 0.22), px(0.70, 0.28), px(0.82, 0.55),
        px(0.66, 0.80), px(0.40, 0.86), px(0.15, 0.70), px(0.28, 0.52),
    )
    crops = ("rice", "maize", "cotton", "orchards")
    fields = []
    n_side = 6
    for a in range(n_side):
        for b in range(n_side):
            if (a + b) % 5 == 4:
                continue
            fx0, fy0 = 0.03 + a * 0.16, 0.03 + b * 0.16
            lo = px(fx0, fy0 + 0.12)
            hi = px(fx0 + 0.12, fy0)
            fields.append(CropField(crops[(a * n_side + b) % 4], (lo[0], lo[1], hi[0], hi[1])))
    builtup = []
    for fx, fy in ((0.30, 0.42), (0.62, 0.62), (0.80, 0.12), (0.12, 0.88), (0.62, 0.30), (0.25, 0.62)):
        lo, hi = px(fx, fy + 0.05), px(fx + 0.06, fy)
        builtup.append((lo[0], lo[1], hi[0], hi[1]))
    return SceneSpec(
        width=width, height=height, pixel_size=pixel_size,
        origin_x=gt.origin_x, origin_y=gt.origin_y,
        flood_polygons=(flood,), permanent_water_polygons=(river,),
        crop_fields=tuple(fields), builtup_rects=tuple(builtup), regions=regions,
        sigma=sigma, seed=seed, flood_rule=flood_rule,
    )


# --- moisture fields -------------------------------------------------------------

SMAP_EPOCHS = (
    "2022-06", "2022-07", "2022-08", "2022-09", "2022-10", "2022-11", "2022-12", "2023-01",
)


def generate_moisture_grids(
    extent: tuple, pixel_size: float = 9000.0, layer: str = "top",
    means: Optional[tuple] = None, sigma: float = 0.0, seed: int = 0,
    epochs: tuple = SMAP_EPOCHS, crs_id: str = "EPSG:32642",
) -> list[tuple[str, RasterGrid]]:
    """
    Coarse volumetric soil-moisture fields over ``extent`` = (xmin, ymin,
    xmax, ymax), one per epoch, around a per-epoch mean that peaks after the
    monsoon flood and dries out slowly through winter.
    """
    if means is None:
        means = (0.18, 0.34, 0.46, 0.44, 0.40, 0.36, 0.33, 0.31) if layer == "top" else (
            0.22, 0.33, 0.42, 0.43, 0.41, 0.39, 0.37, 0.35)
    if len(means) != len(epochs):
        raise BadParams("need one mean per epoch")
    xmin, ymin, xmax, ymax = extent
    width = max(1, math.ceil((xmax - xmin) / pixel_size))
    height = max(1, math.ceil((ymax - ymin) / pixel_size))
    gt = GeoTransform(xmin, ymax, pixel_size, pixel_size, crs_id)
    layer_code = 0 if layer == "top" else 1
    out = []
    for k, (epoch, mean) in enumerate(zip(epochs, means)):
        rng = _rng(seed, STREAM_MOISTURE, layer_code, k)
        field_ = _truncated_normal(rng, np.full((height, width), float(mean)), sigma).astype(np.float32)
        out.append((epoch, RasterGrid(gt, [Band("sm", field_, units="m3/m3")], epoch)))
    return out


# --- scene spec text files -------------------------------------------------------

def _floats(text, lineno, source):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ParseError(f"expected numbers, got {text!r}", lineno, source) from None


def _points(text, lineno, source):
    vals = _floats(text, lineno, source)
    if len(vals) % 2 or len(vals) < 6:
        raise ParseError("polygon needs >= 3 'x,y' vertices", lineno, source)
    return tuple(zip(vals[0::2], vals[1::2]))


def parse_scene_spec(text: str, source: Optional[str] = None) -> SceneSpec:
    """
    Read a ``key = value`` scene description. Repeatable keys add geometry::

        width = 512
        height = 512
        pixel_size = 30
        origin = 500000, 3000000
        crs = EPSG:32642
        seed = 7
        sigma = 0.02
        ndwi_comparator = less
        flood = x,y x,y x,y ...
        permanent_water = x,y x,y x,y ...
        crop = rice: xmin,ymin,xmax,ymax
        builtup = xmin,ymin,xmax,ymax
        region = Mehar: x,y x,y x,y ...
        signature.rice = blue, green, red, nir
        pre_flood_dates = 2022-05-15 2022-06-15
        post_flood_dates = 2022-08-20
        preset = default        # start from the built-in four-tehsil layout

    ``preset = default`` must come first; later keys override its values and
    geometry keys append to it.
    """
    values: dict = {}
    geometry = {"flood": [], "permanent_water": [], "crop": [], "builtup": [], "region": []}
    signatures = dict(DEFAULT_SIGNATURES)
    preset = None
    rule_kw = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "preset":
            if values or any(geometry.values()):
                raise ParseError("preset must come before other keys", lineno, source)
            if value != "default":
                raise ParseError(f"unknown preset {value!r}", lineno, source)
            preset = value
        elif key in ("width", "height", "seed"):
            try:
                values[key] = int(value)
            except ValueError:
                raise ParseError(f"{key} must be an integer", lineno, source) from None
        elif key in ("pixel_size", "sigma"):
            values[key] = _floats(value, lineno, source)[0]
        elif key == "origin":
            ox, oy = _floats(value, lineno, source)[:2]
            values["origin_x"], values["origin_y"] = ox, oy
        elif key == "crs":
            values["crs_id"] = value
        elif key in ("ndwi_threshold", "ndvi_threshold"):
            rule_kw[key] = _floats(value, lineno, source)[0]
        elif key == "ndwi_comparator":
            rule_kw[key] = value.lower()
        elif key in ("pre_flood_dates", "post_flood_dates"):
            values[key] = tuple(value.replace(",", " ").split())
        elif key.startswith("signature."):
            sig = _floats(value, lineno, source)
            if len(sig) != 4:
                raise ParseError("signature needs blue, green, red, nir", lineno, source)
            signatures[key.split(".", 1)[1]] = tuple(sig)
        elif key in ("flood", "permanent_water"):
            geometry[key].append(_points(value, lineno, source))
        elif key in ("crop", "region"):
            if ":" not in value:
                raise ParseError(f"{key} needs 'name: coordinates'", lineno, source)
            name, coords = (s.strip() for s in value.split(":", 1))
            if key == "crop":
                rect = _floats(coords, lineno, source)
                if len(rect) != 4:
                    raise ParseError("crop rectangle needs xmin,ymin,xmax,ymax", lineno, source)
                geometry["crop"].append(CropField(name, tuple(rect)))
            else:
                geometry["region"].append(Region(name, _points(coords, lineno, source)))
        elif key == "builtup":
            rect = _floats(value, lineno, source)
            if len(rect) != 4:
                raise ParseError("builtup rectangle needs xmin,ymin,xmax,ymax", lineno, source)
            geometry["builtup"].append(tuple(rect))
        else:
            raise ParseError(f"unknown key {key!r}", lineno, source)

    rule = FloodRule(**rule_kw)
    if preset == "default":
        base = default_scene_spec(
            values.get("width", 1024), values.get("height", 1024),
            pixel_size=values.get("pixel_size", 30.0),
        )
    else:
        for key in ("width", "height"):
            if key not in values:
                raise ParseError(f"missing required key {key!r}", None, source)
        base = SceneSpec(width=values["width"], height=values["height"])
    spec = replace(
        base,
        **{k: v for k, v in values.items()},
        flood_polygons=base.flood_polygons + tuple(geometry["flood"]),
        permanent_water_polygons=base.permanent_water_polygons + tuple(geometry["permanent_water"]),
        crop_fields=base.crop_fields + tuple(geometry["crop"]),
        builtup_rects=base.builtup_rects + tuple(geometry["builtup"]),
        regions=base.regions + tuple(geometry["region"]),
        signatures=signatures,
        flood_rule=rule,
    )
    spec.validate()
    return spec


def read_scene_spec(path) -> SceneSpec:
    path = Path(path)
    return parse_scene_spec(path.read_text(), str(path))



# --- export ---------------------------------------------------------------------

SAMPLE_FEATURES = ("blue", "green", "red", "nir", "ndvi", "ndwi", "evi")


def _feature_stack(scene: RasterGrid) -> dict:
    from floodscope.spectral import compute_evi, compute_ndvi, compute_ndwi

    b = {name: scene.band(name) for name in REFLECTANCE_BANDS}
    out = {name: b[name].values for name in REFLECTANCE_BANDS}
    out["ndvi"] = compute_ndvi(b["nir"], b["red"]).values
    out["ndwi"] = compute_ndwi(b["green"], b["nir"]).values
    out["evi"] = compute_evi(b["nir"], b["red"], b["blue"]).values
    return out


def sample_dataset(scene: RasterGrid, truth: GroundTruth, per_class: int = 400, seed: int = 0) -> LabeledDataset:
    """Labeled pixels of ``scene`` with reflectance and index features."""
    picks, labels, names = training_samples(scene, truth, per_class, seed)
    stack = _feature_stack(scene)
    features = np.stack([stack[f].ravel()[picks] for f in SAMPLE_FEATURES], axis=1)
    return LabeledDataset(features, labels, names, SAMPLE_FEATURES)


def export_scene(
    spec: SceneSpec, per_class: int = 1000, moisture: bool = True
) -> dict[str, bytes]:
    """
    Everything the pipeline needs, as ``relative path -> file bytes``: band
    rasters, land cover with legend, regions, a manifest, training samples,
    soil-moisture grids, and a ``truth/`` directory with ground-truth masks
    and expected-area tables.
    """
    from floodscope.classify.dataset import format_samples_csv
    from floodscope.geotiff import write_geotiff
    from floodscope.impact import format_legend
    from floodscope.raster import format_regions
    from floodscope.reports import (
        AreaReport, CropAreaReport, CropAreaRow, ImpactRow, TableText, format_number, write_csv_report,
    )
    from floodscope.spectral import LANDSAT9_BANDS

    pre, post, truth = generate_flood_scene(spec)
    files: dict[str, bytes] = {}
    lines = ["# synthetic scene", "regions regions.txt"]
    for role, scenes in (("pre_flood", pre), ("post_flood", post)):
        for scene in scenes:
            refs = []
            for name in REFLECTANCE_BANDS:
                key = LANDSAT9_BANDS[name]
                path = f"scenes/{role}_{scene.acquisition_date}_{key}.tif"
                grid = RasterGrid(scene.geotransform, [scene.band(name)], scene.acquisition_date)
                files[path] = write_geotiff(grid, "float32")
                refs.append(f"{key}={path}")
            lines.append(f"{role} {scene.acquisition_date} {' '.join(refs)}")
    files["landcover.tif"] = write_geotiff(truth.landcover, "uint8")
    files["landcover.legend"] = format_legend(LANDCOVER_LEGEND).encode()
    lines.append("landcover 2021-01-01 classes=landcover.tif legend=landcover.legend")

    if moisture:
        # SMAP-like 9 km cells, shrunk for small scenes so every region still covers some
        xmin, ymin, xmax, ymax = spec.bounds
        cell = min(9000.0, (xmax - xmin) / 8, (ymax - ymin) / 8)
        for layer in ("top", "root"):
            for epoch, grid in generate_moisture_grids(
                spec.bounds, pixel_size=cell, layer=layer, sigma=spec.sigma, seed=spec.seed, crs_id=spec.crs_id
            ):
                path = f"moisture/sm_{layer}_{epoch}.tif"
                files[path] = write_geotiff(grid, "float32")
                lines.append(f"moisture_{layer} {epoch} sm={path}")

    files["manifest.txt"] = ("\n".join(lines) + "\n").encode()
    files["regions.txt"] = format_regions(spec.regions).encode()
    ds = sample_dataset(pre[-1], truth, per_class, spec.seed)
    files["samples.csv"] = format_samples_csv(ds).encode()

    gt = spec.geotransform
    for name, m in (("flood", truth.flood), ("permanent_water", truth.permanent_water), ("builtup", truth.builtup)):
        files[f"truth/{name}.tif"] = write_geotiff(RasterGrid(gt, [Band(name, m.bits.astype(np.float32))]), "uint8")
    files["truth/crops.tif"] = write_geotiff(truth.crops, "uint8")
    files["truth/crops.legend"] = format_legend(CLASS_MAP_LEGEND).encode()
    areas = truth.region_areas
    report = AreaReport(tuple(
        ImpactRow(r, a["total"], a["affected_crop"], a["affected_builtup"]) for r, a in areas.items()
    ))
    files["truth/expected_areas.csv"] = write_csv_report(report).encode()
    flood_rows = tuple((r, format_number(areas[r]["flood"], 1)) for r in sorted(areas))
    files["truth/expected_flood_area.csv"] = TableText(("Tehsil", "Flood Area"), flood_rows).to_csv().encode()
    crops = tuple(c for c in CLASS_MAP_LEGEND.values() if c not in ("other", "built-up", "water"))
    crop_report = CropAreaReport(crops, tuple(
        CropAreaRow("truth", r, dict(a)) for r, a in truth.crop_areas.items()
    ))
    files["truth/expected_crops.csv"] = write_csv_report(crop_report).encode()
    return files
