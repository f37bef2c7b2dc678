"""
Scene manifests: which rasters make up a multi-date analysis.

A manifest is line-oriented text; ``#`` starts a comment::

    regions tehsils.txt
    bands blue=B2 green=B3 red=B4 nir=B5
    pre_flood   2022-05-15 B2=pre1_B2.tif B3=pre1_B3.tif B4=pre1_B4.tif B5=pre1_B5.tif
    post_flood  2022-08-20 B2=post_B2.tif B3=post_B3.tif B4=post_B4.tif B5=post_B5.tif
    landcover   2021-01-01 classes=worldcover.tif legend=worldcover.legend align=nearest
    moisture_top 2022-06   sm=sm_top_2022-06.tif

Relative paths resolve against the manifest's directory. Optical and land
cover layers must share one grid; an entry on a different grid is accepted
only with ``align=nearest`` and is resampled by nearest neighbor onto the
coarsest of those grids when loaded. Moisture grids keep their own grid.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from floodscope.errors import DateOrderError, GridMismatch, MissingBand, MissingFile, ParseError
from floodscope.geotiff import parse_geotiff, read_header
from floodscope.hydro import MoistureGrid
from floodscope.impact import ClassMap, read_legend
from floodscope.raster import Band, GeoTransform, RasterGrid, align_nearest
from floodscope.spectral import LANDSAT9_BANDS

OPTICAL_ROLES = ("pre_flood", "post_flood")
MOISTURE_ROLES = {"moisture_top": "top", "moisture_root": "root"}
ROLES = (*OPTICAL_ROLES, "landcover", *MOISTURE_ROLES)
RESERVED_KEYS = {"align", "layer", "legend"}


@dataclass(frozen=True)
class GridInfo:
    geotransform: GeoTransform
    width: int
    height: int

    @property
    def pixel_area(self) -> float:
        return self.geotransform.pixel_size_x * self.geotransform.pixel_size_y


@dataclass(frozen=True)
class SceneEntry:
    role: str
    date: str
    files: dict  # key -> Path
    line: int
    align: Optional[str] = None
    layer: Optional[str] = None
    legend: Optional[Path] = None
    grid: Optional[GridInfo] = None
    resampled: bool = False  # set at load when the entry is aligned onto the reference grid


@dataclass(frozen=True)
class SceneManifest:
    entries: tuple
    band_map: dict = field(default_factory=lambda: dict(LANDSAT9_BANDS))
    region_file: Optional[Path] = None
    source: Optional[str] = None
    reference: Optional[GridInfo] = None

    def by_role(self, role: str) -> list[SceneEntry]:
        return [e for e in self.entries if e.role == role]

    @property
    def optical(self) -> list[SceneEntry]:
        return sorted(
            (e for e in self.entries if e.role in OPTICAL_ROLES), key=lambda e: (e.date, e.role)
        )

    @property
    def input_files(self) -> list[Path]:
        files = [p for e in self.entries for p in e.files.values()]
        files += [e.legend for e in self.entries if e.legend is not None]
        if self.region_file is not None:
            files.append(self.region_file)
        return files

    def _read(self, path: Path) -> RasterGrid:
        try:
            return parse_geotiff(path.read_bytes())
        except FileNotFoundError:
            raise MissingFile(f"{path}: file not found") from None

    def _on_reference(self, entry: SceneEntry, grid: RasterGrid) -> RasterGrid:
        ref = self.reference
        if ref is None or entry.role in MOISTURE_ROLES:
            return grid
        if (grid.geotransform, grid.width, grid.height) == (ref.geotransform, ref.width, ref.height):
            return grid
        return align_nearest(grid, ref.geotransform, ref.width, ref.height)

    def load_optical(self, entry: SceneEntry) -> RasterGrid:
        """
        All bands of an optical entry under their logical names (blue, green,
        red, nir, plus any other keys verbatim), on the reference grid.
        """
        reverse = {v: k for k, v in self.band_map.items()}
        bands, gt = [], None
        for key, path in entry.files.items():
            grid = self._on_reference(entry, self._read(path))
            gt = grid.geotransform
            b = grid.bands[0]
            bands.append(Band(reverse.get(key, key), b.values, b.nodata, b.units))
        names = {b.name for b in bands}
        missing = [n for n in ("green", "red", "nir") if n not in names]
        if missing:
            raise MissingBand(
                f"{self.source or 'manifest'}:{entry.line}: {entry.role} {entry.date} lacks bands {missing}"
            )
        return RasterGrid(gt, bands, entry.date)

    def load_landcover(self, entry: Optional[SceneEntry] = None) -> ClassMap:
        if entry is None:
            found = self.by_role("landcover")
            if not found:
                raise MissingFile(f"{self.source or 'manifest'}: no landcover entry")
            entry = found[-1]
        key = "classes" if "classes" in entry.files else next(iter(entry.files))
        grid = self._on_reference(entry, self._read(entry.files[key]))
        band = grid.bands[0]
        grid = RasterGrid(grid.geotransform, [Band("class", band.values)], entry.date)
        if entry.legend is None:
            raise ParseError("landcover entry needs legend=path", entry.line, self.source)
        return ClassMap(grid, read_legend(entry.legend))

    def load_moisture(self, layer: str) -> list[MoistureGrid]:
        out = []
        for role, lay in MOISTURE_ROLES.items():
            if lay != layer:
                continue
            for e in self.by_role(role):
                grid = self._read(next(iter(e.files.values())))
                out.append(MoistureGrid(RasterGrid(grid.geotransform, grid.bands[:1], e.date), layer, e.date))
        return sorted(out, key=lambda m: m.epoch)


def _check_date(text: str, lineno: int, source) -> str:
    for fmt in ("%Y-%m-%d", "%Y-%m"):
        try:
            _dt.datetime.strptime(text, fmt)
            return text
        except ValueError:
            continue
    raise ParseError(f"bad date {text!r} (want YYYY-MM-DD or YYYY-MM)", lineno, source)


def _pairs(tokens, lineno, source) -> dict:
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not key or not value:
            raise ParseError(f"expected key=value, got {tok!r}", lineno, source)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", lineno, source)
        out[key] = value
    return out


def _grid_info(path: Path) -> GridInfo:
    # the header sits at the start, but strip bounds are checked against the file size
    header = read_header(path.read_bytes())
    return GridInfo(header.geotransform, header.width, header.height)


def load_scene_manifest(
    text: str, base_dir=".", source: Optional[str] = None, check_files: bool = True
) -> SceneManifest:
    """
    Parse and validate a manifest. Referenced files must exist, dates must be
    strictly increasing within each role, and optical/land-cover layers must
    share a grid unless marked ``align=nearest``.
    """
    base = Path(base_dir)
    entries: list[SceneEntry] = []
    band_map = dict(LANDSAT9_BANDS)
    region_file = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]
        if head == "regions":
            if len(tokens) != 2:
                raise ParseError("expected 'regions <path>'", lineno, source)
            region_file = base / tokens[1]
            continue
        if head == "bands":
            band_map.update(_pairs(tokens[1:], lineno, source))
            continue
        if head not in ROLES:
            raise ParseError(f"unknown role {head!r} (expected one of {', '.join(ROLES)})", lineno, source)
        if len(tokens) < 3:
            raise ParseError("expected 'role date key=path ...'", lineno, source)
        date = _check_date(tokens[1], lineno, source)
        kv = _pairs(tokens[2:], lineno, source)
        align = kv.get("align")
        if align not in (None, "nearest"):
            raise ParseError(f"unsupported alignment {align!r} (only 'nearest')", lineno, source)
        layer = kv.get("layer")
        if head in MOISTURE_ROLES:
            if layer not in (None, MOISTURE_ROLES[head]):
                raise ParseError(f"layer={layer} contradicts role {head}", lineno, source)
            layer = MOISTURE_ROLES[head]
        elif layer is not None:
            raise ParseError("layer= only applies to moisture entries", lineno, source)
        legend = base / kv["legend"] if "legend" in kv else None
        files = {k: base / v for k, v in kv.items() if k not in RESERVED_KEYS}
        if not files:
            raise ParseError("entry names no raster files", lineno, source)
        entries.append(SceneEntry(head, date, files, lineno, align, layer, legend))

    for role in ROLES:
        dates = [(e.date, e.line) for e in entries if e.role == role]
        for (d0, _), (d1, ln) in zip(dates, dates[1:]):
            if d1 <= d0:
                raise DateOrderError(
                    f"{source or 'manifest'}:{ln}: {role} date {d1} does not come after {d0}"
                )

    manifest = SceneManifest(tuple(entries), band_map, region_file, source)
    if not check_files:
        return manifest
    for path in manifest.input_files:
        if not path.is_file():
            raise MissingFile(f"{source or 'manifest'}: referenced file {path} does not exist")
    return _resolve_alignment(manifest)


def _resolve_alignment(manifest: SceneManifest) -> SceneManifest:
    where = manifest.source or "manifest"
    infos = []
    for e in manifest.entries:
        grids = {p: _grid_info(p) for p in e.files.values()}
        first = next(iter(grids.values()))
        if any(g != first for g in grids.values()):
            raise GridMismatch(f"{where}:{e.line}: files of one {e.role} entry are on different grids")
        infos.append(first)

    shared = [(e, g) for e, g in zip(manifest.entries, infos) if e.role not in MOISTURE_ROLES]
    reference = None
    if shared:
        # coarsest grid wins; earliest entry breaks ties
        reference = max((g for _, g in shared), key=lambda g: g.pixel_area)
        reference = next(g for _, g in shared if g.pixel_area == reference.pixel_area)
    resolved = []
    for e, g in zip(manifest.entries, infos):
        resampled = False
        if e.role not in MOISTURE_ROLES and g != reference:
            if e.align != "nearest":
                raise GridMismatch(
                    f"{where}:{e.line}: {e.role} {e.date} is on a different grid; add align=nearest"
                )
            resampled = True
        resolved.append(SceneEntry(e.role, e.date, e.files, e.line, e.align, e.layer, e.legend, g, resampled))

    moisture = {}
    for e in resolved:
        if e.role in MOISTURE_ROLES:
            first = moisture.setdefault(e.layer, e.grid)
            if e.grid != first:
                raise GridMismatch(f"{where}:{e.line}: moisture grids of layer {e.layer} differ")
    return SceneManifest(tuple(resolved), manifest.band_map, manifest.region_file, manifest.source, reference)


def read_scene_manifest(path, check_files: bool = True) -> SceneManifest:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise MissingFile(f"{path}: manifest not found") from None
    return load_scene_manifest(text, path.parent, str(path), check_files)


def format_manifest_entry(role: str, date: str, files: dict, **attrs) -> str:
    parts = [role, date, *(f"{k}={v}" for k, v in files.items())]
    parts += [f"{k}={v}" for k, v in attrs.items() if v is not None]
    return " ".join(parts)
