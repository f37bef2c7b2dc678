"""
Reader and writer for a small, fully specified GeoTIFF subset.

Supported: classic little-endian TIFF, one IFD, uncompressed, chunky
(pixel-interleaved) strips, 8/16-bit unsigned or 32-bit float samples.
Georeferencing comes from ModelPixelScale + ModelTiepoint; the CRS is kept
as an opaque text tag in GeoAsciiParams. Band names, units and the
acquisition date travel as JSON in ImageDescription.

Everything else (BigTIFF, big-endian, tiles, compression, planar=2) is
rejected with UnsupportedFeature rather than half-read.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from floodscope.errors import (
    BadMagic,
    DimensionTooLarge,
    MissingTag,
    TruncatedFile,
    UnsupportedFeature,
    ValueOutOfRange,
)
from floodscope.raster import Band, GeoTransform, RasterGrid

# declared width*height*samples above this is refused before any allocation
MAX_SAMPLES = 2**31
MAX_STRIP_ROWS = 8192

IMAGE_WIDTH = 256
IMAGE_LENGTH = 257
BITS_PER_SAMPLE = 258
COMPRESSION = 259
PHOTOMETRIC = 262
IMAGE_DESCRIPTION = 270
STRIP_OFFSETS = 273
SAMPLES_PER_PIXEL = 277
ROWS_PER_STRIP = 278
STRIP_BYTE_COUNTS = 279
PLANAR_CONFIG = 284
TILE_WIDTH = 322
EXTRA_SAMPLES = 338
SAMPLE_FORMAT = 339
MODEL_PIXEL_SCALE = 33550
MODEL_TIEPOINT = 33922
GEO_KEY_DIRECTORY = 34735
GEO_ASCII_PARAMS = 34737
GDAL_NODATA = 42113

REQUIRED_TAGS = {
    IMAGE_WIDTH: "ImageWidth",
    IMAGE_LENGTH: "ImageLength",
    BITS_PER_SAMPLE: "BitsPerSample",
    SAMPLE_FORMAT: "SampleFormat",
    COMPRESSION: "Compression",
    PHOTOMETRIC: "PhotometricInterpretation",
    STRIP_OFFSETS: "StripOffsets",
    ROWS_PER_STRIP: "RowsPerStrip",
    STRIP_BYTE_COUNTS: "StripByteCounts",
    SAMPLES_PER_PIXEL: "SamplesPerPixel",
    PLANAR_CONFIG: "PlanarConfiguration",
    MODEL_PIXEL_SCALE: "ModelPixelScaleTag",
    MODEL_TIEPOINT: "ModelTiepointTag",
}

# TIFF field type -> (struct code, byte size)
FIELD_TYPES = {
    1: ("B", 1),   # BYTE
    2: ("s", 1),   # ASCII
    3: ("H", 2),   # SHORT
    4: ("I", 4),   # LONG
    5: ("II", 8),  # RATIONAL
    6: ("b", 1),   # SBYTE
    7: ("B", 1),   # UNDEFINED
    8: ("h", 2),   # SSHORT
    9: ("i", 4),   # SLONG
    10: ("ii", 8), # SRATIONAL
    11: ("f", 4),  # FLOAT
    12: ("d", 8),  # DOUBLE
}

# sample format name -> (numpy dtype, BitsPerSample, SampleFormat code)
SAMPLE_FORMATS = {
    "uint8": (np.dtype("<u1"), 8, 1),
    "uint16": (np.dtype("<u2"), 16, 1),
    "float32": (np.dtype("<f4"), 32, 3),
}

GT_MODEL_TYPE = 1024
GT_RASTER_TYPE = 1025
GT_CITATION = 1026
PROJECTED_CS_TYPE = 3072
MODEL_TYPE_PROJECTED = 1
MODEL_TYPE_GEOGRAPHIC = 2


@dataclass(frozen=True)
class GeoTiffHeader:
    """Validated IFD contents: everything needed to decode the pixel data."""

    width: int
    height: int
    samples: int
    sample_format: str
    rows_per_strip: int
    strip_offsets: tuple
    strip_byte_counts: tuple
    geotransform: GeoTransform
    nodata: float
    description: dict
    tags: dict


def _read_ifd(data: bytes) -> dict:
    if len(data) < 8:
        if data[:2] not in (b"II", b"MM") and len(data) >= 2:
            raise BadMagic(f"not a TIFF: starts with {data[:4]!r}")
        raise TruncatedFile(f"file is {len(data)} bytes, shorter than a TIFF header")
    order = data[:2]
    if order == b"MM":
        raise UnsupportedFeature("big-endian TIFF is not supported")
    if order != b"II":
        raise BadMagic(f"not a TIFF: starts with {data[:4]!r}")
    (magic,) = struct.unpack_from("<H", data, 2)
    if magic == 43:
        raise UnsupportedFeature("BigTIFF is not supported")
    if magic != 42:
        raise BadMagic(f"bad TIFF magic {magic}, expected 42")
    (ifd_offset,) = struct.unpack_from("<I", data, 4)
    if ifd_offset + 2 > len(data):
        raise TruncatedFile(f"IFD offset {ifd_offset} is past end of file ({len(data)} bytes)")
    (count,) = struct.unpack_from("<H", data, ifd_offset)
    if ifd_offset + 2 + 12 * count > len(data):
        raise TruncatedFile(f"IFD with {count} entries runs past end of file")

    tags = {}
    for i in range(count):
        tag, ftype, n, inline = struct.unpack_from("<HHI4s", data, ifd_offset + 2 + 12 * i)
        if ftype not in FIELD_TYPES:
            continue  # unknown field types are skipped, as TIFF readers must
        code, size = FIELD_TYPES[ftype]
        nbytes = size * n
        if nbytes <= 4:
            raw = inline[:nbytes]
        else:
            (offset,) = struct.unpack("<I", inline)
            if offset + nbytes > len(data):
                raise TruncatedFile(f"tag {tag} value ({nbytes} bytes at {offset}) past end of file")
            raw = data[offset : offset + nbytes]
        if ftype == 2:
            tags[tag] = raw.split(b"\0", 1)[0].decode("latin-1")
        else:
            tags[tag] = struct.unpack(f"<{n * len(code)}{code[0]}", raw) if n else ()
            if ftype in (5, 10):
                vals = tags[tag]
                tags[tag] = tuple(
                    vals[k] / vals[k + 1] if vals[k + 1] else math.nan for k in range(0, len(vals), 2)
                )
    return tags


def _ints(tags, tag) -> tuple:
    value = tags[tag]
    if isinstance(value, str) or not all(isinstance(v, int) and v >= 0 for v in value):
        raise UnsupportedFeature(f"tag {REQUIRED_TAGS.get(tag, tag)} must hold non-negative integers")
    return value


def _one(tags, tag) -> int:
    value = _ints(tags, tag)
    if len(value) != 1:
        raise UnsupportedFeature(f"tag {REQUIRED_TAGS.get(tag, tag)} must hold a single value")
    return value[0]


def _geokeys(tags) -> dict:
    raw = tags.get(GEO_KEY_DIRECTORY)
    if not raw or isinstance(raw, str) or len(raw) < 4 or not all(isinstance(v, int) for v in raw):
        return {}
    n = raw[3]
    keys = {}
    for k in range(n):
        entry = raw[4 + 4 * k : 8 + 4 * k]
        if len(entry) < 4:
            break
        key_id, location, count, value = entry
        keys[key_id] = (location, count, value)
    return keys


def read_header(data: bytes) -> GeoTiffHeader:
    """Parse and validate the IFD without touching pixel data."""
    tags = _read_ifd(data)
    if TILE_WIDTH in tags:
        raise UnsupportedFeature("tiled TIFF is not supported")
    for tag, name in REQUIRED_TAGS.items():
        if tag not in tags:
            raise MissingTag(f"required tag {name} ({tag}) is missing")

    compression = _one(tags, COMPRESSION)
    if compression != 1:
        raise UnsupportedFeature(f"compression {compression} is not supported (only 1)")
    planar = _one(tags, PLANAR_CONFIG)
    if planar != 1:
        raise UnsupportedFeature(f"planar configuration {planar} is not supported (only 1)")

    width = _one(tags, IMAGE_WIDTH)
    height = _one(tags, IMAGE_LENGTH)
    samples = _one(tags, SAMPLES_PER_PIXEL)
    if width < 1 or height < 1 or samples < 1:
        raise UnsupportedFeature(f"degenerate dimensions {width}x{height}x{samples}")
    if width * height * samples > MAX_SAMPLES:
        raise DimensionTooLarge(
            f"{width}x{height}x{samples} samples exceeds the cap of {MAX_SAMPLES}"
        )

    bits = _ints(tags, BITS_PER_SAMPLE)
    fmts = _ints(tags, SAMPLE_FORMAT)
    if not bits or not fmts:
        raise UnsupportedFeature("malformed BitsPerSample/SampleFormat")
    if len(set(bits)) != 1 or len(set(fmts)) != 1:
        raise UnsupportedFeature("mixed sample layouts across bands are not supported")
    if len(bits) not in (1, samples) or len(fmts) not in (1, samples):
        raise UnsupportedFeature("BitsPerSample/SampleFormat count disagrees with SamplesPerPixel")
    sample_format = {(8, 1): "uint8", (16, 1): "uint16", (32, 3): "float32"}.get((bits[0], fmts[0]))
    if sample_format is None:
        raise UnsupportedFeature(f"{bits[0]}-bit samples of format {fmts[0]} are not supported")

    rows_per_strip = _one(tags, ROWS_PER_STRIP)
    if rows_per_strip < 1:
        raise UnsupportedFeature("RowsPerStrip must be positive")
    rows_per_strip = min(rows_per_strip, height)
    n_strips = -(-height // rows_per_strip)
    offsets, counts = _ints(tags, STRIP_OFFSETS), _ints(tags, STRIP_BYTE_COUNTS)
    if len(offsets) != n_strips or len(counts) != n_strips:
        raise TruncatedFile(
            f"expected {n_strips} strips, found {len(offsets)} offsets / {len(counts)} byte counts"
        )
    bytes_per_sample = SAMPLE_FORMATS[sample_format][0].itemsize
    expected = width * height * samples * bytes_per_sample
    if sum(counts) != expected:
        raise TruncatedFile(f"strip byte counts sum to {sum(counts)}, expected {expected}")
    row_bytes = width * samples * bytes_per_sample
    for k, (off, cnt) in enumerate(zip(offsets, counts)):
        rows = min(rows_per_strip, height - k * rows_per_strip)
        if cnt != rows * row_bytes:
            raise TruncatedFile(f"strip {k} holds {cnt} bytes, expected {rows * row_bytes}")
        if off + cnt > len(data):
            raise TruncatedFile(f"strip {k} ({cnt} bytes at {off}) extends past end of file")

    scale = tags[MODEL_PIXEL_SCALE]
    tie = tags[MODEL_TIEPOINT]
    if isinstance(scale, str) or isinstance(tie, str) or len(scale) < 2 or len(tie) < 6:
        raise UnsupportedFeature("malformed ModelPixelScale/ModelTiepoint")
    geokeys = _geokeys(tags)
    model_type = geokeys.get(GT_MODEL_TYPE, (0, 1, MODEL_TYPE_PROJECTED))[2]
    crs_id = tags.get(GEO_ASCII_PARAMS, "")
    crs_id = crs_id.rstrip("|") if isinstance(crs_id, str) else ""
    if model_type == MODEL_TYPE_GEOGRAPHIC:
        raise UnsupportedFeature("geographic (degree) rasters are not supported; reproject to meters")
    try:
        i, j = tie[0], tie[1]
        gt = GeoTransform(
            origin_x=tie[3] - i * scale[0],
            origin_y=tie[4] + j * scale[1],
            pixel_size_x=scale[0],
            pixel_size_y=scale[1],
            crs_id=crs_id,
        )
    except ValueError as exc:
        raise UnsupportedFeature(f"unusable georeferencing: {exc}") from None
    if gt.is_geographic:
        raise UnsupportedFeature(f"geographic CRS {crs_id!r} is not supported; reproject to meters")

    nodata = math.nan
    if GDAL_NODATA in tags:
        try:
            nodata = float(str(tags[GDAL_NODATA]).strip())
        except ValueError:
            raise UnsupportedFeature(f"unparseable nodata tag {tags[GDAL_NODATA]!r}") from None

    description = {}
    desc_text = tags.get(IMAGE_DESCRIPTION)
    if isinstance(desc_text, str) and desc_text.startswith("{"):
        try:
            parsed = json.loads(desc_text)
            if isinstance(parsed, dict):
                description = parsed
        except (ValueError, RecursionError):
            pass

    return GeoTiffHeader(
        width=width,
        height=height,
        samples=samples,
        sample_format=sample_format,
        rows_per_strip=rows_per_strip,
        strip_offsets=tuple(offsets),
        strip_byte_counts=tuple(counts),
        geotransform=gt,
        nodata=nodata,
        description=description,
        tags=tags,
    )


def _band_metadata(description, samples):
    names = description.get("bands")
    units = description.get("units")
    if not (isinstance(names, list) and len(names) == samples and len(set(map(str, names))) == samples):
        names = [f"band_{k + 1}" for k in range(samples)]
    if not (isinstance(units, list) and len(units) == samples):
        units = [""] * samples
    return [str(n) for n in names], [str(u) for u in units]


def parse_geotiff(data: bytes) -> RasterGrid:
    """Decode a GeoTIFF-subset file into a float32 RasterGrid (nodata -> NaN)."""
    data = bytes(data)
    header = read_header(data)
    dtype = SAMPLE_FORMATS[header.sample_format][0]
    raw = b"".join(
        data[off : off + cnt] for off, cnt in zip(header.strip_offsets, header.strip_byte_counts)
    )
    pixels = np.frombuffer(raw, dtype=dtype).reshape(header.height, header.width, header.samples)
    names, units = _band_metadata(header.description, header.samples)
    bands = []
    for k in range(header.samples):
        values = pixels[:, :, k].astype(np.float32)
        if not math.isnan(header.nodata):
            values[values == np.float32(header.nodata)] = np.nan
        # inf has no place in the internal model; treat it as missing
        values[np.isinf(values)] = np.nan
        bands.append(Band(names[k], values, header.nodata, units[k]))
    date = header.description.get("date")
    return RasterGrid(header.geotransform, bands, str(date) if date else None)


def _encode_values(grid: RasterGrid, sample_format: str) -> tuple[np.ndarray, float]:
    dtype = SAMPLE_FORMATS[sample_format][0]
    sentinels = {b.nodata for b in grid.bands if not math.isnan(b.nodata)}
    if len(sentinels) > 1 or (sentinels and any(math.isnan(b.nodata) for b in grid.bands)):
        raise ValueOutOfRange("all bands must share one nodata sentinel to be written together")
    nodata = sentinels.pop() if sentinels else math.nan
    stack = np.stack([b.values for b in grid.bands], axis=-1)
    missing = np.isnan(stack)

    if dtype.kind == "u":
        info = np.iinfo(dtype)
        if missing.any() and math.isnan(nodata):
            raise ValueOutOfRange(
                f"NaN pixels need a finite nodata sentinel to be written as {sample_format}"
            )
        if not math.isnan(nodata) and not (info.min <= nodata <= info.max and nodata == int(nodata)):
            raise ValueOutOfRange(f"nodata {nodata} is not representable as {sample_format}")
        finite = stack[~missing]
        bad = (finite < info.min) | (finite > info.max) | (finite != np.round(finite))
        if bad.any():
            raise ValueOutOfRange(
                f"value {finite[bad][0]} is not representable as {sample_format}"
            )
    else:
        with np.errstate(over="ignore"):
            as32 = stack.astype(np.float32)
        if np.isinf(as32).any():
            raise ValueOutOfRange(f"value overflows {sample_format}")
        stack = as32
        finite = stack[~missing]

    if not math.isnan(nodata) and (finite == nodata).any():
        raise ValueOutOfRange(f"valid pixels collide with the nodata sentinel {nodata}")
    out = np.where(missing, nodata if not math.isnan(nodata) else np.nan, stack)
    return out.astype(dtype), nodata


def _geokey_directory(gt: GeoTransform) -> tuple:
    keys = [
        (GT_MODEL_TYPE, 0, 1, MODEL_TYPE_PROJECTED),
        (GT_RASTER_TYPE, 0, 1, 1),
        (GT_CITATION, GEO_ASCII_PARAMS, len(gt.crs_id) + 1, 0),
    ]
    crs = gt.crs_id.strip().upper()
    if crs.startswith("EPSG:") and crs[5:].isdigit() and int(crs[5:]) < 65536:
        keys.append((PROJECTED_CS_TYPE, 0, 1, int(crs[5:])))
    flat = [1, 1, 0, len(keys)]
    for key in keys:
        flat.extend(key)
    return tuple(flat)


def write_geotiff(grid: RasterGrid, sample_format: str = "float32") -> bytes:
    """Encode a grid; identical grids always produce identical bytes."""
    if sample_format not in SAMPLE_FORMATS:
        raise ValueError(f"sample_format must be one of {sorted(SAMPLE_FORMATS)}")
    if grid.geotransform.is_geographic:
        raise UnsupportedFeature("geographic CRS rasters cannot be written")
    dtype, bits, fmt_code = SAMPLE_FORMATS[sample_format]
    values, nodata = _encode_values(grid, sample_format)
    samples = len(grid.bands)
    gt = grid.geotransform

    description = {"bands": grid.band_names, "units": [b.units for b in grid.bands]}
    if grid.acquisition_date:
        description["date"] = grid.acquisition_date
    rows_per_strip = min(grid.height, MAX_STRIP_ROWS)
    row_bytes = grid.width * samples * dtype.itemsize
    strips = [
        values[r : r + rows_per_strip].tobytes() for r in range(0, grid.height, rows_per_strip)
    ]

    # (tag, type, values); ASCII values are str
    entries = [
        (IMAGE_WIDTH, 4, (grid.width,)),
        (IMAGE_LENGTH, 4, (grid.height,)),
        (BITS_PER_SAMPLE, 3, (bits,) * samples),
        (COMPRESSION, 3, (1,)),
        (PHOTOMETRIC, 3, (1,)),
        (IMAGE_DESCRIPTION, 2, json.dumps(description, sort_keys=True, separators=(",", ":"))),
        (STRIP_OFFSETS, 4, (0,) * len(strips)),
        (SAMPLES_PER_PIXEL, 3, (samples,)),
        (ROWS_PER_STRIP, 4, (rows_per_strip,)),
        (STRIP_BYTE_COUNTS, 4, tuple(len(s) for s in strips)),
        (PLANAR_CONFIG, 3, (1,)),
    ]
    if samples > 1:
        entries.append((EXTRA_SAMPLES, 3, (0,) * (samples - 1)))
    entries += [
        (SAMPLE_FORMAT, 3, (fmt_code,) * samples),
        (MODEL_PIXEL_SCALE, 12, (gt.pixel_size_x, gt.pixel_size_y, 0.0)),
        (MODEL_TIEPOINT, 12, (0.0, 0.0, 0.0, gt.origin_x, gt.origin_y, 0.0)),
        (GEO_KEY_DIRECTORY, 3, _geokey_directory(gt)),
        (GEO_ASCII_PARAMS, 2, gt.crs_id + "|"),
    ]
    if not math.isnan(nodata):
        entries.append((GDAL_NODATA, 2, repr(float(nodata)) if nodata != int(nodata) else str(int(nodata))))
    elif sample_format == "float32":
        entries.append((GDAL_NODATA, 2, "nan"))

    def payload(ftype, vals):
        if ftype == 2:
            return vals.encode("latin-1") + b"\0", len(vals) + 1
        code = FIELD_TYPES[ftype][0]
        return struct.pack(f"<{len(vals)}{code}", *vals), len(vals)

    ifd_offset = 8
    ifd_size = 2 + 12 * len(entries) + 4
    cursor = ifd_offset + ifd_size
    blobs = []
    layout = []
    for tag, ftype, vals in entries:
        blob, count = payload(ftype, vals)
        if len(blob) > 4:
            cursor += cursor % 2
            layout.append((tag, ftype, count, cursor, blob))
            blobs.append((cursor, blob))
            cursor += len(blob)
        else:
            layout.append((tag, ftype, count, None, blob))
    cursor += cursor % 2
    strip_offsets = []
    for s in strips:
        strip_offsets.append(cursor)
        cursor += len(s)
    assert all(len(s) == min(rows_per_strip, grid.height - k * rows_per_strip) * row_bytes
               for k, s in enumerate(strips))

    # patch the real strip offsets into their out-of-line or inline slot
    offsets_blob = struct.pack(f"<{len(strip_offsets)}I", *strip_offsets)
    out = bytearray(cursor)
    out[0:8] = struct.pack("<2sHI", b"II", 42, ifd_offset)
    struct.pack_into("<H", out, ifd_offset, len(entries))
    for k, (tag, ftype, count, offset, blob) in enumerate(layout):
        if tag == STRIP_OFFSETS:
            blob = offsets_blob
        pos = ifd_offset + 2 + 12 * k
        if offset is None:
            struct.pack_into("<HHI4s", out, pos, tag, ftype, count, blob.ljust(4, b"\0"))
        else:
            struct.pack_into("<HHII", out, pos, tag, ftype, count, offset)
            out[offset : offset + len(blob)] = blob
    struct.pack_into("<I", out, ifd_offset + 2 + 12 * len(entries), 0)
    for off, s in zip(strip_offsets, strips):
        out[off : off + len(s)] = s
    return bytes(out)


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temporary file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_geotiff(path) -> RasterGrid:
    return parse_geotiff(Path(path).read_bytes())


def save_geotiff(path, grid: RasterGrid, sample_format: str = "float32") -> None:
    atomic_write_bytes(path, write_geotiff(grid, sample_format))
