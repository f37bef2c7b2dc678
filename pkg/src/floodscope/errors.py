"""Exception hierarchy shared by every floodscope module."""


class FloodscopeError(Exception):
    """Base class for all errors raised by floodscope."""


class GridMismatch(FloodscopeError, ValueError):
    """Two rasters or masks disagree in dimensions or geotransform."""


class DegeneratePolygon(FloodscopeError, ValueError):
    pass


class EmptyInput(FloodscopeError, ValueError):
    pass


class EmptyRegion(FloodscopeError, ValueError):
    """A region rasterizes to zero pixels on the target grid."""


class NoRegions(FloodscopeError, ValueError):
    pass


# --- GeoTIFF codec -----------------------------------------------------------

class GeoTiffError(FloodscopeError, ValueError):
    """Base class for every rejection raised by the GeoTIFF subset parser."""


class BadMagic(GeoTiffError):
    pass


class UnsupportedFeature(GeoTiffError):
    pass


class TruncatedFile(GeoTiffError):
    pass


class MissingTag(GeoTiffError):
    pass


class DimensionTooLarge(GeoTiffError):
    """Declared width*height*samples exceeds the allocation cap."""


class ValueOutOfRange(FloodscopeError, ValueError):
    """A value cannot be represented in the requested sample format."""


# --- manifests and text inputs -------------------------------------------------

class ParseError(FloodscopeError, ValueError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class MissingFile(FloodscopeError, FileNotFoundError):
    pass


class DateOrderError(FloodscopeError, ValueError):
    pass


# --- classification ------------------------------------------------------------

class EmptyDataset(FloodscopeError, ValueError):
    pass


class SingleSample(FloodscopeError, ValueError):
    pass


class ClassAbsent(FloodscopeError, ValueError):
    pass


class DimensionMismatch(FloodscopeError, ValueError):
    pass


class InvalidFeature(FloodscopeError, ValueError):
    pass


class LengthMismatch(FloodscopeError, ValueError):
    pass


class LabelOutOfRange(FloodscopeError, ValueError):
    pass


class EmptyMatrix(FloodscopeError, ValueError):
    pass


class MissingBand(FloodscopeError, LookupError):
    pass


class ModelFormatError(FloodscopeError, ValueError):
    pass


# --- impact / hydro ------------------------------------------------------------

class UnknownCrop(FloodscopeError, LookupError):
    pass


class BaselineGap(FloodscopeError, LookupError):
    pass


class LayerMismatch(FloodscopeError, ValueError):
    pass


class MixedLayers(FloodscopeError, ValueError):
    pass


class EmptySeries(FloodscopeError, ValueError):
    pass


class BadThreshold(FloodscopeError, ValueError):
    pass


# --- synthetic data --------------------------------------------------------------

class SpecOutOfBounds(FloodscopeError, ValueError):
    pass


class BadSigma(FloodscopeError, ValueError):
    pass


class BadParams(FloodscopeError, ValueError):
    pass
