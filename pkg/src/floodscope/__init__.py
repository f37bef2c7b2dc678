"""Flood-impact assessment on multispectral rasters."""

__version__ = "0.1.0"
