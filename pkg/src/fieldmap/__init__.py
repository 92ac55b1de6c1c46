"""Agricultural field delineation from per-pixel probability rasters."""
__version__ = "0.1.0"
