"""Contour-based corner detection (CPDA, CTAR, CTAA, CADT) and a robustness benchmark."""

from .detectors import METHODS, Corner, DetectorConfig, detect, detect_many
from .raster_io import GrayImage, load_image, save_image

__version__ = "0.1.0"

__all__ = ["METHODS", "Corner", "DetectorConfig", "GrayImage", "detect", "detect_many",
           "load_image", "save_image"]
