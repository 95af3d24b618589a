"""Grayscale raster loading and saving (PGM and PNG)."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_PGM_TOKEN = re.compile(rb"(#[^\n]*\n?)|(\S+)")


class ImageFormatError(ValueError):
    """Raised for files that are not PGM/PNG or are malformed."""


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 8-bit grayscale image. ``pixels`` is indexed ``[row, column]``."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.floating) and not np.all(np.isfinite(arr)):
                raise ValueError("non-finite samples")
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("samples must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_data(cls, width: int, height: int, data) -> "GrayImage":
        flat = np.asarray(data)
        if flat.size != width * height:
            raise ValueError(f"data length {flat.size} != {width}x{height}")
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def data(self) -> list[int]:
        """Row-major samples."""
        return self.pixels.ravel().tolist()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __repr__(self) -> str:
        return f"GrayImage(width={self.width}, height={self.height})"


def rgb_to_luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec.601 luma, rounded half away from zero."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = LUMA_WEIGHTS
    y = r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def _read_pgm(raw: bytes) -> np.ndarray:
    magic = raw[:2]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError("not a PGM file")
    # header: magic, width, height, maxval, then a single whitespace byte (P5)
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        m = _PGM_TOKEN.search(raw, pos)
        if m is None:
            raise ImageFormatError("truncated PGM header")
        pos = m.end()
        if m.group(2) is not None:
            fields.append(m.group(2))
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise ImageFormatError(f"bad PGM header: {exc}") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageFormatError("bad PGM dimensions or maxval")

    count = width * height
    if magic == b"P5":
        body = raw[pos + 1:]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        if len(body) < count * dtype.itemsize:
            raise ImageFormatError("truncated PGM raster")
        values = np.frombuffer(body, dtype=dtype, count=count).astype(np.int64)
    else:
        tokens = [m.group(2) for m in _PGM_TOKEN.finditer(raw, pos) if m.group(2) is not None]
        if len(tokens) < count:
            raise ImageFormatError("truncated PGM raster")
        try:
            values = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
        except ValueError:
            raise ImageFormatError("non-integer PGM sample") from None
    if values.max(initial=0) > maxval:
        raise ImageFormatError("PGM sample exceeds maxval")
    if maxval != 255:
        values = np.floor(values * 255.0 / maxval + 0.5).astype(np.int64)
    return values.reshape(height, width).astype(np.uint8)


def _read_png(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        if im.format != "PNG":
            raise ImageFormatError(f"unsupported raster format {im.format!r}")
        mode = im.mode
        if mode in ("L", "1"):
            return np.asarray(im.convert("L"), dtype=np.uint8)
        if mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.int64)
            return (arr >> 8).clip(0, 255).astype(np.uint8)
        if mode == "LA":
            return np.asarray(im, dtype=np.uint8)[..., 0].copy()
        return rgb_to_luminance(np.asarray(im.convert("RGB")))


def load_image(path) -> GrayImage:
    """Read a PGM (P2/P5) or PNG file as a grayscale image.

    Color PNGs are reduced to Rec.601 luminance. Raises ``OSError`` when the
    file cannot be read and :class:`ImageFormatError` for anything else.
    """
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] in (b"P2", b"P5"):
        return GrayImage(_read_pgm(raw))
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        return GrayImage(_read_png(path))
    raise ImageFormatError(f"{path}: unsupported raster format")


def save_image(image: GrayImage, path) -> None:
    """Write ``image`` as binary PGM (``.pgm``) or 8-bit grayscale PNG (``.png``)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(image.pixels.tobytes())
    elif suffix == ".png":
        with open(path, "wb") as fh:
            Image.fromarray(image.pixels).save(fh, format="PNG")
    else:
        raise ImageFormatError(f"cannot write {suffix or 'extensionless'} files; use .pgm or .png")


def save_rgb(rgb: np.ndarray, path) -> None:
    """Write an ``(h, w, 3)`` uint8 array as PNG (overlay output)."""
    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8)).save(Path(path), format="PNG")
