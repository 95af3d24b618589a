"""Geometric and photometric transformation suite for repeatability tests.

Families and parameter grids follow the standard chord-detector benchmark:
uniform scaling, shearing, rotation, rotation followed by scaling,
non-uniform scaling, JPEG re-encoding and additive Gaussian noise. Every
geometric instance carries the affine forward map that sends original
pixel coordinates to transformed-image coordinates.
"""

from __future__ import annotations

import hashlib
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .raster_io import GrayImage, load_image, save_image

FAMILIES = ("scaling", "shearing", "rotation", "rotation-scale", "nonuniform-scale", "jpeg",
            "gaussian-noise")
GEOMETRIC = frozenset(FAMILIES[:5])

# Per-image image counts of the reference protocol (23 base images).
REFERENCE_TOTALS = {"scaling": 345, "shearing": 1081, "rotation": 437, "rotation-scale": 4025,
                    "nonuniform-scale": 1772, "jpeg": 460, "gaussian-noise": 230}
REFERENCE_BASE_IMAGES = 23

IDENTITY = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0)


class TransformError(ValueError):
    pass


def _grid(lo: float, hi: float, step: float, ndigits: int = 4) -> list[float]:
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, ndigits) for i in range(n + 1)]


@dataclass(frozen=True)
class TransformSpec:
    family: str
    sx: float = 1.0
    sy: float = 1.0
    shx: float = 0.0
    shy: float = 0.0
    angle: float = 0.0
    quality: int = 0
    variance: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise TransformError(f"unknown family {self.family!r}")

    @property
    def param_string(self) -> str:
        f = self.family
        if f == "scaling":
            return f"s{self.sx:g}"
        if f == "shearing":
            return f"shx{self.shx:g}_shy{self.shy:g}"
        if f == "rotation":
            return f"a{self.angle:g}"
        if f == "rotation-scale":
            return f"a{self.angle:g}_sx{self.sx:g}_sy{self.sy:g}"
        if f == "nonuniform-scale":
            return f"sx{self.sx:g}_sy{self.sy:g}"
        if f == "jpeg":
            return f"q{self.quality}"
        return f"v{self.variance:g}"

    @property
    def key(self) -> str:
        return f"{self.family}/{self.param_string}"

    def matrix(self) -> np.ndarray:
        """2x2 linear part of the forward map (identity for photometric families)."""
        f = self.family
        if f in ("scaling", "nonuniform-scale"):
            return np.array([[self.sx, 0.0], [0.0, self.sy]])
        if f == "shearing":
            return np.array([[1.0, self.shx], [self.shy, 1.0]])
        if f in ("rotation", "rotation-scale"):
            t = math.radians(self.angle)
            rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
            if f == "rotation":
                return rot
            # rotate first, then scale
            return np.array([[self.sx, 0.0], [0.0, self.sy]]) @ rot
        return np.eye(2)


def enumerate_suite(family_filter: str | None = None) -> list[TransformSpec]:
    """All transformation instances applied to one base image."""
    if family_filter is not None and family_filter not in FAMILIES:
        raise TransformError(f"unknown family {family_filter!r}")
    out: list[TransformSpec] = []
    want = (lambda f: family_filter in (None, f))
    if want("scaling"):
        out += [TransformSpec("scaling", sx=s, sy=s) for s in _grid(0.5, 2.0, 0.1) if s != 1.0]
    if want("shearing"):
        shears = _grid(0.0, 0.012, 0.002)
        # the identity and the extreme corner (0.012, 0.012) are left out: 7 x 7 - 2 = 47
        out += [TransformSpec("shearing", shx=a, shy=b) for a in shears for b in shears
                if (a, b) != (0.0, 0.0) and (a, b) != (0.012, 0.012)]
    if want("rotation"):
        out += [TransformSpec("rotation", angle=a) for a in _grid(-90.0, 90.0, 10.0) if a != 0.0]
    if want("rotation-scale"):
        scales = _grid(0.8, 1.2, 0.1)
        out += [TransformSpec("rotation-scale", angle=a, sx=sx, sy=sy)
                for a in _grid(-30.0, 30.0, 10.0) for sx in scales for sy in scales]
    if want("nonuniform-scale"):
        out += [TransformSpec("nonuniform-scale", sx=sx, sy=sy)
                for sx in _grid(0.7, 1.3, 0.1) for sy in _grid(0.5, 1.5, 0.1)]
    if want("jpeg"):
        out += [TransformSpec("jpeg", quality=q) for q in range(5, 101, 5)]
    if want("gaussian-noise"):
        out += [TransformSpec("gaussian-noise", variance=round(0.005 * i, 3)) for i in range(1, 11)]
    return out


def suite_warnings() -> list[str]:
    """Mismatches between the enumerated grid and the reference image counts."""
    msgs = []
    counts = {f: len(enumerate_suite(f)) for f in FAMILIES}
    for fam, total in REFERENCE_TOTALS.items():
        expect = total / REFERENCE_BASE_IMAGES
        if counts[fam] != expect:
            msgs.append(f"{fam}: {counts[fam]} specs per image, reference count {total} implies "
                        f"{expect:.2f} per image over {REFERENCE_BASE_IMAGES} images")
    grand = sum(REFERENCE_TOTALS.values())
    ours = sum(counts.values()) * REFERENCE_BASE_IMAGES
    if ours != grand:
        msgs.append(f"total: {ours} transformed images for {REFERENCE_BASE_IMAGES} base images, "
                    f"reference total {grand}")
    return msgs


@dataclass(frozen=True, eq=False)
class TransformedImage:
    image: GrayImage
    spec: TransformSpec
    forward_map: tuple[float, float, float, float, float, float]


def map_point(forward_map, point):
    """(x, y) -> (a*x + b*y + c, d*x + e*y + f)."""
    a, b, c, d, e, f = forward_map
    x, y = point
    return (a * x + b * y + c, d * x + e * y + f)


def map_points(forward_map, pts: np.ndarray) -> np.ndarray:
    a, b, c, d, e, f = forward_map
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    return np.column_stack([a * pts[:, 0] + b * pts[:, 1] + c, d * pts[:, 0] + e * pts[:, 1] + f])


def invert_map(forward_map):
    a, b, c, d, e, f = forward_map
    det = a * e - b * d
    if abs(det) < 1e-12:
        raise TransformError("affine map is not invertible")
    ia, ib, id_, ie = e / det, -b / det, -d / det, a / det
    return (ia, ib, -(ia * c + ib * f), id_, ie, -(id_ * c + ie * f))


def _warp(image: GrayImage, linear: np.ndarray):
    """Inverse-mapped bilinear warp about the image centre onto a fitted canvas."""
    if abs(np.linalg.det(linear)) < 1e-12:
        raise TransformError("affine map is not invertible")
    h, w = image.pixels.shape
    cin = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    corners = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], dtype=np.float64) - cin
    moved = corners @ linear.T
    extent = moved.max(axis=0) - moved.min(axis=0)
    out_w, out_h = (int(math.ceil(v - 1e-9)) + 1 for v in extent)
    cout = np.array([(out_w - 1) / 2.0, (out_h - 1) / 2.0])
    offset = cout - linear @ cin
    fwd = (linear[0, 0], linear[0, 1], offset[0], linear[1, 0], linear[1, 1], offset[1])

    inv = np.linalg.inv(linear)
    # ndimage works in (row, col); output (r, c) samples input M @ (r, c) + o
    # snap float noise such as cos(90 deg) = 6e-17, which would push exact
    # edge samples just outside the source and zero them
    m_rc = np.round(inv[::-1, ::-1], 12)
    o_rc = np.round((cin - inv @ cout)[::-1], 12)
    out = ndimage.affine_transform(image.pixels.astype(np.float64), m_rc, offset=o_rc,
                                   output_shape=(out_h, out_w), order=1, mode="constant", cval=0.0)
    pixels = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(pixels), tuple(float(v) for v in fwd)


def _jpeg_roundtrip(image: GrayImage, quality: int) -> GrayImage:
    buf = io.BytesIO()
    Image.fromarray(image.pixels).save(buf, format="JPEG", quality=int(quality))
    buf.seek(0)
    with Image.open(buf) as im:
        return GrayImage(np.asarray(im.convert("L"), dtype=np.uint8))


def _add_noise(image: GrayImage, variance: float, seed: int) -> GrayImage:
    rng = np.random.default_rng(seed)
    sd = math.sqrt(variance) * 255.0
    noisy = image.pixels.astype(np.float64) + rng.normal(0.0, sd, image.pixels.shape)
    return GrayImage(np.clip(np.floor(noisy + 0.5), 0, 255).astype(np.uint8))


def apply_transform(image: GrayImage, spec: TransformSpec, seed: int = 0) -> TransformedImage:
    if spec.family in GEOMETRIC:
        warped, fwd = _warp(image, spec.matrix())
        return TransformedImage(warped, spec, fwd)
    if spec.family == "jpeg":
        return TransformedImage(_jpeg_roundtrip(image, spec.quality), spec, IDENTITY)
    return TransformedImage(_add_noise(image, spec.variance, seed), spec, IDENTITY)


def derive_seed(base_seed: int, image_id: str, spec: TransformSpec) -> int:
    """Stable per-(image, spec) seed: first 8 bytes of sha256("seed|image|family/params")."""
    digest = hashlib.sha256(f"{base_seed}|{image_id}|{spec.key}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def cache_paths(root, image_stem: str, spec: TransformSpec, seed: int) -> tuple[Path, Path]:
    name = spec.param_string
    if spec.family == "gaussian-noise":
        name += f"_seed{seed}"
    folder = Path(root) / image_stem / spec.family
    # parameter strings contain dots, so append rather than replace a suffix
    return folder / f"{name}.png", folder / f"{name}.affine"


def cached_transform(root, image_stem: str, image: GrayImage, spec: TransformSpec,
                     seed: int) -> TransformedImage:
    """``apply_transform`` backed by an on-disk PNG + ``.affine`` cache."""
    png, affine = cache_paths(root, image_stem, spec, seed)
    if png.exists() and affine.exists():
        try:
            fwd = tuple(float(v) for v in affine.read_text(encoding="ascii").split())
            if len(fwd) == 6:
                return TransformedImage(load_image(png), spec, fwd)
        except (OSError, ValueError) as exc:
            warnings.warn(f"ignoring unreadable cache entry {png}: {exc}")
    out = apply_transform(image, spec, seed)
    png.parent.mkdir(parents=True, exist_ok=True)
    save_image(out.image, png)
    affine.write_text(" ".join(repr(v) for v in out.forward_map) + "\n", encoding="ascii")
    return out
