"""Synthetic polygon images with analytically known vertices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .raster_io import GrayImage, save_image

SUPERSAMPLE = 4
# inner/outer radius of a regular pentagram, sin(18)/sin(54)
PENTAGRAM_RATIO = math.sin(math.radians(18)) / math.sin(math.radians(54))


@dataclass(frozen=True)
class Shape:
    kind: str
    vertices: tuple[tuple[float, float], ...]  # pixel-centre coordinates (x, y)


def square(cx: float, cy: float, side: float, angle: float = 0.0) -> Shape:
    return Shape("square", _rect_vertices(cx, cy, side, side, angle))


def rectangle(cx: float, cy: float, w: float, h: float, angle: float = 0.0) -> Shape:
    return Shape("rectangle", _rect_vertices(cx, cy, w, h, angle))


def _rect_vertices(cx, cy, w, h, angle):
    c, s = math.cos(math.radians(angle)), math.sin(math.radians(angle))
    pts = []
    for ux, uy in ((-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)):
        x, y = ux * w, uy * h
        pts.append((cx + c * x - s * y, cy + s * x + c * y))
    return tuple(pts)


def star(cx: float, cy: float, outer: float, inner_ratio: float = PENTAGRAM_RATIO,
         angle: float = -90.0) -> Shape:
    """Five-pointed star; ``inner_ratio`` sets how deep the concave vertices sit."""
    pts = []
    for i in range(10):
        r = outer if i % 2 == 0 else outer * inner_ratio
        a = math.radians(angle + 36.0 * i)
        pts.append((cx + r * math.cos(a), cy + r * math.sin(a)))
    return Shape("star", tuple(pts))


def l_shape(x0: float, y0: float, size: float, arm: float) -> Shape:
    pts = ((x0, y0), (x0 + arm, y0), (x0 + arm, y0 + size - arm), (x0 + size, y0 + size - arm),
           (x0 + size, y0 + size), (x0, y0 + size))
    return Shape("l_shape", pts)


def polygon(cx: float, cy: float, radius: float, n: int, rng: np.random.Generator) -> Shape:
    """Random star-shaped polygon whose turning angles are all clearly corners."""
    while True:
        base = np.sort(rng.uniform(0, 2 * np.pi, n))
        gaps = np.diff(np.concatenate([base, base[:1] + 2 * np.pi]))
        if gaps.min() < 0.5:
            continue
        radii = radius * rng.uniform(0.55, 1.0, n)
        pts = tuple((float(cx + r * np.cos(a)), float(cy + r * np.sin(a))) for r, a in zip(radii, base))
        if _min_turn_deg(pts) >= 50.0 and _min_edge(pts) >= 14.0:
            return Shape("polygon", pts)


def _min_turn_deg(pts) -> float:
    p = np.asarray(pts)
    d_in = p - np.roll(p, 1, axis=0)
    d_out = np.roll(p, -1, axis=0) - p
    cross = d_in[:, 0] * d_out[:, 1] - d_in[:, 1] * d_out[:, 0]
    dot = (d_in * d_out).sum(axis=1)
    return float(np.degrees(np.abs(np.arctan2(cross, dot))).min())


def _min_edge(pts) -> float:
    p = np.asarray(pts)
    return float(np.hypot(*(np.roll(p, -1, axis=0) - p).T).min())


def render(shapes, width: int, height: int, fg=255, bg: int = 0) -> GrayImage:
    """Anti-aliased fill of ``shapes`` by box-filtered supersampling.

    ``fg`` is one fill level for all shapes or a sequence with one per shape.
    """
    ss = SUPERSAMPLE
    fills = [fg] * len(shapes) if isinstance(fg, (int, np.integer)) else list(fg)
    canvas = Image.new("L", (width * ss, height * ss), bg)
    draw = ImageDraw.Draw(canvas)
    for shape, value in zip(shapes, fills):
        # pixel centre (x, y) covers [x - 0.5, x + 0.5) in continuous coordinates
        draw.polygon([((x + 0.5) * ss, (y + 0.5) * ss) for x, y in shape.vertices], fill=int(value))
    arr = np.asarray(canvas, dtype=np.float64).reshape(height, ss, width, ss).mean(axis=(1, 3))
    return GrayImage(np.floor(arr + 0.5).astype(np.uint8))


KINDS = ("square", "rectangle", "star", "l_shape", "polygon")


def _main_shape(kind: str, cx: float, cy: float, extent: float, rng: np.random.Generator) -> Shape:
    """A shape of the given kind spanning roughly ``extent`` pixels."""
    if kind == "square":
        return square(cx, cy, rng.uniform(0.4, 0.55) * extent, rng.uniform(0, 80))
    if kind == "rectangle":
        return rectangle(cx, cy, rng.uniform(0.5, 0.6) * extent, rng.uniform(0.3, 0.4) * extent,
                         rng.uniform(0, 80))
    if kind == "star":
        return star(cx, cy, rng.uniform(0.38, 0.44) * extent, PENTAGRAM_RATIO,
                    -90.0 + rng.uniform(-20, 20))
    if kind == "l_shape":
        side = rng.uniform(0.5, 0.6) * extent
        return l_shape(cx - side / 2, cy - side / 2, side, rng.uniform(0.35, 0.45) * side)
    return polygon(cx, cy, 0.4 * extent, int(rng.integers(5, 8)), rng)


def shape_corpus(count: int = 20, size: int = 128, seed: int = 0,
                 kinds: tuple[str, ...] = KINDS) -> list[tuple[str, GrayImage, Shape]]:
    """One shape per image, cycling through ``kinds``."""
    bad = set(kinds) - set(KINDS)
    if bad or not kinds:
        raise ValueError(f"unknown shape kinds {sorted(bad)}")
    rng = np.random.default_rng(seed)
    out = []
    c = (size - 1) / 2.0
    for i in range(count):
        kind = kinds[i % len(kinds)]
        jitter = rng.uniform(-4, 4, 2)
        shape = _main_shape(kind, c + jitter[0], c + jitter[1], size, rng)
        out.append((f"{i:02d}_{kind}", render([shape], size, size), shape))
    return out


def scene_corpus(count: int = 20, size: int = 160, seed: int = 0) -> list[tuple[str, GrayImage, list[Shape]]]:
    """Cluttered scenes: one large shape plus small quadrilaterals near the image corners.

    Fill levels vary per shape over a mid-gray background, so edges differ in
    contrast and the small objects yield short closed contours, as fine detail
    does in photographs.
    """
    rng = np.random.default_rng(seed)
    out = []
    c = (size - 1) / 2.0
    for i in range(count):
        kind = KINDS[i % len(KINDS)]
        jitter = rng.uniform(-4, 4, 2)
        shapes = [_main_shape(kind, c + jitter[0], c + jitter[1], 0.72 * size, rng)]
        fills = [int(rng.uniform(190, 240))]
        margin = 0.14 * size
        for sx, sy in ((margin, margin), (size - 1 - margin, margin), (margin, size - 1 - margin),
                       (size - 1 - margin, size - 1 - margin)):
            side = rng.uniform(12, 20)
            if rng.random() < 0.5:
                shapes.append(square(sx, sy, side, rng.uniform(0, 80)))
            else:
                shapes.append(rectangle(sx, sy, 1.4 * side, 0.8 * side, rng.uniform(0, 80)))
            fills.append(int(rng.uniform(120, 250)))
        out.append((f"{i:02d}_{kind}_scene", render(shapes, size, size, fills, bg=40), shapes))
    return out


def write_vertices(shapes, path) -> None:
    """One ``# kind=`` header per shape followed by its vertices."""
    if isinstance(shapes, Shape):
        shapes = [shapes]
    lines = []
    for shape in shapes:
        lines.append(f"# kind={shape.kind}")
        lines += [f"{x:.6f} {y:.6f}" for x, y in shape.vertices]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_vertices(path) -> list[tuple[float, float]]:
    pts = []
    for line in Path(path).read_text(encoding="ascii").splitlines():
        if line and not line.startswith("#"):
            x, y = line.split()
            pts.append((float(x), float(y)))
    return pts


def write_corpus(out_dir, count: int = 20, size: int | None = None, seed: int = 0,
                 kind: str = "scene") -> list[Path]:
    """Write PNG images plus ``.vertices`` ground truth; ``kind`` is "scene" or "shape"."""
    if kind not in ("scene", "shape"):
        raise ValueError("kind must be 'scene' or 'shape'")
    if count < 1:
        raise ValueError("count must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    gen = scene_corpus(count, size or 160, seed) if kind == "scene" else shape_corpus(count, size or 128, seed)
    for name, image, shape in gen:
        p = out_dir / f"{name}.png"
        save_image(image, p)
        write_vertices(shape, p.with_suffix(".vertices"))
        paths.append(p)
    return paths
