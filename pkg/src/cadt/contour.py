"""Edge detection, edge-chain tracing and curve smoothing.

This is the front-end shared by every detector: Canny edges are thinned to
one-pixel chains, split at junction pixels, traced into ordered curves and
finally smoothed with a 1-D Gaussian along the curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage.morphology import thin

from .raster_io import GrayImage

# Clockwise ring starting east, in (dx, dy) with y pointing down.
RING = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))

CANNY_SIGMA = 1.5
CANNY_HIGH_PERCENTILE = 70.0
CANNY_LOW_RATIO = 0.4
CURVE_SIGMA = 3.0
MIN_CURVE_LENGTH = 10
MAX_SPUR = 3
_GAUSS_TRUNCATE = 4.0


class DegenerateInputError(ValueError):
    """Input too small or too short for the requested operation."""


@dataclass(frozen=True, eq=False)
class EdgeMap:
    mask: np.ndarray  # bool, [row, column]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    def count(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True, eq=False)
class Curve:
    """Ordered pixel chain; ``points`` is an ``(N, 2)`` int array of ``(x, y)``."""

    points: np.ndarray
    closed: bool = False

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class SmoothedCurve:
    points: np.ndarray  # (N, 2) float
    closed: bool = False
    source: np.ndarray | None = None  # the unsmoothed (N, 2) pixel chain, when known

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class TJunction:
    x: int
    y: int

    @property
    def location(self) -> tuple[int, int]:
        return (self.x, self.y)


def _blur_radius(sigma: float) -> int:
    return int(_GAUSS_TRUNCATE * float(sigma) + 0.5)


def _non_max_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    h, w = mag.shape
    out = np.zeros_like(mag)
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    # bins: 0 = horizontal gradient, 1 = 45 deg, 2 = vertical, 3 = 135 deg
    sector = (((angle + 22.5) // 45.0).astype(np.int64)) % 4
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}  # (drow, dcol) along gradient
    padded = np.pad(mag, 1)
    centre = mag
    for s, (dr, dc) in offsets.items():
        fwd = padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
        bwd = padded[1 - dr:1 - dr + h, 1 - dc:1 - dc + w]
        # ">" on one side breaks plateaus of equal magnitude consistently
        keep = (sector == s) & (centre >= fwd) & (centre > bwd)
        out[keep] = centre[keep]
    out[0, :] = out[-1, :] = 0.0
    out[:, 0] = out[:, -1] = 0.0
    return out


def detect_edges(image: GrayImage, low: float | None = None, high: float | None = None,
                 sigma: float = CANNY_SIGMA) -> EdgeMap:
    """Canny edge detector followed by thinning to one-pixel-wide chains.

    When ``high`` is omitted it is set to the 70th percentile of the nonzero
    gradient magnitudes; ``low`` then defaults to ``0.4 * high``.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    size = 2 * _blur_radius(sigma) + 1
    if image.width < size or image.height < size:
        raise DegenerateInputError(
            f"{image.width}x{image.height} image is smaller than the {size}-tap blur kernel")

    img = image.pixels.astype(np.float64)
    blurred = ndimage.gaussian_filter(img, sigma, mode="nearest", truncate=_GAUSS_TRUNCATE)
    gx = ndimage.sobel(blurred, axis=1, mode="nearest")
    gy = ndimage.sobel(blurred, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)

    nonzero = mag[mag > 1e-6]
    if nonzero.size == 0:
        return EdgeMap(np.zeros(img.shape, dtype=bool))
    if high is None:
        high = float(np.percentile(nonzero, CANNY_HIGH_PERCENTILE))
        if low is None:
            low = CANNY_LOW_RATIO * high
    elif low is None:
        low = CANNY_LOW_RATIO * high
    if not 0 < low < high:
        raise ValueError(f"need 0 < low < high, got low={low}, high={high}")

    nms = _non_max_suppression(mag, gx, gy)
    weak = nms >= low
    strong = nms >= high
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return EdgeMap(np.zeros(img.shape, dtype=bool))
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    edges = thin(keep[labels])
    return EdgeMap(_bridge_gaps(edges))


def _bridge_gaps(mask: np.ndarray) -> np.ndarray:
    """Join chain ends that are two pixels apart with a single pixel.

    Canny leaves such breaks at sharp tips, where the two sides of a narrow
    wedge are suppressed against each other.
    """
    cn = _crossing_numbers(mask)
    ends_y, ends_x = np.nonzero(mask & (cn == 1))
    if len(ends_x) < 2:
        return mask
    mask = mask.copy()
    ends = sorted(zip(ends_x.tolist(), ends_y.tolist()), key=lambda p: (p[1], p[0]))
    end_set = set(ends)
    used: set[tuple[int, int]] = set()
    h, w = mask.shape
    for e in ends:
        if e in used:
            continue
        for dy in range(-2, 3):
            for dx in range(-2, 3):
                f = (e[0] + dx, e[1] + dy)
                if max(abs(dx), abs(dy)) != 2 or f not in end_set or f in used:
                    continue
                # unset pixel adjacent to both ends
                for mx in (e[0] + np.sign(dx), e[0]) if abs(dx) == 1 else (e[0] + dx // 2,):
                    for my in (e[1] + np.sign(dy), e[1]) if abs(dy) == 1 else (e[1] + dy // 2,):
                        mx, my = int(mx), int(my)
                        if 0 <= mx < w and 0 <= my < h and not mask[my, mx] \
                                and max(abs(mx - f[0]), abs(my - f[1])) == 1:
                            mask[my, mx] = True
                            used.update((e, f))
                            break
                    if e in used:
                        break
                if e in used:
                    break
            if e in used:
                break
    return mask


def _crossing_numbers(mask: np.ndarray) -> np.ndarray:
    """Number of separate neighbour runs around each pixel (0->1 transitions on the ring)."""
    p = np.pad(mask, 1).astype(np.int8)
    h, w = mask.shape
    ring = [p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] for dx, dy in RING]
    cn = np.zeros((h, w), dtype=np.int8)
    for i in range(8):
        cn += (ring[i] == 0) & (ring[(i + 1) % 8] == 1)
    return cn


def _prune_spurs(mask: np.ndarray, max_len: int) -> np.ndarray:
    """Delete branches of at most ``max_len`` pixels that dangle off a junction.

    Thinning leaves such stubs at sharp tips; left in place they would turn
    a clean outline into several curves meeting at a false junction.
    """
    if max_len < 1:
        return mask
    mask = mask.copy()
    h, w = mask.shape
    cn = _crossing_numbers(mask)
    junction = mask & (cn >= 3)
    # a stub tip may touch two pixels of its host, so count neighbour runs
    ends_y, ends_x = np.nonzero(mask & (cn == 1))

    def around(p):
        x, y = p
        for dx, dy in RING:
            qx, qy = x + dx, y + dy
            if 0 <= qx < w and 0 <= qy < h and mask[qy, qx]:
                yield (qx, qy)

    for e in zip(ends_x.tolist(), ends_y.tolist()):
        if not mask[e[1], e[0]]:
            continue
        path = [e]
        while len(path) <= max_len:
            nxt = [q for q in around(path[-1]) if q not in path]
            if any(junction[q[1], q[0]] for q in nxt):
                for x, y in path:
                    mask[y, x] = False
                break
            if len(nxt) != 1:
                break
            path.append(nxt[0])
    return mask


def _turn(d0: tuple[int, int], d1: tuple[int, int]) -> int:
    i, j = RING.index(d0), RING.index(d1)
    t = abs(i - j)
    return min(t, 8 - t)


def extract_curves(edges: EdgeMap, min_length: int = MIN_CURVE_LENGTH, max_spur: int = MAX_SPUR):
    """Trace an edge map into curves, splitting chains at junction pixels.

    Returns ``(curves, junctions)``. Curves start at chain ends (or, for
    loops, at their first pixel in raster order). A junction pixel is
    appended to every chain that touches it; clusters of adjacent junction
    pixels are reported as a single :class:`TJunction`. Stubs of up to
    ``max_spur`` pixels hanging off a junction are discarded first.
    """
    if min_length < 2:
        raise ValueError("min_length must be >= 2")
    mask = np.asarray(edges.mask, dtype=bool)
    if not mask.any():
        return [], []
    mask = _prune_spurs(mask, max_spur)

    cn = _crossing_numbers(mask)
    junction_mask = mask & (cn >= 3)
    ys, xs = np.nonzero(mask)
    junction_px = {(int(x), int(y)) for x, y in zip(*np.nonzero(junction_mask.T))}
    pixels = {(int(x), int(y)) for x, y in zip(xs, ys)} - junction_px

    def linked(p, q) -> bool:
        # a diagonal step that cuts past a junction pixel would bypass it
        if p[0] != q[0] and p[1] != q[1]:
            if (p[0], q[1]) in junction_px or (q[0], p[1]) in junction_px:
                return False
        return True

    nbrs: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for p in pixels:
        lst = []
        for dx, dy in RING:
            q = (p[0] + dx, p[1] + dy)
            if q in pixels and linked(p, q):
                lst.append(q)
        nbrs[p] = lst

    def adjacent_junction(p):
        for dx, dy in RING:
            q = (p[0] + dx, p[1] + dy)
            if q in junction_px:
                return q
        return None

    visited: set[tuple[int, int]] = set()
    raw_curves: list[tuple[list, bool]] = []

    def walk(start):
        chain = [start]
        visited.add(start)
        cur, prev_dir = start, None
        while True:
            options = [q for q in nbrs[cur] if q not in visited]
            if not options:
                return chain
            if prev_dir is None:
                nxt = options[0]
            else:
                nxt = min(options, key=lambda q: (_turn(prev_dir, (q[0] - cur[0], q[1] - cur[1])),
                                                  RING.index((q[0] - cur[0], q[1] - cur[1]))))
            prev_dir = (nxt[0] - cur[0], nxt[1] - cur[1])
            chain.append(nxt)
            visited.add(nxt)
            cur = nxt

    raster = sorted(pixels, key=lambda p: (p[1], p[0]))
    for p in raster:
        if p in visited or len(nbrs[p]) > 1:
            continue
        chain = walk(p)
        head = adjacent_junction(chain[0])
        tail = adjacent_junction(chain[-1]) if len(chain) > 1 or head is None else None
        if head is not None:
            chain.insert(0, head)
        if tail is not None and tail != chain[0]:
            chain.append(tail)
        raw_curves.append((chain, False))

    for p in raster:
        if p in visited:
            continue
        chain = walk(p)
        first, last = chain[0], chain[-1]
        closed = len(chain) >= 3 and first in nbrs[last]
        if not closed:
            tail = adjacent_junction(last)
            if tail is not None:
                chain.append(tail)
        raw_curves.append((chain, closed))

    curves = [Curve(np.array(c, dtype=np.int64), closed)
              for c, closed in raw_curves if len(c) >= min_length]
    return curves, _cluster_junctions(junction_mask)


def _cluster_junctions(junction_mask: np.ndarray) -> list[TJunction]:
    labels, n = ndimage.label(junction_mask, structure=np.ones((3, 3), dtype=bool))
    out = []
    for idx in range(1, n + 1):
        ys, xs = np.nonzero(labels == idx)
        cx, cy = xs.mean(), ys.mean()
        order = np.lexsort((xs, ys, (xs - cx) ** 2 + (ys - cy) ** 2))
        k = order[0]
        out.append(TJunction(int(xs[k]), int(ys[k])))
    out.sort(key=lambda j: (j.y, j.x))
    return out


def gaussian_kernel(sigma: float) -> np.ndarray:
    half = math.ceil(3.0 * sigma)
    t = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def smooth_curve(curve: Curve, sigma: float = CURVE_SIGMA) -> SmoothedCurve:
    """Convolve x and y independently with a normalised Gaussian.

    Open curves are padded by repeating their end points, closed curves
    circularly, so the output has the input's length.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    pts = np.asarray(curve.points, dtype=np.float64)
    if len(pts) < 2:
        raise DegenerateInputError("curve needs at least two points")
    kernel = gaussian_kernel(sigma)
    half = len(kernel) // 2
    mode = "wrap" if curve.closed else "edge"
    padded = np.pad(pts, ((half, half), (0, 0)), mode=mode)
    out = np.empty_like(pts)
    for axis in (0, 1):
        out[:, axis] = np.convolve(padded[:, axis], kernel, mode="valid")
    return SmoothedCurve(out, curve.closed, np.asarray(curve.points))


def preprocess(image: GrayImage, *, canny_sigma: float = CANNY_SIGMA, low: float | None = None,
               high: float | None = None, min_length: int = MIN_CURVE_LENGTH,
               curve_sigma: float = CURVE_SIGMA):
    """Edges -> curves -> smoothed curves. Returns ``(smoothed, junctions)``."""
    edges = detect_edges(image, low=low, high=high, sigma=canny_sigma)
    curves, junctions = extract_curves(edges, min_length=min_length)
    return [smooth_curve(c, curve_sigma) for c in curves], junctions


def write_curves(curves, path) -> None:
    """Debug dump: one ``# open``/``# closed`` block per curve, ``x y`` per line."""
    blocks = []
    for c in curves:
        lines = ["# closed" if c.closed else "# open"]
        for x, y in np.asarray(c.points):
            lines.append(f"{x:g} {y:g}" if isinstance(x, float) else f"{x} {y}")
        blocks.append("\n".join(lines))
    Path(path).write_text("\n\n".join(blocks) + ("\n" if blocks else ""), encoding="ascii")


def read_curves(path) -> list[Curve]:
    curves, pts, closed = [], [], False
    for line in Path(path).read_text(encoding="ascii").splitlines() + [""]:
        line = line.strip()
        if line.startswith("#"):
            closed = line == "# closed"
        elif line:
            x, y = line.split()
            pts.append((int(x), int(y)))
        elif pts:
            curves.append(Curve(np.array(pts, dtype=np.int64), closed))
            pts = []
    return curves
