"""Chord-based curvature estimators and corner selection.

Four estimators share the contour front-end:

* CPDA  - accumulated point-to-chord distance for chords of 10, 20 and 30
          points, normalised per chord and multiplied.
* CTAR  - ratio of the chord to the two triangle arms (1 on a straight line).
* CTAA  - the triangle's apex angle from the law of cosines.
* CADT  - supplement of the acute angle between the two half-chords,
          computed from their slopes without any square root.

Angles are in degrees throughout. Undefined curvature (chord does not fit
near the end of an open curve) is stored as NaN.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .contour import (CANNY_SIGMA, CURVE_SIGMA, MIN_CURVE_LENGTH, SmoothedCurve, TJunction,
                      preprocess)
from .raster_io import GrayImage

METHODS = ("cpda", "ctar", "ctaa", "cadt")

DISTANCE_PRODUCT = "distance-product"
RATIO = "ratio"
ANGLE = "angle-degrees"


@dataclass(frozen=True)
class DetectorConfig:
    cpda_chords: tuple[int, ...] = (10, 20, 30)
    cpda_curvature_threshold: float = 0.2
    cpda_angle_threshold: float = 157.0
    ctar_k: int = 4
    ctar_threshold: float = 0.9896
    ctaa_k: int = 3
    ctaa_threshold: float = 163.5
    cadt_l: int = 4
    cadt_threshold: float = 158.4
    tjunction_min_distance: float = 5.0
    # front-end
    canny_sigma: float = CANNY_SIGMA
    canny_low: float | None = None
    canny_high: float | None = None
    curve_sigma: float = CURVE_SIGMA
    min_length: int = MIN_CURVE_LENGTH
    # "original": report the traced pixel; "smoothed": the smoothed point
    corner_position: str = "original"

    def __post_init__(self) -> None:
        object.__setattr__(self, "cpda_chords", tuple(int(c) for c in self.cpda_chords))
        for name in ("cpda_curvature_threshold", "ctar_threshold", "tjunction_min_distance",
                     "canny_sigma", "curve_sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("cpda_angle_threshold", "ctaa_threshold", "cadt_threshold"):
            if not 0 < getattr(self, name) < 180:
                raise ValueError(f"{name} must lie in (0, 180) degrees")
        if not self.cpda_chords or min(self.cpda_chords) < 1:
            raise ValueError("cpda_chords must be non-empty and >= 1")
        for name in ("ctar_k", "ctaa_k", "cadt_l"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.min_length < 2:
            raise ValueError("min_length must be >= 2")
        if self.corner_position not in ("original", "smoothed"):
            raise ValueError("corner_position must be 'original' or 'smoothed'")

    @classmethod
    def from_mapping(cls, values: dict) -> "DetectorConfig":
        """Build from string/number values, e.g. parsed from a config file."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise KeyError(f"unknown detector option {key!r}")
            if key == "cpda_chords":
                kwargs[key] = tuple(int(v) for v in str(raw).replace(",", " ").split()) \
                    if isinstance(raw, str) else tuple(raw)
            elif key in ("canny_low", "canny_high"):
                kwargs[key] = None if raw in (None, "", "none", "None") else float(raw)
            elif key == "corner_position":
                kwargs[key] = str(raw)
            elif key in ("ctar_k", "ctaa_k", "cadt_l", "min_length"):
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
        return cls(**kwargs)

    def with_overrides(self, **kw) -> "DetectorConfig":
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class CurvatureProfile:
    curve_index: int
    values: np.ndarray
    kind: str

    def __len__(self) -> int:
        return len(self.values)

    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)


@dataclass(frozen=True)
class Corner:
    x: float
    y: float
    curve_index: int
    point_index: int
    curvature: float
    detector: str = field(default="", compare=True)


def _points(curve) -> np.ndarray:
    pts = curve.points if hasattr(curve, "points") else curve
    return np.asarray(pts, dtype=np.float64)


def _arm_indices(n: int, k: int, closed: bool):
    """Indices ``i``, ``i-k``, ``i+k`` for every point where the chord fits."""
    idx = np.arange(n)
    if closed:
        return idx, (idx - k) % n, (idx + k) % n
    idx = idx[k:n - k]
    return idx, idx - k, idx + k


# --- per-triple kernels ----------------------------------------------------

def ctar_ratio(prev: np.ndarray, mid: np.ndarray, nxt: np.ndarray) -> np.ndarray:
    """d1 / (d2 + d3) for arrays of ``(.., 2)`` points; 1 for coincident points."""
    d1 = np.hypot(*(nxt - prev).T)
    d2 = np.hypot(*(mid - prev).T)
    d3 = np.hypot(*(nxt - mid).T)
    arms = d2 + d3
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(arms > 0, d1 / np.where(arms > 0, arms, 1.0), 1.0)
    return np.minimum(r, 1.0)


def ctaa_angle(prev: np.ndarray, mid: np.ndarray, nxt: np.ndarray) -> np.ndarray:
    """Apex angle at ``mid`` from the law of cosines, in degrees.

    cos(alpha) = (a^2 + b^2 - c^2) / (2ab) is paired with
    sin(alpha) = 2 * area / (ab) and resolved with ``arctan2``; the common
    factor 2ab cancels, which keeps the result exact near 0 and 180 degrees
    where ``arccos`` would lose about half the float precision.
    NaN where an arm has zero length.
    """
    ax, ay = (prev - mid).T
    bx, by = (nxt - mid).T
    cx, cy = (nxt - prev).T
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    cos_term = a2 + b2 - c2
    sin_term = 2.0 * np.abs(ax * by - ay * bx)
    alpha = np.degrees(np.arctan2(sin_term, cos_term))
    return np.where((a2 > 0) & (b2 > 0), alpha, np.nan)


def cadt_angle(prev: np.ndarray, mid: np.ndarray, nxt: np.ndarray) -> np.ndarray:
    """180 - theta, theta the acute angle between lines prev->mid and mid->nxt.

    With slopes m1 = uy/ux and m2 = vy/vx,
    (m1 - m2) / (1 + m1*m2) = (uy*vx - vy*ux) / (ux*vx + uy*vy),
    so ``theta = arctan(|cross| / |dot|)``; the two-argument form gives
    90 degrees when 1 + m1*m2 = 0 and handles vertical segments. No square
    roots. NaN when either segment has zero length.
    """
    ux, uy = (mid - prev).T
    vx, vy = (nxt - mid).T
    cross = uy * vx - vy * ux
    dot = ux * vx + uy * vy
    theta = np.degrees(np.arctan2(np.abs(cross), np.abs(dot)))
    degenerate = ((ux == 0) & (uy == 0)) | ((vx == 0) & (vy == 0))
    return np.where(degenerate, np.nan, 180.0 - theta)


# --- profiles --------------------------------------------------------------

def _triple_profile(curve, k: int, kernel, kind: str, curve_index: int) -> CurvatureProfile:
    pts = _points(curve)
    n = len(pts)
    closed = bool(getattr(curve, "closed", False))
    values = np.full(n, np.nan)
    if n > 2 * k:
        idx, lo, hi = _arm_indices(n, k, closed)
        values[idx] = kernel(pts[lo], pts[idx], pts[hi])
    return CurvatureProfile(curve_index, values, kind)


def ctar_curvature(curve, k: int = 4, curve_index: int = 0) -> CurvatureProfile:
    return _triple_profile(curve, k, ctar_ratio, RATIO, curve_index)


def ctaa_curvature(curve, k: int = 3, curve_index: int = 0) -> CurvatureProfile:
    return _triple_profile(curve, k, ctaa_angle, ANGLE, curve_index)


def cadt_curvature(curve, l: int = 4, curve_index: int = 0) -> CurvatureProfile:  # noqa: E741
    """Tangent-deviation angle per point, chord of ``2l + 1`` points."""
    return _triple_profile(curve, l, cadt_angle, ANGLE, curve_index)


def cpda_curvature(curve, chord: int, curve_index: int = 0) -> CurvatureProfile:
    """Sum of distances from each point to every chord slid past it.

    For point q the chord joins P_j and P_{j+chord} for
    j = q-chord+1 .. q-1. Points closer than ``chord`` to an open end are
    undefined; closed curves wrap.
    """
    pts = _points(curve)
    n = len(pts)
    closed = bool(getattr(curve, "closed", False))
    values = np.full(n, np.nan)
    if n <= 2 * chord:
        return CurvatureProfile(curve_index, values, DISTANCE_PRODUCT)
    q = np.arange(n) if closed else np.arange(chord, n - chord)
    p = pts[q]
    acc = np.zeros(len(q))
    for s in range(1, chord):
        a = pts[(q - s) % n]
        b = pts[(q - s + chord) % n]
        dx, dy = (b - a).T
        length = np.hypot(dx, dy)
        cross = np.abs(dx * (p[:, 1] - a[:, 1]) - dy * (p[:, 0] - a[:, 0]))
        safe = np.where(length > 0, length, 1.0)
        acc += np.where(length > 0, cross / safe, np.hypot(*(p - a).T))
    values[q] = acc
    return CurvatureProfile(curve_index, values, DISTANCE_PRODUCT)


def cpda_combine(profiles: Sequence[CurvatureProfile]) -> CurvatureProfile:
    """Normalise each chord's profile by its own maximum and multiply pointwise."""
    if not profiles:
        raise ValueError("need at least one profile")
    n = len(profiles[0])
    if any(len(p) != n for p in profiles):
        raise ValueError("profiles come from curves of different length")
    out = np.ones(n)
    all_zero = False
    for prof in profiles:
        v = prof.values
        defined = ~np.isnan(v)
        peak = v[defined].max() if defined.any() else np.nan
        if peak == 0:
            all_zero = True
            continue
        out = out * (v / peak)
    if all_zero:
        undefined = np.zeros(n, dtype=bool)
        for prof in profiles:
            undefined |= np.isnan(prof.values)
        out = np.where(undefined, np.nan, 0.0)
    return CurvatureProfile(profiles[0].curve_index, out, DISTANCE_PRODUCT)


# --- selection -------------------------------------------------------------

def threshold_candidates(profile: CurvatureProfile, threshold: float, sense: str = "below") -> list[int]:
    """Indices whose defined value is strictly below (or above) ``threshold``."""
    v = profile.values
    with np.errstate(invalid="ignore"):
        if sense == "below":
            hit = v < threshold
        elif sense == "above":
            hit = v > threshold
        else:
            raise ValueError(f"sense must be 'below' or 'above', got {sense!r}")
    return np.flatnonzero(hit & ~np.isnan(v)).tolist()


def _runs(candidates: Sequence[int], n: int | None, closed: bool) -> list[list[int]]:
    runs: list[list[int]] = []
    for c in candidates:
        if runs and c == runs[-1][-1] + 1:
            runs[-1].append(c)
        else:
            runs.append([c])
    if closed and n is not None and len(runs) > 1 and runs[0][0] == 0 and runs[-1][-1] == n - 1:
        runs[0] = runs.pop() + runs[0]
    return runs


def refine_local_extrema(profile: CurvatureProfile, candidates: Sequence[int], sense: str = "minima",
                         closed: bool = False) -> list[int]:
    """Keep one index per run of consecutive candidates: the extremal value,
    lowest index on ties. With ``closed`` a run may wrap past the last index."""
    if sense not in ("minima", "maxima"):
        raise ValueError(f"sense must be 'minima' or 'maxima', got {sense!r}")
    sign = 1.0 if sense == "minima" else -1.0
    v = profile.values
    keep = [min(run, key=lambda i: (sign * v[i], i)) for run in _runs(list(candidates), len(v), closed)]
    return sorted(keep)


def _corner(curve: SmoothedCurve, ci: int, pi: int, value: float, name: str,
            position: str = "original") -> Corner:
    source = getattr(curve, "source", None)
    pts = source if position == "original" and source is not None else curve.points
    x, y = pts[pi]
    return Corner(float(x), float(y), ci, int(pi), float(value), name)


def _angle_prune(curve: SmoothedCurve, picks: list[int], threshold: float) -> list[int]:
    """Drop candidates whose angle to their neighbouring candidates is too flat.

    Removes the flattest offender one at a time until every survivor
    subtends less than ``threshold`` degrees.
    """
    pts = curve.points
    n = len(pts)
    picks = list(picks)
    while len(picks) > 1:
        prev_idx, next_idx = [], []
        for j, p in enumerate(picks):
            if curve.closed:
                prev_idx.append(picks[j - 1])
                next_idx.append(picks[(j + 1) % len(picks)])
            else:
                prev_idx.append(picks[j - 1] if j > 0 else 0)
                next_idx.append(picks[j + 1] if j + 1 < len(picks) else n - 1)
        ang = ctaa_angle(pts[prev_idx], pts[picks], pts[next_idx])
        ang = np.where(np.isnan(ang), 0.0, ang)
        worst = int(np.argmax(ang))
        if ang[worst] < threshold:
            break
        picks.pop(worst)
    return picks


def cpda_detect(curves: Sequence[SmoothedCurve], junctions: Iterable[TJunction],
                config: DetectorConfig = DetectorConfig()) -> list[Corner]:
    corners: list[Corner] = []
    for ci, curve in enumerate(curves):
        profs = [cpda_curvature(curve, L, ci) for L in config.cpda_chords]
        combined = cpda_combine(profs)
        cand = threshold_candidates(combined, config.cpda_curvature_threshold, "above")
        picks = refine_local_extrema(combined, cand, "maxima", curve.closed)
        picks = _angle_prune(curve, picks, config.cpda_angle_threshold)
        corners.extend(_corner(curve, ci, p, combined.values[p], "cpda", config.corner_position)
                       for p in picks)
    # T-junctions well away from every detected corner become corners too
    kept = np.array([(c.x, c.y) for c in corners]).reshape(-1, 2)
    extra = []
    for j in junctions:
        if len(kept) and np.hypot(kept[:, 0] - j.x, kept[:, 1] - j.y).min() <= config.tjunction_min_distance:
            continue
        extra.append(Corner(float(j.x), float(j.y), -1, -1, float("nan"), "cpda"))
    return corners + extra


_SINGLE_CHORD = {
    "ctar": (ctar_curvature, "ctar_k", "ctar_threshold"),
    "ctaa": (ctaa_curvature, "ctaa_k", "ctaa_threshold"),
    "cadt": (cadt_curvature, "cadt_l", "cadt_threshold"),
}


def single_chord_detect(curves: Sequence[SmoothedCurve], method: str,
                        config: DetectorConfig = DetectorConfig()) -> list[Corner]:
    """CTAR / CTAA / CADT: threshold below, keep the local minimum of each run."""
    estimator, half_name, thr_name = _SINGLE_CHORD[method]
    half, thr = getattr(config, half_name), getattr(config, thr_name)
    corners = []
    for ci, curve in enumerate(curves):
        prof = estimator(curve, half, ci)
        cand = threshold_candidates(prof, thr, "below")
        for p in refine_local_extrema(prof, cand, "minima", curve.closed):
            corners.append(_corner(curve, ci, p, prof.values[p], method, config.corner_position))
    return corners


def detect_on_curves(curves, junctions, method: str, config: DetectorConfig = DetectorConfig()) -> list[Corner]:
    if method == "cpda":
        return cpda_detect(curves, junctions, config)
    if method in _SINGLE_CHORD:
        return single_chord_detect(curves, method, config)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def _front_end(image: GrayImage, config: DetectorConfig):
    return preprocess(image, canny_sigma=config.canny_sigma, low=config.canny_low,
                      high=config.canny_high, min_length=config.min_length,
                      curve_sigma=config.curve_sigma)


def detect(image: GrayImage, method: str = "cadt", config: DetectorConfig = DetectorConfig()) -> list[Corner]:
    """Full pipeline on one image; corners ordered by (curve, point)."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    curves, junctions = _front_end(image, config)
    return detect_on_curves(curves, junctions, method, config)


def detect_many(image: GrayImage, methods: Sequence[str] = METHODS,
                config: DetectorConfig = DetectorConfig()) -> dict[str, list[Corner]]:
    """Run several detectors on one shared edge/curve extraction."""
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    curves, junctions = _front_end(image, config)
    return {m: detect_on_curves(curves, junctions, m, config) for m in methods}


def format_corners(corners: Sequence[Corner], detector: str) -> str:
    lines = [f"# detector={detector}"]
    for c in corners:
        lines.append(f"{c.x:.4f} {c.y:.4f} {c.curvature:.6g} {c.curve_index} {c.point_index}")
    return "\n".join(lines) + "\n"


def parse_corners(text: str) -> tuple[str, list[Corner]]:
    detector, out = "", []
    for line in text.splitlines():
        if line.startswith("# detector="):
            detector = line.split("=", 1)[1].strip()
        elif line and not line.startswith("#"):
            x, y, curv, ci, pi = line.split()
            out.append(Corner(float(x), float(y), int(ci), int(pi), float(curv), detector))
    return detector, out
