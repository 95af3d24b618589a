"""Corner matching, average repeatability and localisation error."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .transforms import IDENTITY, map_point, map_points

MATCH_RADIUS = 3.0
CSV_FIELDS = ("image", "detector", "family", "params", "A_p", "B_q", "C_r", "repeatability",
              "localization_error")


@dataclass(frozen=True)
class MatchResult:
    # ((x_m, y_m) in the original image, (x_n, y_n) in the test image)
    pairs: tuple[tuple[tuple[float, float], tuple[float, float]], ...]
    B_q: int
    C_r: int

    @property
    def A_p(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class EvalRecord:
    image: str
    detector: str
    family: str
    params: str
    A_p: int
    B_q: int
    C_r: int
    repeatability: float | None
    localization_error: float | None


def _xy(c) -> tuple[float, float]:
    if hasattr(c, "x"):
        return (float(c.x), float(c.y))
    return (float(c[0]), float(c[1]))


def match_corners(original: Sequence, test: Sequence, forward_map=IDENTITY,
                  radius: float = MATCH_RADIUS) -> MatchResult:
    """Greedy one-to-one matching in ascending distance order.

    Original corners are first carried into test-image coordinates by
    ``forward_map``. Equal distances are resolved by the coordinates of the
    two corners, so the result does not depend on input order.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    orig = [_xy(c) for c in original]
    tst = [_xy(c) for c in test]
    if not orig or not tst:
        return MatchResult((), len(orig), len(tst))
    mapped = map_points(forward_map, np.array(orig))
    t = np.array(tst)
    d = np.hypot(mapped[:, None, 0] - t[None, :, 0], mapped[:, None, 1] - t[None, :, 1])
    ii, jj = np.nonzero(d <= radius)
    cand = sorted(zip(d[ii, jj].tolist(), ii.tolist(), jj.tolist()),
                  key=lambda r: (r[0], orig[r[1]], tst[r[2]]))
    used_o, used_t, pairs = set(), set(), []
    for _, i, j in cand:
        if i in used_o or j in used_t:
            continue
        used_o.add(i)
        used_t.add(j)
        pairs.append((orig[i], tst[j]))
    pairs.sort()
    return MatchResult(tuple(pairs), len(orig), len(tst))


def average_repeatability(result: MatchResult) -> float | None:
    """100 * (A_p/B_q + A_p/C_r) / 2, or None when either image has no corners."""
    if result.B_q == 0 or result.C_r == 0:
        return None
    return 100.0 * (result.A_p / result.B_q + result.A_p / result.C_r) / 2.0


def localization_error(result: MatchResult, forward_map=IDENTITY) -> float | None:
    """RMS distance between mapped original and matched test positions; None if nothing matched."""
    if result.A_p == 0:
        return None
    sq = 0.0
    for (xm, ym), (xn, yn) in result.pairs:
        ex, ey = map_point(forward_map, (xm, ym))
        sq += (ex - xn) ** 2 + (ey - yn) ** 2
    return math.sqrt(sq / result.A_p)


def evaluate(image: str, detector: str, spec, original, test, forward_map,
             radius: float = MATCH_RADIUS) -> EvalRecord:
    res = match_corners(original, test, forward_map, radius)
    return EvalRecord(image, detector, spec.family, spec.param_string, res.A_p, res.B_q, res.C_r,
                      average_repeatability(res), localization_error(res, forward_map))


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


@dataclass(frozen=True)
class Summary:
    # (detector, family) -> (records, mean repeatability, mean localisation error)
    by_family: dict
    # detector -> mean over all records
    overall_repeatability: dict
    # detector -> mean of the per-family means
    family_mean_repeatability: dict
    overall_localization: dict
    # detector -> corners found on the untransformed images
    corner_counts: dict


def aggregate(records: Iterable[EvalRecord], corner_counts: dict | None = None) -> Summary:
    """Per-(detector, family) means plus all-family means per detector.

    ``corner_counts`` gives the original-image corner totals; when omitted
    they are rebuilt from ``B_q`` of one record per (image, detector).
    """
    recs = sorted(records, key=lambda r: (r.detector, r.family, r.image, r.params))
    groups = defaultdict(list)
    per_det = defaultdict(list)
    for r in recs:
        groups[(r.detector, r.family)].append(r)
        per_det[r.detector].append(r)
    by_family = {k: (len(v), _mean(r.repeatability for r in v), _mean(r.localization_error for r in v))
                 for k, v in sorted(groups.items())}
    overall = {d: _mean(r.repeatability for r in v) for d, v in sorted(per_det.items())}
    fam_mean = {}
    for d in sorted(per_det):
        fam_means = [m for (det, _), (_, m, _) in by_family.items() if det == d]
        fam_mean[d] = _mean(fam_means)
    loc = {d: _mean(r.localization_error for r in v) for d, v in sorted(per_det.items())}
    if corner_counts is None:
        seen = {}
        for r in recs:
            seen[(r.detector, r.image)] = r.B_q
        corner_counts = defaultdict(int)
        for (d, _), b in sorted(seen.items()):
            corner_counts[d] += b
    return Summary(by_family, overall, fam_mean, loc, dict(sorted(corner_counts.items())))


def _fmt(v: float | None) -> str:
    return "NA" if v is None else f"{v:.6f}"


def records_to_csv(records: Iterable[EvalRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in sorted(records, key=lambda r: (r.image, r.family, r.params, r.detector)):
        w.writerow([r.image, r.detector, r.family, r.params, r.A_p, r.B_q, r.C_r,
                    _fmt(r.repeatability), _fmt(r.localization_error)])
    return buf.getvalue()


def records_from_csv(text: str) -> list[EvalRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        def opt(v):
            return None if v == "NA" else float(v)
        out.append(EvalRecord(row["image"], row["detector"], row["family"], row["params"],
                              int(row["A_p"]), int(row["B_q"]), int(row["C_r"]),
                              opt(row["repeatability"]), opt(row["localization_error"])))
    return out


def summary_to_csv(summary: Summary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["detector", "family", "records", "repeatability", "localization_error"])
    for (det, fam), (n, rep, loc) in summary.by_family.items():
        w.writerow([det, fam, n, _fmt(rep), _fmt(loc)])
    for det in summary.overall_repeatability:
        w.writerow([det, "ALL(records)", sum(n for (d, _), (n, _, _) in summary.by_family.items() if d == det),
                    _fmt(summary.overall_repeatability[det]), _fmt(summary.overall_localization[det])])
        w.writerow([det, "ALL(family-mean)", "", _fmt(summary.family_mean_repeatability[det]), ""])
    return buf.getvalue()
