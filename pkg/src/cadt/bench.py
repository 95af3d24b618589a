"""Benchmark orchestration: corpus x transformation suite x detectors -> records."""

from __future__ import annotations

import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .detectors import METHODS, DetectorConfig, detect_many
from .metrics import (EvalRecord, Summary, aggregate, evaluate, records_to_csv, summary_to_csv)
from .raster_io import GrayImage, load_image
from .svgchart import grouped_bar_chart
from .transforms import (FAMILIES, TransformSpec, apply_transform, cached_transform, derive_seed,
                         enumerate_suite, suite_warnings)

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".pgm")


class BenchError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    corpus: Path
    out: Path
    detectors: tuple[str, ...] = METHODS
    detector_config: DetectorConfig = field(default_factory=DetectorConfig)
    family: str | None = None
    seed: int = 0
    jobs: int = 1
    # None -> <out>/cache; False -> no disk cache
    cache: Path | None | bool = None
    charts: bool = True

    def __post_init__(self) -> None:
        bad = [d for d in self.detectors if d not in METHODS]
        if bad or not self.detectors:
            raise ValueError(f"unknown detector(s) {bad}; choose from {', '.join(METHODS)}")
        if self.family is not None and self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @property
    def cache_root(self) -> Path | None:
        if self.cache is False:
            return None
        return Path(self.cache) if self.cache else Path(self.out) / "cache"


@dataclass
class BenchResult:
    records: list[EvalRecord]
    summary: Summary
    skipped: list[str]
    warnings: list[str]
    images: list[str]


def list_corpus(corpus) -> list[Path]:
    corpus = Path(corpus)
    if not corpus.is_dir():
        raise BenchError(f"corpus directory {corpus} does not exist")
    return sorted(p for p in corpus.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


@functools.lru_cache(maxsize=4)
def _load_cached(path: str) -> GrayImage:
    return load_image(path)


def _run_item(item):
    """One (image, spec) work item -> (records, skip messages)."""
    path, image_id, spec, detectors, config, seed, cache_root, originals = item
    try:
        image = _load_cached(path)
        s = derive_seed(seed, image_id, spec)
        if cache_root is None:
            tr = apply_transform(image, spec, s)
        else:
            tr = cached_transform(cache_root, image_id, image, spec, s)
        found = detect_many(tr.image, detectors, config)
    except Exception as exc:  # a failing spec is skipped, not fatal
        return [], [f"{image_id} {spec.key}: {type(exc).__name__}: {exc}"]
    recs = [evaluate(image_id, d, spec, originals[d], [(c.x, c.y) for c in found[d]], tr.forward_map)
            for d in detectors]
    return recs, []


def run_bench(cfg: RunConfig) -> BenchResult:
    paths = list_corpus(cfg.corpus)
    specs = enumerate_suite(cfg.family)
    skipped: list[str] = []
    originals: dict[str, dict[str, list]] = {}
    counts = {d: 0 for d in cfg.detectors}
    loaded: list[tuple[Path, str]] = []
    for p in paths:
        try:
            img = load_image(p)
            found = detect_many(img, cfg.detectors, cfg.detector_config)
        except Exception as exc:
            msg = f"{p.name}: skipped: {type(exc).__name__}: {exc}"
            log.warning(msg)
            skipped.append(msg)
            continue
        originals[p.stem] = {d: [(c.x, c.y) for c in found[d]] for d in cfg.detectors}
        for d in cfg.detectors:
            counts[d] += len(found[d])
        loaded.append((p, p.stem))

    root = cfg.cache_root
    items = [(str(p), stem, spec, cfg.detectors, cfg.detector_config, cfg.seed,
              None if root is None else str(root), originals[stem])
             for p, stem in loaded for spec in specs]
    log.info("%d images x %d specs x %d detectors", len(loaded), len(specs), len(cfg.detectors))

    records: list[EvalRecord] = []
    if cfg.jobs == 1 or len(items) <= 1:
        results = [_run_item(it) for it in items]
    else:
        chunk = max(1, math.ceil(len(items) / (cfg.jobs * 8)))
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_item, items, chunksize=chunk))
    for recs, skips in results:
        records.extend(recs)
        for m in skips:
            log.warning(m)
        skipped.extend(skips)

    records.sort(key=lambda r: (r.image, r.family, r.params, r.detector))
    warns = suite_warnings() if cfg.family in (None, "rotation") else []
    return BenchResult(records, aggregate(records, counts), sorted(skipped), warns,
                       [s for _, s in loaded])


def corner_counts_csv(summary: Summary) -> str:
    lines = ["detector,corners"] + [f"{d},{n}" for d, n in summary.corner_counts.items()]
    return "\n".join(lines) + "\n"


def write_reports(result: BenchResult, out, charts: bool = True) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        p = out / name
        p.write_text(text, encoding="utf-8")
        written.append(p)

    put("records.csv", records_to_csv(result.records))
    put("summary.csv", summary_to_csv(result.summary))
    put("corner_counts.csv", corner_counts_csv(result.summary))
    put("warnings.txt", "".join(f"{w}\n" for w in result.warnings + result.skipped))
    if charts:
        fams = [f for f in FAMILIES if any(k[1] == f for k in result.summary.by_family)]
        dets = sorted({d for d, _ in result.summary.by_family}, key=METHODS.index)
        rep = {k: v[1] for k, v in result.summary.by_family.items()}
        loc = {k: v[2] for k, v in result.summary.by_family.items()}
        put("repeatability.svg", grouped_bar_chart(fams, dets, rep, "Average repeatability",
                                                   "repeatability (%)", ymax=100.0))
        put("localization.svg", grouped_bar_chart(fams, dets, loc, "Localization error",
                                                  "RMSE (pixels)"))
    return written


def format_table(summary: Summary) -> str:
    """Plain-text per-detector overview for the terminal."""
    rows = [f"{'detector':<10}{'corners':>9}{'repeat.(rec)':>14}{'repeat.(fam)':>14}{'loc.err':>10}"]
    for d in summary.overall_repeatability:
        def f(v):
            return "NA" if v is None else f"{v:.2f}"
        rows.append(f"{d:<10}{summary.corner_counts.get(d, 0):>9}"
                    f"{f(summary.overall_repeatability[d]):>14}"
                    f"{f(summary.family_mean_repeatability[d]):>14}"
                    f"{f(summary.overall_localization[d]):>10}")
    return "\n".join(rows) + "\n"


def enumerate_items(cfg: RunConfig) -> list[tuple[str, TransformSpec]]:
    """(image id, spec) pairs the run would evaluate, for record-count checks."""
    return [(p.stem, s) for p in list_corpus(cfg.corpus) for s in enumerate_suite(cfg.family)]
