"""Command-line entry point: detect, bench, sweep and synth subcommands."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .bench import BenchError, RunConfig, format_table, run_bench, write_reports
from .detectors import METHODS, DetectorConfig, detect, format_corners
from .raster_io import load_image, save_rgb
from .synth import write_corpus
from .transforms import FAMILIES

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
RUN_KEYS = ("corpus", "out", "family", "detectors", "seed", "jobs", "cache")
DETECTOR_KEYS = tuple(f.name for f in fields(DetectorConfig))

log = logging.getLogger("cadt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in RUN_KEYS and key not in DETECTOR_KEYS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def _detector_config(file_values: dict, overrides: dict | None = None) -> DetectorConfig:
    values = {k: v for k, v in file_values.items() if k in DETECTOR_KEYS}
    values.update(overrides or {})
    try:
        return DetectorConfig.from_mapping(values)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid detector configuration: {exc}") from exc


def _int(value, name) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise UsageError(f"{name} must be an integer, got {value!r}") from None


def _resolve_seed(cli_seed, file_values) -> int:
    if cli_seed is not None:
        return cli_seed
    if "seed" in file_values:
        return _int(file_values["seed"], "seed")
    env = os.environ.get("CADT_SEED")
    if env not in (None, ""):
        return _int(env, "CADT_SEED")
    return 0


def _split(text: str) -> list[str]:
    return [t for t in text.replace(",", " ").split() if t]


def _run_config(args, file_values, detectors=None, overrides=None, out=None) -> RunConfig:
    corpus = args.corpus or file_values.get("corpus")
    out = out or getattr(args, "out", None) or file_values.get("out")
    if not corpus or not out:
        raise UsageError("--corpus and --out are required (on the command line or in --config)")
    if detectors is None:
        raw = args.detectors or file_values.get("detectors") or ",".join(METHODS)
        detectors = tuple(_split(raw))
    bad = [d for d in detectors if d not in METHODS]
    if bad or not detectors:
        raise UsageError(f"unknown detector(s) {bad}; choose from {', '.join(METHODS)}")
    family = args.family or file_values.get("family") or None
    if family is not None and family not in FAMILIES:
        raise UsageError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    jobs = args.jobs if args.jobs is not None else _int(file_values.get("jobs", 1), "jobs")
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    cache = args.cache or file_values.get("cache") or None
    if args.no_cache:
        cache = False
    return RunConfig(Path(corpus), Path(out), detectors, _detector_config(file_values, overrides),
                     family, _resolve_seed(args.seed, file_values), jobs, cache)


def cmd_detect(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    config = _detector_config(file_values)
    path = Path(args.image)
    try:
        image = load_image(path)
    except (OSError, ValueError) as exc:
        print(f"error: cannot load {path}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    corners = detect(image, args.method, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corner_file = out_dir / f"{path.stem}.{args.method}.corners"
    corner_file.write_text(format_corners(corners, args.method), encoding="ascii")
    print(f"{len(corners)} corners -> {corner_file}")
    if args.overlay:
        overlay = out_dir / f"{path.stem}.{args.method}.overlay.png"
        save_rgb(draw_overlay(image.pixels, corners), overlay)
        print(f"overlay -> {overlay}")
    return EXIT_OK


def draw_overlay(pixels: np.ndarray, corners, color=(255, 0, 0)) -> np.ndarray:
    """Gray image as RGB with a 3x3 pixel square on every corner."""
    rgb = np.repeat(pixels[:, :, None], 3, axis=2).copy()
    h, w = pixels.shape
    for c in corners:
        x, y = int(np.floor(c.x + 0.5)), int(np.floor(c.y + 0.5))
        rgb[max(y - 1, 0):min(y + 2, h), max(x - 1, 0):min(x + 2, w)] = color
    return rgb


def cmd_bench(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    cfg = _run_config(args, file_values)
    result = run_bench(cfg)
    for w in result.warnings:
        log.warning("suite: %s", w)
    if not result.records:
        print("error: no records produced", file=sys.stderr)
        return EXIT_RUNTIME
    for p in write_reports(result, cfg.out):
        print(f"wrote {p}")
    sys.stdout.write(format_table(result.summary))
    return EXIT_OK


def _grid_point_dir(l_value: int, threshold: float) -> str:
    return f"l{l_value}_t{threshold:g}"


def cmd_sweep(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    try:
        ls = [int(v) for v in _split(args.l)]
        thresholds = [float(v) for v in _split(args.threshold)]
    except ValueError as exc:
        raise UsageError(f"bad grid value: {exc}") from None
    if not ls or not thresholds:
        raise UsageError("--l and --threshold need at least one value each")
    out = Path(args.out or file_values.get("out") or "sweep")
    if args.cache is None and not args.no_cache:
        args.cache = str(out / "cache")
    rows = []
    for l_value in ls:
        for thr in thresholds:
            point_out = out / _grid_point_dir(l_value, thr)
            cfg = _run_config(args, file_values, detectors=("cadt",),
                              overrides={"cadt_l": l_value, "cadt_threshold": thr}, out=point_out)
            result = run_bench(cfg)
            if not result.records:
                print(f"error: no records produced for l={l_value} threshold={thr:g}", file=sys.stderr)
                return EXIT_RUNTIME
            write_reports(result, point_out)
            s = result.summary
            rows.append((l_value, thr, len(result.records), s.corner_counts.get("cadt", 0),
                         s.overall_repeatability.get("cadt"), s.family_mean_repeatability.get("cadt"),
                         s.overall_localization.get("cadt")))
    text = sweep_to_csv(rows)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    best = max((r for r in rows if r[4] is not None), key=lambda r: (r[4], -r[0], -r[1]), default=None)
    if best is not None:
        print(f"best: l={best[0]} threshold={best[1]:g} repeatability={best[4]:.4f}")
    return EXIT_OK


def sweep_to_csv(rows) -> str:
    def fmt(v):
        return "NA" if v is None else f"{v:.6f}"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["l", "threshold", "records", "corners", "repeatability", "family_mean_repeatability",
                "localization_error"])
    for l_value, thr, n, corners, rep, fam, loc in rows:
        w.writerow([l_value, f"{thr:g}", n, corners, fmt(rep), fmt(fam), fmt(loc)])
    return buf.getvalue()


def cmd_synth(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    seed = _resolve_seed(args.seed, {})
    paths = write_corpus(args.out, args.count, args.size, seed, args.kind)
    print(f"wrote {len(paths)} images to {args.out}")
    return EXIT_OK


def _add_run_options(p, need_out: bool = True) -> None:
    p.add_argument("--corpus", help="directory of PNG/PGM images")
    if need_out:
        p.add_argument("--out", help="output directory for reports")
    p.add_argument("--family", help=f"restrict to one family: {', '.join(FAMILIES)}")
    p.add_argument("--seed", type=int, help="base seed (default: $CADT_SEED or 0)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--cache", help="transformed-image cache directory (default <out>/cache)")
    p.add_argument("--no-cache", action="store_true", help="do not cache transformed images")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cadt", description="Contour corner detectors and their robustness benchmark.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="detect corners in one image")
    p.add_argument("image")
    p.add_argument("--method", choices=METHODS, default="cadt")
    p.add_argument("--overlay", action="store_true", help="also write an overlay PNG")
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("-o", "--out-dir", default=".", help="output directory (default: current)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bench", help="run the transformation benchmark over a corpus")
    _add_run_options(p)
    p.add_argument("--detectors", help=f"comma-separated subset of {','.join(METHODS)}")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="grid search over the CADT chord length and angle threshold")
    _add_run_options(p)
    p.add_argument("--l", required=True, help="comma-separated chord half-lengths")
    p.add_argument("--threshold", required=True, help="comma-separated angle thresholds (degrees)")
    p.set_defaults(func=cmd_sweep, detectors=None)

    p = sub.add_parser("synth", help="write the synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--size", type=int, default=None, help="image side in pixels")
    p.add_argument("--seed", type=int)
    p.add_argument("--kind", choices=("scene", "shape"), default="scene")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cadt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BenchError, OSError, ValueError) as exc:
        print(f"cadt: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
