"""Minimal grouped bar charts written straight to SVG."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 500
PALETTE = ("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1")


def _nice_max(v: float) -> float:
    if v <= 0:
        return 1.0
    exp = 10 ** math.floor(math.log10(v))
    for m in (1, 2, 2.5, 5, 10):
        if m * exp >= v:
            return m * exp
    return 10 * exp


def grouped_bar_chart(groups, series, values, title: str = "", ylabel: str = "",
                      ymax: float | None = None) -> str:
    """``values[(series, group)]`` -> bar height; missing or None values draw no bar."""
    left, right, top, bottom = 70, 20, 50, 110
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom
    present = [v for v in values.values() if v is not None]
    top_val = ymax if ymax is not None else _nice_max(max(present, default=1.0) * 1.05)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
           f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-size="18">{escape(title)}</text>']

    for i in range(6):
        v = top_val * i / 5
        y = top + ph - ph * i / 5
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{v:g}</text>')
    out.append(f'<text transform="translate(18,{top + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle" font-size="13">{escape(ylabel)}</text>')

    n_groups, n_series = max(len(groups), 1), max(len(series), 1)
    gw = pw / n_groups
    bw = gw * 0.8 / n_series
    for gi, g in enumerate(groups):
        gx = left + gi * gw + gw * 0.1
        for si, s in enumerate(series):
            v = values.get((s, g))
            if v is None:
                continue
            hgt = ph * min(v, top_val) / top_val
            x, y = gx + si * bw, top + ph - hgt
            out.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bw * 0.95:.1f}" height="{hgt:.1f}" '
                       f'fill="{PALETTE[si % len(PALETTE)]}"><title>{escape(str(s))} / {escape(str(g))}: '
                       f'{v:.2f}</title></rect>')
            out.append(f'<text x="{x + bw * 0.475:.1f}" y="{y - 3:.1f}" text-anchor="middle" '
                       f'font-size="8">{v:.1f}</text>')
        out.append(f'<text transform="translate({gx + gw * 0.4:.1f},{top + ph + 14}) rotate(30)" '
                   f'font-size="11">{escape(str(g))}</text>')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')

    lx = left
    for si, s in enumerate(series):
        out.append(f'<rect x="{lx}" y="{HEIGHT - 22}" width="12" height="12" '
                   f'fill="{PALETTE[si % len(PALETTE)]}"/>')
        out.append(f'<text x="{lx + 16}" y="{HEIGHT - 12}" font-size="12">{escape(str(s).upper())}</text>')
        lx += 90
    out.append("</svg>")
    return "\n".join(out) + "\n"
