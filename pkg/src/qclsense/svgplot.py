"""Minimal static SVG line charts from headed numeric CSV files.

The first column is the x axis; every further column becomes one polyline.
Non-finite cells break the line instead of being drawn.
"""

from __future__ import annotations

import math
from html import escape

import numpy as np

from . import fileio

WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 64, 150, 20, 44
COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def nice_ticks(lo: float, hi: float, n: int = 5) -> list:
    """Round tick positions covering ``[lo, hi]``."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    k = 0
    while first + k * step <= hi + 1e-9 * step:
        ticks.append(round(first + k * step, 12) + 0.0)
        k += 1
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if v != int(v) else str(int(v))


def _segments(x, y):
    seg = []
    for xi, yi in zip(x, y):
        if math.isfinite(xi) and math.isfinite(yi):
            seg.append((xi, yi))
        elif seg:
            yield seg
            seg = []
    if seg:
        yield seg


def render_svg(header, rows) -> str:
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    x, series = data[:, 0], data[:, 1:]
    finite_x = x[np.isfinite(x)]
    finite_y = series[np.isfinite(series)]
    x_lo, x_hi = (finite_x.min(), finite_x.max()) if finite_x.size else (0.0, 1.0)
    y_lo, y_hi = (finite_y.min(), finite_y.max()) if finite_y.size else (0.0, 1.0)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1, y_hi + 1
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(v):
        return MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return MARGIN_TOP + (y_hi - v) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    for t in nice_ticks(x_lo, x_hi):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{MARGIN_TOP + ph}" x2="{X:.2f}" y2="{MARGIN_TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{MARGIN_TOP + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in nice_ticks(y_lo, y_hi):
        Y = py(t)
        out.append(f'<line x1="{MARGIN_LEFT - 5}" y1="{Y:.2f}" x2="{MARGIN_LEFT}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_LEFT - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{MARGIN_LEFT + pw / 2:.2f}" y="{HEIGHT - 8}" text-anchor="middle">'
               f'{escape(header[0])}</text>')
    for k, name in enumerate(header[1:]):
        color = COLORS[k % len(COLORS)]
        for seg in _segments(x, series[:, k]):
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in seg)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN_TOP + 14 + 18 * k
        lx = MARGIN_LEFT + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_csv(csv_path, out_svg) -> None:
    """Render ``csv_path`` to ``out_svg``. Non-numeric columns (such as flags) are dropped."""
    header, rows = fileio.read_csv(csv_path, numeric=False)
    keep = []
    for j in range(len(header)):
        numeric = [_is_float(r[j]) for r in rows]
        if all(numeric):
            keep.append(j)
        elif any(numeric) or j == 0:
            line = numeric.index(False) + 2
            raise fileio.CSVParseError(csv_path, line, f"non-numeric value {rows[line - 2][j]!r}")
    if len(keep) < 2:
        raise fileio.CSVParseError(csv_path, 1, "need an x column and at least one numeric series")
    svg = render_svg([header[j] for j in keep], [[float(r[j]) for j in keep] for r in rows])
    with open(out_svg, "w", encoding="utf-8") as fh:
        fh.write(svg)


def _is_float(s) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True
