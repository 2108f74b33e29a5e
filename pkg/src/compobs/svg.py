"""Minimal deterministic SVG charts (line charts and histograms).

Coordinates are printed with fixed precision so equal inputs give
byte-identical files.
"""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _frame(x_label: str, y_label: str, xr, yr) -> list[str]:
    x0, x1 = MARGIN, WIDTH - MARGIN // 2
    y0, y1 = HEIGHT - MARGIN, MARGIN // 2
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="13">{escape(x_label)}</text>',
        f'<text x="14" y="{(y0 + y1) // 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 14 {(y0 + y1) // 2})">{escape(y_label)}</text>',
    ]
    for i in range(5):
        t = i / 4
        xv = xr[0] + t * (xr[1] - xr[0])
        yv = yr[0] + t * (yr[1] - yr[0])
        px = x0 + t * (x1 - x0)
        py = y0 + t * (y1 - y0)
        out.append(f'<text x="{_f(px)}" y="{y0 + 16}" text-anchor="middle" font-size="11">{xv:.3g}</text>')
        out.append(f'<text x="{x0 - 6}" y="{_f(py + 4)}" text-anchor="end" font-size="11">{yv:.3g}</text>')
    return out


def _scaler(xr, yr):
    x0, x1 = MARGIN, WIDTH - MARGIN // 2
    y0, y1 = HEIGHT - MARGIN, MARGIN // 2
    dx = (xr[1] - xr[0]) or 1.0
    dy = (yr[1] - yr[0]) or 1.0

    def f(x, y):
        return x0 + (x - xr[0]) / dx * (x1 - x0), y0 + (y - yr[0]) / dy * (y1 - y0)

    return f


def _legend(labels: Sequence[str]) -> list[str]:
    out = []
    for i, label in enumerate(labels):
        y = MARGIN // 2 + 14 * i + 8
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{WIDTH - 190}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{WIDTH - 175}" y="{y + 1}" font-size="11">{escape(label)}</text>')
    return out


def line_chart_svg(series: Sequence[tuple[str, Sequence[tuple[float, float]]]], x_label: str, y_label: str,
                   y_range: tuple[float, float] | None = None) -> str:
    """Polyline chart; ``series`` is a list of ``(label, [(x, y), ...])``."""
    xs = [x for _, pts in series for x, _ in pts] or [0.0, 1.0]
    ys = [y for _, pts in series for _, y in pts] or [0.0, 1.0]
    xr = (min(xs), max(xs))
    yr = y_range or (min(ys), max(ys))
    scale = _scaler(xr, yr)
    out = _frame(x_label, y_label, xr, yr)
    for i, (_, pts) in enumerate(series):
        coords = " ".join(f"{_f(px)},{_f(py)}" for px, py in (scale(x, y) for x, y in pts))
        out.append(f'<polyline points="{coords}" fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.5"/>')
    out += _legend([label for label, _ in series])
    out.append("</svg>")
    return "\n".join(out) + "\n"


def histogram_svg(groups: Sequence[tuple[str, Sequence[float]]], x_label: str, bins: int = 30) -> str:
    """Overlaid step histograms sharing one set of bin edges."""
    values = np.concatenate([np.asarray(v, dtype=float) for _, v in groups]) if groups else np.zeros(1)
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    counts = [np.histogram(np.asarray(v, dtype=float), bins=edges)[0] for _, v in groups]
    top = max((int(c.max()) for c in counts), default=1) or 1
    scale = _scaler((lo, hi), (0.0, float(top)))
    out = _frame(x_label, "count", (lo, hi), (0.0, float(top)))
    for i, c in enumerate(counts):
        pts = []
        for j, n in enumerate(c):
            pts += [scale(edges[j], n), scale(edges[j + 1], n)]
        coords = " ".join(f"{_f(px)},{_f(py)}" for px, py in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.5"/>')
    out += _legend([label for label, _ in groups])
    out.append("</svg>")
    return "\n".join(out) + "\n"
