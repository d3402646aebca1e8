"""Minimal self-contained SVG line plots."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
_MARKERS = ("circle", "square")


def _ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=raw)
    first = math.floor(lo / step) * step
    out, t = [], first
    while t <= hi + 1e-9 * step:
        out.append(round(t, 10))
        t += step
    return out


def line_plot(series: dict, title: str, xlabel: str, ylabel: str, width=640, height=420) -> str:
    """Render ``{label: (xs, ys)}`` as an SVG document string."""
    left, right, top, bottom = 70, 20, 40, 55
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if math.isfinite(y)]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xt = _ticks(min(p[0] for p in pts), max(p[0] for p in pts))
    yt = _ticks(min(p[1] for p in pts), max(p[1] for p in pts))
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / ((x1 - x0) or 1) * pw

    def sy(y):
        return top + ph - (y - y0) / ((y1 - y0) or 1) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for t in xt:
        parts.append(f'<line x1="{sx(t):.2f}" y1="{top}" x2="{sx(t):.2f}" y2="{top + ph}" stroke="#ddd"/>')
        parts.append(f'<text x="{sx(t):.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in yt:
        parts.append(f'<line x1="{left}" y1="{sy(t):.2f}" x2="{left + pw}" y2="{sy(t):.2f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left - 8}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    parts.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        good = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
        if good:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in good)
            parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
            for x, y in good:
                if _MARKERS[i % 2] == "circle":
                    parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3.5" fill="{color}"/>')
                else:
                    parts.append(
                        f'<rect x="{sx(x) - 3.5:.2f}" y="{sy(y) - 3.5:.2f}" width="7" height="7" fill="{color}"/>'
                    )
        ly = top + 16 + 18 * i
        parts.append(f'<line x1="{left + pw - 150}" y1="{ly}" x2="{left + pw - 125}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{left + pw - 118}" y="{ly + 4}">{escape(str(label))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
