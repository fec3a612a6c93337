"""Minimal deterministic SVG line charts with optional error bars."""
from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 120, 40, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")

# (x, y, half-width of the error bar or None)
Point = tuple[float, float, float | None]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + k * step for k in range(n)]


def _num(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    if abs(v) >= 100 or v == int(v):
        return f"{v:.0f}"
    return f"{v:.3g}"


def line_chart(
    series: Mapping[str, Sequence[Point]],
    x_label: str,
    y_label: str,
    title: str = "",
    markers_only: bool = False,
) -> str:
    pts = [p for s in series.values() for p in s]
    if not pts:
        raise ValueError("nothing to plot")
    xs = [p[0] for p in pts]
    ys_lo = [p[1] - (p[2] or 0.0) for p in pts]
    ys_hi = [p[1] + (p[2] or 0.0) for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys_lo)), max(ys_hi)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y1 = y0 + 1
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN_T + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')
    bottom, right = MARGIN_T + ph, MARGIN_L + pw
    out.append(f'<line x1="{MARGIN_L}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{bottom}" stroke="black"/>')
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{_num(sx(t))}" y1="{bottom}" x2="{_num(sx(t))}" y2="{bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{_num(sx(t))}" y="{bottom + 20}" text-anchor="middle" font-size="11">{_label(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{_num(sy(t))}" x2="{MARGIN_L}" y2="{_num(sy(t))}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{_num(sy(t) + 4)}" text-anchor="end" font-size="11">{_label(t)}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" font-size="13">{escape(x_label)}</text>')
    out.append(
        f'<text x="18" y="{MARGIN_T + ph / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {MARGIN_T + ph / 2:.1f})">{escape(y_label)}</text>'
    )

    for k, (name, data) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        data = sorted(data)
        out.append(f'<g stroke="{color}" fill="{color}">')
        if len(data) > 1 and not markers_only:
            path = " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y, _ in data)
            out.append(f'<polyline points="{path}" fill="none" stroke-width="1.5"/>')
        for x, y, err in data:
            if err:
                cx = _num(sx(x))
                out.append(f'<line x1="{cx}" y1="{_num(sy(y - err))}" x2="{cx}" y2="{_num(sy(y + err))}"/>')
            out.append(f'<circle cx="{_num(sx(x))}" cy="{_num(sy(y))}" r="2.5"/>')
        out.append("</g>")
        ly = MARGIN_T + 12 + 18 * k
        out.append(f'<rect x="{right + 15}" y="{ly - 8}" width="12" height="8" fill="{color}"/>')
        out.append(f'<text x="{right + 32}" y="{ly}" font-size="12">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
