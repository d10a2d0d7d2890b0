"""Minimal deterministic SVG line plots (no plotting dependency).

Output is a pure function of the data passed in: fixed canvas, fixed
formatting, no timestamps, so re-rendering from the same trace file is
bit-identical.
"""

from __future__ import annotations

import math

_W, _H = 860, 480
_ML, _MR, _MT, _MB = 64, 16, 36, 44
_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(count - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if span / step <= count:
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * span:
        out.append(0.0 if abs(v) < 1e-12 * span else v)
        v += step
    return out


def render_lines(xs, series, labels, title: str, ylabel: str = "") -> str:
    """Render line series sharing the x grid. series: list of y arrays."""
    xs = [float(v) for v in xs]
    series = [[float(v) for v in ys] for ys in series]
    x_lo, x_hi = min(xs), max(xs)
    y_lo = min(min(ys) for ys in series)
    y_hi = max(max(ys) for ys in series)
    if y_hi == y_lo:
        y_lo -= 1.0
        y_hi += 1.0
    pad = 0.04 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad
    iw = _W - _ML - _MR
    ih = _H - _MT - _MB

    def px(v: float) -> float:
        return _ML + (v - x_lo) / (x_hi - x_lo) * iw if x_hi > x_lo else _ML

    def py(v: float) -> float:
        return _MT + (y_hi - v) / (y_hi - y_lo) * ih

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="monospace" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<rect x="{_ML}" y="{_MT}" width="{iw}" height="{ih}" fill="none" stroke="#444"/>',
    ]
    for tx in _ticks(x_lo, x_hi):
        X = px(tx)
        parts.append(f'<line x1="{X:.2f}" y1="{_MT + ih}" x2="{X:.2f}" y2="{_MT + ih + 4}" stroke="#444"/>')
        parts.append(f'<text x="{X:.2f}" y="{_MT + ih + 16}" text-anchor="middle">{tx:.4g}</text>')
    for ty in _ticks(y_lo, y_hi):
        Y = py(ty)
        parts.append(f'<line x1="{_ML - 4}" y1="{Y:.2f}" x2="{_ML}" y2="{Y:.2f}" stroke="#444"/>')
        parts.append(f'<text x="{_ML - 6}" y="{Y + 4:.2f}" text-anchor="end">{ty:.4g}</text>')
        parts.append(f'<line x1="{_ML}" y1="{Y:.2f}" x2="{_ML + iw}" y2="{Y:.2f}" stroke="#ddd" stroke-width="0.5"/>')
    parts.append(f'<text x="14" y="{_MT + ih / 2:.1f}" transform="rotate(-90 14 {_MT + ih / 2:.1f})" text-anchor="middle">{_esc(ylabel)}</text>')
    parts.append(f'<text x="{_ML + iw / 2:.1f}" y="{_H - 8}" text-anchor="middle">t [s]</text>')

    for si, ys in enumerate(series):
        color = _PALETTE[si % len(_PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
    for si, lab in enumerate(labels):
        color = _PALETTE[si % len(_PALETTE)]
        lx = _ML + 8 + 110 * (si % 5)
        ly = _MT + 14 + 14 * (si // 5)
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 16}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 20}" y="{ly}">{_esc(lab)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
