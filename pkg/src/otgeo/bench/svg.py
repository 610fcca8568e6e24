"""Minimal standalone SVG line plots for experiment summaries."""

from __future__ import annotations

import math
from html import escape
from typing import Mapping, Sequence

_W, _H, _PAD = 640, 420, 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def line_plot(series: Mapping[str, tuple[Sequence[float], Sequence[float]]], title: str = "",
              xlabel: str = "", ylabel: str = "", logx: bool = False, logy: bool = False) -> str:
    """Render named ``(xs, ys)`` series; non-finite or non-positive-on-log points are skipped."""
    def tx(v):
        return math.log10(v) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    clean = {}
    for name, (xs, ys) in series.items():
        pts = [(tx(x), ty(y)) for x, y in zip(xs, ys)
               if math.isfinite(x) and math.isfinite(y) and (not logx or x > 0) and (not logy or y > 0)]
        clean[name] = pts
    allpts = [p for pts in clean.values() for p in pts]
    if not allpts:
        allpts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in allpts), max(p[0] for p in allpts)
    y0, y1 = min(p[1] for p in allpts), max(p[1] for p in allpts)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(x):
        return _PAD + (x - x0) / (x1 - x0) * (_W - 2 * _PAD)

    def py(y):
        return _H - _PAD - (y - y0) / (y1 - y0) * (_H - 2 * _PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<text x="{_W / 2}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
           f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
           f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
           f'<text x="{_W / 2}" y="{_H - 15}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>',
           f'<text x="18" y="{_H / 2}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 18 {_H / 2})">{escape(ylabel)}</text>']
    for v, anchor in ((x0, "start"), (x1, "end")):
        label = f"{10 ** v:.3g}" if logx else f"{v:.3g}"
        out.append(f'<text x="{px(v):.1f}" y="{_H - _PAD + 16}" text-anchor="{anchor}" font-size="11">{label}</text>')
    for v in (y0, y1):
        label = f"{10 ** v:.3g}" if logy else f"{v:.3g}"
        out.append(f'<text x="{_PAD - 6}" y="{py(v) + 4:.1f}" text-anchor="end" font-size="11">{label}</text>')
    for i, (name, pts) in enumerate(clean.items()):
        color = _COLORS[i % len(_COLORS)]
        if len(pts) > 1:
            path = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{_W - _PAD + 4}" y="{_PAD + 16 * i}" font-size="11" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
