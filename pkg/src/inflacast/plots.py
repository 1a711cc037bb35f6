"""Minimal SVG emitters for histograms and line charts.

Output depends only on the data (fixed number formatting, no ids or dates),
so re-running a pipeline step gives byte-identical figures.
"""

from __future__ import annotations

from html import escape
from pathlib import Path
from typing import Sequence

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = {"left": 60, "right": 20, "top": 40, "bottom": 50}
PALETTE = ("#1f5fbf", "#c0392b", "#27864a", "#8e44ad")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _scale(lo: float, hi: float, a: float, b: float):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _frame(title: str, xlabel: str, ylabel: str, body: list[str], ticks: list[str]) -> str:
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 15 {(y0 + y1) / 2})">{escape(ylabel)}</text>',
        *ticks,
        *body,
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def _yticks(lo: float, hi: float, sy, n: int = 5) -> list[str]:
    out = []
    for v in np.linspace(lo, hi, n):
        y = sy(v)
        out.append(f'<line x1="{MARGIN["left"] - 4}" y1="{_fmt(y)}" x2="{MARGIN["left"]}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{_fmt(y + 4)}" text-anchor="end">{v:.3g}</text>')
    return out


def _xticks(lo: float, hi: float, sx, n: int = 6) -> list[str]:
    out = []
    y0 = HEIGHT - MARGIN["bottom"]
    for v in np.linspace(lo, hi, n):
        x = sx(v)
        out.append(f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{y0 + 16}" text-anchor="middle">{v:.3g}</text>')
    return out


def bar_chart(edges: Sequence[float], heights: Sequence[float], title: str = "",
              xlabel: str = "", ylabel: str = "") -> str:
    """Histogram-style bars; ``edges`` has one more entry than ``heights``."""
    edges = np.asarray(edges, dtype=float)
    heights = np.asarray(heights, dtype=float)
    if len(edges) != len(heights) + 1:
        raise ValueError("edges must have len(heights) + 1 entries")
    top = float(heights.max()) if heights.size and heights.max() > 0 else 1.0
    sx = _scale(edges[0], edges[-1], MARGIN["left"], WIDTH - MARGIN["right"])
    sy = _scale(0.0, top, HEIGHT - MARGIN["bottom"], MARGIN["top"])
    body = []
    for a, b, h in zip(edges[:-1], edges[1:], heights):
        if h <= 0:
            continue
        x, y = sx(a), sy(h)
        body.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(sx(b) - x)}" '
                    f'height="{_fmt(sy(0.0) - y)}" fill="{PALETTE[0]}" stroke="white" stroke-width="0.3"/>')
    ticks = _xticks(edges[0], edges[-1], sx) + _yticks(0.0, top, sy)
    return _frame(title, xlabel, ylabel, body, ticks)


def line_chart(x: Sequence[float], series: dict[str, Sequence[float]], title: str = "",
               xlabel: str = "", ylabel: str = "", markers: Sequence[tuple[float, str]] = ()) -> str:
    """One polyline per named series, with a legend; ``markers`` draws labelled vertical guides."""
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    finite = np.concatenate([v[np.isfinite(v)] for v in ys]) if ys else np.zeros(0)
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    xlo, xhi = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    sx = _scale(xlo, xhi, MARGIN["left"], WIDTH - MARGIN["right"])
    sy = _scale(lo, hi, HEIGHT - MARGIN["bottom"], MARGIN["top"])
    body = []
    for pos, label in markers:
        px = sx(pos)
        body.append(f'<line x1="{_fmt(px)}" y1="{MARGIN["top"]}" x2="{_fmt(px)}" '
                    f'y2="{HEIGHT - MARGIN["bottom"]}" stroke="#999" stroke-dasharray="3,3"/>')
        body.append(f'<text x="{_fmt(px)}" y="{MARGIN["top"] - 4}" text-anchor="middle" font-size="9">{escape(label)}</text>')
    for k, (name, y) in enumerate(zip(series, ys)):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x, y) if np.isfinite(b))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for a, b in zip(x, y):
            if np.isfinite(b):
                body.append(f'<circle cx="{_fmt(sx(a))}" cy="{_fmt(sy(b))}" r="2.5" fill="{color}"/>')
        ly = MARGIN["top"] + 14 * k + 6
        lx = WIDTH - MARGIN["right"] - 120
        body.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{lx + 22}" y="{ly + 4}">{escape(name)}</text>')
    ticks = _xticks(xlo, xhi, sx) + _yticks(lo, hi, sy)
    return _frame(title, xlabel, ylabel, body, ticks)


def write_svg(path: str | Path, svg: str) -> None:
    Path(path).write_text(svg, encoding="utf-8")
