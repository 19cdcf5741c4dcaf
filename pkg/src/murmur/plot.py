"""Standalone SVG scatter plots of series CSV files.

Output bytes depend only on the CSV contents: fixed canvas, fixed palette,
fixed number formatting.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

from .errors import ParseError

CSV_HEADER = ["x", "x_scaled", "value", "class"]

# first class blue, then red, green, orange
PALETTE = ("#1f5fbf", "#d62728", "#2ca02c", "#ff7f0e", "#7f3fbf", "#8c564b", "#e377c2", "#555555")

WIDTH, HEIGHT = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 30, 50


def read_series_csv(path) -> list[tuple[float, float, str]]:
    """Rows ``(x_scaled, value, class)``; raises ParseError on a schema mismatch."""
    text = Path(path).read_text()
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_HEADER:
        raise ParseError(f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}", line=1)
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", line=lineno)
        try:
            rows.append((float(row[1]), float(row[2]), row[3]))
        except ValueError:
            raise ParseError(f"non-numeric field in {row}", line=lineno) from None
    return rows


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _fmt(v: float) -> str:
    return format(v, ".6g")


def render_svg(rows: list[tuple[float, float, str]], title: str = "") -> str:
    classes = list(dict.fromkeys(tag for _, _, tag in rows))
    colors = {tag: PALETTE[i % len(PALETTE)] for i, tag in enumerate(classes)}
    if rows:
        xs = [r[0] for r in rows]
        ys = [r[1] for r in rows]
        x0, x1 = min(0.0, min(xs)), max(xs)
        y0, y1 = min(ys), max(ys)
        if y0 == y1:
            y0, y1 = y0 - 1, y1 + 1
        pad = 0.05 * (y1 - y0)
        y0, y1 = y0 - pad, y1 + pad
    else:
        x0, x1, y0, y1 = 0.0, 1.0, -1.0, 1.0
    if x1 <= x0:
        x1 = x0 + 1
    pw = WIDTH - LEFT - RIGHT
    ph = HEIGHT - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return TOP + (y1 - v) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{LEFT}" y="{TOP - 10}" font-family="sans-serif" font-size="13">{_escape(title)}</text>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _nice_ticks(x0, x1):
        X = sx(t)
        out.append(f'<line x1="{X:.2f}" y1="{TOP + ph}" x2="{X:.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(
            f'<text x="{X:.2f}" y="{TOP + ph + 18}" font-family="sans-serif" font-size="11" '
            f'text-anchor="middle">{_fmt(t)}</text>'
        )
    for t in _nice_ticks(y0, y1):
        Y = sy(t)
        out.append(f'<line x1="{LEFT - 5}" y1="{Y:.2f}" x2="{LEFT}" y2="{Y:.2f}" stroke="black"/>')
        out.append(
            f'<text x="{LEFT - 8}" y="{Y + 4:.2f}" font-family="sans-serif" font-size="11" '
            f'text-anchor="end">{_fmt(t)}</text>'
        )
    if y0 < 0 < y1:
        out.append(f'<line x1="{LEFT}" y1="{sy(0):.2f}" x2="{LEFT + pw}" y2="{sy(0):.2f}" stroke="#bbbbbb"/>')
    out.append(
        f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 12}" font-family="sans-serif" font-size="12" '
        f'text-anchor="middle">x / X</text>'
    )
    for xv, yv, tag in rows:
        out.append(f'<circle cx="{sx(xv):.2f}" cy="{sy(yv):.2f}" r="1.8" fill="{colors[tag]}"/>')
    for i, tag in enumerate(classes):
        y = TOP + 12 + 18 * i
        lx = LEFT + pw + 15
        out.append(f'<circle cx="{lx}" cy="{y}" r="4" fill="{colors[tag]}"/>')
        out.append(f'<text x="{lx + 10}" y="{y + 4}" font-family="sans-serif" font-size="12">{_escape(tag)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
