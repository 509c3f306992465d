"""Minimal standalone SVG line charts (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 160, 40, 50


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 6)
        return [float(e) for e in range(a, b + 1, step)]
    if hi == lo:
        return [lo]
    raw = (hi - lo) / 5
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * abs(hi):
        out.append(v)
        v += step
    return out


def render_svg(table, x_col, y_cols, path=None, logx=False, logy=False, title=""):
    """Draw ``y_cols`` against ``x_col``; points that are non-finite (or nonpositive on a log axis) are skipped."""
    if not table.rows:
        raise ValueError("cannot plot an empty table")
    xs = table.column(x_col)
    series = [(name, table.column(name)) for name in y_cols]

    def tx(v, log):
        if v is None or not math.isfinite(v) or (log and v <= 0):
            return None
        return math.log10(v) if log else float(v)

    pts = []
    for name, ys in series:
        pts.append((name, [(tx(x, logx), tx(y, logy)) for x, y in zip(xs, ys)]))
    good = [(x, y) for _, ps in pts for x, y in ps if x is not None and y is not None]
    if not good:
        raise ValueError("no plottable points")
    x0, x1 = min(p[0] for p in good), max(p[0] for p in good)
    y0, y1 = min(p[1] for p in good), max(p[1] for p in good)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def py(y):
        return TOP + ph - (y - y0) / (y1 - y0) * ph

    def label(v, log):
        return f"1e{int(v)}" if log else f"{v:.3g}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1, logx):
        X = px(v)
        out.append(f'<line x1="{X:.1f}" y1="{TOP + ph}" x2="{X:.1f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(
            f'<text x="{X:.1f}" y="{TOP + ph + 18}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="11">{label(v, logx)}</text>'
        )
    for v in _ticks(y0, y1, logy):
        Y = py(v)
        out.append(f'<line x1="{LEFT - 5}" y1="{Y:.1f}" x2="{LEFT}" y2="{Y:.1f}" stroke="black"/>')
        out.append(
            f'<text x="{LEFT - 8}" y="{Y + 4:.1f}" text-anchor="end" font-family="sans-serif" '
            f'font-size="11">{label(v, logy)}</text>'
        )
    out.append(
        f'<text x="{LEFT + pw / 2:.1f}" y="{H - 10}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12">{escape(x_col)}</text>'
    )
    for i, (name, ps) in enumerate(pts):
        colour = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in ps if x is not None and y is not None)
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{coords}"/>')
        ly = TOP + 16 + 18 * i
        out.append(f'<line x1="{W - RIGHT + 12}" y1="{ly}" x2="{W - RIGHT + 36}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(
            f'<text x="{W - RIGHT + 42}" y="{ly + 4}" font-family="sans-serif" font-size="12">{escape(name)}</text>'
        )
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
