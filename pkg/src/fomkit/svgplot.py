"""Static SVG charts: line, scatter and histogram.

Output is deterministic (fixed float formatting, no ids or timestamps) so
reports can be compared byte-for-byte.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=60, right=150, top=36, bottom=48)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _f(x):
    return f"{x:.2f}"


class _Axes:
    def __init__(self, xs, ys, xlim=None, ylim=None):
        xs = [x for x in xs if math.isfinite(x)]
        ys = [y for y in ys if math.isfinite(y)]
        self.x0, self.x1 = xlim or _pad(min(xs, default=0.0), max(xs, default=1.0))
        self.y0, self.y1 = ylim or _pad(min(ys, default=0.0), max(ys, default=1.0))
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        return MARGIN["top"] + (1 - (y - self.y0) / (self.y1 - self.y0)) * self.ph


def _pad(lo, hi):
    if hi <= lo:
        return lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - 0.04 * span, hi + 0.04 * span


def _frame(ax, title, xlabel, ylabel):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2 - MARGIN["right"] / 2:.0f}" y="20" text-anchor="middle" '
        f'font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{ax.pw}" height="{ax.ph}" '
        f'fill="none" stroke="black"/>',
    ]
    for i in range(6):
        xv = ax.x0 + (ax.x1 - ax.x0) * i / 5
        yv = ax.y0 + (ax.y1 - ax.y0) * i / 5
        x, y = ax.px(xv), ax.py(yv)
        bottom = MARGIN["top"] + ax.ph
        out.append(f'<line x1="{_f(x)}" y1="{bottom}" x2="{_f(x)}" y2="{bottom + 4}" stroke="black"/>')
        out.append(f'<text x="{_f(x)}" y="{bottom + 16}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<line x1="{MARGIN["left"] - 4}" y1="{_f(y)}" x2="{MARGIN["left"]}" '
                   f'y2="{_f(y)}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{_f(y + 4)}" text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{MARGIN["left"] + ax.pw / 2:.0f}" y="{HEIGHT - 10}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{MARGIN["top"] + ax.ph / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {MARGIN["top"] + ax.ph / 2:.0f})">{escape(ylabel)}</text>')
    return out


def _legend(names):
    out = []
    x = WIDTH - MARGIN["right"] + 12
    for i, name in enumerate(names):
        y = MARGIN["top"] + 14 + 16 * i
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{x}" y="{y - 9}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{x + 14}" y="{y}">{escape(str(name))}</text>')
    return out


def line_plot(series: dict, title="", xlabel="", ylabel="", xlim=None, ylim=None,
              markers: dict | None = None) -> str:
    """``series`` maps name -> (xs, ys).  ``markers`` maps name -> x to highlight."""
    allx = [x for xs, _ in series.values() for x in xs]
    ally = [y for _, ys in series.values() for y in ys]
    ax = _Axes(allx, ally, xlim, ylim)
    out = _frame(ax, title, xlabel, ylabel)
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_f(ax.px(x))},{_f(ax.py(y))}" for x, y in zip(xs, ys)
                       if math.isfinite(x) and math.isfinite(y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if markers and name in markers:
            for x, y in zip(xs, ys):
                if x == markers[name]:
                    out.append(f'<circle cx="{_f(ax.px(x))}" cy="{_f(ax.py(y))}" r="4" fill="red"/>')
    out += _legend(series)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_plot(groups: dict, title="", xlabel="", ylabel="", xlim=None, ylim=None) -> str:
    """``groups`` maps name -> (xs, ys)."""
    allx = [x for xs, _ in groups.values() for x in xs]
    ally = [y for _, ys in groups.values() for y in ys]
    ax = _Axes(allx, ally, xlim, ylim)
    out = _frame(ax, title, xlabel, ylabel)
    for i, (xs, ys) in enumerate(groups.values()):
        color = PALETTE[i % len(PALETTE)]
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y):
                out.append(f'<circle cx="{_f(ax.px(x))}" cy="{_f(ax.py(y))}" r="2.5" '
                           f'fill="{color}" fill-opacity="0.6"/>')
    out += _legend(groups)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def histogram_plot(edges, counts: dict, title="", xlabel="score", ylabel="count") -> str:
    """Overlaid bar histograms sharing ``edges``; ``counts`` maps name -> per-bin counts."""
    top = max((c for cs in counts.values() for c in cs), default=1) or 1
    ax = _Axes([edges[0], edges[-1]], [0, top], xlim=(edges[0], edges[-1]), ylim=(0, top * 1.05))
    out = _frame(ax, title, xlabel, ylabel)
    for i, cs in enumerate(counts.values()):
        color = PALETTE[i % len(PALETTE)]
        for lo, hi, c in zip(edges[:-1], edges[1:], cs):
            if c <= 0:
                continue
            x, w = ax.px(lo), ax.px(hi) - ax.px(lo)
            y = ax.py(c)
            out.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" '
                       f'height="{_f(ax.py(0) - y)}" fill="{color}" fill-opacity="0.45"/>')
    out += _legend(counts)
    out.append("</svg>")
    return "\n".join(out) + "\n"
