"""Minimal SVG line plots (log/linear axes, markers, slope annotations).

Self-contained so the experiment harness has no plotting dependency.
"""

from __future__ import annotations

import math

_MARKERS = ("circle", "square", "triangle", "diamond")
_COLORS = ("#1f5fa8", "#c44e52", "#55a868", "#8172b2", "#937860")

WIDTH, HEIGHT = 640, 480
MARGIN = {"left": 80, "right": 24, "top": 40, "bottom": 60}


def _ticks_linear(lo, hi, target=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * abs(step):
        ticks.append(round(t, 12))
        t += step
    return ticks


def _ticks_log(lo, hi):
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    step = max(1, (hi_e - lo_e) // 6)
    return [10.0 ** e for e in range(lo_e, hi_e + 1, step)]


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        e = math.floor(math.log10(abs(v)))
        m = v / 10.0 ** e
        return f"{m:.3g}e{e}" if abs(m - 1) > 1e-9 else f"1e{e}"
    return f"{v:.6g}"


class _Axis:
    def __init__(self, values, log, lo_px, hi_px):
        vals = [v for v in values if v is not None and math.isfinite(v)
                and (not log or v > 0)]
        if not vals:
            vals = [1.0, 10.0]
        lo, hi = min(vals), max(vals)
        if log:
            if lo == hi:
                lo, hi = lo / 10, hi * 10
            self.ticks = _ticks_log(lo, hi)
            lo = min(lo, self.ticks[0])
            hi = max(hi, self.ticks[-1])
            self.lo, self.hi = math.log10(lo), math.log10(hi)
        else:
            if lo == hi:
                lo, hi = lo - 1, hi + 1
            pad = 0.05 * (hi - lo)
            self.ticks = _ticks_linear(lo - pad, hi + pad)
            self.lo, self.hi = lo - pad, hi + pad
        self.log = log
        self.lo_px, self.hi_px = lo_px, hi_px

    def px(self, v):
        t = math.log10(v) if self.log else v
        frac = (t - self.lo) / (self.hi - self.lo or 1.0)
        return self.lo_px + frac * (self.hi_px - self.lo_px)


def _marker(shape, x, y, color):
    if shape == "circle":
        return f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{color}"/>'
    if shape == "square":
        return (f'<rect x="{x - 3.5:.2f}" y="{y - 3.5:.2f}" width="7" '
                f'height="7" fill="{color}"/>')
    if shape == "triangle":
        return (f'<polygon points="{x:.2f},{y - 4.5:.2f} {x - 4:.2f},'
                f'{y + 3.5:.2f} {x + 4:.2f},{y + 3.5:.2f}" fill="{color}"/>')
    return (f'<polygon points="{x:.2f},{y - 4.5:.2f} {x - 4.5:.2f},{y:.2f} '
            f'{x:.2f},{y + 4.5:.2f} {x + 4.5:.2f},{y:.2f}" fill="{color}"/>')


def line_plot(path, series, xlabel="", ylabel="", title="", xlog=False,
              ylog=True, annotations=()):
    """Write an SVG plot.

    series: list of dicts with keys 'x', 'y', 'label'; non-finite (and, on
    log axes, non-positive) points are dropped per series.
    """
    xs = [v for s in series for v in s["x"]]
    ys = [v for s in series for v in s["y"]
          if v is not None and math.isfinite(v)]
    ax = _Axis(xs, xlog, MARGIN["left"], WIDTH - MARGIN["right"])
    ay = _Axis(ys, ylog, HEIGHT - MARGIN["bottom"], MARGIN["top"])

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
             f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
             f'font-family="sans-serif" font-size="15">{title}</text>']

    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" '
                 'stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" '
                 'stroke="black"/>')
    for t in ax.ticks:
        px = ax.px(t)
        if px < x0 - 0.5 or px > x1 + 0.5:
            continue
        parts.append(f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" '
                     f'y2="{y0 + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.2f}" y="{y0 + 20}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{_fmt(t)}'
                     '</text>')
    for t in ay.ticks:
        py = ay.px(t)
        if py > y0 + 0.5 or py < y1 - 0.5:
            continue
        parts.append(f'<line x1="{x0 - 5}" y1="{py:.2f}" x2="{x0}" '
                     f'y2="{py:.2f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8}" y="{py + 4:.2f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{_fmt(t)}'
                     '</text>')
    parts.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 16}" '
                 'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13">{xlabel}</text>')
    parts.append(f'<text x="20" y="{(y0 + y1) / 2}" text-anchor="middle" '
                 'font-family="sans-serif" font-size="13" transform="rotate'
                 f'(-90 20 {(y0 + y1) / 2})">{ylabel}</text>')

    for i, s in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        shape = _MARKERS[i % len(_MARKERS)]
        pts = [(ax.px(x), ay.px(y)) for x, y in zip(s["x"], s["y"])
               if y is not None and math.isfinite(y) and (not ylog or y > 0)
               and (not xlog or x > 0)]
        if len(pts) >= 2:
            d = " ".join(f"{px:.2f},{py:.2f}" for px, py in pts)
            parts.append(f'<polyline points="{d}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        for px, py in pts:
            parts.append(_marker(shape, px, py, color))
        ly = MARGIN["top"] + 16 * i + 4
        parts.append(_marker(shape, x1 - 120, ly - 4, color))
        parts.append(f'<text x="{x1 - 110}" y="{ly}" font-family="sans-serif"'
                     f' font-size="12">{s["label"]}</text>')

    for i, note in enumerate(annotations):
        parts.append(f'<text x="{x0 + 12}" y="{y1 + 18 + 15 * i}" '
                     f'font-family="sans-serif" font-size="12">{note}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
