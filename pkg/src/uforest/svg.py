"""Hand-rolled SVG line plots.

Enough for the figure commands: one panel, several labeled series,
linear axes with rounded tick labels, a legend. Deterministic output so
plot files diff cleanly across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["Series", "line_plot"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Series:
    label: str
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    color: str | None = None
    dashed: bool = False
    markers: bool = True


def _esc(s: str) -> str:
    return (str(s).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def _fmt(v: float) -> str:
    # short stable coordinates keep files small and diffable
    return format(round(v, 2), ".10g")


def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        hi = lo + (abs(lo) if lo != 0.0 else 1.0)
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / target))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if span / (step * mult) <= target:
            step *= mult
            break
    first = math.ceil(lo / step - 1e-9) * step
    out = []
    t = first
    while t <= hi + 1e-9 * span:
        out.append(0.0 if abs(t) < step * 1e-6 else t)
        t += step
    return out


def _data_range(series: list[Series], axis: str) -> tuple[float, float]:
    vals = [float(v) for s in series for v in getattr(s, axis)
            if math.isfinite(float(v))]
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    if hi == lo:
        pad = abs(lo) * 0.1 if lo != 0.0 else 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def line_plot(series, path: str, title: str = "", x_label: str = "",
              y_label: str = "", width: int = 640, height: int = 420) -> None:
    """Write one SVG panel with the given series."""
    series = list(series)
    ml, mr, mt, mb = 62, 16, 34, 46
    pw, ph = width - ml - mr, height - mt - mb
    x_lo, x_hi = _data_range(series, "x")
    y_lo, y_hi = _data_range(series, "y")

    def sx(v: float) -> float:
        return ml + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v: float) -> float:
        return mt + ph - (v - y_lo) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:g}" y="20" text-anchor="middle" '
                     f'font-size="14">{_esc(title)}</text>')

    for t in _ticks(x_lo, x_hi):
        px = sx(t)
        parts.append(f'<line x1="{_fmt(px)}" y1="{mt + ph}" x2="{_fmt(px)}" '
                     f'y2="{mt + ph + 4}" stroke="#333"/>')
        parts.append(f'<text x="{_fmt(px)}" y="{mt + ph + 17}" '
                     f'text-anchor="middle">{format(t, "g")}</text>')
    for t in _ticks(y_lo, y_hi):
        py = sy(t)
        parts.append(f'<line x1="{ml - 4}" y1="{_fmt(py)}" x2="{ml}" '
                     f'y2="{_fmt(py)}" stroke="#333"/>')
        parts.append(f'<text x="{ml - 7}" y="{_fmt(py + 4)}" '
                     f'text-anchor="end">{format(t, "g")}</text>')
    parts.append(f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" '
                 f'y2="{mt + ph}" stroke="#333"/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" '
                 f'stroke="#333"/>')
    if x_label:
        parts.append(f'<text x="{ml + pw / 2:g}" y="{height - 10}" '
                     f'text-anchor="middle">{_esc(x_label)}</text>')
    if y_label:
        parts.append(f'<text x="16" y="{mt + ph / 2:g}" text-anchor="middle" '
                     f'transform="rotate(-90 16 {mt + ph / 2:g})">'
                     f'{_esc(y_label)}</text>')

    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        run: list[str] = []
        segments = [run]
        for xv, yv in zip(s.x, s.y):
            xv, yv = float(xv), float(yv)
            if math.isfinite(xv) and math.isfinite(yv):
                run.append(f"{_fmt(sx(xv))},{_fmt(sy(yv))}")
            elif run:            # NaN breaks the polyline
                run = []
                segments.append(run)
        for seg in segments:
            if len(seg) > 1:
                parts.append(f'<polyline points="{" ".join(seg)}" '
                             f'fill="none" stroke="{color}" '
                             f'stroke-width="1.6"{dash}/>')
        if s.markers:
            for pt in (p for seg in segments for p in seg):
                cx, cy = pt.split(",")
                parts.append(f'<circle cx="{cx}" cy="{cy}" r="2.4" '
                             f'fill="{color}"/>')

    ly = mt + 6
    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        parts.append(f'<line x1="{ml + pw - 120}" y1="{ly + 4}" '
                     f'x2="{ml + pw - 98}" y2="{ly + 4}" stroke="{color}" '
                     f'stroke-width="2"/>')
        parts.append(f'<text x="{ml + pw - 92}" y="{ly + 8}">'
                     f'{_esc(s.label)}</text>')
        ly += 16

    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
