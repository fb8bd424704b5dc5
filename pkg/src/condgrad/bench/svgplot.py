"""Minimal self-contained SVG line plots (no plotting dependency chain).

Supports linear and log axes, a small palette, dashed guide curves, and
a legend.  Output is a single standalone SVG document.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#17becf",
)

WIDTH = 760
HEIGHT = 520
MARGIN_L = 78
MARGIN_R = 24
MARGIN_T = 46
MARGIN_B = 62


@dataclass
class Series:
    label: str
    xs: list
    ys: list
    dashed: bool = False
    color: str = ""


@dataclass
class LinePlot:
    title: str
    xlabel: str
    ylabel: str
    xlog: bool = False
    ylog: bool = False
    series: list = field(default_factory=list)

    def add_series(self, label, xs, ys, dashed=False, color=""):
        self.series.append(Series(label, list(xs), list(ys), dashed, color))

    def _clean(self):
        """Drop points a log axis cannot show; return per-series points."""
        cleaned = []
        for s in self.series:
            pts = []
            for x, y in zip(s.xs, s.ys):
                if x is None or y is None:
                    continue
                x = float(x)
                y = float(y)
                if not (math.isfinite(x) and math.isfinite(y)):
                    continue
                if self.xlog and x <= 0.0:
                    continue
                if self.ylog and y <= 0.0:
                    continue
                pts.append((x, y))
            cleaned.append((s, pts))
        return cleaned

    def write(self, path):
        cleaned = self._clean()
        all_pts = [p for _, pts in cleaned for p in pts]
        if not all_pts:
            all_pts = [(1.0, 1.0)]
        xs = [p[0] for p in all_pts]
        ys = [p[1] for p in all_pts]
        x_lo, x_hi = _axis_range(min(xs), max(xs), self.xlog)
        y_lo, y_hi = _axis_range(min(ys), max(ys), self.ylog)

        def to_px(x, y):
            tx = _frac(x, x_lo, x_hi, self.xlog)
            ty = _frac(y, y_lo, y_hi, self.ylog)
            px = MARGIN_L + tx * (WIDTH - MARGIN_L - MARGIN_R)
            py = HEIGHT - MARGIN_B - ty * (HEIGHT - MARGIN_T - MARGIN_B)
            return px, py

        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{escape(self.title)}</text>',
        ]
        # Axes box.
        parts.append(
            f'<rect x="{MARGIN_L}" y="{MARGIN_T}" '
            f'width="{WIDTH - MARGIN_L - MARGIN_R}" '
            f'height="{HEIGHT - MARGIN_T - MARGIN_B}" '
            'fill="none" stroke="#444" stroke-width="1"/>'
        )
        for tick in _ticks(x_lo, x_hi, self.xlog):
            px, _ = to_px(tick, y_lo)
            parts.append(
                f'<line x1="{px:.1f}" y1="{HEIGHT - MARGIN_B}" x2="{px:.1f}" '
                f'y2="{HEIGHT - MARGIN_B + 5}" stroke="#444"/>'
            )
            parts.append(
                f'<text x="{px:.1f}" y="{HEIGHT - MARGIN_B + 20}" '
                'text-anchor="middle" font-family="sans-serif" font-size="11">'
                f"{_tick_label(tick)}</text>"
            )
        for tick in _ticks(y_lo, y_hi, self.ylog):
            _, py = to_px(x_lo, tick)
            parts.append(
                f'<line x1="{MARGIN_L - 5}" y1="{py:.1f}" x2="{MARGIN_L}" '
                f'y2="{py:.1f}" stroke="#444"/>'
            )
            parts.append(
                f'<text x="{MARGIN_L - 8}" y="{py + 4:.1f}" text-anchor="end" '
                'font-family="sans-serif" font-size="11">'
                f"{_tick_label(tick)}</text>"
            )
        parts.append(
            f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2:.1f}" '
            f'y="{HEIGHT - 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{escape(self.xlabel)}</text>'
        )
        parts.append(
            f'<text x="20" y="{(MARGIN_T + HEIGHT - MARGIN_B) / 2:.1f}" '
            'text-anchor="middle" font-family="sans-serif" font-size="13" '
            f'transform="rotate(-90 20 {(MARGIN_T + HEIGHT - MARGIN_B) / 2:.1f})">'
            f"{escape(self.ylabel)}</text>"
        )
        legend_y = MARGIN_T + 14
        color_idx = 0
        for s, pts in cleaned:
            color = s.color or PALETTE[color_idx % len(PALETTE)]
            color_idx += 1
            if pts:
                coords = " ".join(
                    f"{px:.2f},{py:.2f}" for px, py in (to_px(x, y) for x, y in pts)
                )
                dash = ' stroke-dasharray="6,4"' if s.dashed else ""
                parts.append(
                    f'<polyline points="{coords}" fill="none" stroke="{color}" '
                    f'stroke-width="1.6"{dash}/>'
                )
            lx = WIDTH - MARGIN_R - 170
            dash = ' stroke-dasharray="6,4"' if s.dashed else ""
            parts.append(
                f'<line x1="{lx}" y1="{legend_y}" x2="{lx + 26}" y2="{legend_y}" '
                f'stroke="{color}" stroke-width="1.6"{dash}/>'
            )
            parts.append(
                f'<text x="{lx + 32}" y="{legend_y + 4}" '
                'font-family="sans-serif" font-size="11">'
                f"{escape(s.label)}</text>"
            )
            legend_y += 16
        parts.append("</svg>")
        with open(path, "w") as fh:
            fh.write("\n".join(parts) + "\n")


def _axis_range(lo, hi, log):
    if log:
        lo = 10.0 ** math.floor(math.log10(lo))
        hi = 10.0 ** math.ceil(math.log10(hi) + 1e-12)
        if hi <= lo:
            hi = lo * 10.0
        return lo, hi
    if hi <= lo:
        pad = max(abs(lo), 1.0) * 0.5
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _frac(v, lo, hi, log):
    if log:
        return (math.log10(v) - math.log10(lo)) / (math.log10(hi) - math.log10(lo))
    return (v - lo) / (hi - lo)


def _ticks(lo, hi, log):
    if log:
        lo_e = int(round(math.log10(lo)))
        hi_e = int(round(math.log10(hi)))
        step = max(1, (hi_e - lo_e) // 8)
        return [10.0**e for e in range(lo_e, hi_e + 1, step)]
    span = hi - lo
    raw = span / 5.0
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * max(1.0, abs(hi)):
        ticks.append(t)
        t += step
    return ticks


def _tick_label(v):
    if v == 0:
        return "0"
    exp = math.log10(abs(v))
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"1e{int(round(exp))}" if abs(exp - round(exp)) < 1e-9 else f"{v:.1e}"
    return f"{v:g}"
