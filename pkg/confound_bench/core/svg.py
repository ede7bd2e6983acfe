"""
core/svg.py – SvgChartBuilder class.
Responsibility: bias-vs-parameter line charts as standalone SVG 1.1 text.
Output depends only on the input series (no timestamps, fixed float format).
"""
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from ..errors import EmptySeries

SeriesKind = Literal["line", "markers"]

WIDTH, HEIGHT = 800, 600
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 170, 50, 70
PALETTE = ("#1b6ca8", "#d1495b", "#2e8b57", "#edae49", "#6a4c93", "#00798c", "#8d6346", "#30343f")


@dataclass(frozen=True)
class Series:
    name: str
    x: tuple[float, ...]
    y: tuple[float, ...]
    kind: SeriesKind = "line"
    group: Optional[int] = None      # shared colour class; defaults to the series position


@dataclass(frozen=True)
class ChartStyle:
    title: str = ""
    x_label: str = ""
    y_label: str = "bias"


def _fmt(v: float) -> str:
    v = round(float(v), 10)
    return f"{v + 0.0:g}"        # + 0.0 turns -0.0 into 0.0


def _px(v: float) -> str:
    return f"{v:.2f}"


def nice_ticks(lo: float, hi: float, target: int = 6) -> np.ndarray:
    """Round-number ticks covering [lo, hi]."""
    if hi < lo:
        lo, hi = hi, lo
    if hi == lo:
        pad = 0.5 * abs(lo) if lo != 0 else 1.0
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1.0, 2.0, 2.5, 5.0, 10.0) if s * mag >= raw)
    start = math.floor(lo / step) * step
    stop = math.ceil(hi / step) * step
    return np.round(np.arange(start, stop + step / 2, step), 12)


class SvgChartBuilder:
    """Build one chart panel: axes with auto ticks, one polyline or marker set per series, legend."""

    def build(self, series: Sequence[Series], style: ChartStyle = ChartStyle()) -> str:
        self._validate(series)
        xs = np.concatenate([np.asarray(s.x, dtype=float) for s in series])
        ys = np.concatenate([np.asarray(s.y, dtype=float) for s in series])
        x_ticks = nice_ticks(xs.min(), xs.max())
        y_ticks = nice_ticks(ys.min(), ys.max())
        sx = self._scale(x_ticks[0], x_ticks[-1], MARGIN_LEFT, WIDTH - MARGIN_RIGHT)
        sy = self._scale(y_ticks[0], y_ticks[-1], HEIGHT - MARGIN_BOTTOM, MARGIN_TOP)

        parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="0 0 {WIDTH} {HEIGHT}" '
            f'width="{WIDTH}" height="{HEIGHT}">',
            self._style_block(len(series)),
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        ]
        if style.title:
            parts.append(f'<text class="title" x="{WIDTH / 2:g}" y="28" text-anchor="middle">{escape(style.title)}</text>')
        parts += self._axes(x_ticks, y_ticks, sx, sy, style)
        for i, s in enumerate(series):
            parts.append(self._series(i, s, sx, sy))
        parts += self._legend(series)
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    # ── Private helpers ───────────────────────────────────────────────────────

    @staticmethod
    def _validate(series: Sequence[Series]) -> None:
        if not series:
            raise EmptySeries("No series to plot")
        for s in series:
            if len(s.x) == 0:
                raise EmptySeries(f"Series {s.name!r} has no points")
            if len(s.x) != len(s.y):
                raise ValueError(f"Series {s.name!r}: {len(s.x)} x values but {len(s.y)} y values")
            if not (np.all(np.isfinite(s.x)) and np.all(np.isfinite(s.y))):
                raise ValueError(f"Series {s.name!r} has non-finite values")

    @staticmethod
    def _scale(lo: float, hi: float, out_lo: float, out_hi: float):
        span = hi - lo
        return lambda v: out_lo + (float(v) - lo) / span * (out_hi - out_lo)

    @staticmethod
    def _style_block(count: int) -> str:
        rules = [
            "text{font-family:Helvetica,Arial,sans-serif;font-size:13px;fill:#222}",
            ".title{font-size:16px;font-weight:bold}",
            ".axis{stroke:#222;stroke-width:1}",
            ".grid{stroke:#ddd;stroke-width:1}",
            ".line{fill:none;stroke-width:2}",
            ".marker{stroke-width:1.5;fill:white}",
        ]
        for i in range(count):
            color = PALETTE[i % len(PALETTE)]
            rules.append(f".s{i}{{stroke:{color}}}")
        return "<style>" + "".join(rules) + "</style>"

    def _axes(self, x_ticks, y_ticks, sx, sy, style: ChartStyle) -> list[str]:
        left, right = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
        top, bottom = MARGIN_TOP, HEIGHT - MARGIN_BOTTOM
        out = []
        for t in y_ticks:
            y = _px(sy(t))
            out.append(f'<line class="grid" x1="{left}" y1="{y}" x2="{right}" y2="{y}"/>')
            out.append(f'<text x="{left - 8}" y="{y}" text-anchor="end" dominant-baseline="middle">{_fmt(t)}</text>')
        for t in x_ticks:
            x = _px(sx(t))
            out.append(f'<line class="axis" x1="{x}" y1="{bottom}" x2="{x}" y2="{bottom + 5}"/>')
            out.append(f'<text x="{x}" y="{bottom + 20}" text-anchor="middle">{_fmt(t)}</text>')
        out.append(f'<line class="axis" x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/>')
        out.append(f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{bottom}"/>')
        if style.x_label:
            out.append(
                f'<text x="{(left + right) / 2:g}" y="{HEIGHT - 20}" text-anchor="middle">{escape(style.x_label)}</text>'
            )
        if style.y_label:
            cy = (top + bottom) / 2
            out.append(
                f'<text x="20" y="{cy:g}" text-anchor="middle" transform="rotate(-90 20 {cy:g})">'
                f"{escape(style.y_label)}</text>"
            )
        return out

    @staticmethod
    def _series(i: int, s: Series, sx, sy) -> str:
        cls = f"s{i if s.group is None else s.group}"
        pts = [(sx(x), sy(y)) for x, y in zip(s.x, s.y)]
        if s.kind == "line":
            coords = " ".join(f"{_px(x)},{_px(y)}" for x, y in pts)
            return f'<polyline class="line {cls}" points="{coords}"/>'
        circles = "".join(f'<circle cx="{_px(x)}" cy="{_px(y)}" r="4"/>' for x, y in pts)
        return f'<g class="marker {cls}">{circles}</g>'

    @staticmethod
    def _legend(series: Sequence[Series]) -> list[str]:
        x0 = WIDTH - MARGIN_RIGHT + 20
        out = ['<g class="legend">']
        for i, s in enumerate(series):
            y = MARGIN_TOP + 10 + 22 * i
            cls = f"s{i if s.group is None else s.group}"
            if s.kind == "line":
                out.append(f'<line class="line {cls}" x1="{x0}" y1="{y}" x2="{x0 + 24}" y2="{y}"/>')
            else:
                out.append(f'<g class="marker {cls}"><circle cx="{x0 + 12}" cy="{y}" r="4"/></g>')
            out.append(f'<text x="{x0 + 32}" y="{y}" dominant-baseline="middle">{escape(s.name)}</text>')
        out.append("</g>")
        return out


def emit_svg(series: Sequence[Series], style: ChartStyle = ChartStyle()) -> str:
    return SvgChartBuilder().build(series, style)
