"""Standalone SVG renderers: forest, funnel and prior/posterior density plots.

Rendering is a pure function of the plot spec; identical specs produce
byte-identical SVG 1.1 documents.  The plot area group carries its affine
data->pixel mapping as data-* attributes so tests (and the UI) can invert
marker positions back to data coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

from .dataset import EffectScale
from .errors import DataError

_STYLE = """
    text { font-family: Helvetica, Arial, sans-serif; font-size: 12px; fill: #222; }
    .title { font-size: 14px; font-weight: bold; }
    .study-marker { fill: #444; }
    .study-marker.new-study { fill: #1f6fd6; }
    .ci-line { stroke: #444; stroke-width: 1.2; }
    .ci-line.new-study { stroke: #1f6fd6; }
    .pooled-diamond { fill: #111; }
    .ref-line { stroke: #999; stroke-width: 1; stroke-dasharray: 4 3; }
    .axis { stroke: #222; stroke-width: 1; }
    .tick { stroke: #222; stroke-width: 1; }
    .funnel-point { fill: #444; fill-opacity: 0.8; }
    .funnel-bound { stroke: #888; stroke-width: 1; stroke-dasharray: 5 3; fill: none; }
    .pooled-line { stroke: #111; stroke-width: 1.2; }
    .prior-curve { stroke: #666; stroke-width: 1.5; stroke-dasharray: 6 4; fill: none; }
    .posterior-curve { stroke: #111; stroke-width: 1.8; fill: none; }
    .credible-region { fill: #1f6fd6; fill-opacity: 0.25; stroke: none; }
"""


@dataclass(frozen=True)
class ForestRow:
    label: str
    y: float
    ci_low: float
    ci_high: float
    weight_pct: float
    is_new: bool = False


@dataclass(frozen=True)
class PooledLine:
    y: float
    ci_low: float
    ci_high: float
    method_label: str


@dataclass(frozen=True)
class ForestPlotSpec:
    rows: tuple[ForestRow, ...]
    pooled: PooledLine
    scale: EffectScale
    axis_label: str = ""


@dataclass(frozen=True)
class DensityPlotSpec:
    prior_grid: tuple[float, ...]
    prior_density: tuple[float, ...]
    posterior_grid: tuple[float, ...]
    posterior_density: tuple[float, ...]
    ci_low: float
    ci_high: float
    axis_label: str = ""


def _fmt(v: float) -> str:
    out = f"{v:.3f}"
    return "0.000" if out == "-0.000" else out


def _px(v: float) -> str:
    # Fixed-point pixel coordinates keep documents deterministic and small;
    # 6 decimals so inverse-mapping marker positions recovers data values.
    out = f"{v:.6f}".rstrip("0").rstrip(".")
    return "0" if out in ("-0", "") else out


class _AffineX:
    """Invertible affine map from data x to pixel x over a fixed span."""

    def __init__(self, lo: float, hi: float, px_lo: float, px_hi: float):
        lo, hi = float(lo), float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DataError("axis limits must be finite")
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.lo, self.hi, self.px_lo, self.px_hi = lo, hi, px_lo, px_hi

    def __call__(self, v: float) -> float:
        return self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)

    def attrs(self) -> str:
        return (
            f'data-x-min="{self.lo!r}" data-x-max="{self.hi!r}" '
            f'data-px-min="{self.px_lo!r}" data-px-max="{self.px_hi!r}"'
        )


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / n))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12:
        ticks.append(0.0 if abs(t) < step * 1e-9 else t)
        t += step
    return ticks


def _document(width: int, height: int, body: list[str]) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f"<style>{_STYLE}</style>\n"
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _axis(x: _AffineX, y_px: float, label: str) -> list[str]:
    parts = [f'<line class="axis" x1="{_px(x.px_lo)}" y1="{_px(y_px)}" x2="{_px(x.px_hi)}" y2="{_px(y_px)}"/>']
    for t in _ticks(x.lo, x.hi):
        tx = x(t)
        parts.append(f'<line class="tick" x1="{_px(tx)}" y1="{_px(y_px)}" x2="{_px(tx)}" y2="{_px(y_px + 5)}"/>')
        parts.append(f'<text x="{_px(tx)}" y="{_px(y_px + 18)}" text-anchor="middle">{_fmt(t)}</text>')
    if label:
        mid = 0.5 * (x.px_lo + x.px_hi)
        parts.append(f'<text class="title" x="{_px(mid)}" y="{_px(y_px + 36)}" text-anchor="middle">{escape(label)}</text>')
    return parts


def render_forest(spec: ForestPlotSpec) -> str:
    """Forest plot: squares sized by weight, CI segments, pooled diamond.

    Canvas is 800 x (60 + 24 * rows) where rows counts the study rows plus
    the pooled row.  Rows flagged is_new carry the 'new-study' class.
    """
    if not spec.rows:
        raise DataError("forest plot needs at least one row")
    for row in spec.rows:
        if not all(math.isfinite(v) for v in (row.y, row.ci_low, row.ci_high)):
            raise DataError(f"non-finite confidence interval for row {row.label!r}")
    if not all(math.isfinite(v) for v in (spec.pooled.y, spec.pooled.ci_low, spec.pooled.ci_high)):
        raise DataError("non-finite pooled estimate")

    n_rows = len(spec.rows) + 1
    width, height = 800, 60 + 24 * n_rows
    ref = 0.0
    lows = [r.ci_low for r in spec.rows] + [spec.pooled.ci_low, ref]
    highs = [r.ci_high for r in spec.rows] + [spec.pooled.ci_high, ref]
    lo, hi = min(lows), max(highs)
    pad = 0.05 * (hi - lo or 1.0)
    x = _AffineX(lo - pad, hi + pad, 300.0, 620.0)

    body = [f'<g class="plot-area" {x.attrs()}>']
    top = 30.0
    for i, row in enumerate(spec.rows):
        cy = top + 24.0 * i
        accent = " new-study" if row.is_new else ""
        side = 12.0 * math.sqrt(max(row.weight_pct, 0.0) / 100.0)
        side = max(side, 2.0)
        body.append(
            f'<line class="ci-line{accent}" x1="{_px(x(row.ci_low))}" y1="{_px(cy)}" '
            f'x2="{_px(x(row.ci_high))}" y2="{_px(cy)}"/>'
        )
        body.append(
            f'<rect class="study-marker{accent}" x="{_px(x(row.y) - side / 2)}" y="{_px(cy - side / 2)}" '
            f'width="{_px(side)}" height="{_px(side)}"/>'
        )
        body.append(f'<text x="8" y="{_px(cy + 4)}">{escape(row.label)}</text>')
        body.append(
            f'<text x="630" y="{_px(cy + 4)}">{_fmt(row.y)} [{_fmt(row.ci_low)}, {_fmt(row.ci_high)}]'
            f"  {row.weight_pct:.1f}%</text>"
        )
    cy = top + 24.0 * len(spec.rows)
    p = spec.pooled
    body.append(
        f'<polygon class="pooled-diamond" points="{_px(x(p.ci_low))},{_px(cy)} {_px(x(p.y))},{_px(cy - 7)} '
        f'{_px(x(p.ci_high))},{_px(cy)} {_px(x(p.y))},{_px(cy + 7)}"/>'
    )
    body.append(f'<text x="8" y="{_px(cy + 4)}">{escape(p.method_label)}</text>')
    body.append(f'<text x="630" y="{_px(cy + 4)}">{_fmt(p.y)} [{_fmt(p.ci_low)}, {_fmt(p.ci_high)}]</text>')

    axis_y = cy + 16.0
    if x.lo <= ref <= x.hi:
        body.append(
            f'<line class="ref-line" x1="{_px(x(ref))}" y1="{_px(top - 14)}" x2="{_px(x(ref))}" y2="{_px(axis_y)}"/>'
        )
    body.extend(_axis(x, axis_y, spec.axis_label or spec.scale.axis_label))
    body.append("</g>")
    return _document(width, height, body)


def render_funnel(
    ys: Sequence[float], ses: Sequence[float], pooled_y: float, axis_label: str = ""
) -> str:
    """Funnel plot: effect vs standard error (inverted), with pseudo-95%
    confidence bounds pooled_y +/- 1.96 se and a vertical pooled line."""
    if not ys or len(ys) != len(ses):
        raise DataError("funnel plot needs matching, non-empty y and se lists")
    width, height = 640, 480
    z = 1.959963985
    se_max = float(max(ses)) * 1.05
    lows = [pooled_y - z * se_max] + [min(ys)]
    highs = [pooled_y + z * se_max] + [max(ys)]
    x = _AffineX(min(lows), max(highs), 70.0, 610.0)
    y_top, y_bottom = 30.0, 420.0

    def se_px(se: float) -> float:
        return y_top + se / se_max * (y_bottom - y_top)

    body = [f'<g class="plot-area" {x.attrs()} data-se-max="{se_max!r}" data-se-px-min="{y_top!r}" data-se-px-max="{y_bottom!r}">']
    body.append(
        f'<line class="funnel-bound" x1="{_px(x(pooled_y))}" y1="{_px(se_px(0.0))}" '
        f'x2="{_px(x(pooled_y - z * se_max))}" y2="{_px(se_px(se_max))}"/>'
    )
    body.append(
        f'<line class="funnel-bound" x1="{_px(x(pooled_y))}" y1="{_px(se_px(0.0))}" '
        f'x2="{_px(x(pooled_y + z * se_max))}" y2="{_px(se_px(se_max))}"/>'
    )
    body.append(
        f'<line class="pooled-line" x1="{_px(x(pooled_y))}" y1="{_px(y_top)}" x2="{_px(x(pooled_y))}" y2="{_px(y_bottom)}"/>'
    )
    for yi, sei in zip(ys, ses):
        body.append(f'<circle class="funnel-point" cx="{_px(x(yi))}" cy="{_px(se_px(sei))}" r="4"/>')
    body.extend(_axis(x, y_bottom + 10.0, axis_label or "effect size"))
    body.append(f'<text transform="rotate(-90 20 225)" x="20" y="225" text-anchor="middle">standard error</text>')
    body.append("</g>")
    return _document(width, height, body)


def _path(points: Sequence[tuple[float, float]]) -> str:
    return "M" + " L".join(f"{_px(px)},{_px(py)}" for px, py in points)


def render_density(spec: DensityPlotSpec) -> str:
    """Prior (dashed) and posterior (solid) curves with the central 95%
    credible interval shaded under the posterior."""
    if len(spec.prior_grid) != len(spec.prior_density) or len(spec.posterior_grid) != len(spec.posterior_density):
        raise DataError("density curves need matching grid/density lengths")
    if not spec.posterior_grid:
        raise DataError("empty posterior curve")
    width, height = 640, 480
    lo = min(min(spec.prior_grid), min(spec.posterior_grid))
    hi = max(max(spec.prior_grid), max(spec.posterior_grid))
    x = _AffineX(lo, hi, 60.0, 610.0)
    f_max = float(max(max(spec.prior_density), max(spec.posterior_density))) or 1.0
    y_top, y_bottom = 40.0, 420.0

    def f_px(f: float) -> float:
        return y_bottom - f / f_max * (y_bottom - y_top)

    body = [f'<g class="plot-area" {x.attrs()} data-f-max="{f_max!r}" data-f-px-min="{y_top!r}" data-f-px-max="{y_bottom!r}">']

    shade = [(x(spec.ci_low), y_bottom)]
    for g, f in zip(spec.posterior_grid, spec.posterior_density):
        if spec.ci_low <= g <= spec.ci_high:
            shade.append((x(g), f_px(f)))
    shade.append((x(spec.ci_high), y_bottom))
    body.append(
        '<polygon class="credible-region" points="'
        + " ".join(f"{_px(px)},{_px(py)}" for px, py in shade)
        + '"/>'
    )
    body.append(f'<path class="prior-curve" d="{_path([(x(g), f_px(f)) for g, f in zip(spec.prior_grid, spec.prior_density)])}"/>')
    body.append(
        f'<path class="posterior-curve" d="{_path([(x(g), f_px(f)) for g, f in zip(spec.posterior_grid, spec.posterior_density)])}"/>'
    )
    body.append('<line class="prior-curve" x1="470" y1="30" x2="500" y2="30"/>')
    body.append('<text x="506" y="34">prior</text>')
    body.append('<line class="posterior-curve" x1="470" y1="48" x2="500" y2="48"/>')
    body.append('<text x="506" y="52">posterior</text>')
    body.extend(_axis(x, y_bottom + 10.0, spec.axis_label or "parameter"))
    body.append("</g>")
    return _document(width, height, body)
