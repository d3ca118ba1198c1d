"""Static SVG learning curves: one polyline per series with a shaded band of
plus/minus one standard error. No plotting library involved; coordinates are
plain linear transforms so tests can invert them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ConfigError

WIDTH, HEIGHT = 800, 500
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 50

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Series:
    label: str
    x: list[float]
    y: list[float]
    err: list[float]


@dataclass
class Axes:
    """Linear data-to-pixel transform for one plot."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def px(self, x: float) -> float:
        span = self.x_max - self.x_min or 1.0
        return MARGIN_L + (x - self.x_min) / span * (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, y: float) -> float:
        span = self.y_max - self.y_min or 1.0
        return HEIGHT - MARGIN_B - (y - self.y_min) / span * (HEIGHT - MARGIN_T - MARGIN_B)


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def make_axes(series: list[Series]) -> Axes:
    xs = [x for s in series for x in s.x]
    ys = [y + e for s in series for y, e in zip(s.y, s.err)]
    ys += [y - e for s in series for y, e in zip(s.y, s.err)]
    x_min, x_max = min(xs), max(xs)
    y_min, y_max = min(ys), max(ys)
    if y_min == y_max:
        y_min, y_max = y_min - 0.5, y_max + 0.5
    pad = 0.05 * (y_max - y_min)
    return Axes(x_min=x_min, x_max=x_max, y_min=y_min - pad, y_max=y_max + pad)


def render_svg(
    series: list[Series], xlabel: str, ylabel: str, title: str = ""
) -> str:
    """Compose the SVG document for a set of aligned series."""
    if not series:
        raise ConfigError("nothing to plot")
    for s in series:
        if not (len(s.x) == len(s.y) == len(s.err)) or not s.x:
            raise ConfigError(f"series {s.label!r} is empty or ragged")
    ax = make_axes(series)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    x0, y0 = MARGIN_L, HEIGHT - MARGIN_B
    x1, y1 = WIDTH - MARGIN_R, MARGIN_T
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>'
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>'
    )
    for t in _nice_ticks(ax.x_min, ax.x_max):
        px = ax.px(t)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{y0}" x2="{_fmt(px)}" y2="{y0 + 5}" stroke="black"/>'
            f'<text x="{_fmt(px)}" y="{y0 + 20}" font-size="12" text-anchor="middle">{_fmt(t)}</text>'
        )
    for t in _nice_ticks(ax.y_min, ax.y_max):
        py = ax.py(t)
        parts.append(
            f'<line x1="{x0 - 5}" y1="{_fmt(py)}" x2="{x0}" y2="{_fmt(py)}" stroke="black"/>'
            f'<text x="{x0 - 8}" y="{_fmt(py + 4)}" font-size="12" text-anchor="end">{_fmt(t)}</text>'
        )
    parts.append(
        f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 10}" font-size="14" text-anchor="middle">{xlabel}</text>'
        f'<text x="18" y="{(y0 + y1) / 2}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2})">{ylabel}</text>'
    )
    if title:
        parts.append(
            f'<text x="{(x0 + x1) / 2}" y="20" font-size="15" text-anchor="middle">{title}</text>'
        )
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        upper = [(ax.px(x), ax.py(y + e)) for x, y, e in zip(s.x, s.y, s.err)]
        lower = [(ax.px(x), ax.py(y - e)) for x, y, e in zip(s.x, s.y, s.err)]
        band = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in upper + lower[::-1])
        parts.append(
            f'<polygon points="{band}" fill="{color}" fill-opacity="0.18" stroke="none" '
            f'class="band-{i}"/>'
        )
        line = " ".join(f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}" for x, y in zip(s.x, s.y))
        parts.append(
            f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.5" '
            f'class="line-{i}"/>'
        )
        ly = MARGIN_T + 18 + 18 * i
        parts.append(
            f'<line x1="{x1 - 150}" y1="{ly - 4}" x2="{x1 - 125}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
            f'<text x="{x1 - 118}" y="{ly}" font-size="12">{s.label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def plot_aggregates(
    agg_files: list[str],
    out_path: str,
    y_field: str = "return_ma_mean",
    err_field: str = "return_ma_stderr",
    x_field: str = "x",
    xlabel: str = "episode",
    ylabel: str = "smoothed return",
    title: str = "",
) -> None:
    """Plot one curve per aggregate CSV; series labels come from file names.

    All files must carry the same aggregate header; anything else is a
    mismatched-axes error."""
    import os

    from .metrics import read_aggregate_csv

    series = []
    for path in agg_files:
        rows = read_aggregate_csv(path)
        if not rows:
            raise ConfigError(f"{path}: empty aggregate")
        if x_field not in rows[0] or y_field not in rows[0] or err_field not in rows[0]:
            raise ConfigError(
                f"{path}: mismatched axes, missing {x_field!r}/{y_field!r}/{err_field!r}"
            )
        label = os.path.basename(path).removesuffix(".csv").removesuffix("_aggregate")
        series.append(
            Series(
                label=label,
                x=[float(r[x_field]) for r in rows],
                y=[float(r[y_field]) for r in rows],
                err=[float(r[err_field]) for r in rows],
            )
        )
    svg = render_svg(series, xlabel=xlabel, ylabel=ylabel, title=title)
    with open(out_path, "w") as f:
        f.write(svg)
