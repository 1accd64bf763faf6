"""Hand-emitted SVG charts (no plotting dependency).

All charts share a fixed 900x500 canvas and a deterministic palette
keyed by a hash of the series name, so rerendering identical data yields
byte-identical files.  Four chart kinds: metric-vs-k sweep lines with a
shaded baseline band, Z-score lines with a zero reference, log-scale
runtime lines, and critical-difference diagrams.
"""

from __future__ import annotations

import hashlib
import math
from xml.sax.saxutils import escape

import numpy as np

from .stats import ComparisonReport

__all__ = [
    "WIDTH",
    "HEIGHT",
    "color_for",
    "render_sweep",
    "render_zscore",
    "render_runtime",
    "render_cdd",
]

WIDTH = 900
HEIGHT = 500
_MARGIN_LEFT = 70
_MARGIN_RIGHT = 170  # room for the legend
_MARGIN_TOP = 50
_MARGIN_BOTTOM = 60

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
)


def color_for(name: str) -> str:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return _PALETTE[digest[0] % len(_PALETTE)]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _fmt_tick(v: float) -> str:
    return f"{v:.4g}"


class _Canvas:
    def __init__(self, title: str):
        self.parts: list[str] = []
        self.parts.append(
            f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" '
            f'font-size="16" font-family="sans-serif">{escape(title)}</text>'
        )

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, dash=None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{stroke}" stroke-width="{width}"{extra}/>'
        )

    def polyline(self, points, stroke, width=1.8):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"/>'
        )

    def polygon(self, points, fill, opacity=0.25):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self.parts.append(f'<polygon points="{pts}" fill="{fill}" fill-opacity="{opacity}"/>')

    def circle(self, x, y, r, fill):
        self.parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}" fill="{fill}"/>')

    def marker_x(self, x, y, size, stroke):
        self.line(x - size, y - size, x + size, y + size, stroke=stroke, width=2.0)
        self.line(x - size, y + size, x + size, y - size, stroke=stroke, width=2.0)

    def text(self, x, y, content, size=12, anchor="start", fill="#000000"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="{anchor}" '
            f'font-size="{size}" font-family="sans-serif" fill="{fill}">{escape(content)}</text>'
        )

    def render(self) -> str:
        body = "\n".join(self.parts)
        return (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">\n'
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>\n'
            f"{body}\n</svg>\n"
        )


class _Axes:
    """Linear data-to-pixel mapping with frame, ticks and labels."""

    def __init__(self, canvas: _Canvas, x_range, y_range, x_label, y_label,
                 y_tick_format=_fmt_tick):
        self.canvas = canvas
        self.x0, self.x1 = float(x_range[0]), float(x_range[1])
        self.y0, self.y1 = float(y_range[0]), float(y_range[1])
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.left = _MARGIN_LEFT
        self.right = WIDTH - _MARGIN_RIGHT
        self.top = _MARGIN_TOP
        self.bottom = HEIGHT - _MARGIN_BOTTOM
        canvas.line(self.left, self.bottom, self.right, self.bottom)
        canvas.line(self.left, self.top, self.left, self.bottom)
        for frac in np.linspace(0.0, 1.0, 6):
            xv = self.x0 + frac * (self.x1 - self.x0)
            px = self.px(xv)
            canvas.line(px, self.bottom, px, self.bottom + 5)
            canvas.text(px, self.bottom + 20, _fmt_tick(xv), size=11, anchor="middle")
            yv = self.y0 + frac * (self.y1 - self.y0)
            py = self.py(yv)
            canvas.line(self.left - 5, py, self.left, py)
            canvas.text(self.left - 8, py + 4, y_tick_format(yv), size=11, anchor="end")
        canvas.text((self.left + self.right) / 2, HEIGHT - 15, x_label, size=13, anchor="middle")
        canvas.text(18, (self.top + self.bottom) / 2, y_label, size=13, anchor="middle")

    def px(self, x: float) -> float:
        return self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y: float) -> float:
        return self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)


def _legend(canvas: _Canvas, names: list[str]):
    x = WIDTH - _MARGIN_RIGHT + 15
    y = _MARGIN_TOP + 10
    for name in names:
        canvas.line(x, y - 4, x + 22, y - 4, stroke=color_for(name), width=3.0)
        canvas.text(x + 28, y, name, size=12)
        y += 18


def _pad_range(lo: float, hi: float) -> tuple[float, float]:
    if hi <= lo:
        return lo - 0.5, lo + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def render_sweep(
    dataset: str,
    metric: str,
    series: list[tuple[str, np.ndarray, np.ndarray]],
    band: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> str:
    """Metric vs. selected-feature-count lines, plus a baseline mean+-std band.

    ``series`` holds (method, ks, values) triples; ``band`` holds
    (ks, mean, std) for the random baseline.
    """
    if not series:
        raise ValueError("no series to plot")
    xs_all = np.concatenate([s[1] for s in series])
    canvas = _Canvas(f"{dataset}: {metric} vs. selected features")
    axes = _Axes(
        canvas, (xs_all.min(), xs_all.max()), (0.0, 1.0),
        "selected features (k)", metric,
    )
    if band is not None:
        ks, mean, std = band
        upper = [(axes.px(x), axes.py(min(1.0, m + s))) for x, m, s in zip(ks, mean, std)]
        lower = [(axes.px(x), axes.py(max(0.0, m - s))) for x, m, s in zip(ks, mean, std)]
        canvas.polygon(upper + lower[::-1], fill=color_for("random"))
    for name, ks, values in series:
        canvas.polyline(
            [(axes.px(x), axes.py(v)) for x, v in zip(ks, values)], stroke=color_for(name)
        )
    _legend(canvas, [name for name, _, _ in series])
    return canvas.render()


def render_zscore(
    dataset: str,
    metric: str,
    series: list[tuple[str, np.ndarray, np.ndarray]],
) -> str:
    """Z-score vs. k lines with a dashed zero reference line."""
    if not series:
        raise ValueError("no series to plot")
    finite = np.concatenate(
        [np.asarray(v)[np.isfinite(v)] for _, _, v in series] + [np.zeros(1)]
    )
    lo, hi = _pad_range(float(finite.min()), float(finite.max()))
    xs_all = np.concatenate([s[1] for s in series])
    canvas = _Canvas(f"{dataset}: {metric} Z-score vs. random baseline")
    axes = _Axes(canvas, (xs_all.min(), xs_all.max()), (lo, hi), "selected features (k)", "Z")
    zero_y = axes.py(0.0)
    canvas.line(axes.left, zero_y, axes.right, zero_y, stroke="#555555", dash="6,4")
    for name, ks, values in series:
        values = np.asarray(values, dtype=np.float64)
        clipped = np.clip(values, lo, hi)  # render +-inf at the frame edge
        canvas.polyline(
            [(axes.px(x), axes.py(v)) for x, v in zip(ks, clipped)], stroke=color_for(name)
        )
    _legend(canvas, [name for name, _, _ in series])
    return canvas.render()


def render_runtime(
    varying: str,
    series: list[tuple[str, np.ndarray, np.ndarray, np.ndarray]],
    cap_seconds: float | None = None,
) -> str:
    """Selector runtime lines on a log10 y-axis; over-cap points marked X.

    ``series`` holds (method, grid values, seconds, over_cap flags).
    """
    if not series:
        raise ValueError("no series to plot")
    secs = np.concatenate([np.maximum(np.asarray(s[2], dtype=np.float64), 1e-9) for s in series])
    logs = np.log10(secs)
    lo = math.floor(logs.min())
    hi = math.ceil(logs.max())
    if hi <= lo:
        hi = lo + 1
    xs_all = np.concatenate([np.asarray(s[1], dtype=np.float64) for s in series])
    canvas = _Canvas(f"Selector runtime vs. {varying}")
    axes = _Axes(
        canvas, (xs_all.min(), xs_all.max()), (lo, hi),
        varying, "runtime (s)", y_tick_format=lambda v: f"1e{v:+.0f}",
    )
    if cap_seconds is not None and cap_seconds > 0:
        cap_y = axes.py(math.log10(cap_seconds))
        if axes.top <= cap_y <= axes.bottom:
            canvas.line(axes.left, cap_y, axes.right, cap_y, stroke="#aa0000", dash="4,4")
            canvas.text(axes.right - 4, cap_y - 5, "cap", size=11, anchor="end", fill="#aa0000")
    for name, xs, seconds, over in series:
        seconds = np.maximum(np.asarray(seconds, dtype=np.float64), 1e-9)
        pts = [(axes.px(x), axes.py(math.log10(s))) for x, s in zip(xs, seconds)]
        canvas.polyline(pts, stroke=color_for(name))
        for (px, py), flag in zip(pts, over):
            if flag:
                canvas.marker_x(px, py, 5, stroke=color_for(name))
            else:
                canvas.circle(px, py, 2.2, fill=color_for(name))
    _legend(canvas, [name for name, _, _, _ in series])
    return canvas.render()


def render_cdd(report: ComparisonReport) -> str:
    """Critical-difference diagram: rank axis (best on the right) plus bars.

    Each method sits at its average rank with the numeric rank printed at
    the tick; maximal groups of mutually indistinguishable methods
    (pairwise adjusted p >= alpha) are joined by horizontal bars below the
    axis.
    """
    m = len(report.methods)
    if m < 2:
        raise ValueError("critical-difference diagram needs >= 2 methods")
    axis_y = 130.0
    left = 90.0
    right = WIDTH - 90.0

    def px(rank: float) -> float:
        # rank 1 (best) on the right, rank m (worst) on the left
        return right - (rank - 1.0) / (m - 1.0) * (right - left) if m > 1 else right

    canvas = _Canvas(
        f"Critical difference ({report.metric}, alpha={report.alpha:g}, "
        f"{len(report.datasets)} datasets)"
    )
    canvas.line(left, axis_y, right, axis_y, width=1.5)
    for r in range(1, m + 1):
        canvas.line(px(r), axis_y - 5, px(r), axis_y + 5)
        canvas.text(px(r), axis_y - 10, str(r), size=11, anchor="middle")

    # clique bars just below the axis, staggered to avoid overlap
    bar_levels: list[float] = []
    bar_y_base = axis_y + 14.0
    spans = []
    for clique in report.cliques:
        ranks = [report.avg_ranks[i] for i in clique]
        spans.append((min(ranks), max(ranks), clique))
    spans.sort()
    for lo_rank, hi_rank, _ in spans:
        x_lo = px(hi_rank) - 6  # worse rank = smaller x
        x_hi = px(lo_rank) + 6
        level = 0
        while level < len(bar_levels) and bar_levels[level] >= x_lo - 4:
            level += 1
        if level == len(bar_levels):
            bar_levels.append(x_hi)
        else:
            bar_levels[level] = x_hi
        y = bar_y_base + 10.0 * level
        canvas.line(x_lo, y, x_hi, y, width=4.0)
    bars_bottom = bar_y_base + 10.0 * max(1, len(bar_levels))

    # method stems and labels, best half on the right, worst half on the left
    order = list(report.ordering)
    label_y = bars_bottom + 30.0
    right_count = (m + 1) // 2
    for pos, idx in enumerate(order):
        rank = float(report.avg_ranks[idx])
        x = px(rank)
        on_right = pos < right_count
        row = pos if on_right else m - 1 - pos
        y = label_y + 22.0 * row
        label_x = right + 10 if on_right else left - 10
        anchor = "start" if on_right else "end"
        canvas.line(x, axis_y, x, y - 4, stroke="#333333", width=1.0)
        canvas.line(x, y - 4, label_x - (6 if on_right else -6), y - 4,
                    stroke="#333333", width=1.0)
        canvas.text(
            label_x, y, f"{report.methods[idx]} ({rank:.2f})", size=12, anchor=anchor
        )
    return canvas.render()
