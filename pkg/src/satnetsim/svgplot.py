"""Self-contained SVG chart rendering.

Deliberately dependency-free: charts are plain vector text, byte-stable for
a given input, so they can be hashed in run manifests and diffed in tests.
Only the handful of chart shapes the simulator emits are supported: line
and scatter charts (optionally with a secondary y axis), box plots, and
free-form node/edge maps built from the same primitives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _tick_values(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / max(1, n)))
    for mult in (1, 2, 5, 10, 20, 50):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * span:
        ticks.append(round(v, 12))
        v += step
    return ticks


@dataclass
class Figure:
    """A chart area with linear x/y scales and margins for axes."""

    width: int = 720
    height: int = 440
    margin_left: int = 70
    margin_right: int = 70
    margin_top: int = 40
    margin_bottom: int = 50
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    y2_label: str = ""
    _elements: list[str] = field(default_factory=list)
    _x_range: tuple[float, float] = (0.0, 1.0)
    _y_range: tuple[float, float] = (0.0, 1.0)
    _y2_range: tuple[float, float] | None = None

    def set_ranges(self, x, y, y2=None) -> None:
        self._x_range = _pad_range(*x)
        self._y_range = _pad_range(*y)
        self._y2_range = _pad_range(*y2) if y2 else None

    # data -> pixel transforms
    def px(self, x: float) -> float:
        lo, hi = self._x_range
        inner = self.width - self.margin_left - self.margin_right
        return self.margin_left + (x - lo) / (hi - lo) * inner

    def py(self, y: float, secondary: bool = False) -> float:
        lo, hi = self._y2_range if secondary else self._y_range
        inner = self.height - self.margin_top - self.margin_bottom
        return self.height - self.margin_bottom - (y - lo) / (hi - lo) * inner

    # primitives (pixel space)
    def raw(self, element: str) -> None:
        self._elements.append(element)

    def pixel_line(self, x1, y1, x2, y2, color="#444", width=1.0, dash=None, opacity=1.0):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        o = f' stroke-opacity="{opacity:.3f}"' if opacity != 1.0 else ""
        self.raw(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{color}" stroke-width="{width:.2f}"{d}{o}/>'
        )

    def pixel_circle(self, x, y, r, color, opacity=1.0):
        o = f' fill-opacity="{opacity:.3f}"' if opacity != 1.0 else ""
        self.raw(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}" fill="{color}"{o}/>')

    def pixel_rect(self, x, y, w, h, fill="none", stroke="#333", width=1.0):
        self.raw(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="{fill}" stroke="{stroke}" stroke-width="{width:.2f}"/>'
        )

    def pixel_text(self, x, y, s, size=12, anchor="middle", color="#222", rotate=None):
        r = f' transform="rotate({rotate} {x:.2f} {y:.2f})"' if rotate is not None else ""
        s = (
            str(s)
            .replace("&", "&amp;")
            .replace("<", "&lt;")
            .replace(">", "&gt;")
        )
        self.raw(
            f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" fill="{color}" '
            f'text-anchor="{anchor}" font-family="sans-serif"{r}>{s}</text>'
        )

    # data-space helpers
    def polyline(self, xs, ys, color, width=1.5, secondary=False):
        pts = " ".join(
            f"{self.px(x):.2f},{self.py(y, secondary):.2f}" for x, y in zip(xs, ys)
        )
        self.raw(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width:.2f}"/>'
        )

    def scatter(self, xs, ys, color, r=2.0, opacity=0.6, secondary=False):
        for x, y in zip(xs, ys):
            self.pixel_circle(self.px(x), self.py(y, secondary), r, color, opacity)

    def segment(self, x1, y1, x2, y2, color="#777", width=1.0, opacity=1.0):
        self.pixel_line(
            self.px(x1), self.py(y1), self.px(x2), self.py(y2), color, width,
            opacity=opacity,
        )

    def annotate_empty(self, message="no data") -> None:
        self.pixel_text(self.width / 2, self.height / 2, message, size=16, color="#999")

    def axes(self, y2: bool = False) -> None:
        left, bottom = self.margin_left, self.height - self.margin_bottom
        right, top = self.width - self.margin_right, self.margin_top
        self.pixel_line(left, bottom, right, bottom, "#000")
        self.pixel_line(left, bottom, left, top, "#000")
        for v in _tick_values(*self._x_range):
            x = self.px(v)
            self.pixel_line(x, bottom, x, bottom + 4, "#000")
            self.pixel_text(x, bottom + 18, _fmt(v), size=10)
        for v in _tick_values(*self._y_range):
            y = self.py(v)
            self.pixel_line(left - 4, y, left, y, "#000")
            self.pixel_text(left - 8, y + 3, _fmt(v), size=10, anchor="end")
        if y2 and self._y2_range:
            self.pixel_line(right, bottom, right, top, "#000")
            for v in _tick_values(*self._y2_range):
                y = self.py(v, secondary=True)
                self.pixel_line(right, y, right + 4, y, "#000")
                self.pixel_text(right + 8, y + 3, _fmt(v), size=10, anchor="start")
            if self.y2_label:
                self.pixel_text(
                    self.width - 14, self.height / 2, self.y2_label, size=12, rotate=90
                )
        if self.title:
            self.pixel_text(self.width / 2, 20, self.title, size=14)
        if self.x_label:
            self.pixel_text(self.width / 2, self.height - 12, self.x_label, size=12)
        if self.y_label:
            self.pixel_text(16, self.height / 2, self.y_label, size=12, rotate=-90)

    def legend(self, entries: list[tuple[str, str]]) -> None:
        x = self.margin_left + 10
        y = self.margin_top + 8
        for label, color in entries:
            self.pixel_line(x, y, x + 18, y, color, 3)
            self.pixel_text(x + 24, y + 4, label, size=11, anchor="start")
            y += 16

    def render(self) -> str:
        body = "\n".join(self._elements)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>\n'
            f"{body}\n</svg>\n"
        )


def _pad_range(lo: float, hi: float, frac: float = 0.05) -> tuple[float, float]:
    if hi < lo:
        lo, hi = hi, lo
    if hi == lo:
        pad = 1.0 if hi == 0 else abs(hi) * frac
    else:
        pad = (hi - lo) * frac
    return lo - pad, hi + pad


def line_chart(series, *, title="", x_label="", y_label="", y2=None, y2_label="") -> str:
    """``series``: list of (label, xs, ys). ``y2``: optional (label, xs, ys)."""
    fig = Figure(title=title, x_label=x_label, y_label=y_label, y2_label=y2_label)
    populated = [s for s in series if len(s[1]) > 0]
    if not populated and not (y2 and len(y2[1]) > 0):
        fig.set_ranges((0, 1), (0, 1))
        fig.axes()
        fig.annotate_empty()
        return fig.render()
    xs_all = [x for _, xs, _ in populated for x in xs]
    ys_all = [y for _, _, ys in populated for y in ys]
    if y2 and len(y2[1]) > 0:
        xs_all += list(y2[1])
    if not xs_all:
        xs_all = [0.0, 1.0]
    if not ys_all:
        ys_all = [0.0, 1.0]
    y2_range = (min(y2[2]), max(y2[2])) if y2 and len(y2[2]) > 0 else None
    fig.set_ranges((min(xs_all), max(xs_all)), (min(ys_all), max(ys_all)), y2_range)
    fig.axes(y2=y2_range is not None)
    entries = []
    for i, (label, xs, ys) in enumerate(populated):
        color = PALETTE[i % len(PALETTE)]
        fig.polyline(xs, ys, color)
        entries.append((label, color))
    if y2 and len(y2[1]) > 0:
        color = "#555555"
        fig.polyline(y2[1], y2[2], color, width=1.0, secondary=True)
        entries.append((y2[0], color))
    if entries:
        fig.legend(entries)
    return fig.render()


def scatter_chart(label, xs, ys, *, title="", x_label="", y_label="") -> str:
    fig = Figure(title=title, x_label=x_label, y_label=y_label)
    if len(xs) == 0:
        fig.set_ranges((0, 1), (0, 1))
        fig.axes()
        fig.annotate_empty()
        return fig.render()
    fig.set_ranges((min(xs), max(xs)), (min(ys), max(ys)))
    fig.axes()
    fig.scatter(xs, ys, PALETTE[0])
    fig.legend([(label, PALETTE[0])])
    return fig.render()


def _quantile(sorted_vals, q):
    if not sorted_vals:
        return 0.0
    pos = q * (len(sorted_vals) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(sorted_vals) - 1)
    frac = pos - lo
    return sorted_vals[lo] * (1 - frac) + sorted_vals[hi] * frac


def box_plot(groups, *, title="", y_label="") -> str:
    """``groups``: list of (label, values). Whiskers at 1.5 IQR, outliers
    drawn individually (capped deterministically)."""
    fig = Figure(title=title, y_label=y_label)
    populated = [(lbl, sorted(vals)) for lbl, vals in groups if len(vals) > 0]
    if not populated:
        fig.set_ranges((0, 1), (0, 1))
        fig.axes()
        fig.annotate_empty()
        return fig.render()
    all_vals = [v for _, vals in populated for v in vals]
    fig.set_ranges((0, len(populated)), (min(all_vals), max(all_vals)))
    # y axis only
    fig.axes()
    slot = 1.0
    for i, (label, vals) in enumerate(populated):
        cx = fig.px(i + 0.5 * slot)
        q1, q2, q3 = (_quantile(vals, q) for q in (0.25, 0.5, 0.75))
        iqr = q3 - q1
        lo_w = min(v for v in vals if v >= q1 - 1.5 * iqr)
        hi_w = max(v for v in vals if v <= q3 + 1.5 * iqr)
        color = PALETTE[i % len(PALETTE)]
        half = min(30.0, (fig.width - fig.margin_left - fig.margin_right) / (len(populated) * 3))
        y1, y3 = fig.py(q1), fig.py(q3)
        fig.pixel_rect(cx - half, y3, 2 * half, max(0.5, y1 - y3), fill="none", stroke=color)
        fig.pixel_line(cx - half, fig.py(q2), cx + half, fig.py(q2), color, 2)
        for w in (lo_w, hi_w):
            fig.pixel_line(cx, fig.py(q1 if w == lo_w else q3), cx, fig.py(w), color, 1)
            fig.pixel_line(cx - half / 2, fig.py(w), cx + half / 2, fig.py(w), color, 1)
        outliers = [v for v in vals if v < q1 - 1.5 * iqr or v > q3 + 1.5 * iqr]
        for v in outliers[:200]:
            fig.pixel_circle(cx, fig.py(v), 1.5, color, opacity=0.5)
        fig.pixel_text(cx, fig.height - fig.margin_bottom + 18, label, size=10)
    return fig.render()
