"""Minimal deterministic SVG plots (line panels and scatters).

Hand-rolled rather than delegating to a plotting library so that report
artifacts are byte-identical across reruns; floats are emitted with repr
and nothing depends on timestamps or hashed ids.
"""

from __future__ import annotations

import math


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


class _Panel:
    def __init__(self, x0, y0, width, height, title):
        self.x0, self.y0 = x0, y0
        self.w, self.h = width, height
        self.title = title
        self.elements: list[str] = []

    def scaler(self, xs, ys):
        x_min, x_max = min(xs), max(xs)
        y_min, y_max = min(ys), max(ys)
        if x_max == x_min:
            x_max = x_min + 1.0
        if y_max == y_min:
            y_max = y_min + 1.0
        pad_y = 0.05 * (y_max - y_min)
        y_min, y_max = y_min - pad_y, y_max + pad_y

        def to_px(x, y):
            px = self.x0 + (x - x_min) / (x_max - x_min) * self.w
            py = self.y0 + self.h - (y - y_min) / (y_max - y_min) * self.h
            return px, py

        self.bounds = (x_min, x_max, y_min, y_max)
        return to_px

    def frame(self):
        x_min, x_max, y_min, y_max = self.bounds
        out = [
            f'<rect x="{_fmt(self.x0)}" y="{_fmt(self.y0)}" width="{_fmt(self.w)}" height="{_fmt(self.h)}" '
            'fill="none" stroke="#444" stroke-width="1"/>',
            f'<text x="{_fmt(self.x0 + self.w / 2)}" y="{_fmt(self.y0 - 6)}" text-anchor="middle" '
            f'font-size="12" font-family="monospace">{self.title}</text>',
            f'<text x="{_fmt(self.x0 - 4)}" y="{_fmt(self.y0 + self.h)}" text-anchor="end" '
            f'font-size="9" font-family="monospace">{_fmt(y_min)}</text>',
            f'<text x="{_fmt(self.x0 - 4)}" y="{_fmt(self.y0 + 9)}" text-anchor="end" '
            f'font-size="9" font-family="monospace">{_fmt(y_max)}</text>',
            f'<text x="{_fmt(self.x0)}" y="{_fmt(self.y0 + self.h + 12)}" text-anchor="middle" '
            f'font-size="9" font-family="monospace">{_fmt(x_min)}</text>',
            f'<text x="{_fmt(self.x0 + self.w)}" y="{_fmt(self.y0 + self.h + 12)}" text-anchor="middle" '
            f'font-size="9" font-family="monospace">{_fmt(x_max)}</text>',
        ]
        return out + self.elements


def _document(width, height, body):
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n<rect width="100%" height="100%" fill="white"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def line_panels_svg(panels, vline_x=None, width=1000, height=600, columns=3) -> str:
    """Grid of line panels: [(title, [(series_label, xs, ys), ...]), ...].

    An optional dashed vertical line (e.g. the early-stopping epoch) is
    drawn in every panel at vline_x.
    """
    rows = math.ceil(len(panels) / columns)
    margin, gap_x, gap_y = 50, 40, 45
    pw = (width - margin * 2 - gap_x * (columns - 1)) / columns
    ph = (height - margin * 2 - gap_y * (rows - 1)) / rows
    palette = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")
    body = []
    for k, (title, series) in enumerate(panels):
        row, col = divmod(k, columns)
        panel = _Panel(margin + col * (pw + gap_x), margin + row * (ph + gap_y), pw, ph, title)
        all_x = [x for _, xs, _ in series for x in xs]
        all_y = [y for _, _, ys in series for y in ys]
        to_px = panel.scaler(all_x, all_y)
        for s_idx, (label, xs, ys) in enumerate(series):
            pts = " ".join("{},{}".format(_fmt(px), _fmt(py)) for px, py in (to_px(x, y) for x, y in zip(xs, ys)))
            panel.elements.append(
                f'<polyline points="{pts}" fill="none" stroke="{palette[s_idx % len(palette)]}" stroke-width="1.5"/>'
            )
        if vline_x is not None:
            px, _ = to_px(vline_x, all_y[0])
            panel.elements.append(
                f'<line x1="{_fmt(px)}" y1="{_fmt(panel.y0)}" x2="{_fmt(px)}" y2="{_fmt(panel.y0 + panel.h)}" '
                'stroke="#555" stroke-width="1" stroke-dasharray="4,3"/>'
            )
        body.extend(panel.frame())
    return _document(width, height, body)


def scatter_svg(points, title, x_label, y_label, width=640, height=560, diagonal=True) -> str:
    """Scatter of dicts {x, y, label, size}; marker radius scales with size."""
    if not points:
        raise ValueError("no points to plot")
    margin = 70
    panel = _Panel(margin, margin, width - 2 * margin, height - 2 * margin, title)
    xs = [p["x"] for p in points]
    ys = [p["y"] for p in points]
    to_px = panel.scaler(xs + ys, ys + xs) if diagonal else panel.scaler(xs, ys)
    sizes = [p.get("size", 1.0) for p in points]
    s_max = max(sizes)
    body = []
    if diagonal:
        lo = max(panel.bounds[0], panel.bounds[2])
        hi = min(panel.bounds[1], panel.bounds[3])
        if hi > lo:
            (x1, y1), (x2, y2) = to_px(lo, lo), to_px(hi, hi)
            body.append(
                f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
                'stroke="#bbb" stroke-width="1" stroke-dasharray="2,3"/>'
            )
    for p in points:
        px, py = to_px(p["x"], p["y"])
        radius = 3.0 + 9.0 * math.sqrt(p.get("size", 1.0) / s_max)
        body.append(
            f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="{_fmt(radius)}" fill="#1f77b4" fill-opacity="0.55" '
            'stroke="#1f77b4"/>'
        )
        body.append(
            f'<text x="{_fmt(px)}" y="{_fmt(py - radius - 3)}" text-anchor="middle" font-size="10" '
            f'font-family="monospace">{p.get("label", "")}</text>'
        )
    body.append(
        f'<text x="{_fmt(width / 2)}" y="{_fmt(height - 18)}" text-anchor="middle" font-size="11" '
        f'font-family="monospace">{x_label}</text>'
    )
    body.append(
        f'<text x="16" y="{_fmt(height / 2)}" text-anchor="middle" font-size="11" font-family="monospace" '
        f'transform="rotate(-90 16 {_fmt(height / 2)})">{y_label}</text>'
    )
    return _document(width, height, panel.frame() + body)
