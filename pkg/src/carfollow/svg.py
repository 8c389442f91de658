"""Small self-contained SVG charts (line, scatter, categorical heatmap)."""
from __future__ import annotations

from html import escape

import numpy as np

W, H = 640, 420
ML, MR, MT, MB = 70, 20, 40, 55
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def _range(values):
    v = np.concatenate([np.asarray(x, dtype=float).ravel() for x in values])
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.03 * (hi - lo)
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, title, xlabel, ylabel, xr, yr):
        self.xr, self.yr = xr, yr
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
            'font-family="sans-serif" font-size="12">',
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
            f'<text x="16" y="{H / 2}" text-anchor="middle" transform="rotate(-90 16 {H / 2})">{escape(ylabel)}</text>',
            f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="black"/>',
        ]
        for t in _ticks(*xr):
            x = self.px(t)
            self.parts.append(f'<line x1="{x:.1f}" y1="{H - MB}" x2="{x:.1f}" y2="{H - MB + 4}" stroke="black"/>'
                              f'<text x="{x:.1f}" y="{H - MB + 17}" text-anchor="middle">{t:.4g}</text>')
        for t in _ticks(*yr):
            y = self.py(t)
            self.parts.append(f'<line x1="{ML - 4}" y1="{y:.1f}" x2="{ML}" y2="{y:.1f}" stroke="black"/>'
                              f'<text x="{ML - 7}" y="{y + 4:.1f}" text-anchor="end">{t:.4g}</text>')

    def px(self, x):
        lo, hi = self.xr
        return ML + (np.asarray(x, dtype=float) - lo) / (hi - lo) * (W - ML - MR)

    def py(self, y):
        lo, hi = self.yr
        return H - MB - (np.asarray(y, dtype=float) - lo) / (hi - lo) * (H - MT - MB)

    def legend(self, labels, colors):
        for k, (lab, col) in enumerate(zip(labels, colors)):
            y = MT + 14 + 16 * k
            self.parts.append(f'<rect x="{W - MR - 150}" y="{y - 9}" width="10" height="10" fill="{col}"/>'
                              f'<text x="{W - MR - 135}" y="{y}">{escape(str(lab))}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_chart(xs, ys, labels=None, title="", xlabel="", ylabel="") -> str:
    """One polyline per (x, y) pair; NaNs break the line."""
    c = _Canvas(title, xlabel, ylabel, _range(xs), _range(ys))
    colors = [PALETTE[k % len(PALETTE)] for k in range(len(xs))]
    for x, y, col in zip(xs, ys, colors):
        px, py = c.px(x), c.py(y)
        ok = np.isfinite(px) & np.isfinite(py)
        segments = np.split(np.arange(len(px)), np.flatnonzero(~ok))
        for seg in segments:
            seg = seg[ok[seg]]
            if seg.size < 2:
                continue
            pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px[seg], py[seg]))
            c.parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.2"/>')
    if labels:
        c.legend(labels, colors)
    return c.render()


def scatter_chart(xs, ys, labels=None, title="", xlabel="", ylabel="", colors=None, radius=2.0,
                  curve=None) -> str:
    """Point clouds; ``colors`` may hold one colour per point for a single series.

    ``curve`` is an optional (x, y) pair drawn as a black line on top.
    """
    c = _Canvas(title, xlabel, ylabel, _range(xs), _range(ys))
    series_colors = [PALETTE[k % len(PALETTE)] for k in range(len(xs))]
    for k, (x, y) in enumerate(zip(xs, ys)):
        px, py = c.px(x), c.py(y)
        for j, (a, b) in enumerate(zip(px, py)):
            if not (np.isfinite(a) and np.isfinite(b)):
                continue
            col = colors[j] if colors is not None and len(xs) == 1 else series_colors[k]
            c.parts.append(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="{radius}" fill="{col}"/>')
    if curve is not None:
        px, py = c.px(curve[0]), c.py(curve[1])
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py) if np.isfinite(a) and np.isfinite(b))
        c.parts.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')
    if labels:
        c.legend(labels, series_colors)
    return c.render()


def speed_color(v, v_max) -> str:
    """Red (slow) to green (fast)."""
    f = 0.0 if v_max <= 0 else float(np.clip(v / v_max, 0.0, 1.0))
    return f"rgb({int(220 * (1 - f))},{int(180 * f)},40)"


def space_time_chart(traj, title="space-time", stride: int = 10, max_points: int = 20000) -> str:
    """Vehicle positions over time, coloured by speed."""
    pos = traj.position if traj.ring_length is None else np.mod(traj.position, traj.ring_length)
    step = max(stride, int(np.ceil(pos.size / stride / max_points)) * stride)
    idx = np.arange(0, len(traj.time), step)
    t = np.repeat(traj.time[idx], traj.n_vehicles)
    x = pos[idx].ravel()
    v = traj.velocity[idx].ravel()
    vmax = float(np.nanmax(traj.velocity)) if traj.velocity.size else 1.0
    return scatter_chart([t], [x], title=title, xlabel="time (s)", ylabel="position (m)",
                         colors=[speed_color(s, vmax) for s in v], radius=1.0)


def heatmap_chart(grid_x, grid_y, labels, palette: dict, title="", xlabel="", ylabel="") -> str:
    """Categorical heatmap; ``labels[i, j]`` belongs to (grid_x[j], grid_y[i])."""
    gx, gy = np.asarray(grid_x, float), np.asarray(grid_y, float)

    def edges(g):
        if g.size == 1:
            return np.array([g[0] - 0.5, g[0] + 0.5])
        mid = 0.5 * (g[1:] + g[:-1])
        return np.concatenate([[g[0] - (mid[0] - g[0])], mid, [g[-1] + (g[-1] - mid[-1])]])

    ex, ey = edges(gx), edges(gy)
    c = _Canvas(title, xlabel, ylabel, (ex[0], ex[-1]), (ey[0], ey[-1]))
    for i in range(gy.size):
        for j in range(gx.size):
            x0, x1 = c.px(ex[j]), c.px(ex[j + 1])
            y0, y1 = c.py(ey[i + 1]), c.py(ey[i])
            col = palette.get(str(labels[i, j]), "#cccccc")
            c.parts.append(f'<rect x="{x0:.1f}" y="{y0:.1f}" width="{x1 - x0 + 0.3:.1f}" '
                           f'height="{y1 - y0 + 0.3:.1f}" fill="{col}"/>')
    c.legend(list(palette), list(palette.values()))
    return c.render()
