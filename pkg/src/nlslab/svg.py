"""Self-contained SVG figures: line panels, log-log scatter, heat tables."""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
W, H = 640, 220
PAD_L, PAD_R, PAD_T, PAD_B = 70, 20, 24, 36


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


class _Panel:
    def __init__(self, top: float, xlim, ylim, xlabel: str, ylabel: str, logx=False, logy=False):
        self.top = top
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = (math.log10(v) for v in xlim) if logx else xlim
        self.y0, self.y1 = (math.log10(v) for v in ylim) if logy else ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1
        self.xlabel, self.ylabel = xlabel, ylabel

    def px(self, x):
        x = math.log10(x) if self.logx else x
        return PAD_L + (x - self.x0) / (self.x1 - self.x0) * (W - PAD_L - PAD_R)

    def py(self, y):
        y = math.log10(y) if self.logy else y
        return self.top + PAD_T + (self.y1 - y) / (self.y1 - self.y0) * (H - PAD_T - PAD_B)

    def frame(self, title: str) -> list[str]:
        left, right = PAD_L, W - PAD_R
        top, bottom = self.top + PAD_T, self.top + H - PAD_B
        out = [f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
               'fill="none" stroke="#444"/>',
               f'<text x="{left}" y="{top - 6}" font-size="12">{escape(title)}</text>',
               f'<text x="{(left + right) / 2}" y="{bottom + 30}" font-size="11" '
               f'text-anchor="middle">{escape(self.xlabel)}</text>',
               f'<text x="14" y="{(top + bottom) / 2}" font-size="11" text-anchor="middle" '
               f'transform="rotate(-90 14 {(top + bottom) / 2})">{escape(self.ylabel)}</text>']
        for t in _ticks(self.x0, self.x1):
            x = PAD_L + (t - self.x0) / (self.x1 - self.x0) * (right - left)
            label = _fmt(10 ** t) if self.logx else _fmt(t)
            out.append(f'<text x="{x:.1f}" y="{bottom + 14}" font-size="9" '
                       f'text-anchor="middle">{label}</text>')
        for t in _ticks(self.y0, self.y1):
            y = top + (self.y1 - t) / (self.y1 - self.y0) * (bottom - top)
            label = _fmt(10 ** t) if self.logy else _fmt(t)
            out.append(f'<text x="{left - 4}" y="{y + 3:.1f}" font-size="9" '
                       f'text-anchor="end">{label}</text>')
        return out

    def polyline(self, xs, ys, colour: str) -> str:
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}" for x, y in zip(xs, ys))
        return f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.3"/>'


def _document(body: list[str], height: float, stamp: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height:.0f}" '
            f'viewBox="0 0 {W} {height:.0f}" font-family="sans-serif">')
    foot = (f'<text x="{W - 4}" y="{height - 4:.0f}" font-size="8" fill="#777" '
            f'text-anchor="end">config {escape(stamp)}</text>')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, foot,
                      "</svg>"]) + "\n"


def _limits(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    pad = 0.05 * (hi - lo) if hi > lo else max(abs(lo), 1.0) * 0.05
    return lo - pad, hi + pad


def stacked_lines(path, t, series: dict, stamp: str, xlabel: str = "t",
                  unit: str = "") -> Path:
    """One panel per named series, sharing the time axis."""
    body = []
    for i, (name, ys) in enumerate(series.items()):
        panel = _Panel(i * H, (float(t[0]), float(t[-1])), _limits(ys), xlabel,
                       f"{name} {unit}".strip())
        body += panel.frame(name)
        body.append(panel.polyline(t, ys, PALETTE[i % len(PALETTE)]))
    path = Path(path)
    path.write_text(_document(body, H * max(1, len(series)) + 10, stamp))
    return path


def loglog_scatter(path, x, groups: dict, slopes: dict, stamp: str, xlabel: str = "eps",
                   ylabel: str = "|drift|") -> Path:
    """Scatter of each group with its fitted power law drawn through the geometric mean."""
    xs = np.asarray(x, dtype=float)
    ally = np.concatenate([np.asarray(v, dtype=float) for v in groups.values()])
    ally = ally[ally > 0]
    ylim = (float(ally.min()) / 2, float(ally.max()) * 2) if ally.size else (1e-16, 1.0)
    panel = _Panel(0, (float(xs.min()) / 1.2, float(xs.max()) * 1.2), ylim, xlabel, ylabel,
                   logx=True, logy=True)
    body = panel.frame("drift against eps")
    for i, (name, ys) in enumerate(groups.items()):
        colour = PALETTE[i % len(PALETTE)]
        ys = np.asarray(ys, dtype=float)
        for xv, yv in zip(xs, ys):
            if yv > 0:
                body.append(f'<circle cx="{panel.px(xv):.2f}" cy="{panel.py(yv):.2f}" r="3" '
                            f'fill="{colour}"/>')
        s = slopes.get(name)
        good = ys > 0
        if s is not None and np.isfinite(s) and good.sum() >= 2:
            lx, ly = np.log(xs[good]), np.log(ys[good])
            b = ly.mean() - s * lx.mean()
            ends = np.array([xs.min(), xs.max()])
            body.append(panel.polyline(ends, np.exp(b + s * np.log(ends)), colour))
        label = f"{name}: slope {_fmt(s)}" if s is not None else name
        body.append(f'<text x="{PAD_L + 8}" y="{PAD_T + 16 + 14 * i}" font-size="10" '
                    f'fill="{colour}">{escape(label)}</text>')
    path = Path(path)
    path.write_text(_document(body, H + 10, stamp))
    return path


def heat_table(path, rows, cols, values, stamp: str, title: str = "") -> Path:
    """Grid of cells shaded by log10 of the value; NaN cells are hatched grey."""
    values = np.asarray(values, dtype=float)
    cell = max(12, min(40, int(480 / max(len(rows), len(cols), 1))))
    left, top = 60, 40
    good = values[np.isfinite(values) & (values > 0)]
    lo, hi = (np.log10(good.min()), np.log10(good.max())) if good.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    body = [f'<text x="{left}" y="24" font-size="12">{escape(title)}</text>']
    for i, r in enumerate(rows):
        body.append(f'<text x="{left - 4}" y="{top + cell * i + cell * 0.65:.1f}" font-size="9" '
                    f'text-anchor="end">{escape(str(r))}</text>')
        for j in range(len(cols)):
            v = values[i, j]
            if np.isfinite(v) and v > 0:
                s = (np.log10(v) - lo) / span
                shade = f"rgb({int(255 * s)},{int(80 + 100 * (1 - s))},{int(255 * (1 - s))})"
            else:
                shade = "#ccc"
            body.append(f'<rect x="{left + cell * j}" y="{top + cell * i}" width="{cell}" '
                        f'height="{cell}" fill="{shade}" stroke="white"/>')
    for j, c in enumerate(cols):
        body.append(f'<text x="{left + cell * j + cell / 2:.1f}" y="{top - 4}" font-size="9" '
                    f'text-anchor="middle">{escape(str(c))}</text>')
    height = top + cell * len(rows) + 30
    body.append(f'<text x="{left}" y="{height - 12}" font-size="9">log10 range '
                f'[{lo:.2f}, {hi:.2f}]</text>')
    path = Path(path)
    path.write_text(_document(body, height, stamp))
    return path


__all__ = ["stacked_lines", "loglog_scatter", "heat_table"]
