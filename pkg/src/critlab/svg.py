"""Minimal SVG 1.1 line and histogram plots (no plotting dependency)."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 400
MARGIN = dict(left=60, right=20, top=36, bottom=44)
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


class _Frame:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.pw = W - MARGIN["left"] - MARGIN["right"]
        self.ph = H - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        return MARGIN["top"] + self.ph - (np.asarray(y) - self.y0) / (self.y1 - self.y0) * self.ph


def _fmt(v):
    return f"{v:.4g}"


def _axes(fr, title, xlabel, ylabel):
    out = [
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{fr.pw}" height="{fr.ph}" fill="none" stroke="#333"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{W / 2:.1f}" y="{H - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{H / 2:.1f}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {H / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for t in np.linspace(fr.x0, fr.x1, 5):
        x = fr.px(t)
        out.append(f'<text x="{x:.1f}" y="{MARGIN["top"] + fr.ph + 16}" text-anchor="middle" font-size="11">{_fmt(t)}</text>')
    for t in np.linspace(fr.y0, fr.y1, 5):
        y = fr.py(t)
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{_fmt(t)}</text>')
    return out


def _polyline(fr, x, y, color, label, idx):
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(fr.px(x), fr.py(y)))
    ly = MARGIN["top"] + 14 + 16 * idx
    lx = MARGIN["left"] + fr.pw - 150
    return [
        f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>',
        f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>',
        f'<text x="{lx + 24}" y="{ly}" font-size="11">{escape(label)}</text>',
    ]


def _document(body):
    head = f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">'
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>", ""])


def line_plot(series, title="", xlabel="x", ylabel="density") -> str:
    """``series``: list of (label, x, y)."""
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    fr = _Frame((xs.min(), xs.max()), (0.0, max(ys.max() * 1.05, 1e-300)))
    body = _axes(fr, title, xlabel, ylabel)
    for i, (label, x, y) in enumerate(series):
        body += _polyline(fr, x, y, COLORS[i % len(COLORS)], label, i)
    return _document(body)


def histogram_overlay(values, bins, curves=(), title="", xlabel="x", ylabel="density", weights=None) -> str:
    """Density histogram of ``values`` with optional (label, x, y) curves on top."""
    counts, edges = np.histogram(values, bins=bins, weights=weights, density=True)
    ymax = counts.max() if counts.size else 1.0
    for _, _, y in curves:
        ymax = max(ymax, float(np.max(y)))
    fr = _Frame((edges[0], edges[-1]), (0.0, ymax * 1.05))
    body = _axes(fr, title, xlabel, ylabel)
    base = fr.py(0.0)
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        x0, x1, top = fr.px(a), fr.px(b), fr.py(c)
        body.append(f'<rect x="{x0:.2f}" y="{top:.2f}" width="{x1 - x0:.2f}" height="{base - top:.2f}" fill="#c6dbef" stroke="#6baed6" stroke-width="0.5"/>')
    for i, (label, x, y) in enumerate(curves):
        body += _polyline(fr, x, y, COLORS[(i + 1) % len(COLORS)], label, i)
    return _document(body)
