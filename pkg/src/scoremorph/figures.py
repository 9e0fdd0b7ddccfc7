"""Interval-band figures: band computation plus a minimal SVG scatter plot.

The SVG is assembled by hand so identical inputs produce byte-identical
files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .transforms import TransformFamily


@dataclass(frozen=True)
class Band:
    """Interval band sampled at data points, sorted by the axis coordinate."""

    axis: np.ndarray
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    y: np.ndarray


def compute_band(fam: TransformFamily, predict, xs, axis_values, y,
                 q_hat: float) -> Band:
    """Evaluate [f(x) - D(x), f(x) + D(x)] at every point, sorted by axis."""
    xs = np.asarray(xs, dtype=float)
    axis_values = np.asarray(axis_values, dtype=float)
    center = np.asarray(predict(xs), dtype=float)
    half = np.sqrt(np.asarray(fam.inverse_batch(xs, q_hat), dtype=float))
    order = np.argsort(axis_values, kind="stable")
    return Band(axis_values[order], center[order], (center - half)[order],
                (center + half)[order], np.asarray(y, dtype=float)[order])


def band_csv(band: Band) -> str:
    lines = ["# scoremorph band format_version=1", "axis,center,lower,upper"]
    for i in range(band.axis.shape[0]):
        cells = (band.axis[i], band.center[i], band.lower[i], band.upper[i])
        lines.append(",".join(repr(float(c)) for c in cells))
    return "\n".join(lines) + "\n"


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo
    if span <= 0:
        span = 1.0
    return out_lo + (values - lo) / span * (out_hi - out_lo)


def render_svg(band: Band, title: str = "", width: int = 640,
               height: int = 480) -> str:
    """Scatter of (axis, y) with the shaded interval band and center line."""
    ml, mr, mt, mb = 50, 15, 30, 40
    x_lo, x_hi = float(band.axis.min()), float(band.axis.max())
    y_all = np.concatenate([band.y, band.lower, band.upper])
    y_lo, y_hi = float(y_all.min()), float(y_all.max())
    pad = 0.05 * max(y_hi - y_lo, 1e-12)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(v):
        return _scale(np.asarray(v, dtype=float), x_lo, x_hi, ml, width - mr)

    def py(v):
        return _scale(np.asarray(v, dtype=float), y_lo, y_hi, height - mb, mt)

    def pts(xv, yv):
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(xv), py(yv)))

    band_points = (pts(band.axis, band.upper) + " "
                   + pts(band.axis[::-1], band.lower[::-1]))
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<!-- scoremorph figure format_version=1 -->',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<polygon points="{band_points}" fill="#9ecae1" fill-opacity="0.6" '
        'stroke="none"/>',
        f'<polyline points="{pts(band.axis, band.center)}" fill="none" '
        'stroke="#08519c" stroke-width="1.5"/>',
    ]
    for i in range(band.axis.shape[0]):
        out.append(f'<circle cx="{px(band.axis[i]):.2f}" '
                   f'cy="{py(band.y[i]):.2f}" r="2" fill="#333333" '
                   'fill-opacity="0.7"/>')
    # axes with min/max tick labels
    out.append(f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" '
               f'y2="{height - mb}" stroke="black"/>')
    out.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" '
               'stroke="black"/>')
    out.append(f'<text x="{ml}" y="{height - mb + 16}" font-size="11" '
               f'text-anchor="middle">{x_lo:.3g}</text>')
    out.append(f'<text x="{width - mr}" y="{height - mb + 16}" font-size="11" '
               f'text-anchor="middle">{x_hi:.3g}</text>')
    out.append(f'<text x="{ml - 6}" y="{height - mb}" font-size="11" '
               f'text-anchor="end">{y_lo:.3g}</text>')
    out.append(f'<text x="{ml - 6}" y="{mt + 4}" font-size="11" '
               f'text-anchor="end">{y_hi:.3g}</text>')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" font-size="13" '
                   f'text-anchor="middle">{title}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
