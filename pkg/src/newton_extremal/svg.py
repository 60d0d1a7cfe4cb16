"""Minimal SVG writers: polylines on shared axes and a sign heatmap."""
from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


def _fmt(x):
    return f"{x:.3f}"


def polyline_svg(series, title="", width=640, height=400, pad=48):
    """``series`` is a list of (label, x, y); finite points only are drawn."""
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    ok = np.isfinite(xs) & np.isfinite(ys)
    x0, x1 = xs[ok].min(), xs[ok].max()
    y0, y1 = ys[ok].min(), ys[ok].max()
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    sx = lambda x: pad + (x - x0) / (x1 - x0) * (width - 2 * pad)
    sy = lambda y: height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{pad}" y="{pad // 2}" font-size="14">{escape(title)}</text>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{pad}" y="{height - pad + 16}" font-size="11">{x0:.4g}</text>',
           f'<text x="{width - pad}" y="{height - pad + 16}" font-size="11" text-anchor="end">{x1:.4g}</text>',
           f'<text x="{pad - 4}" y="{height - pad}" font-size="11" text-anchor="end">{y0:.4g}</text>',
           f'<text x="{pad - 4}" y="{pad + 4}" font-size="11" text-anchor="end">{y1:.4g}</text>']
    for k, (label, x, y) in enumerate(series):
        x, y = np.asarray(x, float), np.asarray(y, float)
        good = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x[good], y[good]))
        color = _COLORS[k % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{width - pad}" y="{pad + 14 * (k + 1)}" font-size="11" '
                   f'text-anchor="end" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sign_heatmap_svg(x, y, values, title="", size=400, pad=40):
    """Cells at the points (x[i], y[i]) coloured blue (negative), red (positive) or grey (missing)."""
    x, y, values = np.asarray(x, float), np.asarray(y, float), np.asarray(values, float)
    span = lambda a: (a.min(), a.max() if a.max() > a.min() else a.min() + 1.0)
    (x0, x1), (y0, y1) = span(x), span(y)
    cell = max(2.0, (size - 2 * pad) / max(np.unique(x).size, 1))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>',
           f'<text x="{pad}" y="{pad // 2}" font-size="14">{escape(title)}</text>']
    for a, b, v in zip(x, y, values):
        color = "#cccccc" if not np.isfinite(v) else ("#3060c0" if v < 0 else "#c03030")
        px = pad + (a - x0) / (x1 - x0) * (size - 2 * pad - cell)
        py = size - pad - cell - (b - y0) / (y1 - y0) * (size - 2 * pad - cell)
        out.append(f'<rect x="{_fmt(px)}" y="{_fmt(py)}" width="{_fmt(cell)}" height="{_fmt(cell)}" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
