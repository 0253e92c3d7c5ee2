"""Tiny SVG line-chart writer so runs can be eyeballed without a plotting
stack.  Output is deterministic: fixed canvas, fixed palette, floats
formatted with a fixed precision."""

import math

WIDTH = 720
HEIGHT = 440
MARGIN_L = 70
MARGIN_R = 20
MARGIN_T = 40
MARGIN_B = 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v):
    return f"{v:.2f}"


def _label(v):
    if v == 0:
        return "0"
    a = abs(v)
    if 1e-3 <= a < 1e4:
        return f"{v:.4g}"
    return f"{v:.2e}"


def _finite_range(values):
    lo = math.inf
    hi = -math.inf
    for v in values:
        if math.isfinite(v):
            lo = min(lo, v)
            hi = max(hi, v)
    if lo > hi:
        return 0.0, 1.0
    if lo == hi:
        pad = 1.0 if lo == 0 else abs(lo) * 0.1
        return lo - pad, hi + pad
    return lo, hi


def write_line_chart(path, x, series, title="", xlabel="", ylabel="",
                     logy=False):
    """Write named series against a shared x axis as an SVG file.

    series maps legend names to y arrays; non-finite points break the
    polyline.  logy plots log10 of positive values and drops the rest.
    """
    xs = [float(v) for v in x]
    data = {}
    for name, ys in series.items():
        ys = [float(v) for v in ys]
        if len(ys) != len(xs):
            raise ValueError(f"series {name!r} length mismatch")
        if logy:
            ys = [math.log10(v) if v > 0 else math.nan for v in ys]
        data[name] = ys
    x_lo, x_hi = _finite_range(xs)
    y_lo, y_hi = _finite_range([v for ys in data.values() for v in ys])
    x_span = x_hi - x_lo or 1.0
    y_span = y_hi - y_lo or 1.0
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(v):
        return MARGIN_L + (v - x_lo) / x_span * plot_w

    def py(v):
        return MARGIN_T + (y_hi - v) / y_span * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#444"/>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" '
                     f'font-size="15" font-family="sans-serif">{title}</text>')
    if xlabel:
        parts.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" '
                     f'text-anchor="middle" font-size="12" '
                     f'font-family="sans-serif">{xlabel}</text>')
    if ylabel:
        yl = ylabel + (" (log10)" if logy else "")
        parts.append(f'<text x="16" y="{HEIGHT // 2}" text-anchor="middle" '
                     f'font-size="12" font-family="sans-serif" '
                     f'transform="rotate(-90 16 {HEIGHT // 2})">{yl}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yv = y_lo + frac * y_span
        yy = _fmt(py(yv))
        parts.append(f'<line x1="{MARGIN_L}" y1="{yy}" '
                     f'x2="{WIDTH - MARGIN_R}" y2="{yy}" stroke="#ddd"/>')
        parts.append(f'<text x="{MARGIN_L - 6}" y="{yy}" text-anchor="end" '
                     f'dominant-baseline="middle" font-size="11" '
                     f'font-family="sans-serif">{_label(yv)}</text>')
        xv = x_lo + frac * x_span
        xx = _fmt(px(xv))
        parts.append(f'<text x="{xx}" y="{HEIGHT - MARGIN_B + 16}" '
                     f'text-anchor="middle" font-size="11" '
                     f'font-family="sans-serif">{_label(xv)}</text>')
    for k, (name, ys) in enumerate(data.items()):
        color = PALETTE[k % len(PALETTE)]
        points = []
        runs = []
        for xv, yv in zip(xs, ys):
            if math.isfinite(yv):
                points.append(f"{_fmt(px(xv))},{_fmt(py(yv))}")
            elif points:
                runs.append(points)
                points = []
        if points:
            runs.append(points)
        for run in runs:
            if len(run) == 1:
                cx, cy = run[0].split(",")
                parts.append(f'<circle cx="{cx}" cy="{cy}" r="2" '
                             f'fill="{color}"/>')
            else:
                parts.append(f'<polyline points="{" ".join(run)}" '
                             f'fill="none" stroke="{color}" '
                             f'stroke-width="1.5"/>')
        ly = MARGIN_T + 14 + 16 * k
        parts.append(f'<line x1="{WIDTH - MARGIN_R - 130}" y1="{ly - 4}" '
                     f'x2="{WIDTH - MARGIN_R - 110}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{WIDTH - MARGIN_R - 104}" y="{ly}" '
                     f'font-size="11" font-family="sans-serif">{name}</text>')
    parts.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
