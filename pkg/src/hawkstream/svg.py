"""Dependency-free SVG line charts for grid diagnostics."""

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def line_chart(series, path, title="", x_label="", y_label="", size=(640, 420)):
    """Write a simple multi-series line chart.

    ``series`` maps a legend label to a list of (x, y) points.
    """
    width, height = size
    ml, mr, mt, mb = 60, 20, 40, 50
    plot_w = width - ml - mr
    plot_h = height - mt - mb

    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    if not xs:
        raise ValueError("no points to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys)), max(1.0, max(ys))
    if x1 == x0:
        x1 = x0 + 1.0

    def px(x):
        return ml + (x - x0) / (x1 - x0) * plot_w

    def py(y):
        return mt + (1.0 - (y - y0) / (y1 - y0)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt+plot_h}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt+plot_h}" x2="{ml+plot_w}" y2="{mt+plot_h}" stroke="black"/>',
        f'<text x="{ml+plot_w/2:.0f}" y="{height-10}" text-anchor="middle" font-size="12">{x_label}</text>',
        f'<text x="15" y="{mt+plot_h/2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {mt+plot_h/2:.0f})">{y_label}</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yv = y0 + frac * (y1 - y0)
        parts.append(
            f'<text x="{ml-8}" y="{py(yv)+4:.1f}" text-anchor="end" font-size="10">{yv:.2f}</text>'
        )
        xv = x0 + frac * (x1 - x0)
        parts.append(
            f'<text x="{px(xv):.1f}" y="{mt+plot_h+16}" text-anchor="middle" font-size="10">{xv:.2f}</text>'
        )
    for i, (label, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = sorted(pts)
        coords = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        for x, y in pts:
            parts.append(
                f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="2.5" fill="{color}"/>'
            )
        ly = mt + 14 + 16 * i
        parts.append(
            f'<line x1="{ml+plot_w-110}" y1="{ly-4}" x2="{ml+plot_w-90}" y2="{ly-4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{ml+plot_w-84}" y="{ly}" font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
