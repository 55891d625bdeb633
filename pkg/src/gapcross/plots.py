"""Minimal SVG emission for run artifacts (line panels and bar charts).

Hand-rolled on purpose: plots must be regenerable anywhere from CSVs with no
rendering stack installed.
"""

import math

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#17becf", "#7f7f7f")


def _ticks(lo: float, hi: float, n: int = 5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / max(n, 1)))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * span:
        out.append(round(t, 10))
        t += step
    return out or [lo]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


class _Panel:
    def __init__(self, x0, y0, width, height, xlim, ylim):
        self.x0, self.y0 = x0, y0
        self.w, self.h = width, height
        self.xlim, self.ylim = xlim, ylim

    def px(self, x):
        lo, hi = self.xlim
        frac = 0.0 if hi == lo else (x - lo) / (hi - lo)
        return self.x0 + frac * self.w

    def py(self, y):
        lo, hi = self.ylim
        frac = 0.0 if hi == lo else (y - lo) / (hi - lo)
        return self.y0 + self.h - frac * self.h


def _finite_range(values, pad=0.05):
    vals = [v for v in values if math.isfinite(v)]
    if not vals:
        return (0.0, 1.0)
    lo, hi = min(vals), max(vals)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    span = hi - lo
    return lo - pad * span, hi + pad * span


def line_panels(panels, title: str = "", width: int = 900,
                panel_height: int = 200, shaded_spans=None) -> str:
    """Stacked line panels sharing an x-axis.

    panels: list of dicts {"ylabel": str, "series": [(name, xs, ys), ...]}.
    shaded_spans: [(x_start, x_end), ...] drawn as grey bands on every panel.
    """
    margin_l, margin_r, margin_t, margin_b = 70, 20, 40, 40
    n = len(panels)
    height = margin_t + n * (panel_height + 30) + margin_b
    all_x = [x for p in panels for (_, xs, _) in p["series"] for x in xs]
    xlim = _finite_range(all_x, pad=0.0)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{width / 2}" y="20" text-anchor="middle" '
                   f'font-size="15">{title}</text>')
    for pi, p in enumerate(panels):
        y0 = margin_t + pi * (panel_height + 30)
        ys_all = [y for (_, _, ys) in p["series"] for y in ys]
        ylim = _finite_range(ys_all)
        panel = _Panel(margin_l, y0, width - margin_l - margin_r,
                       panel_height, xlim, ylim)
        for (s, e) in (shaded_spans or []):
            out.append(f'<rect x="{panel.px(s):.1f}" y="{y0}" '
                       f'width="{max(panel.px(e) - panel.px(s), 0.5):.1f}" '
                       f'height="{panel_height}" fill="#bbbbbb" opacity="0.4"/>')
        out.append(f'<rect x="{margin_l}" y="{y0}" '
                   f'width="{panel.w}" height="{panel_height}" fill="none" '
                   f'stroke="#333"/>')
        for t in _ticks(*ylim):
            out.append(f'<line x1="{margin_l - 4}" y1="{panel.py(t):.1f}" '
                       f'x2="{margin_l}" y2="{panel.py(t):.1f}" stroke="#333"/>'
                       f'<text x="{margin_l - 8}" y="{panel.py(t) + 4:.1f}" '
                       f'text-anchor="end">{_fmt(t)}</text>')
        for t in _ticks(*xlim, n=8):
            out.append(f'<line x1="{panel.px(t):.1f}" '
                       f'y1="{y0 + panel_height}" x2="{panel.px(t):.1f}" '
                       f'y2="{y0 + panel_height + 4}" stroke="#333"/>')
            if pi == n - 1:
                out.append(f'<text x="{panel.px(t):.1f}" '
                           f'y="{y0 + panel_height + 18}" '
                           f'text-anchor="middle">{_fmt(t)}</text>')
        for si, (name, xs, ys) in enumerate(p["series"]):
            color = PALETTE[si % len(PALETTE)]
            pts = " ".join(f"{panel.px(x):.1f},{panel.py(y):.1f}"
                           for x, y in zip(xs, ys)
                           if math.isfinite(x) and math.isfinite(y))
            out.append(f'<polyline points="{pts}" fill="none" '
                       f'stroke="{color}" stroke-width="1.3"/>')
            out.append(f'<text x="{width - margin_r - 150}" '
                       f'y="{y0 + 16 + 14 * si}" fill="{color}">{name}</text>')
        out.append(f'<text x="16" y="{y0 + panel_height / 2:.1f}" '
                   f'transform="rotate(-90 16 {y0 + panel_height / 2:.1f})" '
                   f'text-anchor="middle">{p["ylabel"]}</text>')
    out.append("</svg>")
    return "\n".join(out)


def bar_chart(labels, values, ylabel: str, title: str = "",
              width: int = 900, height: int = 360,
              second_values=None, second_label: str = "") -> str:
    """Grouped bar chart (one or two series per label)."""
    margin_l, margin_r, margin_t, margin_b = 70, 20, 50, 60
    vals = list(values) + list(second_values or [])
    finite = [v for v in vals if math.isfinite(v)]
    hi = max(finite + [0.0]) * 1.1 if finite else 1.0
    lo = min(finite + [0.0])
    panel = _Panel(margin_l, margin_t, width - margin_l - margin_r,
                   height - margin_t - margin_b, (0, len(labels)), (lo, hi))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{width / 2}" y="24" text-anchor="middle" '
                   f'font-size="15">{title}</text>')
    out.append(f'<rect x="{margin_l}" y="{margin_t}" width="{panel.w}" '
               f'height="{panel.h}" fill="none" stroke="#333"/>')
    for t in _ticks(lo, hi):
        out.append(f'<line x1="{margin_l - 4}" y1="{panel.py(t):.1f}" '
                   f'x2="{margin_l}" y2="{panel.py(t):.1f}" stroke="#333"/>'
                   f'<text x="{margin_l - 8}" y="{panel.py(t) + 4:.1f}" '
                   f'text-anchor="end">{_fmt(t)}</text>')
    ngroups = 2 if second_values is not None else 1
    slot = panel.w / max(len(labels), 1)
    bar_w = slot * 0.7 / ngroups
    y_zero = panel.py(max(lo, 0.0))
    for i, label in enumerate(labels):
        for gi in range(ngroups):
            v = values[i] if gi == 0 else second_values[i]
            if not math.isfinite(v):
                continue
            x = margin_l + i * slot + slot * 0.15 + gi * bar_w
            y = panel.py(v)
            top, hgt = (y, y_zero - y) if v >= 0 else (y_zero, y - y_zero)
            out.append(f'<rect x="{x:.1f}" y="{top:.1f}" width="{bar_w:.1f}" '
                       f'height="{max(hgt, 0.5):.1f}" '
                       f'fill="{PALETTE[gi]}" opacity="0.85"/>')
        out.append(f'<text x="{margin_l + (i + 0.5) * slot:.1f}" '
                   f'y="{height - margin_b + 16}" '
                   f'text-anchor="middle">{label}</text>')
    out.append(f'<text x="16" y="{(margin_t + height - margin_b) / 2:.1f}" '
               f'transform="rotate(-90 16 '
               f'{(margin_t + height - margin_b) / 2:.1f})" '
               f'text-anchor="middle">{ylabel}</text>')
    if second_values is not None and second_label:
        out.append(f'<text x="{width - margin_r - 160}" y="{margin_t + 14}" '
                   f'fill="{PALETTE[0]}">{ylabel}</text>')
        out.append(f'<text x="{width - margin_r - 160}" y="{margin_t + 28}" '
                   f'fill="{PALETTE[1]}">{second_label}</text>')
    out.append("</svg>")
    return "\n".join(out)
