"""JSON, CSV and SVG artifacts.

SVG charts are hand-written (fixed ``0 0 800 400`` view box) so the
outputs need nothing beyond the standard library to inspect. Every
plotted value is repeated in a ``<title>`` element with 6 significant
digits.
"""

import csv
import json
from xml.sax.saxutils import escape

import numpy as np

from .distill import LossBreakdown
from .spectral import profile_to_dict

WIDTH, HEIGHT = 800, 400
_MARGIN = 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def fmt(v):
    return f"{float(v):.6g}"


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_profile_json(path, profile):
    write_json(path, profile_to_dict(profile))


def write_spectra_csv(path, profile):
    width = max(len(s.values) for s in profile.spectra)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "intensity"] + [f"s{i}" for i in range(width)])
        for s, ell in zip(profile.spectra, profile.intensities):
            w.writerow([s.layer_index, repr(float(ell))] + [repr(float(v)) for v in s.values])


def write_histogram_csv(path, hist):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lower", "count"])
        for lower, count in hist:
            w.writerow([repr(float(lower)), count])


def write_losses_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step"] + list(LossBreakdown.FIELDS))
        for step, b in enumerate(history):
            w.writerow([step] + [repr(float(v)) for v in b.as_row()])


def _scale(values, lo, hi, out_lo, out_hi):
    if hi == lo:
        return [0.5 * (out_lo + out_hi)] * len(values)
    return [out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo) for v in values]


def _frame(title, xlabel, ylabel):
    x0, y0, x1, y1 = _MARGIN, _MARGIN, WIDTH - _MARGIN, HEIGHT - _MARGIN
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="25" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {HEIGHT // 2})">{escape(ylabel)}</text>',
    ]


def line_chart_svg(series, title, xlabel="layer", ylabel="intensity"):
    """``series`` is a list of ``(label, xs, ys)``; all share the axes."""
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    xlo, xhi = min(xs_all), max(xs_all)
    ylo, yhi = min(0.0, min(ys_all)), max(ys_all)
    parts = _frame(title, xlabel, ylabel)
    parts.append(f'<text x="{_MARGIN - 5}" y="{HEIGHT - _MARGIN}" text-anchor="end" font-size="10">{fmt(ylo)}</text>')
    parts.append(f'<text x="{_MARGIN - 5}" y="{_MARGIN + 4}" text-anchor="end" font-size="10">{fmt(yhi)}</text>')
    for n, (label, xs, ys) in enumerate(series):
        color = _COLORS[n % len(_COLORS)]
        px = _scale(xs, xlo, xhi, _MARGIN, WIDTH - _MARGIN)
        py = _scale(ys, ylo, yhi, HEIGHT - _MARGIN, _MARGIN)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        parts.append(f'<g class="series" data-label="{escape(label)}">')
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        for x, y, a, b in zip(xs, ys, px, py):
            parts.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{color}">'
                         f'<title>{escape(label)} {fmt(x)}: {fmt(y)}</title></circle>')
        parts.append("</g>")
        parts.append(f'<text x="{WIDTH - _MARGIN}" y="{_MARGIN + 14 * n}" text-anchor="end" '
                     f'font-size="11" fill="{color}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_chart_svg(hist, title, xlabel="intensity", ylabel="layers"):
    n = len(hist)
    top = max(c for _, c in hist) or 1
    span = (WIDTH - 2 * _MARGIN) / n
    parts = _frame(title, xlabel, ylabel)
    for i, (lower, count) in enumerate(hist):
        h = (HEIGHT - 2 * _MARGIN) * count / top
        x = _MARGIN + i * span
        parts.append(f'<rect x="{x + 1:.2f}" y="{HEIGHT - _MARGIN - h:.2f}" width="{span - 2:.2f}" '
                     f'height="{h:.2f}" fill="{_COLORS[0]}"><title>{fmt(lower)}: {count}</title></rect>')
        parts.append(f'<text x="{x + span / 2:.2f}" y="{HEIGHT - _MARGIN + 14}" text-anchor="middle" '
                     f'font-size="10">{fmt(lower)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def profile_svg(profile, title):
    return line_chart_svg([("L(X)", profile.indices, list(profile.intensities))], title)


def compare_svg(a, b, labels=("a", "b")):
    """Overlay of two profiles, each divided by its maximum, on a [0, 1] depth axis."""
    series = []
    for label, p in zip(labels, (a, b)):
        v = np.asarray(p.intensities, dtype=np.float64)
        xs = np.linspace(0.0, 1.0, len(v)) if len(v) > 1 else np.zeros(1)
        series.append((label, list(xs), list(v / v.max())))
    return line_chart_svg(series, "normalized spectral profiles", xlabel="relative depth",
                          ylabel="intensity / max")
