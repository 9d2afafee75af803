"""Deterministic CSV / JSON / SVG emission for experiment runs.

Floats are written with repr (shortest round-trip form), so identical
inputs produce byte-identical files.  CSV uses '.' decimals, LF endings,
and a mandatory header row.  The SVG log-log plot is emitted as direct
markup; no plotting dependency.
"""

from __future__ import annotations

import json
import math

__all__ = ["format_float", "write_csv", "write_json", "write_svg_loglog",
           "decay_csv_rows", "parse_decay_row", "sublevel_csv_rows",
           "parse_sublevel_row"]


def format_float(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path, doc):
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def decay_csv_rows(results):
    header = ["lambda", "re", "im", "abs", "nodes_used", "delta"]
    rows = [(r.lam, r.value.real, r.value.imag, abs(r.value), r.nodes_used,
             r.two_resolution_delta) for r in results]
    return header, rows


def parse_decay_row(header, line):
    vals = line.split(",")
    d = dict(zip(header, vals))
    from .quadrature import IntegralResult
    return IntegralResult(complex(float(d["re"]), float(d["im"])),
                          float(d["lambda"]), int(d["nodes_used"]),
                          float(d["delta"]))


def sublevel_csv_rows(records):
    """records: iterable of (eps, MeasureEstimate, seed)."""
    header = ["eps", "estimate", "ci95", "method", "seed"]
    rows = [(eps, est.estimate, est.half_width_95, est.method, seed)
            for eps, est, seed in records]
    return header, rows


def parse_sublevel_row(header, line):
    vals = line.split(",")
    d = dict(zip(header, vals))
    from .sublevel import MeasureEstimate
    return (float(d["eps"]),
            MeasureEstimate(float(d["estimate"]), float(d["ci95"]), -1, d["method"]),
            int(d["seed"]))


def write_svg_loglog(path, points, fit=None, reference_slope=None,
                     title="", width=640, height=480):
    """Scatter of (ln x, ln y) with the fitted line and a reference slope."""
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    if not xs:
        raise ValueError("no points to plot")
    pad = 0.08
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    xspan = (xhi - xlo) or 1.0
    yspan = (yhi - ylo) or 1.0
    xlo -= pad * xspan
    xhi += pad * xspan
    ylo -= pad * yspan
    yhi += pad * yspan
    mL, mB, mR, mT = 56, 40, 16, 28

    def sx(x):
        return mL + (x - xlo) / (xhi - xlo) * (width - mL - mR)

    def sy(y):
        return height - mB - (y - ylo) / (yhi - ylo) * (height - mB - mT)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width // 2}" y="18" text-anchor="middle" '
             f'font-family="monospace" font-size="13">{title}</text>']
    # axes
    parts.append(f'<line x1="{mL}" y1="{height - mB}" x2="{width - mR}" '
                 f'y2="{height - mB}" stroke="black"/>')
    parts.append(f'<line x1="{mL}" y1="{mT}" x2="{mL}" y2="{height - mB}" stroke="black"/>')
    parts.append(f'<text x="{width // 2}" y="{height - 8}" text-anchor="middle" '
                 f'font-family="monospace" font-size="11">ln lambda</text>')
    parts.append(f'<text x="14" y="{height // 2}" text-anchor="middle" '
                 f'font-family="monospace" font-size="11" '
                 f'transform="rotate(-90 14 {height // 2})">ln |value|</text>')

    def line_between(slope, intercept, color, dash=""):
        y0 = intercept + slope * xlo
        y1 = intercept + slope * xhi
        d = f' stroke-dasharray="{dash}"' if dash else ""
        return (f'<line x1="{sx(xlo):.2f}" y1="{sy(y0):.2f}" x2="{sx(xhi):.2f}" '
                f'y2="{sy(y1):.2f}" stroke="{color}"{d}/>')

    if fit is not None:
        parts.append(line_between(fit.slope, fit.intercept, "#cc3333"))
    if reference_slope is not None and fit is not None:
        # reference line through the last point
        xr, yr = points[-1]
        parts.append(line_between(reference_slope, yr - reference_slope * xr,
                                  "#3366cc", dash="5,4"))
    for x, y in points:
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="black"/>')
    parts.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
