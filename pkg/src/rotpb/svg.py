"""Deterministic SVG 1.1 drawing of a solve report.

Sources are open circles, sinks filled circles, edges black lines whose
width grows with ``flow**alpha``. Partly used (slack) atoms carry a text
label with their unused mass. Three-dimensional problems are drawn in the
first two coordinates.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .allocation import SolveReport

SIZE = 480
MARGIN = 40
MAX_STROKE = 8.0
MIN_STROKE = 0.75


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def render_svg(report: SolveReport, domain=None, title: str | None = None) -> str:
    """SVG text for ``report``.

    Parameters
    ----------
    report : SolveReport
    domain : ((xmin, ymin, ...), (xmax, ymax, ...)), optional
        Box to frame; defaults to the bounding box of atoms and path.
    title : str, optional
    """
    pts = [p[:2] for p in (report.mu.positions, report.nu.positions, report.path.positions) if len(p)]
    allpts = np.vstack(pts) if pts else np.zeros((1, 2))
    if domain is not None:
        lo, hi = np.asarray(domain[0], float)[:2], np.asarray(domain[1], float)[:2]
    else:
        lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = float(max(np.max(hi - lo), 1e-12))
    scale = (SIZE - 2 * MARGIN) / span

    def xy(p):
        x = MARGIN + (p[0] - lo[0]) * scale
        y = SIZE - MARGIN - (p[1] - lo[1]) * scale
        return _fmt(x), _fmt(y)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{MARGIN}" y="{MARGIN // 2}" font-family="sans-serif" '
                   f'font-size="12">{escape(title)}</text>')
    T = report.path
    if T.n_edges:
        w = T.flows ** report.alpha
        wmax = float(w.max()) if w.size else 1.0
        out.append('<g stroke="black" stroke-linecap="round">')
        for u, v, we in zip(T.tails, T.heads, w):
            (x1, y1), (x2, y2) = xy(T.positions[u]), xy(T.positions[v])
            width = MIN_STROKE + (MAX_STROKE - MIN_STROKE) * float(we) / wmax
            out.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke-width="{_fmt(width)}"/>')
        out.append("</g>")
    for p, _ in report.mu:
        x, y = xy(p)
        out.append(f'<circle cx="{x}" cy="{y}" r="6" fill="white" stroke="black" stroke-width="1.5"/>')
    for p, _ in report.nu:
        x, y = xy(p)
        out.append(f'<circle cx="{x}" cy="{y}" r="6" fill="black" stroke="black" stroke-width="1.5"/>')
    for comp in report.components:
        if comp.slack_atom is None:
            continue
        side, idx = comp.slack_atom
        meas = report.mu if side == "source" else report.nu
        x, y = xy(meas.positions[idx])
        out.append(f'<text x="{_fmt(float(x) + 9)}" y="{_fmt(float(y) - 9)}" font-family="sans-serif" '
                   f'font-size="11">slack {comp.slack_amount:.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
