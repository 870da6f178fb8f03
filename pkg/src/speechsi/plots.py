"""Dependency-free SVG renderings of ROC curves and the term-association scatter."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")
SIZE = 400
PAD = 50


def _xy(x, y):
    return PAD + x * SIZE, PAD + (1 - y) * SIZE


def _frame(title, xlabel, ylabel):
    w = SIZE + 2 * PAD
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w + 120}" height="{w}" '
             f'viewBox="0 0 {w + 120} {w}" font-family="sans-serif" font-size="12">',
             f'<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#333"/>',
             f'<text x="{PAD + SIZE / 2}" y="{PAD - 15}" text-anchor="middle" font-size="14">{escape(title)}</text>',
             f'<text x="{PAD + SIZE / 2}" y="{PAD + SIZE + 35}" text-anchor="middle">{escape(xlabel)}</text>',
             f'<text x="15" y="{PAD + SIZE / 2}" text-anchor="middle" '
             f'transform="rotate(-90 15 {PAD + SIZE / 2})">{escape(ylabel)}</text>']
    for v in (0.0, 0.5, 1.0):
        x, y = _xy(v, v)
        parts.append(f'<text x="{x}" y="{PAD + SIZE + 15}" text-anchor="middle">{v:g}</text>')
        parts.append(f'<text x="{PAD - 8}" y="{y + 4}" text-anchor="end">{v:g}</text>')
    return parts


def mean_roc(curves, grid=np.linspace(0, 1, 101)):
    """Vertical averaging of several (fpr, tpr) curves on a common FPR grid."""
    tprs = [np.interp(grid, np.asarray(f), np.asarray(t)) for f, t in curves]
    return grid, np.mean(tprs, axis=0)


def roc_svg(curves: dict, title: str = "ROC") -> str:
    """``curves`` maps a label (e.g. "SVM (AUC 0.64)") to an (fpr, tpr) pair."""
    parts = _frame(title, "False positive rate", "True positive rate")
    x0, y0 = _xy(0, 0)
    x1, y1 = _xy(1, 1)
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="#999" stroke-dasharray="4 4"/>')
    for i, (label, (fpr, tpr)) in enumerate(curves.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join("{:.2f},{:.2f}".format(*_xy(a, b)) for a, b in zip(fpr, tpr))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = PAD + 20 + 18 * i
        parts.append(f'<rect x="{PAD + SIZE + 10}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{PAD + SIZE + 25}" y="{ly}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def term_scatter_svg(scores, title: str = "Term association", label_top: int = 10) -> str:
    """Frequency percentile in class A (x) against class B (y), coloured by association sign."""
    parts = _frame(title, "Frequency percentile (class A)", "Frequency percentile (class B)")
    for s in scores:
        x, y = _xy(s.freq_pct_a, s.freq_pct_b)
        color = "#d62728" if s.association > 0 else "#1f77b4" if s.association < 0 else "#999"
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}" fill-opacity="0.7">'
                     f'<title>{escape(s.term)} ({s.association:+.3f})</title></circle>')
    ranked = sorted(scores, key=lambda s: -abs(s.association))[:label_top]
    for s in ranked:
        x, y = _xy(s.freq_pct_a, s.freq_pct_b)
        parts.append(f'<text x="{x + 5:.2f}" y="{y - 5:.2f}" font-size="10">{escape(s.term)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
