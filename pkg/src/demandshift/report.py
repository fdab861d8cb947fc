"""Radar-plot SVGs of cluster profiles and the anomaly calendar export."""
from __future__ import annotations

import io
import csv
import math
from xml.sax.saxutils import escape

import numpy as np

from .ingest import format_hour
from .modes import MODES

SIZE = 420
CENTER = SIZE / 2
OUTER = 150.0
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def radial_range(values):
    """Half-width of the symmetric value range: max |v| rounded up, at least 1."""
    m = max((abs(float(v)) for v in values), default=0.0)
    return max(1, math.ceil(m))


def axis_angle(i, n=len(MODES)):
    # first axis points up, then clockwise
    return -math.pi / 2 + 2 * math.pi * i / n


def vertex(value, i, rng):
    r = (float(value) + rng) / (2 * rng) * OUTER
    a = axis_angle(i)
    return CENTER + r * math.cos(a), CENTER + r * math.sin(a)


def _pts(points):
    return " ".join(f"{x:.3f},{y:.3f}" for x, y in points)


def _ring(value, rng):
    return [vertex(value, i, rng) for i in range(len(MODES))]


def render_radar(profile, cluster_id=None, size=None, share=None, title=None):
    """SVG radar of a per-mode mean deviance profile.

    ``profile`` is a 5-sequence in mode order or a mode-keyed mapping. The
    radial axis runs from ``-R`` at the centre to ``+R`` at the rim with the
    zero ring halfway.
    """
    if isinstance(profile, dict):
        profile = [profile[m] for m in MODES]
    values = [float(v) for v in profile]
    if len(values) != len(MODES) or not all(math.isfinite(v) for v in values):
        raise ValueError("profile must be five finite values")
    rng = radial_range(values)
    if title is None:
        title = "Cluster" if cluster_id is None else f"Cluster {cluster_id}"
        extra = []
        if size is not None:
            extra.append(f"n={size}")
        if share is not None:
            extra.append(f"{100 * share:.1f}%")
        if extra:
            title += " (" + ", ".join(extra) + ")"
    color = COLORS[(cluster_id or 0) % len(COLORS)]

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="12">',
        f"<title>{escape(title)}</title>",
        f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>',
        f'<text x="{CENTER:.3f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for v in range(-rng + 1, rng + 1):
        cls = "zero-ring" if v == 0 else "grid-ring"
        stroke = 'stroke="#333" stroke-width="1.5"' if v == 0 else 'stroke="#ccc" stroke-width="0.8"'
        out.append(f'<polygon class="{cls}" data-value="{v}" points="{_pts(_ring(v, rng))}" fill="none" {stroke}/>')
    for i, mode in enumerate(MODES):
        x, y = vertex(rng, i, rng)
        out.append(f'<line class="axis" x1="{CENTER:.3f}" y1="{CENTER:.3f}" x2="{x:.3f}" y2="{y:.3f}" stroke="#999"/>')
        lx, ly = vertex(rng + 0.18 * 2 * rng, i, rng)
        out.append(f'<text class="axis-label" x="{lx:.3f}" y="{ly:.3f}" text-anchor="middle" '
                   f'dominant-baseline="middle">{mode} ({values[i]:+.2f})</text>')
    out.append(f'<text x="{CENTER + 4:.3f}" y="{CENTER - OUTER / 2 - 3:.3f}" fill="#333">0</text>')
    out.append(f'<text x="{CENTER + 4:.3f}" y="{CENTER - OUTER - 3:.3f}" fill="#666">+{rng}</text>')
    out.append(f'<polygon class="profile" points="{_pts(vertex(v, i, rng) for i, v in enumerate(values))}" '
               f'fill="{color}" fill-opacity="0.25" stroke="{color}" stroke-width="2"/>')
    for i, v in enumerate(values):
        x, y = vertex(v, i, rng)
        out.append(f'<circle class="vertex" data-mode="{MODES[i]}" cx="{x:.3f}" cy="{y:.3f}" r="3" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_calendar(labels, hours, path=None):
    """``date,hour,cluster_id`` rows in chronological order.

    Returns the CSV text; also writes it to ``path`` when given.
    """
    hours = np.asarray(hours, dtype="datetime64[h]")
    labels = np.asarray(labels)
    if len(labels) != len(hours):
        raise ValueError("labels must cover hours")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "hour", "cluster_id"])
    for i in np.argsort(hours, kind="stable"):
        stamp = format_hour(hours[i])
        w.writerow([stamp[:10], int(stamp[11:13]), int(labels[i])])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
