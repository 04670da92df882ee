"""Deterministic SVG rendering of a grid world and a planned path.

Pure text output: identical inputs produce byte-identical documents, so
renders are diffable in tests. Pixel rows are compressed into run-length
rectangles to keep files small.
"""

from __future__ import annotations

import numpy as np

_COLORS = {
    "background": "#ffffff",
    "border": "#d7dce3",
    "covered": "#7fb2e5",
    "hole": "#9a9a9a",
    "path": "#d62728",
    "start": "#2ca02c",
    "end": "#111111",
}


def _runs(mask_row: np.ndarray):
    """Consecutive-true runs of a boolean row as (start, length) pairs."""
    idx = np.nonzero(mask_row)[0]
    if len(idx) == 0:
        return []
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    return [(int(s), int(e - s + 1)) for s, e in zip(starts, ends)]


def _rects(mask: np.ndarray, fill: str) -> list[str]:
    out = []
    h = mask.shape[0]
    for i in range(h):
        for start, length in _runs(mask[i]):
            # v grows upward, image y grows downward: flip rows.
            out.append(
                f'<rect x="{start}" y="{h - 1 - i}" width="{length}" height="1" fill="{fill}"/>'
            )
    return out


def render_svg(world, path_points=None) -> str:
    """SVG document showing border, covered and hole pixels, and the path.

    `path_points` is an optional (n, 2) array of chart coordinates; points
    outside the view box are clamped onto its edge. Start and end markers
    are drawn when the path is non-empty.
    """
    res = world.resolution
    cell = world.cell
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {res} {res}" '
        f'width="512" height="512" shape-rendering="crispEdges">',
        f'<rect x="0" y="0" width="{res}" height="{res}" fill="{_COLORS["background"]}"/>',
    ]
    border = world.border.astype(bool)
    hole = world.hole_mask.astype(bool)
    covered = world.coverage.astype(bool) & border & ~hole
    parts += _rects(border & ~hole, _COLORS["border"])
    parts += _rects(covered, _COLORS["covered"])
    parts += _rects(hole, _COLORS["hole"])

    if path_points is not None and len(path_points) > 0:
        pts = np.asarray(path_points, dtype=np.float64)
        x = np.clip((pts[:, 0] + 1.0) / cell, 0.0, float(res))
        y = np.clip(float(res) - (pts[:, 1] + 1.0) / cell, 0.0, float(res))
        coords = " ".join(f"{xi:.3f},{yi:.3f}" for xi, yi in zip(x, y))
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{_COLORS["path"]}" '
            f'stroke-width="1" stroke-linejoin="round"/>'
        )
        parts.append(
            f'<circle cx="{x[0]:.3f}" cy="{y[0]:.3f}" r="2.5" fill="{_COLORS["start"]}"/>'
        )
        parts.append(
            f'<rect x="{x[-1] - 2.0:.3f}" y="{y[-1] - 2.0:.3f}" width="4" height="4" '
            f'fill="{_COLORS["end"]}"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
