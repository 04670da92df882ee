"""Rule-based coverage planners on the flat chart: boustrophedon and spiral.

Both generators are pure functions of their arguments and emit densely
sampled polylines whose points all lie on the chart, so they feed straight
into footprint sweeping and 3D lifting.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .parameterize import DISK, SQUARE, UVChart

# Default spacing between adjacent swaths as a multiple of the footprint
# radius: 1.8 leaves 10% overlap between neighbouring passes.
SPACING_FACTOR = 1.8


@dataclass
class UVPath:
    """A planned path in chart coordinates with per-point travel headings."""

    points: np.ndarray  # (n, 2)
    headings: np.ndarray  # (n,)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.headings = np.asarray(self.headings, dtype=np.float64)
        if len(self.points) != len(self.headings):
            raise ValueError("points and headings must have equal length")
        if len(self.points) >= 2:
            same = np.all(np.diff(self.points, axis=0) == 0.0, axis=1)
            if np.any(same):
                raise ValueError("consecutive path points must be distinct")

    def __len__(self):
        return len(self.points)

    @property
    def uv_length(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())


def _append_members(chart, pts, heads, points_out, heads_out):
    """Keep chart-member samples, dropping repeats of the previous point."""
    member = chart.contains(pts)
    for p, h, ok in zip(pts, heads, member):
        if not ok:
            continue
        if points_out and np.all(points_out[-1] == p):
            continue
        points_out.append(p.copy())
        heads_out.append(float(h))


def zigzag_path(
    chart: UVChart,
    spacing: float,
    margin: float = 0.0,
    sample_step: float = 0.02,
) -> UVPath:
    """Boustrophedon rows over the square chart.

    Rows run parallel to the u axis, evenly spaced (at most `spacing`
    apart) across [-1+margin, 1-margin], alternating direction, joined by
    short vertical connectors. Every emitted sample lies on the chart, so
    rows crossing unmapped regions are clipped.

    Raises:
        ValueError: non-square chart, spacing outside (0, 2), or spacing
            too coarse for two rows.
    """
    if chart.domain != SQUARE:
        raise ValueError("zigzag planning requires a square-domain chart")
    if not 0.0 < spacing < 2.0:
        raise ValueError(f"spacing must be in (0, 2), got {spacing}")
    if margin < 0.0:
        raise ValueError("margin must be nonnegative")
    span = 2.0 - 2.0 * margin
    if spacing >= span:
        raise ValueError(f"spacing {spacing} leaves fewer than 2 rows over span {span}")
    n_rows = int(np.ceil(span / spacing)) + 1
    rows = np.linspace(-1.0 + margin, 1.0 - margin, n_rows)
    lo, hi = -1.0 + margin, 1.0 - margin
    n_row_samples = max(2, int(np.ceil((hi - lo) / sample_step)) + 1)

    points: list[np.ndarray] = []
    heads: list[float] = []
    for k, v in enumerate(rows):
        forward = k % 2 == 0
        u = np.linspace(lo, hi, n_row_samples)
        if not forward:
            u = u[::-1]
        pts = np.stack([u, np.full_like(u, v)], axis=1)
        heading = 0.0 if forward else np.pi
        _append_members(chart, pts, np.full(len(pts), heading), points, heads)
        if k + 1 < len(rows):
            u_end = hi if forward else lo
            v_next = rows[k + 1]
            n_con = max(2, int(np.ceil((v_next - v) / sample_step)) + 1)
            vv = np.linspace(v, v_next, n_con)
            pts = np.stack([np.full_like(vv, u_end), vv], axis=1)
            _append_members(chart, pts, np.full(len(pts), np.pi / 2.0), points, heads)
    if len(points) < 2:
        raise ValueError("zigzag produced no usable path on this chart")
    return UVPath(np.asarray(points), np.asarray(heads))


def spiral_path(
    chart: UVChart,
    spacing: float,
    max_angle_deg: float = 2.0,
    sample_step: float = 0.02,
) -> UVPath:
    """Archimedean spiral from the disk-chart center outward.

    Radius grows by `spacing` per turn until it reaches 1 - spacing/2,
    then one full constant-radius turn closes the rim (without it the
    last partial annulus stays a bare crescent). Sampling keeps both the
    angular increment at or below `max_angle_deg` and the arc-length
    increment at or below `sample_step`; points are clipped to the chart.

    Raises:
        ValueError: non-disk chart or spacing outside (0, 1).
    """
    if chart.domain != DISK:
        raise ValueError("spiral planning requires a disk-domain chart")
    if not 0.0 < spacing < 1.0:
        raise ValueError(f"spacing must be in (0, 1), got {spacing}")
    pitch = spacing / (2.0 * np.pi)
    r_end = 1.0 - spacing / 2.0
    phi_end = r_end / pitch
    max_dphi = np.radians(max_angle_deg)

    phis = [0.0]
    phi = 0.0
    while phi < phi_end + 2.0 * np.pi:
        r = min(pitch * phi, r_end)
        dphi = max_dphi if r <= 0.0 else min(max_dphi, sample_step / r)
        phi = min(phi + dphi, phi_end + 2.0 * np.pi)
        phis.append(phi)
    phi_arr = np.asarray(phis)
    r_arr = np.minimum(pitch * phi_arr, r_end)
    pts = np.stack([r_arr * np.cos(phi_arr), r_arr * np.sin(phi_arr)], axis=1)
    # Tangent of (r cos phi, r sin phi); dr/dphi drops to zero on the rim turn.
    drdphi = np.where(pitch * phi_arr < r_end, pitch, 0.0)
    tx = drdphi * np.cos(phi_arr) - r_arr * np.sin(phi_arr)
    ty = drdphi * np.sin(phi_arr) + r_arr * np.cos(phi_arr)
    heads = np.arctan2(ty, tx)

    points: list[np.ndarray] = []
    out_heads: list[float] = []
    _append_members(chart, pts, heads, points, out_heads)
    if len(points) < 2:
        raise ValueError("spiral produced no usable path on this chart")
    return UVPath(np.asarray(points), np.asarray(out_heads))


def save_path_csv(path: UVPath, filename, config_hash: str | None = None, method: str | None = None) -> None:
    with open(filename, "w", encoding="utf-8", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        if method:
            fh.write(f"# method={method}\n")
        writer = csv.writer(fh)
        writer.writerow(["u", "v", "heading"])
        for p, h in zip(path.points, path.headings):
            writer.writerow([f"{p[0]:.17g}", f"{p[1]:.17g}", f"{h:.17g}"])


def load_path_csv(filename) -> tuple[UVPath, dict]:
    """Read a path CSV; returns the path and any ``# key=value`` metadata."""
    meta = {}
    points = []
    heads = []
    with open(filename, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row:
                continue
            if row[0].startswith("#"):
                text = ",".join(row).lstrip("#").strip()
                if "=" in text:
                    key, value = text.split("=", 1)
                    meta[key.strip()] = value.strip()
                continue
            if row[0] == "u":
                continue
            points.append([float(row[0]), float(row[1])])
            heads.append(float(row[2]))
    return UVPath(np.asarray(points), np.asarray(heads)), meta
