"""Rasterized chart state: coverage/border/frontier maps and map operators.

The chart's bounding square [-1,1]^2 is discretized into a resolution x
resolution grid. Row index i follows v and column index j follows u, with
pixel (i, j) centered at (u, v) = (-1 + (j+0.5)*cell, -1 + (i+0.5)*cell).
All maps are uint8 rasters holding 0/1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import TriangleMesh
from .parameterize import UVChart


@dataclass
class GridWorld:
    """Raster state of one chart.

    coverage/border/frontier are the wiped set, the traversable set, and
    the uncovered rim adjacent to wiped pixels. `hole_mask` marks pixels
    that belong to sealed interior holes: traversable, pre-covered, and
    excluded from area accounting. `pixel_area_3d` distributes each mesh
    triangle's 3D area evenly over the raster pixels it owns.
    """

    resolution: int
    coverage: np.ndarray
    border: np.ndarray
    frontier: np.ndarray
    hole_mask: np.ndarray
    pixel_area_3d: np.ndarray

    @property
    def cell(self) -> float:
        return 2.0 / self.resolution

    @property
    def free_mask(self) -> np.ndarray:
        """Traversable pixels that count toward coverage (holes excluded)."""
        return (self.border == 1) & (self.hole_mask == 0)

    def pixel_of(self, u: float, v: float):
        i = int(np.floor((v + 1.0) / self.cell))
        j = int(np.floor((u + 1.0) / self.cell))
        return i, j

    def in_border(self, u: float, v: float) -> bool:
        i, j = self.pixel_of(u, v)
        if i < 0 or j < 0 or i >= self.resolution or j >= self.resolution:
            return False
        return bool(self.border[i, j])

    def pixel_centers(self):
        """(res*res, 2) array of (u, v) pixel centers, row-major."""
        half = self.cell / 2.0
        coords = -1.0 + half + self.cell * np.arange(self.resolution)
        uu, vv = np.meshgrid(coords, coords)  # vv varies along rows
        return np.stack([uu.reshape(-1), vv.reshape(-1)], axis=1)


def total_variation(raster: np.ndarray) -> float:
    """Sum over pixels of the forward-difference gradient magnitude.

    Differences use zero padding past the high edge, so a filled border
    pixel still contributes its outward step.
    """
    x = np.asarray(raster, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("total_variation expects a 2-D raster")
    di = np.zeros_like(x)
    dj = np.zeros_like(x)
    di[:-1, :] = x[1:, :] - x[:-1, :]
    di[-1, :] = -x[-1, :]
    dj[:, :-1] = x[:, 1:] - x[:, :-1]
    dj[:, -1] = -x[:, -1]
    return float(np.sqrt(di * di + dj * dj).sum())


def compute_frontier(coverage: np.ndarray, border: np.ndarray) -> np.ndarray:
    """Uncovered border pixels 8-adjacent to a covered pixel."""
    if coverage.shape != border.shape:
        raise ValueError("coverage and border must have the same shape")
    cov = coverage.astype(bool)
    adj = np.zeros_like(cov)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            shifted = np.zeros_like(cov)
            src = cov[
                max(0, -di) : cov.shape[0] - max(0, di),
                max(0, -dj) : cov.shape[1] - max(0, dj),
            ]
            shifted[
                max(0, di) : cov.shape[0] - max(0, -di),
                max(0, dj) : cov.shape[1] - max(0, -dj),
            ] = src
            adj |= shifted
    return ((border.astype(bool)) & ~cov & adj).astype(np.uint8)


def _point_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd crossing test of (n, 2) points against a closed ring."""
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    px, py = polygon[:, 0], polygon[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    for k in range(len(polygon)):
        cond = (py[k] > y) != (qy[k] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (y - py[k]) / (qy[k] - py[k])
        xk = px[k] + t * (qx[k] - px[k])
        inside ^= cond & (x < xk)
    return inside


def build_grid_world(chart: UVChart, mesh: TriangleMesh, resolution: int = 256) -> GridWorld:
    """Rasterize a chart: border membership, hole pre-marking, pixel areas."""
    world = GridWorld(
        resolution=resolution,
        coverage=np.zeros((resolution, resolution), dtype=np.uint8),
        border=np.zeros((resolution, resolution), dtype=np.uint8),
        frontier=np.zeros((resolution, resolution), dtype=np.uint8),
        hole_mask=np.zeros((resolution, resolution), dtype=np.uint8),
        pixel_area_3d=np.zeros((resolution, resolution), dtype=np.float64),
    )
    centers = world.pixel_centers()
    face_ids, _ = chart.locate_batch(centers)
    face_map = face_ids.reshape(resolution, resolution)
    real = face_map >= 0

    hole = np.zeros(len(centers), dtype=bool)
    for poly in chart.hole_polygons():
        hole |= _point_in_polygon(centers, poly)
    hole = hole.reshape(resolution, resolution) & ~real

    world.border[:] = (real | hole).astype(np.uint8)
    world.hole_mask[:] = hole.astype(np.uint8)

    flat = face_map.reshape(-1)
    owned = flat[flat >= 0]
    counts = np.bincount(owned, minlength=mesh.n_faces)
    share = np.zeros(mesh.n_faces)
    nonzero = counts > 0
    share[nonzero] = mesh.face_areas[nonzero] / counts[nonzero]
    areas = np.zeros(len(flat))
    areas[flat >= 0] = share[owned]
    world.pixel_area_3d[:] = areas.reshape(resolution, resolution)

    world.coverage[:] = world.hole_mask
    world.frontier[:] = compute_frontier(world.coverage, world.border)
    return world


def stamp_disk(world: GridWorld, u: float, v: float, radius: float) -> int:
    """Mark border pixels whose center lies within `radius` of (u, v).

    Returns the number of pixels newly covered.
    """
    res = world.resolution
    cell = world.cell
    i_lo = max(0, int(np.floor((v - radius + 1.0) / cell)) - 1)
    i_hi = min(res - 1, int(np.floor((v + radius + 1.0) / cell)) + 1)
    j_lo = max(0, int(np.floor((u - radius + 1.0) / cell)) - 1)
    j_hi = min(res - 1, int(np.floor((u + radius + 1.0) / cell)) + 1)
    if i_lo > i_hi or j_lo > j_hi:
        return 0
    ii = np.arange(i_lo, i_hi + 1)
    jj = np.arange(j_lo, j_hi + 1)
    cv = -1.0 + (ii + 0.5) * cell
    cu = -1.0 + (jj + 0.5) * cell
    du = cu[None, :] - u
    dv = cv[:, None] - v
    mask = (du * du + dv * dv) <= radius * radius
    window_cov = world.coverage[i_lo : i_hi + 1, j_lo : j_hi + 1]
    window_bor = world.border[i_lo : i_hi + 1, j_lo : j_hi + 1]
    new = mask & (window_bor == 1) & (window_cov == 0)
    window_cov[new] = 1
    return int(new.sum())


def stamp_path(world: GridWorld, points: np.ndarray, radius: float) -> int:
    """Sweep the footprint along a polyline, subdividing long segments.

    Consecutive stamp centers are kept within half a footprint radius so
    the swath has no gaps. Returns the total newly covered pixel count.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array")
    if len(points) == 0:
        return 0
    step = 0.5 * radius
    total = stamp_disk(world, points[0, 0], points[0, 1], radius)
    for a, b in zip(points[:-1], points[1:]):
        seg = b - a
        dist = float(np.hypot(seg[0], seg[1]))
        n_sub = max(1, int(np.ceil(dist / step)))
        for k in range(1, n_sub + 1):
            p = a + seg * (k / n_sub)
            total += stamp_disk(world, p[0], p[1], radius)
    world.frontier[:] = compute_frontier(world.coverage, world.border)
    return total


def egocentric_observe(
    world: GridWorld,
    position,
    heading: float,
    scales: int = 2,
    size: int = 64,
    base_window: float = 2.0,
) -> np.ndarray:
    """Agent-centered multi-scale view of (coverage, border, frontier).

    Scale k samples a square window of side base_window * 2**k, rotated so
    the heading points toward row 0 and nearest-neighbor resampled to
    size x size with the agent at pixel (size//2, size//2). Samples outside
    the raster read 0 in every channel.

    Returns a (scales, 3, size, size) float32 array of 0/1 values.
    """
    pu, pv = float(position[0]), float(position[1])
    res = world.resolution
    cell_world = world.cell
    half = size // 2
    rows = np.arange(size)
    cols = np.arange(size)
    fwd_units = (half - rows).astype(np.float64)  # + ahead of the agent
    lat_units = (cols - half).astype(np.float64)  # + to the agent's right
    cos_h = np.cos(heading)
    sin_h = np.sin(heading)
    out = np.zeros((scales, 3, size, size), dtype=np.float32)
    layers = (world.coverage, world.border, world.frontier)
    for k in range(scales):
        cell_k = (base_window * (2.0**k)) / size
        f = fwd_units[:, None] * cell_k
        l = lat_units[None, :] * cell_k
        su = pu + f * cos_h + l * sin_h
        sv = pv + f * sin_h - l * cos_h
        i = np.floor((sv + 1.0) / cell_world).astype(np.int64)
        j = np.floor((su + 1.0) / cell_world).astype(np.int64)
        valid = (i >= 0) & (i < res) & (j >= 0) & (j < res)
        i_c = np.clip(i, 0, res - 1)
        j_c = np.clip(j, 0, res - 1)
        for ch, layer in enumerate(layers):
            vals = layer[i_c, j_c].astype(np.float32)
            vals[~valid] = 0.0
            out[k, ch] = vals
    return out
