"""Path quality metrics: length, area-weighted coverage, rotation effort."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .raster import GridWorld


@dataclass
class PathReport:
    total_length: float  # meters
    coverage_fraction: float  # [0, 1], area-weighted
    s_delta_gamma: float  # radians, summed absolute tool-spin change
    step_count: int

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _positions(waypoints) -> np.ndarray:
    arr = np.asarray(
        [wp.position if hasattr(wp, "position") else wp for wp in waypoints],
        dtype=np.float64,
    )
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("waypoints must carry 3D positions")
    return arr


def path_length(waypoints) -> float:
    """Sum of Euclidean distances between consecutive waypoints."""
    pts = _positions(waypoints)
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def coverage_area(world: GridWorld) -> float:
    """Covered 3D area over total 3D area of the free region.

    Hole pixels never count on either side of the ratio.
    """
    free = world.free_mask
    denom = float(world.pixel_area_3d[free].sum())
    if denom <= 0.0:
        raise ValueError("pixel areas are not populated")
    covered = free & (world.coverage == 1)
    return float(world.pixel_area_3d[covered].sum() / denom)


def _wrap_angle(x: float) -> float:
    """Wrap to (-pi, pi]."""
    return -((-x + math.pi) % (2.0 * math.pi) - math.pi)


def cumulative_gamma(waypoints) -> float:
    """Summed absolute change of the tool-Z spin angle along the path.

    Differences are wrapped to (-pi, pi] first so a full-turn wraparound
    does not register as a 2*pi jump.
    """
    gammas = [wp.gamma if hasattr(wp, "gamma") else float(wp) for wp in waypoints]
    if len(gammas) < 2:
        raise ValueError("need at least 2 waypoints with gamma recorded")
    return float(sum(abs(_wrap_angle(b - a)) for a, b in zip(gammas[:-1], gammas[1:])))


def report(waypoints, world: GridWorld) -> PathReport:
    return PathReport(
        total_length=path_length(waypoints),
        coverage_fraction=coverage_area(world),
        s_delta_gamma=cumulative_gamma(waypoints),
        step_count=len(waypoints),
    )
