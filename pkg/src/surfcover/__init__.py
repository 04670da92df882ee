"""surfcover: coverage wiping paths for curved surfaces.

Flatten a disk-topology mesh region onto a fixed square or disk chart via
a harmonic map, plan complete-coverage paths there (boustrophedon, spiral,
or a learned policy), and lift them back to posed 3D waypoints with
quality metrics.
"""

from .baselines import UVPath, spiral_path, zigzag_path
from .config import ProjectConfig, TrainConfig, stage_seed
from .env import CoverageEnv, RewardConfig, StepResult
from .lift import PosedWaypoint, TwistSample, integrate_twists, lift_path, twists
from .mesh import (
    BoundaryLoop,
    TriangleMesh,
    boundary_loops,
    extract_boundary,
    extract_region,
    load_obj,
    read_face_selection,
    save_obj,
)
from .metrics import PathReport, coverage_area, cumulative_gamma, path_length
from .parameterize import (
    DISK,
    SQUARE,
    UVChart,
    build_chart,
    chordal_parameterize,
    harmonic_solve,
    load_chart,
    map_boundary_circle,
    map_boundary_square,
    save_chart,
    surface_point,
    uv_of_point,
)
from .raster import (
    GridWorld,
    build_grid_world,
    compute_frontier,
    egocentric_observe,
    stamp_disk,
    stamp_path,
    total_variation,
)
from .render import render_svg

__version__ = "0.1.0"

__all__ = [
    "BoundaryLoop",
    "CoverageEnv",
    "DISK",
    "GridWorld",
    "PathReport",
    "PosedWaypoint",
    "ProjectConfig",
    "RewardConfig",
    "SQUARE",
    "StepResult",
    "TrainConfig",
    "TriangleMesh",
    "TwistSample",
    "UVChart",
    "UVPath",
    "boundary_loops",
    "build_chart",
    "build_grid_world",
    "chordal_parameterize",
    "compute_frontier",
    "coverage_area",
    "cumulative_gamma",
    "egocentric_observe",
    "extract_boundary",
    "extract_region",
    "harmonic_solve",
    "integrate_twists",
    "lift_path",
    "load_chart",
    "load_obj",
    "map_boundary_circle",
    "map_boundary_square",
    "path_length",
    "read_face_selection",
    "render_svg",
    "save_chart",
    "save_obj",
    "spiral_path",
    "stage_seed",
    "stamp_disk",
    "stamp_path",
    "surface_point",
    "total_variation",
    "twists",
    "uv_of_point",
    "zigzag_path",
]
