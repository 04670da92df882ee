"""The coverage MDP over a rasterized UV chart.

One agent with a disk footprint moves at constant linear speed; the single
continuous action is a per-step turn rate. Reward combines newly covered
pixels, the change in the coverage map's total variation, and a constant
per-step penalty. Episodes end when an area-weighted coverage target is
reached or a step cap expires.

The environment is deterministic given its seed: replaying a stored action
sequence reproduces rewards bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .mesh import TriangleMesh
from .parameterize import UVChart
from .raster import GridWorld, build_grid_world, compute_frontier, egocentric_observe, stamp_disk, total_variation

DONE_TARGET = "target-reached"
DONE_STEP_CAP = "step-cap"


@dataclass
class RewardConfig:
    """Reward coefficients and termination bounds.

    Fields left as None are resolved against the world at reset:
    coverage_weight defaults to 1 / free-pixel-count (full coverage then
    earns about +1 cumulatively), tv_weight to 0.1 * coverage_weight *
    resolution, and step_penalty to -1 / max_steps.
    """

    coverage_weight: float | None = None
    tv_weight: float | None = None
    step_penalty: float | None = None
    target_coverage: float = 0.95
    max_steps: int = 500

    def __post_init__(self):
        if not 0.90 <= self.target_coverage <= 0.99:
            raise ValueError("target_coverage must lie in [0.90, 0.99]")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.step_penalty is not None and self.step_penalty >= 0.0:
            raise ValueError("step_penalty must be negative")

    def resolved(self, free_pixels: int, resolution: int) -> "RewardConfig":
        cw = self.coverage_weight if self.coverage_weight is not None else 1.0 / max(1, free_pixels)
        tw = self.tv_weight if self.tv_weight is not None else 0.1 * cw * resolution
        sp = self.step_penalty if self.step_penalty is not None else -1.0 / self.max_steps
        return replace(self, coverage_weight=cw, tv_weight=tw, step_penalty=sp)


@dataclass
class AgentState:
    position: np.ndarray  # (u, v)
    heading: float  # radians in [0, 2*pi)
    step_count: int
    gamma: float  # accumulated tool-Z rotation, radians


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    n_new: int
    tv_value: float
    done: bool
    done_reason: str | None


@dataclass
class TraceRow:
    step: int
    u: float
    v: float
    heading: float
    omega: float
    n_new: int
    tv: float
    reward: float


class CoverageEnv:
    """Raster coverage environment bound to one chart.

    Construction rasterizes the chart once; reset/step mutate only the
    coverage and frontier layers. Instances are single-threaded; use
    `clone()` for a second env sharing the immutable raster template.
    """

    def __init__(
        self,
        chart: UVChart,
        mesh: TriangleMesh,
        reward: RewardConfig | None = None,
        *,
        resolution: int = 256,
        footprint_radius: float = 0.08,
        speed: float = 0.05,
        max_turn_deg: float = 45.0,
        obs_scales: int = 2,
        obs_size: int = 64,
        base_window: float = 2.0,
        seed: int = 0,
    ):
        self.chart = chart
        self.mesh = mesh
        self.footprint_radius = float(footprint_radius)
        self.speed = float(speed)
        self.max_turn_deg = float(max_turn_deg)
        self.obs_scales = int(obs_scales)
        self.obs_size = int(obs_size)
        self.base_window = float(base_window)
        self.rng = np.random.default_rng(seed)

        self.world = build_grid_world(chart, mesh, resolution)
        self._template_coverage = self.world.coverage.copy()
        free = int(self.world.free_mask.sum())
        base = reward if reward is not None else RewardConfig()
        self.reward_config = base.resolved(free, resolution)
        self.total_free_area = float(self.world.pixel_area_3d[self.world.free_mask].sum())
        self.total_free_pixels = free

        self.agent: AgentState | None = None
        self.trace: list[TraceRow] = []
        self._done = True
        self._tv = 0.0

    def clone(self, seed: int = 0) -> "CoverageEnv":
        """A second env over the same raster template (chart not re-rasterized)."""
        other = object.__new__(CoverageEnv)
        other.chart = self.chart
        other.mesh = self.mesh
        other.footprint_radius = self.footprint_radius
        other.speed = self.speed
        other.max_turn_deg = self.max_turn_deg
        other.obs_scales = self.obs_scales
        other.obs_size = self.obs_size
        other.base_window = self.base_window
        other.rng = np.random.default_rng(seed)
        other.world = GridWorld(
            resolution=self.world.resolution,
            coverage=self._template_coverage.copy(),
            border=self.world.border,
            frontier=np.zeros_like(self.world.frontier),
            hole_mask=self.world.hole_mask,
            pixel_area_3d=self.world.pixel_area_3d,
        )
        other._template_coverage = self._template_coverage
        other.reward_config = self.reward_config
        other.total_free_area = self.total_free_area
        other.total_free_pixels = self.total_free_pixels
        other.agent = None
        other.trace = []
        other._done = True
        other._tv = 0.0
        return other

    # -- episode protocol ------------------------------------------------

    def reset(self, start=None) -> np.ndarray:
        """Start an episode; `start` is (u, v, heading) or None for random.

        Coverage returns to the hole-only template, the footprint is
        stamped at the start pose, and the frontier is rebuilt.
        """
        if start is None:
            start = self._random_start()
        u, v, heading = float(start[0]), float(start[1]), float(start[2])
        if not self.world.in_border(u, v):
            raise ValueError(f"start position ({u}, {v}) is outside the border region")
        self.world.coverage[:] = self._template_coverage
        self.agent = AgentState(
            position=np.array([u, v]),
            heading=heading % (2.0 * math.pi),
            step_count=0,
            gamma=0.0,
        )
        stamp_disk(self.world, u, v, self.footprint_radius)
        self.world.frontier[:] = compute_frontier(self.world.coverage, self.world.border)
        self._tv = total_variation(self.world.coverage)
        self._done = False
        self.trace = []
        return self.observe()

    def _random_start(self):
        ii, jj = np.nonzero(self.world.border)
        k = int(self.rng.integers(len(ii)))
        cell = self.world.cell
        u = -1.0 + (jj[k] + 0.5) * cell
        v = -1.0 + (ii[k] + 0.5) * cell
        heading = float(self.rng.uniform(0.0, 2.0 * math.pi))
        return u, v, heading

    def step(self, omega: float) -> StepResult:
        """Advance one step with turn rate `omega` in degrees per step."""
        if self._done or self.agent is None:
            raise RuntimeError("step() called on a finished episode; call reset()")
        omega = float(np.clip(omega, -self.max_turn_deg, self.max_turn_deg))
        omega_rad = math.radians(omega)
        agent = self.agent
        agent.heading = (agent.heading + omega_rad) % (2.0 * math.pi)
        agent.gamma += omega_rad

        direction = np.array([math.cos(agent.heading), math.sin(agent.heading)])
        n_sub = max(1, int(math.ceil(self.speed / (0.5 * self.footprint_radius))))
        sub = self.speed / n_sub
        n_new = 0
        pos = agent.position
        for _ in range(n_sub):
            candidate = pos + sub * direction
            if self.world.in_border(candidate[0], candidate[1]):
                pos = candidate
            else:
                # Slide along the wall: keep whichever axis stays valid.
                cand_u = np.array([candidate[0], pos[1]])
                cand_v = np.array([pos[0], candidate[1]])
                if self.world.in_border(cand_u[0], cand_u[1]):
                    pos = cand_u
                elif self.world.in_border(cand_v[0], cand_v[1]):
                    pos = cand_v
            n_new += stamp_disk(self.world, pos[0], pos[1], self.footprint_radius)
        agent.position = pos
        agent.step_count += 1

        self.world.frontier[:] = compute_frontier(self.world.coverage, self.world.border)
        tv = total_variation(self.world.coverage)
        cfg = self.reward_config
        reward = cfg.coverage_weight * n_new - cfg.tv_weight * (tv - self._tv) + cfg.step_penalty
        self._tv = tv

        done_reason = None
        if self.coverage_fraction >= cfg.target_coverage:
            done_reason = DONE_TARGET
        elif agent.step_count >= cfg.max_steps:
            done_reason = DONE_STEP_CAP
        self._done = done_reason is not None

        self.trace.append(
            TraceRow(
                step=agent.step_count,
                u=float(pos[0]),
                v=float(pos[1]),
                heading=agent.heading,
                omega=omega,
                n_new=n_new,
                tv=tv,
                reward=reward,
            )
        )
        return StepResult(
            observation=self.observe(),
            reward=reward,
            n_new=n_new,
            tv_value=tv,
            done=self._done,
            done_reason=done_reason,
        )

    @property
    def coverage_fraction(self) -> float:
        """Area-weighted fraction of the free region currently covered."""
        if self.total_free_area <= 0.0:
            return 0.0
        covered = (self.world.coverage == 1) & self.world.free_mask
        return float(self.world.pixel_area_3d[covered].sum() / self.total_free_area)

    @property
    def pixel_coverage(self) -> float:
        """Plain pixel-count fraction of the free region currently covered."""
        if self.total_free_pixels == 0:
            return 0.0
        covered = (self.world.coverage == 1) & self.world.free_mask
        return float(covered.sum() / self.total_free_pixels)

    @property
    def covered_free_pixels(self) -> int:
        covered = (self.world.coverage == 1) & self.world.free_mask
        return int(covered.sum())

    def observe(self) -> np.ndarray:
        if self.agent is None:
            raise RuntimeError("observe() before reset()")
        return egocentric_observe(
            self.world,
            self.agent.position,
            self.agent.heading,
            scales=self.obs_scales,
            size=self.obs_size,
            base_window=self.base_window,
        )

    @property
    def observation_shape(self):
        return (self.obs_scales, 3, self.obs_size, self.obs_size)

    @property
    def done(self) -> bool:
        return self._done


def write_trace_csv(path, trace: list[TraceRow], config_hash: str | None = None) -> None:
    """Episode trace as CSV (step, u, v, heading, omega, n_new, tv, reward)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["step", "u", "v", "heading", "omega", "n_new", "tv", "reward"])
        for row in trace:
            writer.writerow(
                [
                    row.step,
                    f"{row.u:.17g}",
                    f"{row.v:.17g}",
                    f"{row.heading:.17g}",
                    f"{row.omega:.17g}",
                    row.n_new,
                    f"{row.tv:.17g}",
                    f"{row.reward:.17g}",
                ]
            )
