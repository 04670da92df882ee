"""Project configuration: one JSON file drives the whole pipeline.

Every training hyperparameter is named here with its default (learning
rate 3e-4, batch size 256, replay buffer 1e6, discount 0.99, action noise
3e-4, 2e6 total steps). Stage sub-seeds derive from the single project
seed by stable hashing, and artifacts embed the configuration hash so
downstream stages can verify lineage.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .env import RewardConfig


@dataclass
class TrainConfig:
    """Soft actor-critic hyperparameters and network sizing."""

    learning_rate: float = 3e-4
    batch_size: int = 256
    replay_buffer_size: int = 1_000_000
    discount: float = 0.99
    action_noise: float = 3e-4
    action_noise_enabled: bool = True
    total_steps: int = 2_000_000
    warmup_steps: int = 1_000
    update_every: int = 1  # gradient updates happen every this many env steps
    n_step: int = 1  # reward accumulation horizon for the critic target
    keep_best_eval: bool = False  # restore the best-evaluation snapshot at the end
    polyak_tau: float = 0.005
    target_entropy: float = -1.0
    init_temperature: float = 1.0
    min_temperature: float = 0.0  # floor for the auto-tuned entropy weight
    eval_interval: int = 5_000
    eval_episodes: int = 3
    checkpoint_interval: int = 0  # 0 disables periodic checkpoints
    num_threads: int = 1
    conv_channels: tuple = (16, 32, 32)
    fc_sizes: tuple = (256, 256)
    head_hidden: int = 256
    critic_layer_norm: bool = False
    aug_shift: int = 0  # random-shift augmentation radius (pixels) for update batches
    shared_extractor: bool = True

    def __post_init__(self):
        if isinstance(self.conv_channels, list):
            self.conv_channels = tuple(self.conv_channels)
        if isinstance(self.fc_sizes, list):
            self.fc_sizes = tuple(self.fc_sizes)
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.total_steps <= 0:
            raise ValueError("learning_rate, batch_size and total_steps must be positive")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if self.replay_buffer_size <= 0 or self.update_every <= 0:
            raise ValueError("replay_buffer_size and update_every must be positive")


@dataclass
class ProjectConfig:
    """Everything the pipeline needs, grouped per stage."""

    mesh: str = "mesh.obj"
    region: str | None = None  # optional face-selection file
    triangulate: bool = False
    domain: str = "square"
    weights: str = "cotangent"
    start_vertex: int | None = None

    resolution: int = 256
    footprint_radius: float = 0.08
    speed: float = 0.05
    max_turn_deg: float = 45.0
    obs_scales: int = 2
    obs_size: int = 64
    base_window: float = 2.0

    reward: RewardConfig = field(default_factory=RewardConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    plan_method: str = "zigzag"
    plan_spacing: float | None = None  # None: 1.8 * footprint_radius
    plan_margin: float = 0.0

    lift_delta: float = 0.02
    lift_dt: float = 0.1
    lift_gamma0: float = 0.0

    seed: int = 0
    output_dir: str = "out"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectConfig":
        d = dict(d)
        if "reward" in d and isinstance(d["reward"], dict):
            d["reward"] = RewardConfig(**d["reward"])
        if "train" in d and isinstance(d["train"], dict):
            d["train"] = TrainConfig(**d["train"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ProjectConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def stage_seed(seed: int, stage: str) -> int:
    """Deterministic per-stage sub-seed derived from the project seed."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**31 - 1)
