"""Soft actor-critic on the coverage environment.

Twin Q heads and the policy share one convolutional extractor; only the
critic loss updates the shared extractor (the actor consumes detached
features), a common stabilizer when sharing. Temperature is auto-tuned
toward a fixed target entropy. With num_threads=1 a fixed seed reproduces
training bitwise.
"""

from __future__ import annotations

import math
from dataclasses import asdict

import numpy as np
import torch

from ..baselines import UVPath
from ..config import TrainConfig
from ..env import DONE_TARGET, CoverageEnv
from .buffer import ReplayBuffer
from .nets import PolicyHead, QHead, ScaleGroupedCNN


class TrainingDiverged(RuntimeError):
    pass


class SacAgent:
    def __init__(self, obs_scales: int, obs_size: int, config: TrainConfig, action_limit: float = 45.0):
        self.config = config
        self.action_limit = float(action_limit)
        self.obs_scales = obs_scales
        self.obs_size = obs_size

        def make_extractor():
            return ScaleGroupedCNN(
                scales=obs_scales,
                obs_size=obs_size,
                channels=config.conv_channels,
                fc_sizes=config.fc_sizes,
            )

        self.extractor = make_extractor()
        feat = self.extractor.feature_dim
        self.policy = PolicyHead(feat, hidden=config.head_hidden)
        self.q1 = QHead(feat, hidden=config.head_hidden, layer_norm=config.critic_layer_norm)
        self.q2 = QHead(feat, hidden=config.head_hidden, layer_norm=config.critic_layer_norm)
        self.actor_extractor = None if config.shared_extractor else make_extractor()

        self.target_extractor = make_extractor()
        self.target_q1 = QHead(feat, hidden=config.head_hidden, layer_norm=config.critic_layer_norm)
        self.target_q2 = QHead(feat, hidden=config.head_hidden, layer_norm=config.critic_layer_norm)
        self._copy_targets()
        for p in self._target_parameters():
            p.requires_grad_(False)

        self.log_alpha = torch.tensor([math.log(config.init_temperature)], requires_grad=True)
        lr = config.learning_rate
        critic_params = (
            list(self.extractor.parameters()) + list(self.q1.parameters()) + list(self.q2.parameters())
        )
        actor_params = list(self.policy.parameters())
        if self.actor_extractor is not None:
            actor_params += list(self.actor_extractor.parameters())
        self.critic_opt = torch.optim.Adam(critic_params, lr=lr)
        self.actor_opt = torch.optim.Adam(actor_params, lr=lr)
        self.alpha_opt = torch.optim.Adam([self.log_alpha], lr=lr)

    # -- plumbing --------------------------------------------------------

    def _online_critic_modules(self):
        return [self.extractor, self.q1, self.q2]

    def _target_modules(self):
        return [self.target_extractor, self.target_q1, self.target_q2]

    def _target_parameters(self):
        for m in self._target_modules():
            yield from m.parameters()

    def _copy_targets(self):
        for online, target in zip(self._online_critic_modules(), self._target_modules()):
            target.load_state_dict(online.state_dict())

    def polyak_update(self, tau: float | None = None) -> None:
        tau = self.config.polyak_tau if tau is None else tau
        with torch.no_grad():
            for online, target in zip(self._online_critic_modules(), self._target_modules()):
                for p, pt in zip(online.parameters(), target.parameters()):
                    pt.mul_(1.0 - tau).add_(tau * p)

    @property
    def alpha(self) -> torch.Tensor:
        return self.log_alpha.exp()

    def _policy_features(self, obs: torch.Tensor, grad: bool) -> torch.Tensor:
        if self.actor_extractor is not None:
            feats = self.actor_extractor(obs)
            return feats if grad else feats.detach()
        with torch.no_grad():
            return self.extractor(obs)

    # -- acting ----------------------------------------------------------

    def act(self, obs: np.ndarray, deterministic: bool = False) -> float:
        """Action in degrees for one observation."""
        with torch.no_grad():
            t = torch.from_numpy(np.ascontiguousarray(obs, dtype=np.float32)).unsqueeze(0)
            feats = (self.actor_extractor or self.extractor)(t)
            if deterministic:
                a = self.policy.mean_action(feats)
            else:
                a, _ = self.policy.sample(feats)
        return float(a.item() * self.action_limit)

    # -- losses ----------------------------------------------------------

    def critic_loss(self, batch: dict, next_noise: torch.Tensor | None = None) -> torch.Tensor:
        """Twin-Q regression against the soft Bellman target.

        With done=1 the target is exactly the reward (no bootstrap).
        """
        cfg = self.config
        with torch.no_grad():
            next_feats = self.target_extractor(batch["next_obs"])
            pol_feats = self._policy_features(batch["next_obs"], grad=False)
            next_action, next_logp = self.policy.sample(pol_feats, noise=next_noise)
            tq = torch.min(
                self.target_q1(next_feats, next_action),
                self.target_q2(next_feats, next_action),
            )
            if "discount" in batch:
                bootstrap = batch["discount"]
            else:
                bootstrap = cfg.discount * (1.0 - batch["done"])
            target = batch["reward"] + bootstrap * (tq - self.alpha.detach() * next_logp)
        feats = self.extractor(batch["obs"])
        action_norm = batch["action"] / self.action_limit
        q1 = self.q1(feats, action_norm)
        q2 = self.q2(feats, action_norm)
        return ((q1 - target) ** 2).mean() + ((q2 - target) ** 2).mean()

    def actor_alpha_loss(self, batch: dict, noise: torch.Tensor | None = None):
        """Policy loss, temperature loss, and the sampled log-probabilities."""
        feats = self._policy_features(batch["obs"], grad=True)
        action, logp = self.policy.sample(feats, noise=noise)
        q = torch.min(self.q1(feats.detach(), action), self.q2(feats.detach(), action))
        actor_loss = (self.alpha.detach() * logp - q).mean()
        alpha_loss = -(self.log_alpha * (logp.detach() + self.config.target_entropy)).mean()
        return actor_loss, alpha_loss, logp

    def _augment(self, batch: dict) -> dict:
        """Random-shift augmentation of both observation tensors.

        Each sample is rolled by up to aug_shift pixels (zero fill), the
        same shift across scales and channels; a cheap regularizer that
        keeps the critics from overfitting exact pixel positions.
        """
        pad = self.config.aug_shift
        if pad <= 0:
            return batch
        out = dict(batch)
        for key in ("obs", "next_obs"):
            x = batch[key]
            b = x.shape[0]
            shifts = torch.randint(-pad, pad + 1, (b, 2))
            rolled = torch.empty_like(x)
            for i in range(b):
                di, dj = int(shifts[i, 0]), int(shifts[i, 1])
                xi = torch.roll(x[i], shifts=(di, dj), dims=(-2, -1))
                if di > 0:
                    xi[..., :di, :] = 0.0
                elif di < 0:
                    xi[..., di:, :] = 0.0
                if dj > 0:
                    xi[..., :, :dj] = 0.0
                elif dj < 0:
                    xi[..., :, dj:] = 0.0
                rolled[i] = xi
            out[key] = rolled
        return out

    def update(self, batch: dict) -> dict:
        batch = self._augment(batch)
        c_loss = self.critic_loss(batch)
        self.critic_opt.zero_grad()
        c_loss.backward()
        self.critic_opt.step()

        a_loss, al_loss, logp = self.actor_alpha_loss(batch)
        self.actor_opt.zero_grad()
        a_loss.backward()
        self.actor_opt.step()

        self.alpha_opt.zero_grad()
        al_loss.backward()
        self.alpha_opt.step()
        if self.config.min_temperature > 0.0:
            with torch.no_grad():
                self.log_alpha.clamp_(min=math.log(self.config.min_temperature))

        self.polyak_update()
        stats = {
            "critic_loss": float(c_loss.item()),
            "actor_loss": float(a_loss.item()),
            "alpha_loss": float(al_loss.item()),
            "temperature": float(self.alpha.item()),
            "entropy": float(-logp.mean().item()),
        }
        if not all(math.isfinite(v) for v in stats.values()):
            raise TrainingDiverged(f"non-finite training statistics: {stats}")
        return stats

    # -- persistence -------------------------------------------------------

    def state_dicts(self) -> dict:
        d = {
            "extractor": self.extractor.state_dict(),
            "policy": self.policy.state_dict(),
            "q1": self.q1.state_dict(),
            "q2": self.q2.state_dict(),
            "target_extractor": self.target_extractor.state_dict(),
            "target_q1": self.target_q1.state_dict(),
            "target_q2": self.target_q2.state_dict(),
            "log_alpha": self.log_alpha.detach().clone(),
        }
        if self.actor_extractor is not None:
            d["actor_extractor"] = self.actor_extractor.state_dict()
        return d

    def load_state_dicts(self, d: dict) -> None:
        self.extractor.load_state_dict(d["extractor"])
        self.policy.load_state_dict(d["policy"])
        self.q1.load_state_dict(d["q1"])
        self.q2.load_state_dict(d["q2"])
        self.target_extractor.load_state_dict(d["target_extractor"])
        self.target_q1.load_state_dict(d["target_q1"])
        self.target_q2.load_state_dict(d["target_q2"])
        with torch.no_grad():
            self.log_alpha.copy_(d["log_alpha"])
        if self.actor_extractor is not None and "actor_extractor" in d:
            self.actor_extractor.load_state_dict(d["actor_extractor"])


def save_checkpoint(agent: SacAgent, path, config_hash: str | None = None) -> None:
    """Versioned checkpoint: arch description plus named weight tensors."""
    torch.save(
        {
            "format_version": 1,
            "config_hash": config_hash,
            "train_config": asdict(agent.config),
            "arch": {
                "obs_scales": agent.obs_scales,
                "obs_size": agent.obs_size,
                "action_limit": agent.action_limit,
            },
            "state": agent.state_dicts(),
        },
        path,
    )


def load_checkpoint(path) -> tuple[SacAgent, str | None]:
    blob = torch.load(path, weights_only=False)
    if blob.get("format_version") != 1:
        raise ValueError(f"unsupported checkpoint version {blob.get('format_version')}")
    config = TrainConfig(**blob["train_config"])
    agent = SacAgent(
        obs_scales=blob["arch"]["obs_scales"],
        obs_size=blob["arch"]["obs_size"],
        config=config,
        action_limit=blob["arch"]["action_limit"],
    )
    agent.load_state_dicts(blob["state"])
    return agent, blob.get("config_hash")


def evaluate_policy(
    agent: SacAgent, env: CoverageEnv, episodes: int, starts=None
) -> tuple[float, float]:
    """Deterministic episodes; returns (mean steps, mean final coverage).

    `starts` optionally fixes the start poses (cycled over), which makes
    the evaluation itself deterministic across calls.
    """
    steps, coverage = [], []
    for k in range(episodes):
        obs = env.reset(starts[k % len(starts)] if starts else None)
        done = False
        while not done:
            res = env.step(agent.act(obs, deterministic=True))
            obs = res.observation
            done = res.done
        steps.append(env.agent.step_count)
        coverage.append(env.coverage_fraction)
    return float(np.mean(steps)), float(np.mean(coverage))


def train(
    env: CoverageEnv,
    config: TrainConfig,
    seed: int = 0,
    eval_env: CoverageEnv | None = None,
    eval_starts=None,
    progress: bool = False,
) -> tuple[SacAgent, list[dict]]:
    """Run the SAC loop on `env` and return the agent plus the training log.

    The log holds one row per finished training episode and one per
    evaluation round (kind column distinguishes them). Evaluation needs a
    separate `eval_env` so it never perturbs the training episode.
    """
    torch.set_num_threads(config.num_threads)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    agent = SacAgent(env.obs_scales, env.obs_size, config)
    capacity = min(config.replay_buffer_size, config.total_steps)
    buffer = ReplayBuffer(capacity, env.observation_shape, rng,
                          n_step=config.n_step, discount=config.discount)

    log: list[dict] = []
    stats = {"critic_loss": math.nan, "actor_loss": math.nan, "alpha_loss": math.nan,
             "temperature": config.init_temperature, "entropy": math.nan}
    episode = 0
    episode_steps = 0
    best_coverage = -1.0
    best_state = None
    obs = env.reset()

    for step in range(1, config.total_steps + 1):
        if step <= config.warmup_steps:
            action = float(rng.uniform(-agent.action_limit, agent.action_limit))
        else:
            action = agent.act(obs, deterministic=False)
            if config.action_noise_enabled and config.action_noise > 0.0:
                action += float(rng.normal(0.0, config.action_noise))
            action = float(np.clip(action, -agent.action_limit, agent.action_limit))

        result = env.step(action)
        # A step-cap stop is a time limit, not a property of the state, so
        # the stored transition keeps bootstrapping (only target-reached is
        # a true terminal).
        terminal = result.done and result.done_reason == DONE_TARGET
        buffer.push(obs, action, result.reward, result.observation, terminal,
                    episode_end=result.done)
        obs = result.observation
        episode_steps += 1

        if result.done:
            log.append(
                {
                    "step": step,
                    "episode": episode,
                    "kind": "train",
                    "steps_per_episode": episode_steps,
                    "coverage": env.coverage_fraction,
                    **stats,
                }
            )
            episode += 1
            episode_steps = 0
            obs = env.reset()

        if step > config.warmup_steps and len(buffer) >= config.batch_size and step % config.update_every == 0:
            stats = agent.update(buffer.sample(config.batch_size))

        if eval_env is not None and config.eval_interval > 0 and step % config.eval_interval == 0:
            mean_steps, mean_cov = evaluate_policy(
                agent, eval_env, config.eval_episodes, starts=eval_starts
            )
            log.append(
                {
                    "step": step,
                    "episode": episode,
                    "kind": "eval",
                    "steps_per_episode": mean_steps,
                    "coverage": mean_cov,
                    **stats,
                }
            )
            if config.keep_best_eval and mean_cov > best_coverage:
                best_coverage = mean_cov
                best_state = {k: _clone_state(v) for k, v in agent.state_dicts().items()}
            if progress:
                print(f"step {step}: eval steps/episode {mean_steps:.1f}, coverage {mean_cov:.3f}")

    if config.keep_best_eval and best_state is not None:
        agent.load_state_dicts(best_state)
    return agent, log


def _clone_state(value):
    if isinstance(value, torch.Tensor):
        return value.detach().clone()
    return {k: v.detach().clone() for k, v in value.items()}


def rollout(agent: SacAgent, env: CoverageEnv, deterministic: bool = True, start=None):
    """One episode driven by the agent; returns (UVPath, trace rows).

    The path starts at the reset pose and is consumable by the lifting and
    metric stages. Consecutive duplicate positions (wall contact) collapse
    to one point.
    """
    obs = env.reset(start)
    points = [env.agent.position.copy()]
    headings = [env.agent.heading]
    done = False
    while not done:
        res = env.step(agent.act(obs, deterministic=deterministic))
        obs = res.observation
        done = res.done
        pos = env.agent.position
        if not np.all(pos == points[-1]):
            points.append(pos.copy())
            headings.append(env.agent.heading)
    return UVPath(np.asarray(points), np.asarray(headings)), list(env.trace)


def write_training_log(path, log: list[dict], config_hash: str | None = None) -> None:
    import csv

    fields = [
        "step", "episode", "kind", "steps_per_episode", "coverage",
        "critic_loss", "actor_loss", "alpha_loss", "temperature", "entropy",
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in log:
            writer.writerow({k: row.get(k) for k in fields})
