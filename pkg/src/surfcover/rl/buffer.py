"""Uniform replay buffer with FIFO eviction and optional n-step returns.

Observations are binary maps, so they are stored as uint8 and widened to
float32 only at sampling time. With n_step > 1 each stored transition
carries the discounted n-step return and a per-transition bootstrap
discount (gamma^k for the k steps actually accumulated, zero past a true
terminal), so the critic target needs no done flag beyond it.
"""

from __future__ import annotations

from collections import deque

import numpy as np
import torch


class ReplayBuffer:
    def __init__(self, capacity: int, obs_shape, rng: np.random.Generator,
                 n_step: int = 1, discount: float = 0.99):
        self.capacity = int(capacity)
        self.rng = rng
        self.n_step = int(n_step)
        self.discount = float(discount)
        self.obs = np.zeros((self.capacity, *obs_shape), dtype=np.uint8)
        self.next_obs = np.zeros((self.capacity, *obs_shape), dtype=np.uint8)
        self.actions = np.zeros((self.capacity, 1), dtype=np.float32)
        self.rewards = np.zeros((self.capacity, 1), dtype=np.float32)
        self.dones = np.zeros((self.capacity, 1), dtype=np.float32)
        self.bootstrap = np.zeros((self.capacity, 1), dtype=np.float32)
        self._next = 0
        self.insertions = 0
        self._pending: deque = deque()

    def __len__(self):
        return min(self.insertions, self.capacity)

    @property
    def oldest_insertion_index(self) -> int:
        """Global index of the oldest transition still stored."""
        return max(0, self.insertions - self.capacity)

    def _store(self, obs, action, reward, next_obs, done, bootstrap):
        k = self._next
        self.obs[k] = obs
        self.next_obs[k] = next_obs
        self.actions[k, 0] = action
        self.rewards[k, 0] = reward
        self.dones[k, 0] = 1.0 if done else 0.0
        self.bootstrap[k, 0] = bootstrap
        self._next = (k + 1) % self.capacity
        self.insertions += 1

    def push(self, obs, action, reward, next_obs, done, episode_end: bool | None = None) -> None:
        """Add a transition; `done` marks a true terminal state.

        `episode_end` additionally flags time-limit stops so the n-step
        accumulator does not run across episode boundaries (defaults to
        `done`).
        """
        if episode_end is None:
            episode_end = bool(done)
        if self.n_step == 1:
            self._store(obs, action, reward, next_obs, done,
                        0.0 if done else self.discount)
            return
        self._pending.append((obs, action, reward, next_obs, done))
        if len(self._pending) >= self.n_step:
            self._emit(len(self._pending))
        if episode_end or done:
            while self._pending:
                self._emit(len(self._pending))

    def _emit(self, horizon: int) -> None:
        obs0, action0 = self._pending[0][0], self._pending[0][1]
        ret = 0.0
        for k in range(horizon):
            ret += (self.discount ** k) * self._pending[k][2]
        _, _, _, next_obs, done = self._pending[horizon - 1]
        bootstrap = 0.0 if done else self.discount ** horizon
        self._store(obs0, action0, ret, next_obs, done, bootstrap)
        self._pending.popleft()

    def sample(self, batch_size: int) -> dict:
        """Uniform batch without replacement, as float32 torch tensors."""
        n = len(self)
        if batch_size > n:
            raise ValueError(f"batch size {batch_size} exceeds buffer fill {n}")
        idx = self.rng.choice(n, size=batch_size, replace=False)
        return {
            "obs": torch.from_numpy(self.obs[idx].astype(np.float32)),
            "action": torch.from_numpy(self.actions[idx]),
            "reward": torch.from_numpy(self.rewards[idx]),
            "next_obs": torch.from_numpy(self.next_obs[idx].astype(np.float32)),
            "done": torch.from_numpy(self.dones[idx]),
            "discount": torch.from_numpy(self.bootstrap[idx]),
        }
