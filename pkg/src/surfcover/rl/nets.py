"""Networks: a scale-grouped convolutional extractor and SAC heads.

The extractor runs one independent convolution stack per observation
scale (grouped convolutions, no weight sharing across scales), then
concatenates the per-scale features and fuses them through fully
connected layers.
"""

from __future__ import annotations

import torch
import torch.nn as nn

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0


class ScaleGroupedCNN(nn.Module):
    """Per-scale grouped conv stacks feeding a shared fully connected trunk."""

    def __init__(self, scales=2, obs_size=64, channels=(16, 32, 32), fc_sizes=(256, 256)):
        super().__init__()
        self.scales = scales
        self.obs_size = obs_size
        convs = []
        prev = 3
        for ch in channels:
            convs.append(nn.Conv2d(prev * scales, ch * scales, kernel_size=3, stride=2, groups=scales))
            convs.append(nn.ReLU())
            prev = ch
        self.convs = nn.Sequential(*convs)
        with torch.no_grad():
            dummy = torch.zeros(1, 3 * scales, obs_size, obs_size)
            flat = self.convs(dummy).flatten(1).shape[1]
        fcs = []
        prev = flat
        for width in fc_sizes:
            fcs.append(nn.Linear(prev, width))
            fcs.append(nn.ReLU())
            prev = width
        self.fc = nn.Sequential(*fcs)
        self.feature_dim = prev

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        """(B, scales, 3, H, W) or (B, scales*3, H, W) -> (B, feature_dim)."""
        if obs.dim() == 5:
            obs = obs.reshape(obs.shape[0], -1, obs.shape[3], obs.shape[4])
        if obs.shape[1] != 3 * self.scales or obs.shape[2] != self.obs_size:
            raise ValueError(
                f"observation shape {tuple(obs.shape)} does not match "
                f"(B, {self.scales}, 3, {self.obs_size}, {self.obs_size})"
            )
        return self.fc(self.convs(obs).flatten(1))


class PolicyHead(nn.Module):
    """Squashed-Gaussian policy over one action dimension."""

    def __init__(self, feature_dim: int, hidden: int = 256):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(feature_dim, hidden), nn.ReLU(), nn.Linear(hidden, 2))
        # Small output init keeps the initial mean near zero and the initial
        # std near 1 instead of whatever the random head happens to saturate.
        with torch.no_grad():
            self.net[-1].weight.mul_(0.01)
            self.net[-1].bias.zero_()

    def forward(self, features: torch.Tensor):
        mean, log_std = self.net(features).chunk(2, dim=-1)
        return mean, log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)

    def sample(self, features: torch.Tensor, noise: torch.Tensor | None = None):
        """Reparameterized action in [-1, 1] and its log-probability.

        `noise` substitutes the standard-normal draw when given (used by
        gradient checks to freeze stochasticity).
        """
        mean, log_std = self(features)
        std = log_std.exp()
        if noise is None:
            noise = torch.randn_like(mean)
        z = mean + std * noise
        action = torch.tanh(z)
        log_prob = (
            -0.5 * ((z - mean) / std) ** 2 - log_std - 0.5 * torch.log(torch.tensor(2.0 * torch.pi))
        ).sum(-1, keepdim=True)
        # tanh change of variables: log(1 - tanh(z)^2) in a stable form.
        log_prob = log_prob - (
            2.0 * (torch.log(torch.tensor(2.0)) - z - torch.nn.functional.softplus(-2.0 * z))
        ).sum(-1, keepdim=True)
        return action, log_prob

    def mean_action(self, features: torch.Tensor) -> torch.Tensor:
        mean, _ = self(features)
        return torch.tanh(mean)


class QHead(nn.Module):
    """State-action value head on (features, normalized action).

    Optional layer normalization after each hidden layer keeps the twin
    critics from drifting to extreme values on small replay buffers.
    """

    def __init__(self, feature_dim: int, hidden: int = 256, layer_norm: bool = False):
        super().__init__()
        layers = [nn.Linear(feature_dim + 1, hidden)]
        if layer_norm:
            layers.append(nn.LayerNorm(hidden))
        layers += [nn.ReLU(), nn.Linear(hidden, hidden)]
        if layer_norm:
            layers.append(nn.LayerNorm(hidden))
        layers += [nn.ReLU(), nn.Linear(hidden, 1)]
        self.net = nn.Sequential(*layers)

    def forward(self, features: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([features, action], dim=-1))
