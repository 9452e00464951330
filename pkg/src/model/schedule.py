from __future__ import annotations

from typing import Any

import torch
from torch import Tensor


class NoiseSchedule:
    """Linear-beta forward diffusion process.

    ``alpha_bars`` is indexed by timestep over [0, T]; index 0 is the clean
    image (alpha_bar = 1).
    """

    def __init__(
        self,
        num_steps: int = 1000,
        beta_start: float = 1e-4,
        beta_end: float = 0.02,
    ) -> None:
        if num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {num_steps}")
        if not 0.0 < beta_start <= beta_end < 1.0:
            raise ValueError(
                f"betas must satisfy 0 < start <= end < 1, got {beta_start}, {beta_end}"
            )
        self.beta_start = beta_start
        self.beta_end = beta_end
        self.betas = torch.linspace(beta_start, beta_end, num_steps, dtype=torch.float64)
        self.alphas = 1.0 - self.betas
        self.alpha_bars = torch.cat(
            [torch.ones(1, dtype=torch.float64), torch.cumprod(self.alphas, dim=0)]
        )

    @property
    def T(self) -> int:
        return self.betas.shape[0]

    def _check(self, t: Tensor) -> None:
        if t.numel() and (int(t.min()) < 0 or int(t.max()) > self.T):
            raise ValueError(f"timesteps must lie in [0, {self.T}], got {t.tolist()}")

    def _coefficient(self, values: Tensor, t: int | Tensor, like: Tensor) -> Tensor:
        steps = torch.as_tensor(t, dtype=torch.long)
        self._check(steps)
        coeff = values[steps.cpu()].to(device=like.device, dtype=like.dtype)
        if steps.dim() == 0:
            return coeff
        if steps.shape[0] != like.shape[0]:
            raise ValueError(f"{steps.shape[0]} timesteps for a batch of {like.shape[0]}")
        return coeff.reshape(-1, *([1] * (like.dim() - 1)))

    def alpha_bar(self, t: int | Tensor) -> Tensor:
        steps = torch.as_tensor(t, dtype=torch.long)
        self._check(steps)
        return self.alpha_bars[steps]

    def add_noise(self, z0: Tensor, t: int | Tensor, noise: Tensor) -> Tensor:
        """z_t = sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * noise."""
        if noise.shape != z0.shape:
            raise ValueError(f"noise shape {tuple(noise.shape)} != z0 shape {tuple(z0.shape)}")
        alpha_bar = self._coefficient(self.alpha_bars, t, z0)
        return alpha_bar.sqrt() * z0 + (1.0 - alpha_bar).sqrt() * noise

    def predict_x0(self, z_t: Tensor, t: int | Tensor, eps: Tensor) -> Tensor:
        alpha_bar = self._coefficient(self.alpha_bars, t, z_t)
        return (z_t - (1.0 - alpha_bar).sqrt() * eps) / alpha_bar.sqrt()

    def predict_eps(self, z_t: Tensor, t: int | Tensor, x0: Tensor) -> Tensor:
        """Noise consistent with ``z_t`` and a (possibly clamped) clean estimate; t >= 1."""
        alpha_bar = self._coefficient(self.alpha_bars, t, z_t)
        return (z_t - alpha_bar.sqrt() * x0) / (1.0 - alpha_bar).sqrt()

    def sample_timesteps(self, batch: int, generator: torch.Generator) -> Tensor:
        """Uniform draws from {1, ..., T}."""
        return torch.randint(1, self.T + 1, (batch,), generator=generator)

    def to_dict(self) -> dict[str, Any]:
        return {"num_steps": self.T, "beta_start": self.beta_start, "beta_end": self.beta_end}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> NoiseSchedule:
        return cls(**data)
