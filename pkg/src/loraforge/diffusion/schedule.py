"""Linear beta schedule and the forward noising step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, RangeError
from ..tensor import Tensor


@dataclass
class NoiseSchedule:
    T: int
    betas: np.ndarray        # float32 [T], strictly increasing in (0, 1)
    alphas_bar: np.ndarray   # float32 [T], strictly decreasing cumulative products

    def abar(self, t: int) -> float:
        if not 0 <= t < self.T:
            raise RangeError(f"timestep {t} outside [0, {self.T})")
        return float(self.alphas_bar[t])


def make_schedule(T: int, beta_min: float = 1e-4, beta_max: float = 0.02) -> NoiseSchedule:
    if T < 2:
        raise ConfigError(f"schedule needs T >= 2, got {T}")
    if not (0.0 < beta_min < beta_max < 1.0):
        raise ConfigError(f"need 0 < beta_min < beta_max < 1, got ({beta_min}, {beta_max})")
    betas = np.linspace(beta_min, beta_max, T, dtype=np.float64)
    alphas_bar = np.cumprod(1.0 - betas)
    return NoiseSchedule(T=T, betas=betas.astype(np.float32),
                         alphas_bar=alphas_bar.astype(np.float32))


def q_sample(z0: Tensor, t: int, eps: Tensor, s: NoiseSchedule) -> Tensor:
    """z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps."""
    if eps.data.shape != z0.data.shape:
        raise ConfigError(f"noise shape {eps.data.shape} != signal shape {z0.data.shape}")
    ab = s.abar(t)
    return z0 * float(np.sqrt(ab)) + eps * float(np.sqrt(1.0 - ab))


def q_sample_batch(z0: np.ndarray, t: np.ndarray, eps: np.ndarray,
                   s: NoiseSchedule) -> np.ndarray:
    """Vectorized forward noising with a per-sample timestep."""
    if np.any(t < 0) or np.any(t >= s.T):
        raise RangeError(f"timesteps outside [0, {s.T})")
    ab = s.alphas_bar[t].reshape(-1, *([1] * (z0.ndim - 1)))
    return (np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps).astype(np.float32)
