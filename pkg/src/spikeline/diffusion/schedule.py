"""DDPM noise schedule and the forward/reverse process algebra.

Timesteps are 1-based: t runs over 1..steps, and schedule arrays are
indexed t-1.  alpha_bar(0) is defined as 1 (no noise), which makes the
reverse-step identities exact:

    forward:  z_t     = sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps
    reverse:  z_{t-1} = (z_t - beta_t / sqrt(1 - abar_t) * eps_pred)
                          / sqrt(alpha_t)  +  sigma_t * noise

Latent tensors are plain float64 arrays of any shape (conventionally
(channels, height, width)); every operation here is shape-preserving
and elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step diffusion coefficients; arrays all have length `steps`."""

    steps: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray
    variance_mode: str

    def alpha_bar_at(self, t: int) -> float:
        """Cumulative signal coefficient; t=0 gives 1 (clean data)."""
        if not 0 <= t <= self.steps:
            raise ValueError(f"t={t} outside [0, {self.steps}]")
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])

    def _at(self, arr: np.ndarray, t: int) -> float:
        if not 1 <= t <= self.steps:
            raise ValueError(f"t={t} outside [1, {self.steps}]")
        return float(arr[t - 1])


def make_schedule(steps: int, beta_start: float = DEFAULT_BETA_START,
                  beta_end: float = DEFAULT_BETA_END,
                  variance_mode: str = "beta") -> NoiseSchedule:
    """Linear beta schedule with sigma_t = 0 or sqrt(beta_t) per mode."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not 0 < beta_start <= beta_end < 1:
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]")
    if variance_mode not in ("zero", "beta"):
        raise ValueError(f"variance_mode must be 'zero' or 'beta', got {variance_mode!r}")
    beta = np.linspace(beta_start, beta_end, steps)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    sigma = np.zeros(steps) if variance_mode == "zero" else np.sqrt(beta)
    return NoiseSchedule(steps=steps, beta=beta, alpha=alpha,
                         alpha_bar=alpha_bar, sigma=sigma,
                         variance_mode=variance_mode)


def _check_shapes(*tensors):
    shapes = {np.shape(x) for x in tensors}
    if len(shapes) > 1:
        raise ValueError(f"latent shape mismatch: {sorted(shapes)}")


def forward_diffuse(z0, t: int, eps, sched: NoiseSchedule):
    """Noising step: z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps."""
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_shapes(z0, eps)
    abar = sched.alpha_bar_at(t)
    if t < 1:
        raise ValueError("t must be >= 1")
    return np.sqrt(abar) * z0 + np.sqrt(1.0 - abar) * eps


def reverse_step(z_t, t: int, eps_pred, sched: NoiseSchedule, noise):
    """One denoising step from t to t-1 (see module formula)."""
    z_t = np.asarray(z_t, dtype=np.float64)
    eps_pred = np.asarray(eps_pred, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    _check_shapes(z_t, eps_pred, noise)
    beta_t = sched._at(sched.beta, t)
    alpha_t = sched._at(sched.alpha, t)
    abar_t = sched._at(sched.alpha_bar, t)
    sigma_t = sched._at(sched.sigma, t)
    mean = (z_t - beta_t / np.sqrt(1.0 - abar_t) * eps_pred) / np.sqrt(alpha_t)
    return mean + sigma_t * noise


def cfg_combine(eps_cond, eps_uncond, scale: float):
    """Classifier-free guidance: eps_u + scale * (eps_c - eps_u)."""
    eps_cond = np.asarray(eps_cond, dtype=np.float64)
    eps_uncond = np.asarray(eps_uncond, dtype=np.float64)
    _check_shapes(eps_cond, eps_uncond)
    return eps_uncond + scale * (eps_cond - eps_uncond)


def training_loss(eps_pred, eps) -> float:
    """Mean squared error between predicted and true noise."""
    eps_pred = np.asarray(eps_pred, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_shapes(eps_pred, eps)
    return float(np.mean((eps_pred - eps) ** 2))
