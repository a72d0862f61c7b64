"""Toy training loop: fit the denoiser stack on one (condition, target) pair.

One fixed (t, eps) draw is reused every iteration, so the loss is a
deterministic function of the parameters and its decrease directly
measures that the hand-written gradients point downhill.  The step
function is pure (no parameter update) so tests can difference it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..stream_io import GrayImage
from .blocks import (BlockParams, BlockShape, ToyCondDenoiser,
                     encode_condition_cached, encoder_backward, fuse_backward,
                     fuse_cached)
from .nn import Adam
from .sampler import image_to_latent
from .schedule import NoiseSchedule, forward_diffuse, make_schedule, training_loss


def training_step(params: BlockParams, cond_lat, z_t, t_step: int, eps):
    """Loss and gradients for one noise-prediction step, no update.

    Forward: encode condition, fuse into z_t, predict noise; loss is the
    mean squared error against eps.  Backward threads the hand-written
    block gradients in reverse; returns (loss, grads by tensor name).
    """
    feats, enc_cache = encode_condition_cached(cond_lat, params)
    fused, fuse_cache = fuse_cached(z_t, t_step, feats.f_enc_hat, params)
    den = ToyCondDenoiser(params)
    eps_pred, den_cache = den.forward_cached(fused, t_step, feats, guided=True)
    loss = training_loss(eps_pred, eps)

    g_pred = 2.0 * (eps_pred - eps) / eps.size
    den_grads, g_fused, g_f_enc = den.backward(den_cache, g_pred)
    fuse_grads, _g_z, g_f_enc_hat = fuse_backward(params, fuse_cache, g_fused)
    enc_grads, _g_cond = encoder_backward(params, enc_cache, g_f_enc, g_f_enc_hat)

    grads = {**den_grads, **fuse_grads, **enc_grads}
    return loss, grads


@dataclass
class TrainingTrace:
    losses: list[float] = field(default_factory=list)

    @property
    def reduction(self) -> float:
        """Fractional loss drop from the first to the last iteration."""
        if len(self.losses) < 2 or self.losses[0] == 0:
            return 0.0
        return 1.0 - self.losses[-1] / self.losses[0]


def toy_training_run(condition: GrayImage, target: GrayImage,
                     iterations: int = 200, lr: float = 1e-2,
                     seed: int = 0, sched: NoiseSchedule | None = None,
                     t_step: int | None = None,
                     params: BlockParams | None = None) -> tuple[BlockParams, TrainingTrace]:
    """Adam-train all blocks jointly on a single synthetic pair."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if sched is None:
        sched = make_schedule(50)
    if t_step is None:
        t_step = max(1, sched.steps // 2)
    cond_lat = image_to_latent(condition)
    z0 = image_to_latent(target)
    if params is None:
        params = BlockParams.init(
            BlockShape(latent_h=z0.shape[1], latent_w=z0.shape[2]), seed=seed)
    if cond_lat.shape != z0.shape:
        raise ValueError(f"condition {cond_lat.shape} vs target {z0.shape}")

    rng = np.random.Generator(np.random.Philox(key=seed & (2 ** 128 - 1)))
    eps = rng.standard_normal(z0.shape)
    z_t = forward_diffuse(z0, t_step, eps, sched)

    opt = Adam(lr=lr)
    trace = TrainingTrace()
    for _ in range(iterations):
        loss, grads = training_step(params, cond_lat, z_t, t_step, eps)
        trace.losses.append(loss)
        opt.step(params.tensors, grads)
    return params, trace
