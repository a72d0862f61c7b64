"""Full conditional sampling loop over the reverse diffusion process.

Per step t = steps..1: fuse the condition into the current latent, ask
the denoiser for conditional and unconditional noise estimates, combine
them with classifier-free guidance, then take one reverse step.  The
condition is encoded once up front; the unconditional branch runs the
identical code path with zeroed condition features.  The final step
adds no noise, so the output is a deterministic function of the seed.
"""

from __future__ import annotations

import numpy as np

from ..isi_etfi import EtfiImage
from ..stream_io import GrayImage, quantize_u8
from .blocks import (BlockParams, BlockShape, encode_condition, fuse,
                     zero_features)
from .schedule import NoiseSchedule, cfg_combine, reverse_step


def image_to_latent(img: GrayImage) -> np.ndarray:
    """(H, W) uint8 -> (1, H, W) float64 in [-1, 1]."""
    return (img.pixels.astype(np.float64) / 127.5 - 1.0)[None]


def latent_to_image(z) -> GrayImage:
    """Inverse of image_to_latent, with clipping and half-up rounding."""
    z = np.asarray(z, dtype=np.float64)
    return GrayImage(quantize_u8((z[0] + 1.0) * 127.5))


def sample(denoiser, condition, sched: NoiseSchedule, cfg_scale: float = 2.0,
           seed: int = 0, params: BlockParams | None = None,
           trace=None) -> GrayImage:
    """Draw one image conditioned on an enhanced-intensity map.

    `condition` is a GrayImage or EtfiImage sized like the latent.
    `params` defaults to freshly zero-initialized blocks (conditioning
    branches are exact no-ops then, which is what the oracle denoiser
    expects).  `trace(t, z)` is called after every reverse step.
    """
    cond_img = condition.image if isinstance(condition, EtfiImage) else condition
    cond_lat = image_to_latent(cond_img)
    if params is None:
        params = BlockParams.init(
            BlockShape(latent_h=cond_lat.shape[1], latent_w=cond_lat.shape[2]),
            seed=seed)
    feats = encode_condition(cond_lat, params)
    uncond = zero_features(params.shape)

    rng = np.random.Generator(np.random.Philox(key=seed & (2 ** 128 - 1)))
    z = rng.standard_normal(cond_lat.shape)
    for t in range(sched.steps, 0, -1):
        fused_c = fuse(z, t, feats.f_enc_hat, params)
        eps_c = denoiser(fused_c, t, feats, guided=True)
        if cfg_scale == 1.0:
            eps = eps_c
        else:
            fused_u = fuse(z, t, uncond.f_enc_hat, params)
            eps_u = denoiser(fused_u, t, uncond, guided=False)
            eps = cfg_combine(eps_c, eps_u, cfg_scale)
        # the final step is deterministic: no fresh noise below t=1
        noise = rng.standard_normal(z.shape) if t > 1 else np.zeros_like(z)
        z = reverse_step(z, t, eps, sched, noise)
        if trace is not None:
            trace(t, z)
    return latent_to_image(z)
