"""Shared fixtures and independent reference implementations.

The reference functions here are deliberately written as naive scans so
they stay independent of the vectorized library code they check.
"""

from __future__ import annotations

import numpy as np
import pytest

from spikeline import (
    LuminanceVideo,
    NoiseModel,
    SensorConfig,
    SpikeStream,
    simulate_stream,
)


def brute_force_isi(stream: SpikeStream, k: int):
    """Per-pixel python scan for the interval around frame k.

    Mirrors the definition directly: previous spike at index <= k (the
    frame itself counts), next spike strictly after, window length as the
    fallback when either side is missing.
    """
    local = k - stream.start_index
    frames, height, width = stream.bits.shape
    isi = np.empty((height, width), dtype=np.int64)
    valid = np.empty((height, width), dtype=bool)
    for y in range(height):
        for x in range(width):
            t_prev = -1
            for f in range(local, -1, -1):
                if stream.bits[f, y, x]:
                    t_prev = f
                    break
            t_next = -1
            for f in range(local + 1, frames):
                if stream.bits[f, y, x]:
                    t_next = f
                    break
            if t_prev >= 0 and t_next >= 0:
                isi[y, x] = t_next - t_prev
                valid[y, x] = True
            else:
                isi[y, x] = frames
                valid[y, x] = False
    return isi, valid


def random_stream(rng: np.random.Generator, *, height=16, width=16, frames=64,
                  density=None, start_index=0) -> SpikeStream:
    """Random bernoulli spike tensor wrapped in a stream."""
    if density is None:
        density = rng.uniform(0.02, 0.6)
    bits = (rng.random((frames, height, width)) < density).astype(np.uint8)
    config = SensorConfig(width=width, height=height)
    return SpikeStream(config=config, bits=bits, start_index=start_index)


def constant_scene_stream(rate: float, *, size=32, frames=400) -> SpikeStream:
    """Noise-free stream whose per-pixel firing rate is exactly floor-law."""
    config = SensorConfig(width=size, height=size)
    intensity = np.full((size, size), rate * config.threshold / config.sample_period)
    video = LuminanceVideo.from_image(intensity, frames=frames)
    return simulate_stream(video, config)


def toy_scene(i: int, *, lo=6, hi=48, size=48) -> np.ndarray:
    """Smooth dim test scene: tilted plane plus a few gaussian blobs.

    Values are range-normalized into [lo, hi] so every scene exercises a
    usable spread of firing rates. Dim values keep the per-level interval
    spacing wider than the +-1 frame phase jitter of measured intervals,
    which is what makes rank correlation against ground truth meaningful.
    """
    rng = np.random.default_rng(1000 + i)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    ang = rng.uniform(0, 2 * np.pi)
    base = (np.cos(ang) * xx + np.sin(ang) * yy) / size
    for _ in range(3):
        cy, cx = rng.uniform(0, size, 2)
        amp = rng.uniform(0.3, 1.2)
        sig = rng.uniform(6, 14)
        base += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sig ** 2))
    a, b = base.min(), base.max()
    return np.round(lo + (hi - lo) * (base - a) / (b - a)).astype(np.uint8)


def write_toy_corpus(directory, count=16, *, size=48):
    """Write `count` toy scenes as PGM files, return the paths."""
    from spikeline import GrayImage, write_pgm

    paths = []
    for i in range(count):
        path = directory / f"scene_{i:02d}.pgm"
        path.write_bytes(write_pgm(GrayImage(pixels=toy_scene(i, size=size))))
        paths.append(path)
    return paths


def generic_point(params, seed=99, std=0.4):
    """Resample every tensor, including the zero-initialized ones.

    Gradient checks must run away from the zero-init point: there the
    zero projections block the chain rule and every upstream gradient is
    trivially zero, so agreement with finite differences means nothing.
    """
    out = params.copy()
    gen = np.random.default_rng(seed)
    for name in out.tensors:
        out.tensors[name] = gen.normal(0.0, std, out.tensors[name].shape)
    return out


def fd_gradient_errors(loss_fn, params, names, h=1e-5):
    """Central-difference check of d loss / d tensor for each named tensor.

    Returns {name: relative error} where the error is the vector norm
    ||fd - analytic|| / max(1e-12, ||fd||, ||analytic||).  Per-element
    comparison is the wrong tool here: entries near the roundoff floor
    (~1e-11 for h=1e-5) would dominate despite being numerically exact.
    """
    _, grads = loss_fn(params)
    errors = {}
    for name in names:
        tensor = params.tensors[name]
        fd = np.empty_like(tensor)
        flat = tensor.ravel()
        fd_flat = fd.ravel()
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up, _ = loss_fn(params)
            flat[i] = keep - h
            down, _ = loss_fn(params)
            flat[i] = keep
            fd_flat[i] = (up - down) / (2 * h)
        an = grads[name]
        denom = max(1e-12, np.linalg.norm(fd), np.linalg.norm(an))
        errors[name] = float(np.linalg.norm(fd - an) / denom)
    return errors


def fd_input_gradient(loss_fn, x, h=1e-5):
    """Central-difference gradient of a scalar function of one array."""
    x = np.asarray(x, dtype=np.float64).copy()
    fd = np.empty_like(x)
    flat = x.ravel()
    fd_flat = fd.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = loss_fn(x)
        flat[i] = keep - h
        down = loss_fn(x)
        flat[i] = keep
        fd_flat[i] = (up - down) / (2 * h)
    return fd


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def quiet_sensor():
    return SensorConfig(width=16, height=16, noise=NoiseModel())
