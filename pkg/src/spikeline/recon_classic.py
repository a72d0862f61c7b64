"""Baseline reconstructions from spike streams: TFI and TFP.

TFI (texture from interval) estimates the input current from one
inter-spike interval: a pixel firing every ISI frames under constant
current satisfies I ~= threshold / (ISI * sample_period).  TFP (texture
from playback) averages the spike count over a temporal window, which
estimates the firing rate.  Both are linear in the scene up to
quantization, so a display gain is all that is needed on top.
"""

from __future__ import annotations

import numpy as np

from .isi_etfi import IsiMap
from .spike_core import SensorConfig, SpikeStream, firing_rate_map, slice_window
from .stream_io import GrayImage, quantize_u8


def tfi_current(isi: IsiMap, config: SensorConfig) -> np.ndarray:
    """Per-pixel current estimate threshold / (ISI * T), units/s."""
    return config.threshold / (isi.isi.astype(np.float64) * config.sample_period)


def tfi(isi: IsiMap, config: SensorConfig, gain: float | None = None) -> GrayImage:
    """Interval reconstruction: pixel = clip(round(gain * thr / (ISI * T))).

    Default gain maps the brightest representable current (one spike per
    frame, ISI = 1) to 255, i.e. gain = 255 * T / threshold.
    """
    if gain is None:
        gain = 255.0 * config.sample_period / config.threshold
    if not gain > 0:
        raise ValueError(f"gain must be > 0, got {gain}")
    return GrayImage(quantize_u8(gain * tfi_current(isi, config)))


def tfp(stream: SpikeStream, k: int, delta_t: int, gain: float = 255.0) -> GrayImage:
    """Playback reconstruction: windowed mean spike count times gain.

    pixel = clip(round(gain * sum(spikes in [k-delta_t, k+delta_t]) / (2*delta_t+1))).
    Default gain 255 maps a saturated pixel (rate 1) to white.
    """
    if not gain > 0:
        raise ValueError(f"gain must be > 0, got {gain}")
    window = slice_window(stream, k, delta_t)
    return GrayImage(quantize_u8(gain * firing_rate_map(window)))
