"""Integrate-and-fire spike camera simulation.

Each pixel accumulates input current; once the accumulated charge reaches
the threshold the pixel emits a binary spike and keeps the residual
(accumulate-and-subtract, i.e. the accumulator always stays in
[0, threshold)).  The sensor is sampled at discrete steps of length
``sample_period``, so the output is a binary (frames, height, width)
sequence.  For a constant current I with noise off the firing rate per
frame is min(1, I*T/threshold).

Noise model (all optional, all off by default):
  * shot noise    - the per-step charge is resampled as a Poisson photon
                    count with mean I*T*photons_per_unit, rescaled back to
                    accumulation units
  * dark current  - constant additive current (units/s)
  * hot pixels    - a per-pixel Bernoulli selection (fixed by the seed)
                    of defective pixels that see `hot_pixel_current`
                    instead of the scene

Randomness is counter-based so the simulation is order-independent and
reproducible: shot noise uses one Philox stream per (step, 64-row band),
hot-pixel membership is a pure hash of (seed, y, x).  Output is therefore
bit-identical regardless of how rows are sharded across workers.

Arrays are (height, width) row-major throughout; "resolution W x H" in
configs maps to array shape (H, W).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

# Rows per counter-based shot-noise stream.  Fixed constant: the noise a
# pixel sees must never depend on the worker count, only on (seed, step,
# band).  Workers are assigned whole bands.
NOISE_BAND_ROWS = 64

_U64 = np.uint64
_MIX1 = _U64(0x9E3779B97F4A7C15)
_MIX2 = _U64(0xBF58476D1CE4E5B9)
_MIX3 = _U64(0x94D049BB133111EB)


def _splitmix64(x):
    """SplitMix64 finalizer; vectorized over uint64 arrays.

    uint64 wraparound is the whole point here, so silence the overflow
    warning numpy raises for scalar inputs.
    """
    with np.errstate(over="ignore"):
        x = (x + _MIX1) & _U64(0xFFFFFFFFFFFFFFFF)
        x = (x ^ (x >> _U64(30))) * _MIX2
        x = (x ^ (x >> _U64(27))) * _MIX3
        return x ^ (x >> _U64(31))


@dataclass(frozen=True)
class NoiseModel:
    """Low-light noise sources applied during simulation."""

    shot_noise_enabled: bool = False
    photons_per_unit: float = 1000.0  # Poisson scale: photons per accumulation unit
    dark_current: float = 0.0         # accumulation units per second
    hot_pixel_fraction: float = 0.0
    hot_pixel_current: float = 0.0    # units per second seen by a hot pixel
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.hot_pixel_fraction <= 1.0:
            raise ValueError(f"hot_pixel_fraction must be in [0,1], got {self.hot_pixel_fraction}")
        if self.shot_noise_enabled and not self.photons_per_unit > 0:
            raise ValueError("photons_per_unit must be > 0 when shot noise is enabled")
        if self.dark_current < 0:
            raise ValueError("dark_current must be >= 0")


@dataclass(frozen=True)
class SensorConfig:
    """Sensor geometry and accumulate-and-fire parameters."""

    width: int
    height: int
    threshold: float = 2.0          # accumulation units needed to fire
    sample_period: float = 5e-5     # seconds per sampling step (20 kHz default)
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"resolution must be >= 1x1, got {self.width}x{self.height}")
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be > 0")


class LuminanceVideo:
    """Piecewise-constant scene luminance: (frames, height, width) currents.

    Intensities are input currents in accumulation units per second and
    must be finite and non-negative.  One video frame may be held for
    several sampling steps (see ``simulate_stream(steps_per_frame=...)``).
    """

    def __init__(self, frames):
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 3:
            raise ValueError(f"expected (frames, height, width) array, got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("non-finite intensity in video")
        if frames.size and frames.min() < 0:
            raise ValueError("negative intensity in video")
        self.frames = frames

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @classmethod
    def from_image(cls, intensity, frames: int = 1) -> "LuminanceVideo":
        """Static scene: one intensity map repeated for `frames` frames."""
        intensity = np.asarray(intensity, dtype=np.float64)
        return cls(np.broadcast_to(intensity, (frames,) + intensity.shape).copy())


@dataclass
class SpikeStream:
    """Binary spatio-temporal sensor output.

    `bits` is (frames, height, width) uint8 with values in {0, 1}; frame
    order equals temporal order and `start_index` is the global frame
    index of bits[0].  On disk the frames are bit-packed (see stream_io).
    """

    config: SensorConfig
    bits: np.ndarray
    start_index: int = 0

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 3:
            raise ValueError(f"bits must be (frames, height, width), got shape {self.bits.shape}")
        if self.bits.shape[1:] != (self.config.height, self.config.width):
            raise ValueError(
                f"frame shape {self.bits.shape[1:]} does not match config "
                f"{(self.config.height, self.config.width)}"
            )
        if self.bits.size and self.bits.max() > 1:
            raise ValueError("spike bits must be 0 or 1")

    @property
    def frame_count(self) -> int:
        return self.bits.shape[0]

    @property
    def height(self) -> int:
        return self.bits.shape[1]

    @property
    def width(self) -> int:
        return self.bits.shape[2]

    def frame(self, k: int) -> np.ndarray:
        """Spike plane at global frame index k."""
        local = k - self.start_index
        if not 0 <= local < self.frame_count:
            raise IndexError(
                f"frame {k} outside [{self.start_index}, {self.start_index + self.frame_count})"
            )
        return self.bits[local]


@dataclass
class PixelAccumulator:
    """Scalar accumulate-and-fire state for one pixel; value stays in [0, threshold)."""

    threshold: float
    value: float = 0.0

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")

    def step(self, charge: float) -> int:
        """Add one sampling step's charge, return 1 if the pixel fires."""
        if charge < 0:
            raise ValueError("charge must be >= 0")
        self.value += charge
        if self.value >= self.threshold:
            # mod, not reset-to-zero: the residual is retained, and a
            # saturating current still emits at most one spike per step
            self.value %= self.threshold
            return 1
        return 0


def hot_pixel_mask(noise: NoiseModel, height: int, width: int) -> np.ndarray:
    """Bernoulli hot-pixel membership, a pure function of (seed, y, x)."""
    if noise.hot_pixel_fraction <= 0:
        return np.zeros((height, width), dtype=bool)
    yy, xx = np.mgrid[0:height, 0:width]
    coord = (yy.astype(np.uint64) << _U64(32)) | xx.astype(np.uint64)
    h = _splitmix64(_splitmix64(_U64(noise.seed & 0xFFFFFFFFFFFFFFFF)) ^ coord)
    u = h.astype(np.float64) / float(2**64)
    return u < noise.hot_pixel_fraction


def _is_hot(noise: NoiseModel, y: int, x: int) -> bool:
    if noise.hot_pixel_fraction <= 0:
        return False
    coord = (_U64(y) << _U64(32)) | _U64(x)
    h = _splitmix64(_splitmix64(_U64(noise.seed & 0xFFFFFFFFFFFFFFFF)) ^ coord)
    return float(h) / float(2**64) < noise.hot_pixel_fraction


def shot_noise_rng(seed: int, step: int, band: int) -> np.random.Generator:
    """Philox stream for one (step, row-band); 256-bit counter layout:
    bits [88..] step, [64..88) band, [0..64) left for the draw sequence."""
    counter = ((step << 24) | band) << 64
    return np.random.Generator(np.random.Philox(key=seed & (2**128 - 1), counter=counter))


def effective_current(pixel, base_current: float, noise: NoiseModel,
                      step_rng: np.random.Generator | None,
                      sample_period: float) -> float:
    """Input current for one pixel and one sampling step with noise applied.

    Hot pixels see `hot_pixel_current` regardless of the scene.  Shot
    noise resamples the photon count Poisson(base*T*photons_per_unit) and
    rescales back to units/s.  Dark current is always additive.
    """
    if base_current < 0:
        raise ValueError("base_current must be >= 0")
    y, x = pixel
    if _is_hot(noise, y, x):
        return float(noise.hot_pixel_current)
    current = float(base_current)
    if noise.shot_noise_enabled:
        if step_rng is None:
            raise ValueError("shot noise requires a random generator")
        scale = sample_period * noise.photons_per_unit
        current = float(step_rng.poisson(current * scale)) / scale
    return current + noise.dark_current


def _band_ranges(height: int) -> list[tuple[int, int, int]]:
    return [(i, r, min(r + NOISE_BAND_ROWS, height))
            for i, r in enumerate(range(0, height, NOISE_BAND_ROWS))]


def simulate_stream(video: LuminanceVideo, config: SensorConfig,
                    steps_per_frame: int = 1, workers: int = 1) -> SpikeStream:
    """Run the accumulate-and-fire model over a luminance video.

    Per pixel and step: A += I_eff*T; if A >= threshold emit 1 and keep
    the residual, else emit 0.  Deterministic given (video, config,
    noise.seed) and independent of `workers`.
    """
    if video.frame_count == 0:
        raise ValueError("empty video")
    if (video.height, video.width) != (config.height, config.width):
        raise ValueError(
            f"video resolution {(video.height, video.width)} does not match "
            f"config {(config.height, config.width)}"
        )
    if steps_per_frame < 1:
        raise ValueError("steps_per_frame must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")

    noise = config.noise
    total = video.frame_count * steps_per_frame
    out = np.empty((total, config.height, config.width), dtype=np.uint8)
    hot = hot_pixel_mask(noise, config.height, config.width) if noise.hot_pixel_fraction > 0 else None
    thr = config.threshold
    period = config.sample_period

    def run_band(band_index: int, r0: int, r1: int) -> None:
        acc = np.zeros((r1 - r0, config.width))
        hot_rows = hot[r0:r1] if hot is not None else None
        hot_delta = noise.hot_pixel_current * period
        frame_index = -1
        base_delta = None
        for n in range(total):
            fi = n // steps_per_frame
            if fi != frame_index:
                frame_index = fi
                base = video.frames[fi, r0:r1]
                base_delta = (base + noise.dark_current) * period
                if hot_rows is not None:
                    base_delta = np.where(hot_rows, hot_delta, base_delta)
            if noise.shot_noise_enabled:
                lam = video.frames[frame_index, r0:r1] * (period * noise.photons_per_unit)
                counts = shot_noise_rng(noise.seed, n, band_index).poisson(lam)
                delta = counts / noise.photons_per_unit + noise.dark_current * period
                if hot_rows is not None:
                    delta = np.where(hot_rows, hot_delta, delta)
            else:
                delta = base_delta
            acc += delta
            fired = acc >= thr
            out[n, r0:r1] = fired
            np.subtract(acc, thr, out=acc, where=fired)
            if np.any(acc >= thr):
                # saturating current: one subtraction was not enough, fold
                # back into [0, thr) like the accumulate-mod semantics
                np.mod(acc, thr, out=acc)

    bands = _band_ranges(config.height)
    if workers == 1 or len(bands) == 1:
        for band in bands:
            run_band(*band)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: run_band(*b), bands))

    return SpikeStream(config=config, bits=out, start_index=0)


def simulate_pixel(step_currents, config: SensorConfig, pixel=(0, 0),
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Scalar reference path: one pixel driven by per-step base currents.

    Mirrors the semantics of simulate_stream via PixelAccumulator and
    effective_current.  With shot noise enabled the draws come from `rng`
    (defaults to a fresh Philox keyed by the noise seed), so bit-equality
    with the vectorized path is only guaranteed with noise off.
    """
    noise = config.noise
    if rng is None and noise.shot_noise_enabled:
        rng = np.random.Generator(np.random.Philox(key=noise.seed & (2**128 - 1)))
    acc = PixelAccumulator(threshold=config.threshold)
    bits = np.empty(len(step_currents), dtype=np.uint8)
    for n, base in enumerate(step_currents):
        current = effective_current(pixel, float(base), noise, rng, config.sample_period)
        bits[n] = acc.step(current * config.sample_period)
    return bits


def firing_rate_map(stream: SpikeStream) -> np.ndarray:
    """Per-pixel mean spike rate (spikes per frame), in [0, 1]."""
    if stream.frame_count == 0:
        raise ValueError("empty stream")
    return stream.bits.mean(axis=0, dtype=np.float64)


def slice_window(stream: SpikeStream, k: int, delta_t: int) -> SpikeStream:
    """Temporal window of 2*delta_t+1 frames centered on global frame k."""
    if delta_t < 0:
        raise ValueError("delta_t must be >= 0")
    lo = k - delta_t
    hi = k + delta_t
    last = stream.start_index + stream.frame_count - 1
    if lo < stream.start_index or hi > last:
        raise ValueError(
            f"window [{lo}, {hi}] out of stream bounds "
            f"[{stream.start_index}, {last}]"
        )
    a = lo - stream.start_index
    return SpikeStream(config=stream.config,
                       bits=stream.bits[a:a + 2 * delta_t + 1].copy(),
                       start_index=lo)
