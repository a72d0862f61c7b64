"""Inter-spike-interval search and the ETFI intensity enhancement.

A pixel's inter-spike interval at reference frame k is the distance
between the two spikes bounding k: the last spike at or before k and the
first spike strictly after k.  Intensity is inversely proportional to
the interval, so the enhancement

    raw = max(ISI over valid pixels) / ISI

maps the dimmest valid pixel to exactly 1 (nothing falls below the
representable range) and bright pixels to large values, surfaced as an
overexposure diagnostic once they clip at 255.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spike_core import SpikeStream
from .stream_io import GrayImage, quantize_u8


@dataclass
class IsiMap:
    """Per-pixel inter-spike interval around one reference frame.

    isi is (height, width) int64, >= 1 everywhere; pixels without both
    bounding spikes carry the window length as a fallback and are
    flagged invalid.
    """

    isi: np.ndarray
    valid: np.ndarray
    k: int

    def __post_init__(self):
        self.isi = np.asarray(self.isi, dtype=np.int64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.isi.ndim != 2 or self.isi.shape != self.valid.shape:
            raise ValueError(f"isi {self.isi.shape} / valid {self.valid.shape} shape mismatch")
        if self.isi.size and self.isi.min() < 1:
            raise ValueError("intervals must be >= 1")

    @property
    def width(self) -> int:
        return self.isi.shape[1]

    @property
    def height(self) -> int:
        return self.isi.shape[0]


@dataclass
class EtfiImage:
    """Enhanced intensity map: quantized image plus the pre-clip values."""

    image: GrayImage
    raw: np.ndarray
    overexposure_ratio: float


def isi_search(stream: SpikeStream, k: int, workers: int = 1) -> IsiMap:
    """Bounding-spike interval per pixel at global frame index k.

    The previous spike is the latest at index <= k (a spike exactly at k
    counts as the previous one); the next is the earliest at index > k.
    Pixels missing either bound get ISI = frame_count, valid=False.

    Two vectorized scans over the frame axis, O(pixels * frames) total.
    `workers` shards rows; the result is identical for any worker count.
    """
    local = k - stream.start_index
    if not 0 <= local < stream.frame_count:
        raise ValueError(
            f"k={k} outside stream frames "
            f"[{stream.start_index}, {stream.start_index + stream.frame_count - 1}]"
        )
    if workers < 1:
        raise ValueError("workers must be >= 1")

    bits = stream.bits
    fallback = np.int64(stream.frame_count)

    def scan_rows(r0: int, r1: int):
        past = bits[:local + 1, r0:r1]
        future = bits[local + 1:, r0:r1]
        # argmax on the reversed past segment finds the latest spike <= k
        rev = past[::-1]
        t_prev = local - rev.argmax(axis=0)
        has_prev = past.any(axis=0)
        if future.shape[0]:
            t_next = local + 1 + future.argmax(axis=0)
            has_next = future.any(axis=0)
        else:
            t_next = np.zeros(past.shape[1:], dtype=np.int64)
            has_next = np.zeros(past.shape[1:], dtype=bool)
        valid = has_prev & has_next
        isi = np.where(valid, t_next - t_prev, fallback)
        return isi.astype(np.int64), valid

    height = stream.height
    if workers == 1 or height == 1:
        isi, valid = scan_rows(0, height)
    else:
        from concurrent.futures import ThreadPoolExecutor

        step = max(1, -(-height // workers))
        ranges = [(r, min(r + step, height)) for r in range(0, height, step)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda rr: scan_rows(*rr), ranges))
        isi = np.concatenate([p[0] for p in parts], axis=0)
        valid = np.concatenate([p[1] for p in parts], axis=0)

    return IsiMap(isi=isi, valid=valid, k=k)


def etfi(isi: IsiMap) -> EtfiImage:
    """Enhanced intensity: raw = max(valid ISI) / ISI, clipped to 8 bit.

    The maximum is taken over valid pixels only, so the dimmest valid
    pixel maps to raw exactly 1 and a dead pixel cannot rescale the
    frame.  Values are clipped at 255 then rounded half-up; the fraction
    of pixels at or above the clip point is reported, not corrected.
    """
    if not isi.valid.any():
        raise ValueError("no valid pixels in interval map")
    max_isi = int(isi.isi[isi.valid].max())
    raw = max_isi / isi.isi.astype(np.float64)
    return EtfiImage(
        image=GrayImage(quantize_u8(raw)),
        raw=raw,
        overexposure_ratio=float(np.mean(raw >= 255.0)),
    )


def apply_gain(e: EtfiImage, gain) -> EtfiImage:
    """Rescale enhanced intensities for display; gain > 0 or "auto".

    Auto mode maps the 99th-percentile raw value to 255 (the percentile
    is taken as an actual data value, so at least the top 1% of pixels
    saturate).  Monotone, so pixel ordering is preserved.
    """
    if isinstance(gain, str):
        if gain != "auto":
            raise ValueError(f"gain must be a positive number or 'auto', got {gain!r}")
        anchor = float(np.percentile(e.raw, 99, method="higher"))
        gain = 255.0 / anchor
    else:
        gain = float(gain)
        if not gain > 0:
            raise ValueError(f"gain must be > 0, got {gain}")
    raw = e.raw * gain
    return EtfiImage(
        image=GrayImage(quantize_u8(raw)),
        raw=raw,
        overexposure_ratio=float(np.mean(raw >= 255.0)),
    )
