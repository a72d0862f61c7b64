"""Bit-exact codecs: the ``.spk`` spike-stream container and P5 PGM images.

``.spk`` layout (all integers little-endian):

    offset  size  field
    0       4     magic, b"SPK1"
    4       4     width  (u32)
    8       4     height (u32)
    12      4     frame_count (u32)
    16      4     sample_period_ns (u32)
    20      4     threshold_milli (u32, accumulation threshold x 1000)
    24      8     start_index (i64)
    32      ...   payload

Payload: frames in temporal order; each frame height rows; each row
ceil(width/8) bytes, row-major, LSB-first (bit 0 of a byte is the leftmost
pixel of its group of 8); rows are padded to a byte boundary with zero
bits.  Payload size is exactly frame_count * height * ceil(width/8).

The container carries geometry, threshold, sample period and start index;
the noise model is simulation configuration and is not serialized.

PGM: binary portable graymap, magic P5, maxval 255, `#` comments allowed
in the header, exactly one whitespace byte between maxval and the raster.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .spike_core import NoiseModel, SensorConfig, SpikeStream

SPK_MAGIC = b"SPK1"
_HEADER = struct.Struct("<4s5Iq")
# Sanity cap on total payload bits, so a hostile header cannot trigger a
# giant allocation before the length check.
_MAX_TOTAL_BITS = 1 << 40


class SpkFormatError(ValueError):
    """Malformed .spk data (base class; decode never raises anything else)."""


class SpkBadMagic(SpkFormatError):
    pass


class SpkTruncated(SpkFormatError):
    pass


class SpkDimensionError(SpkFormatError):
    pass


class PgmFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SpkFileHeader:
    width: int
    height: int
    frame_count: int
    sample_period_ns: int
    threshold_milli: int
    start_index: int

    def pack(self) -> bytes:
        return _HEADER.pack(SPK_MAGIC, self.width, self.height, self.frame_count,
                            self.sample_period_ns, self.threshold_milli, self.start_index)

    @classmethod
    def unpack(cls, data: bytes) -> "SpkFileHeader":
        if len(data) >= 4 and data[:4] != SPK_MAGIC:
            raise SpkBadMagic(f"bad magic {data[:4]!r}, expected {SPK_MAGIC!r}")
        if len(data) < _HEADER.size:
            raise SpkTruncated(f"header needs {_HEADER.size} bytes, got {len(data)}")
        _, w, h, fc, ns, milli, start = _HEADER.unpack_from(data)
        return cls(w, h, fc, ns, milli, start)


def bytes_per_row(width: int) -> int:
    return (width + 7) // 8


def encode_stream(stream: SpikeStream) -> bytes:
    """Serialize a spike stream; inverse of decode_stream."""
    cfg = stream.config
    header = SpkFileHeader(
        width=cfg.width,
        height=cfg.height,
        frame_count=stream.frame_count,
        sample_period_ns=int(round(cfg.sample_period * 1e9)),
        threshold_milli=int(round(cfg.threshold * 1e3)),
        start_index=stream.start_index,
    )
    packed = np.packbits(stream.bits, axis=-1, bitorder="little")
    return header.pack() + packed.tobytes()


def decode_stream(data: bytes) -> SpikeStream:
    """Parse a .spk byte string.

    Total over arbitrary input: raises a SpkFormatError subclass (bad
    magic / truncated / dimension overflow reported distinctly), never
    anything else.
    """
    header = SpkFileHeader.unpack(data)
    if header.width == 0 or header.height == 0:
        raise SpkDimensionError(f"zero resolution {header.width}x{header.height}")
    total_bits = header.width * header.height * header.frame_count
    if total_bits > _MAX_TOTAL_BITS:
        raise SpkDimensionError(f"dimensions overflow sanity cap: {total_bits} bits")
    if header.sample_period_ns == 0:
        raise SpkFormatError("sample_period_ns must be nonzero")
    if header.threshold_milli == 0:
        raise SpkFormatError("threshold_milli must be nonzero")

    row_bytes = bytes_per_row(header.width)
    needed = header.frame_count * header.height * row_bytes
    payload = data[_HEADER.size:]
    if len(payload) < needed:
        raise SpkTruncated(f"payload holds {len(payload)} bytes, header claims {needed}")
    if len(payload) > needed:
        raise SpkFormatError(f"{len(payload) - needed} trailing bytes after payload")

    packed = np.frombuffer(payload, dtype=np.uint8).reshape(
        header.frame_count, header.height, row_bytes)
    full = np.unpackbits(packed, axis=-1, bitorder="little")
    if full[..., header.width:].any():
        raise SpkFormatError("nonzero padding bits in packed rows")
    bits = full[..., :header.width]
    config = SensorConfig(
        width=header.width,
        height=header.height,
        threshold=header.threshold_milli / 1e3,
        sample_period=header.sample_period_ns / 1e9,
        noise=NoiseModel(),
    )
    return SpikeStream(config=config, bits=bits, start_index=header.start_index)


@dataclass
class GrayImage:
    """8-bit grayscale image; pixels is (height, width) uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got shape {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            # integer inputs in range are converted; floats must go through
            # quantize_u8 so rounding is explicit, not an astype truncation
            if not np.issubdtype(self.pixels.dtype, np.integer):
                raise ValueError(f"pixels must be integer-typed, got {self.pixels.dtype}")
            if self.pixels.size and (self.pixels.min() < 0 or self.pixels.max() > 255):
                raise ValueError("pixel values out of [0, 255]")
            self.pixels = self.pixels.astype(np.uint8)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def quantize_u8(values) -> np.ndarray:
    """Clip to [0, 255] and round half-up to uint8."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def write_pgm(image: GrayImage) -> bytes:
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


def read_pgm(data: bytes) -> GrayImage:
    """Parse a binary (P5) PGM with maxval 255."""
    if data[:2] != b"P5":
        raise PgmFormatError(f"not a P5 graymap: magic {data[:2]!r}")

    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        if pos >= len(data):
            raise PgmFormatError("truncated header")
        c = data[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise PgmFormatError("unterminated comment")
            pos = nl + 1
        elif c.isdigit():
            end = pos
            while end < len(data) and data[end:end + 1].isdigit():
                end += 1
            tokens.append(int(data[pos:end]))
            pos = end
        else:
            raise PgmFormatError(f"unexpected byte {c!r} in header")

    width, height, maxval = tokens
    if maxval != 255:
        raise PgmFormatError(f"unsupported maxval {maxval}, only 255")
    if width < 1 or height < 1:
        raise PgmFormatError(f"bad dimensions {width}x{height}")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise PgmFormatError("missing whitespace before raster")
    pos += 1

    raster = data[pos:]
    if len(raster) != width * height:
        raise PgmFormatError(f"raster holds {len(raster)} bytes, expected {width * height}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels=pixels.copy())
