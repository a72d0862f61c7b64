"""Versioned binary checkpoint for block parameters.

Layout (little-endian throughout):

    magic    b"SLW1"
    u32      format version (currently 1)
    u32      record count
    i64      init_seed
    u32 x10  block sizes: latent_h, latent_w, feat_channels, t_dim,
             attn_dim, trans_dim, ffn_dim, res_blocks, trans_depth,
             denoiser_width
    records  u32 name length, name (utf-8), u32 rank, u32 x rank dims,
             f64 x prod(dims) values (row-major)

Loading validates the record set against the sizes in the header, so a
checkpoint either reconstructs the exact parameter dict or fails with
CheckpointError.
"""

from __future__ import annotations

import struct

import numpy as np

from .blocks import BlockParams, BlockShape, parameter_specs

CHECKPOINT_MAGIC = b"SLW1"
CHECKPOINT_VERSION = 1

_SHAPE_FIELDS = ("latent_h", "latent_w", "feat_channels", "t_dim", "attn_dim",
                 "trans_dim", "ffn_dim", "res_blocks", "trans_depth",
                 "denoiser_width")


class CheckpointError(ValueError):
    pass


def save_checkpoint(params: BlockParams, path) -> None:
    head = struct.pack("<4sIIq", CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
                       len(params.tensors), params.init_seed)
    head += struct.pack("<10I", *(getattr(params.shape, f) for f in _SHAPE_FIELDS))
    chunks = [head]
    for name, tensor in params.tensors.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", tensor.ndim))
        chunks.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(
                f"truncated checkpoint: need {n} bytes at offset {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path) -> BlockParams:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}") from exc

    r = _Reader(data)
    magic, version, count, init_seed = r.unpack("<4sIIq")
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported version {version}")
    sizes = r.unpack("<10I")
    try:
        shape = BlockShape(**dict(zip(_SHAPE_FIELDS, sizes)))
    except ValueError as exc:
        raise CheckpointError(f"invalid block sizes: {exc}") from exc

    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<I")
        if name_len > 4096:
            raise CheckpointError(f"implausible name length {name_len}")
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError("undecodable record name") from exc
        (rank,) = r.unpack("<I")
        if rank > 8:
            raise CheckpointError(f"implausible rank {rank} for {name!r}")
        dims = r.unpack(f"<{rank}I")
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        if size > 1 << 28:
            raise CheckpointError(f"implausible tensor size {size} for {name!r}")
        raw = r.take(8 * size)
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).astype(np.float64)
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes")

    expected = {name: tshape for name, tshape, _ in parameter_specs(shape)}
    if set(tensors) != set(expected):
        missing = sorted(set(expected) - set(tensors))
        extra = sorted(set(tensors) - set(expected))
        raise CheckpointError(f"record mismatch: missing {missing}, extra {extra}")
    for name, tshape in expected.items():
        if tensors[name].shape != tshape:
            raise CheckpointError(
                f"{name}: shape {tensors[name].shape}, expected {tshape}")
    return BlockParams(shape=shape, tensors=tensors, init_seed=init_seed)
