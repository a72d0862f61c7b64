"""Conditioning blocks for the toy conditional denoiser.

Three pieces, mirroring a ControlNet-style design where every branch
that injects conditioning ends in a zero-initialized projection so the
whole stack is an exact no-op at construction:

  * condition encoder   f_enc = ZeroConv(Res(Conv(c))) + c
  * cross-attention     queries from (z_t, t_emb), keys/values from the
    (eca)               encoder's pre-projection features
  * fusion              f_eca_out = Linear(eca + z_t) + eca, then a
                        token transformer whose zero-conv output is
                        added back onto z_t

Latents are (1, H, W); encoder features are (feat_channels, H, W);
token matrices are (H*W, channels).  Every block has a cached forward
and a hand-written backward (see nn.py for the layer primitives), which
is what the toy training loop and the finite-difference tests drive.

Parameters live in a flat name -> array dict inside BlockParams; all
non-zero-initialized weights are reproducible from init_seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import (attention_backward, attention_forward, conv3x3_backward,
                 conv3x3_forward, linear_backward, linear_forward,
                 matmul_backward, matmul_forward, silu_backward, silu_forward,
                 timestep_embedding)

INIT_STD = 0.05


@dataclass(frozen=True)
class BlockShape:
    """Static sizes for every block; latent is single-channel (1, H, W)."""

    latent_h: int
    latent_w: int
    feat_channels: int = 8
    t_dim: int = 16
    attn_dim: int = 8
    trans_dim: int = 16
    ffn_dim: int = 32
    res_blocks: int = 1
    trans_depth: int = 1
    denoiser_width: int = 8

    def __post_init__(self):
        if self.latent_h < 1 or self.latent_w < 1:
            raise ValueError("latent size must be >= 1x1")
        for name in ("feat_channels", "t_dim", "attn_dim", "trans_dim",
                     "ffn_dim", "res_blocks", "trans_depth", "denoiser_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.t_dim % 2:
            raise ValueError("t_dim must be even (sinusoidal embedding)")


def parameter_specs(shape: BlockShape) -> list[tuple[str, tuple, bool]]:
    """(name, array shape, zero_init) for every tensor, in fixed order."""
    f = shape.feat_channels
    dt = shape.trans_dim
    specs: list[tuple[str, tuple, bool]] = [
        ("enc.conv_in.w", (f, 1, 3, 3), False),
        ("enc.conv_in.b", (f,), True),
    ]
    for i in range(shape.res_blocks):
        specs += [
            (f"enc.res{i}.conv1.w", (f, f, 3, 3), False),
            (f"enc.res{i}.conv1.b", (f,), True),
            (f"enc.res{i}.conv2.w", (f, f, 3, 3), False),
            (f"enc.res{i}.conv2.b", (f,), True),
        ]
    specs += [
        ("enc.zero.w", (1, f, 3, 3), True),
        ("enc.zero.b", (1,), True),
        ("eca.q.w", (1 + shape.t_dim, shape.attn_dim), False),
        ("eca.q.b", (shape.attn_dim,), True),
        ("eca.k.w", (f, shape.attn_dim), False),
        ("eca.v.w", (f, shape.attn_dim), False),
        ("eca.v.b", (shape.attn_dim,), True),
        ("eca.o.w", (shape.attn_dim, 1), False),
        ("eca.o.b", (1,), True),
        ("fuse.lin.w", (1, 1), False),
        ("fuse.lin.b", (1,), True),
        ("fuse.in.w", (1, dt), False),
        ("fuse.in.b", (dt,), True),
    ]
    for j in range(shape.trans_depth):
        specs += [
            (f"fuse.t{j}.q.w", (dt, dt), False),
            (f"fuse.t{j}.q.b", (dt,), True),
            (f"fuse.t{j}.k.w", (dt, dt), False),
            (f"fuse.t{j}.v.w", (dt, dt), False),
            (f"fuse.t{j}.v.b", (dt,), True),
            (f"fuse.t{j}.ff1.w", (dt, shape.ffn_dim), False),
            (f"fuse.t{j}.ff1.b", (shape.ffn_dim,), True),
            (f"fuse.t{j}.ff2.w", (shape.ffn_dim, dt), False),
            (f"fuse.t{j}.ff2.b", (dt,), True),
        ]
    specs += [
        ("fuse.zero.w", (1, dt, 3, 3), True),
        ("fuse.zero.b", (1,), True),
    ]
    dw = shape.denoiser_width
    specs += [
        ("den.conv1.w", (dw, 2, 3, 3), False),
        ("den.conv1.b", (dw,), True),
        ("den.tproj.w", (shape.t_dim, dw), False),
        ("den.tproj.b", (dw,), True),
        ("den.conv2.w", (dw, dw, 3, 3), False),
        ("den.conv2.b", (dw,), True),
        ("den.conv3.w", (1, dw, 3, 3), False),
        ("den.conv3.b", (1,), True),
    ]
    return specs


@dataclass
class BlockParams:
    """All block weights, flat name -> float64 array."""

    shape: BlockShape
    tensors: dict[str, np.ndarray]
    init_seed: int

    @classmethod
    def init(cls, shape: BlockShape, seed: int = 0) -> "BlockParams":
        """Seeded Gaussian weights; zero-init projections exactly zero."""
        rng = np.random.Generator(np.random.Philox(key=seed & (2 ** 128 - 1)))
        tensors = {}
        for name, tshape, zero in parameter_specs(shape):
            if zero:
                tensors[name] = np.zeros(tshape)
            else:
                tensors[name] = rng.normal(0.0, INIT_STD, tshape)
        return cls(shape=shape, tensors=tensors, init_seed=seed)

    def copy(self) -> "BlockParams":
        return BlockParams(shape=self.shape,
                           tensors={k: v.copy() for k, v in self.tensors.items()},
                           init_seed=self.init_seed)


@dataclass
class ConditionFeatures:
    """Encoder output: latent-shaped f_enc and pre-projection f_enc_hat."""

    f_enc: np.ndarray
    f_enc_hat: np.ndarray


def zero_features(shape: BlockShape) -> ConditionFeatures:
    """The "unconditional" branch: condition features all zero."""
    hw = (shape.latent_h, shape.latent_w)
    return ConditionFeatures(f_enc=np.zeros((1,) + hw),
                             f_enc_hat=np.zeros((shape.feat_channels,) + hw))


def _check_latent(x, shape: BlockShape, what: str):
    want = (1, shape.latent_h, shape.latent_w)
    if x.shape != want:
        raise ValueError(f"{what} shape {x.shape} does not match latent {want}")


# ---------------------------------------------------------------- encoder

def encode_condition_cached(cond, params: BlockParams):
    t = params.tensors
    cond = np.asarray(cond, dtype=np.float64)
    _check_latent(cond, params.shape, "condition")
    x, c_in = conv3x3_forward(cond, t["enc.conv_in.w"], t["enc.conv_in.b"])
    res_caches = []
    for i in range(params.shape.res_blocks):
        a, c_s1 = silu_forward(x)
        u, c_c1 = conv3x3_forward(a, t[f"enc.res{i}.conv1.w"], t[f"enc.res{i}.conv1.b"])
        b, c_s2 = silu_forward(u)
        v, c_c2 = conv3x3_forward(b, t[f"enc.res{i}.conv2.w"], t[f"enc.res{i}.conv2.b"])
        x = x + v
        res_caches.append((c_s1, c_c1, c_s2, c_c2))
    f_enc_hat = x
    proj, c_zero = conv3x3_forward(f_enc_hat, t["enc.zero.w"], t["enc.zero.b"])
    f_enc = proj + cond
    features = ConditionFeatures(f_enc=f_enc, f_enc_hat=f_enc_hat)
    return features, (c_in, res_caches, c_zero)


def encode_condition(cond, params: BlockParams) -> ConditionFeatures:
    return encode_condition_cached(cond, params)[0]


def encoder_backward(params: BlockParams, cache, g_f_enc, g_f_enc_hat=None):
    """Gradients of the encoder; returns (param grads, grad wrt input)."""
    c_in, res_caches, c_zero = cache
    grads: dict[str, np.ndarray] = {}
    gx_zero, grads["enc.zero.w"], grads["enc.zero.b"] = conv3x3_backward(c_zero, g_f_enc)
    g_x = gx_zero if g_f_enc_hat is None else gx_zero + g_f_enc_hat
    for i in reversed(range(params.shape.res_blocks)):
        c_s1, c_c1, c_s2, c_c2 = res_caches[i]
        g_b, grads[f"enc.res{i}.conv2.w"], grads[f"enc.res{i}.conv2.b"] = \
            conv3x3_backward(c_c2, g_x)
        g_u = silu_backward(c_s2, g_b)
        g_a, grads[f"enc.res{i}.conv1.w"], grads[f"enc.res{i}.conv1.b"] = \
            conv3x3_backward(c_c1, g_u)
        g_x = g_x + silu_backward(c_s1, g_a)
    g_cond, grads["enc.conv_in.w"], grads["enc.conv_in.b"] = conv3x3_backward(c_in, g_x)
    return grads, g_cond + g_f_enc


# ------------------------------------------------------- cross-attention

def _tokens(x):
    """(C, H, W) -> (H*W, C) token matrix."""
    c = x.shape[0]
    return x.reshape(c, -1).T


def _grid(tok, h, w):
    return tok.T.reshape(tok.shape[1], h, w)


def eca_attention_cached(t_emb, f_enc_hat, z_t, params: BlockParams):
    t = params.tensors
    shape = params.shape
    z_t = np.asarray(z_t, dtype=np.float64)
    _check_latent(z_t, shape, "z_t")
    if t_emb.shape != (shape.t_dim,):
        raise ValueError(f"t_emb shape {t_emb.shape}, expected ({shape.t_dim},)")
    n = shape.latent_h * shape.latent_w
    z_tok = _tokens(z_t)
    q_in = np.concatenate([z_tok, np.broadcast_to(t_emb, (n, shape.t_dim))], axis=1)
    q, c_q = linear_forward(q_in, t["eca.q.w"], t["eca.q.b"])
    f_tok = _tokens(np.asarray(f_enc_hat, dtype=np.float64))
    k, c_k = matmul_forward(f_tok, t["eca.k.w"])
    v, c_v = linear_forward(f_tok, t["eca.v.w"], t["eca.v.b"])
    o, c_att = attention_forward(q, k, v)
    y, c_o = linear_forward(o, t["eca.o.w"], t["eca.o.b"])
    out = _grid(y, shape.latent_h, shape.latent_w)
    return out, (c_q, c_k, c_v, c_att, c_o)


def eca_attention(t_emb, f_enc_hat, z_t, params: BlockParams) -> np.ndarray:
    return eca_attention_cached(t_emb, f_enc_hat, z_t, params)[0]


def eca_backward(params: BlockParams, cache, g_out):
    shape = params.shape
    c_q, c_k, c_v, c_att, c_o = cache
    grads: dict[str, np.ndarray] = {}
    g_y = _tokens(g_out)
    g_o, grads["eca.o.w"], grads["eca.o.b"] = linear_backward(c_o, g_y)
    g_q, g_k, g_v = attention_backward(c_att, g_o)
    g_q_in, grads["eca.q.w"], grads["eca.q.b"] = linear_backward(c_q, g_q)
    g_f_k, grads["eca.k.w"] = matmul_backward(c_k, g_k)
    g_f_v, grads["eca.v.w"], grads["eca.v.b"] = linear_backward(c_v, g_v)
    g_f_enc_hat = _grid(g_f_k + g_f_v, shape.latent_h, shape.latent_w)
    g_z = _grid(g_q_in[:, :1], shape.latent_h, shape.latent_w)
    return grads, g_z, g_f_enc_hat


# ----------------------------------------------------------------- fusion

def fuse_cached(z_t, t_step: int, f_enc_hat, params: BlockParams):
    t = params.tensors
    shape = params.shape
    z_t = np.asarray(z_t, dtype=np.float64)
    _check_latent(z_t, shape, "z_t")
    h, w = shape.latent_h, shape.latent_w

    t_emb = timestep_embedding(t_step, shape.t_dim)
    f_eca, c_eca = eca_attention_cached(t_emb, f_enc_hat, z_t, params)
    s_tok = _tokens(f_eca + z_t)
    lin, c_lin = linear_forward(s_tok, t["fuse.lin.w"], t["fuse.lin.b"])
    mixed_tok = lin + _tokens(f_eca)

    x, c_in = linear_forward(mixed_tok, t["fuse.in.w"], t["fuse.in.b"])
    layer_caches = []
    for j in range(shape.trans_depth):
        q, c_q = linear_forward(x, t[f"fuse.t{j}.q.w"], t[f"fuse.t{j}.q.b"])
        k, c_k = matmul_forward(x, t[f"fuse.t{j}.k.w"])
        v, c_v = linear_forward(x, t[f"fuse.t{j}.v.w"], t[f"fuse.t{j}.v.b"])
        att, c_att = attention_forward(q, k, v)
        x = x + att
        h1, c_f1 = linear_forward(x, t[f"fuse.t{j}.ff1.w"], t[f"fuse.t{j}.ff1.b"])
        a1, c_s = silu_forward(h1)
        f2, c_f2 = linear_forward(a1, t[f"fuse.t{j}.ff2.w"], t[f"fuse.t{j}.ff2.b"])
        x = x + f2
        layer_caches.append((c_q, c_k, c_v, c_att, c_f1, c_s, c_f2))
    grid = _grid(x, h, w)
    proj, c_zero = conv3x3_forward(grid, t["fuse.zero.w"], t["fuse.zero.b"])
    fused = proj + z_t
    return fused, (c_eca, c_lin, c_in, layer_caches, c_zero)


def fuse(z_t, t_step: int, f_enc_hat, params: BlockParams) -> np.ndarray:
    return fuse_cached(z_t, t_step, f_enc_hat, params)[0]


def fuse_backward(params: BlockParams, cache, g_fused):
    """Gradients of fuse; returns (param grads, grad z_t, grad f_enc_hat)."""
    shape = params.shape
    c_eca, c_lin, c_in, layer_caches, c_zero = cache
    grads: dict[str, np.ndarray] = {}

    g_z = g_fused.copy()
    g_grid, grads["fuse.zero.w"], grads["fuse.zero.b"] = conv3x3_backward(c_zero, g_fused)
    g_x = _tokens(g_grid)
    for j in reversed(range(shape.trans_depth)):
        c_q, c_k, c_v, c_att, c_f1, c_s, c_f2 = layer_caches[j]
        g_a1, grads[f"fuse.t{j}.ff2.w"], grads[f"fuse.t{j}.ff2.b"] = \
            linear_backward(c_f2, g_x)
        g_h1 = silu_backward(c_s, g_a1)
        g_mid, grads[f"fuse.t{j}.ff1.w"], grads[f"fuse.t{j}.ff1.b"] = \
            linear_backward(c_f1, g_h1)
        g_x = g_x + g_mid
        g_q, g_k, g_v = attention_backward(c_att, g_x)
        g_in_q, grads[f"fuse.t{j}.q.w"], grads[f"fuse.t{j}.q.b"] = linear_backward(c_q, g_q)
        g_in_k, grads[f"fuse.t{j}.k.w"] = matmul_backward(c_k, g_k)
        g_in_v, grads[f"fuse.t{j}.v.w"], grads[f"fuse.t{j}.v.b"] = linear_backward(c_v, g_v)
        g_x = g_x + g_in_q + g_in_k + g_in_v
    g_mixed, grads["fuse.in.w"], grads["fuse.in.b"] = linear_backward(c_in, g_x)

    g_lin = g_mixed
    g_feca_tok = g_mixed.copy()
    g_s_tok, grads["fuse.lin.w"], grads["fuse.lin.b"] = linear_backward(c_lin, g_lin)
    g_feca_tok = g_feca_tok + g_s_tok
    g_feca = _grid(g_feca_tok, shape.latent_h, shape.latent_w)
    g_z = g_z + _grid(g_s_tok, shape.latent_h, shape.latent_w)

    eca_grads, g_z_eca, g_f_enc_hat = eca_backward(params, c_eca, g_feca)
    grads.update(eca_grads)
    return grads, g_z + g_z_eca, g_f_enc_hat


# -------------------------------------------------------------- denoisers

class ToyCondDenoiser:
    """Small trainable conv net predicting noise from the fused latent.

    Input is the fused latent stacked with the encoded condition f_enc;
    the unguided branch feeds zeros for the condition channel.  The
    timestep enters as a learned per-channel bias after the first conv.
    """

    def __init__(self, params: BlockParams):
        self.params = params

    def forward_cached(self, fused, t_step: int, cond: ConditionFeatures | None,
                       guided: bool = True):
        p = self.params.tensors
        shape = self.params.shape
        fused = np.asarray(fused, dtype=np.float64)
        _check_latent(fused, shape, "fused latent")
        if guided and cond is not None:
            cond_plane = cond.f_enc
        else:
            cond_plane = np.zeros_like(fused)
        inp = np.concatenate([fused, cond_plane], axis=0)
        h1, c1 = conv3x3_forward(inp, p["den.conv1.w"], p["den.conv1.b"])
        t_emb = timestep_embedding(t_step, shape.t_dim)[None, :]
        tb, c_t = linear_forward(t_emb, p["den.tproj.w"], p["den.tproj.b"])
        a1, c_s1 = silu_forward(h1 + tb[0][:, None, None])
        h2, c2 = conv3x3_forward(a1, p["den.conv2.w"], p["den.conv2.b"])
        a2, c_s2 = silu_forward(h2)
        out, c3 = conv3x3_forward(a2, p["den.conv3.w"], p["den.conv3.b"])
        return out, (c1, c_t, c_s1, c2, c_s2, c3)

    def __call__(self, fused, t_step: int, cond: ConditionFeatures | None,
                 guided: bool = True) -> np.ndarray:
        return self.forward_cached(fused, t_step, cond, guided)[0]

    def backward(self, cache, g_eps):
        """Returns (param grads, grad wrt fused latent, grad wrt f_enc)."""
        c1, c_t, c_s1, c2, c_s2, c3 = cache
        grads: dict[str, np.ndarray] = {}
        g_a2, grads["den.conv3.w"], grads["den.conv3.b"] = conv3x3_backward(c3, g_eps)
        g_h2 = silu_backward(c_s2, g_a2)
        g_a1, grads["den.conv2.w"], grads["den.conv2.b"] = conv3x3_backward(c2, g_h2)
        g_pre = silu_backward(c_s1, g_a1)
        g_tb = g_pre.sum(axis=(1, 2))[None, :]
        _, grads["den.tproj.w"], grads["den.tproj.b"] = linear_backward(c_t, g_tb)
        g_inp, grads["den.conv1.w"], grads["den.conv1.b"] = conv3x3_backward(c1, g_pre)
        return grads, g_inp[:1], g_inp[1:]


class OracleDenoiser:
    """Closed-form noise prediction toward a fixed target latent.

    eps_hat = (z_t - sqrt(abar_t) * target) / sqrt(1 - abar_t), the
    exact posterior noise if the clean latent were `target`; sampling
    with it contracts the reverse process onto the target.
    """

    def __init__(self, target, sched):
        self.target = np.asarray(target, dtype=np.float64)
        self.sched = sched

    def __call__(self, fused, t_step: int, cond=None, guided: bool = True) -> np.ndarray:
        fused = np.asarray(fused, dtype=np.float64)
        if fused.shape != self.target.shape:
            raise ValueError(f"latent {fused.shape} vs target {self.target.shape}")
        abar = self.sched.alpha_bar_at(t_step)
        return (fused - np.sqrt(abar) * self.target) / np.sqrt(1.0 - abar)
