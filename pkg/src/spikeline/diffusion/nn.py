"""Minimal neural-net layers with hand-written backward passes.

Everything is float64 numpy and small enough that closed-form layer
gradients (no autodiff graph) stay readable.  Forward functions return
(output, cache); the matching backward takes (cache, grad_out) and
returns gradients in the same order as the forward arguments.

Shapes:
  conv3x3:  x (C_in, H, W), w (C_out, C_in, 3, 3), b (C_out,) -> (C_out, H, W)
            (stride 1, zero padding 1, spatial size preserved)
  linear:   x (N, D_in), w (D_in, D_out), b (D_out,) -> (N, D_out)
  attention: q (N_q, d), k (N_k, d), v (N_k, d_v) -> (N_q, d_v)
"""

from __future__ import annotations

import numpy as np


def conv3x3_forward(x, w, b):
    c_out, c_in, kh, kw = w.shape
    assert (kh, kw) == (3, 3)
    _, h, wid = x.shape
    xpad = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    patches = np.stack([xpad[:, dy:dy + h, dx:dx + wid]
                        for dy in range(3) for dx in range(3)])
    wk = w.reshape(c_out, c_in, 9)
    y = np.einsum("ock,kchw->ohw", wk, patches) + b[:, None, None]
    return y, (patches, wk, x.shape)


def conv3x3_backward(cache, gy):
    patches, wk, x_shape = cache
    _, h, wid = x_shape
    gb = gy.sum(axis=(1, 2))
    gwk = np.einsum("ohw,kchw->ock", gy, patches)
    gw = gwk.reshape(gwk.shape[0], gwk.shape[1], 3, 3)
    gpatches = np.einsum("ohw,ock->kchw", gy, wk)
    gxpad = np.zeros((x_shape[0], h + 2, wid + 2))
    k = 0
    for dy in range(3):
        for dx in range(3):
            gxpad[:, dy:dy + h, dx:dx + wid] += gpatches[k]
            k += 1
    return gxpad[:, 1:h + 1, 1:wid + 1], gw, gb


def linear_forward(x, w, b):
    return x @ w + b, (x, w)


def linear_backward(cache, gy):
    x, w = cache
    return gy @ w.T, x.T @ gy, gy.sum(axis=0)


def matmul_forward(x, w):
    """Linear layer without bias (used for attention key projections,
    where a bias would be cancelled by the softmax row shift)."""
    return x @ w, (x, w)


def matmul_backward(cache, gy):
    x, w = cache
    return gy @ w.T, x.T @ gy


def silu_forward(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s, (x, s)


def silu_backward(cache, gy):
    x, s = cache
    return gy * (s + x * s * (1.0 - s))


def softmax_rows(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def attention_forward(q, k, v):
    """Scaled dot-product attention with row-wise softmax."""
    scale = 1.0 / np.sqrt(q.shape[-1])
    a = softmax_rows((q @ k.T) * scale)
    return a @ v, (q, k, v, a, scale)


def attention_backward(cache, gy):
    q, k, v, a, scale = cache
    gv = a.T @ gy
    ga = gy @ v.T
    # softmax jacobian applied row-wise
    gs = a * (ga - (ga * a).sum(axis=-1, keepdims=True))
    gq = gs @ k * scale
    gk = gs.T @ q * scale
    return gq, gk, gv


def timestep_embedding(t: int, dim: int) -> np.ndarray:
    """Sinusoidal encoding of a scalar timestep; deterministic in (t, dim)."""
    if dim < 2 or dim % 2:
        raise ValueError(f"embedding dim must be even and >= 2, got {dim}")
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    args = float(t) * freqs
    return np.concatenate([np.sin(args), np.cos(args)])


class Adam:
    """Adam over a dict of named parameter arrays, updated in place."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            params[name] -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
