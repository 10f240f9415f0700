"""Activations, normalization, losses and convolution with hand-written gradients."""

from __future__ import annotations

import math

import numpy as np

from .tensor import DimensionError, Tensor, as_tensor, make_result, matmul, unbroadcast


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid(x.data)
    return make_result(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def silu(x) -> Tensor:
    """x * sigmoid(x)."""
    x = as_tensor(x)
    s = _sigmoid(x.data)
    out = x.data * s
    return make_result(out, (x,), lambda g: (g * (s + out * (1.0 - s)),), "silu")


def softplus(x) -> Tensor:
    x = as_tensor(x)
    out = np.logaddexp(0.0, x.data)
    return make_result(out, (x,), lambda g: (g * _sigmoid(x.data),), "softplus")


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x) -> Tensor:
    """Tanh approximation of GELU."""
    x = as_tensor(x)
    v = x.data
    t = np.tanh(_GELU_C * (v + 0.044715 * v**3))
    out = 0.5 * v * (1.0 + t)

    def backward(g):
        dt = (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * v * v)
        return (g * (0.5 * (1.0 + t) + 0.5 * v * dt),)

    return make_result(out, (x,), backward, "gelu")


def _check_finite(x: np.ndarray, name: str) -> None:
    if np.isnan(x).any():
        raise ValueError(f"{name}: NaN in input")


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    _check_finite(x.data, "softmax")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (x,), backward, "softmax")


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    _check_finite(x.data, "log_softmax")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return make_result(out, (x,), backward, "log_softmax")


def cross_entropy(logits, targets, ignore_index: int = -1) -> Tensor:
    """Mean negative log-likelihood over positions whose target is not ``ignore_index``.

    ``logits`` has shape ``(..., C)`` and ``targets`` the matching leading shape.
    Returns zero when every position is ignored.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    C = logits.shape[-1]
    if targets.shape != logits.shape[:-1]:
        raise DimensionError(f"cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    valid = targets != ignore_index
    bad = valid & ((targets < 0) | (targets >= C))
    if bad.any():
        raise IndexError(f"cross_entropy: target {int(targets[bad][0])} outside [0, {C})")
    _check_finite(logits.data, "cross_entropy")
    flat = logits.data.reshape(-1, C)
    t = np.where(valid, targets, 0).reshape(-1)
    v = valid.reshape(-1)
    count = int(v.sum())
    z = flat - flat.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    nll = lse - z[np.arange(len(t)), t]
    loss = float((nll * v).sum() / count) if count else 0.0

    def backward(g):
        if not count:
            return (np.zeros_like(logits.data),)
        p = np.exp(z - lse[:, None])
        p[np.arange(len(t)), t] -= 1.0
        p *= (v / count)[:, None] * g
        return (p.reshape(logits.shape),)

    return make_result(np.asarray(loss, dtype=logits.dtype), (logits,), backward, "cross_entropy")


def layer_norm(x, weight, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    rstd = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * rstd
    out = xhat * weight.data + bias.data

    def backward(g):
        dxhat = g * weight.data
        dx = rstd * (
            dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, unbroadcast(g * xhat, weight.shape), unbroadcast(g, bias.shape)

    return make_result(out, (x, weight, bias), backward, "layer_norm")


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` with weight stored as (in_features, out_features)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    out = matmul(x, weight)
    return out if bias is None else out + bias


def conv1d_causal(x, kernel, bias=None) -> Tensor:
    """Depthwise causal convolution along time.

    ``x`` is ``(T, D)`` or ``(B, T, D)``; ``kernel`` is ``(W, D)`` with
    ``out[t, d] = sum_w kernel[w, d] * x[t - w, d]`` and zeros for ``t - w < 0``.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    W, D = kernel.shape
    if W < 1:
        raise ValueError("conv1d_causal: kernel width must be >= 1")
    if x.shape[-1] != D:
        raise DimensionError(f"conv1d_causal: input {x.shape} vs kernel {kernel.shape}")
    T = x.shape[-2]
    pad = [(0, 0)] * x.ndim
    pad[-2] = (W - 1, 0)
    xp = np.pad(x.data, pad)
    out = np.zeros_like(x.data)
    for w in range(W):
        out += kernel.data[w] * xp[..., W - 1 - w : W - 1 - w + T, :]

    def backward(g):
        gp = np.zeros_like(xp)
        gk = np.empty_like(kernel.data)
        lead = tuple(range(g.ndim - 1))
        for w in range(W):
            window = slice(W - 1 - w, W - 1 - w + T)
            gp[..., window, :] += g * kernel.data[w]
            gk[w] = (g * xp[..., window, :]).sum(axis=lead)
        return gp[..., W - 1 :, :], gk

    result = make_result(out, (x, kernel), backward, "conv1d_causal")
    return result if bias is None else result + bias
