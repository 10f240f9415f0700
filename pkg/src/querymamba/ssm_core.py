"""State-space primitives and the selective (Mamba) block.

The continuous system ``h' = A h + B x, y = C h`` is discretized with a
zero-order hold and evaluated as the affine recurrence
``h_t = Abar_t * h_{t-1} + Bbar_t * x_t``. ``A`` is diagonal throughout, so
every step is elementwise over the state dimension.

The recurrence can be evaluated sequentially or with an associative prefix
scan over pairs ``(a, b)`` composed as ``(a2 a1, a2 b1 + b2)``. Both give the
same result up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _scan_kernels
from .numerics import functional as F
from .numerics.nn import LayerNorm, Linear, Module, parameter
from .numerics.tensor import DimensionError, Tensor, as_tensor, make_result

SERIES_THRESHOLD = 1e-8


class ParameterError(ValueError):
    """Invalid state-space parameters."""


@dataclass(frozen=True)
class SsmParams:
    """Continuous diagonal SSM parameters; arrays broadcast against each other.

    ``A`` and ``B`` carry the state dimension last; ``delta`` broadcasts
    against everything but that axis (a trailing singleton is added).
    """

    A: np.ndarray
    B: np.ndarray
    delta: np.ndarray


@dataclass(frozen=True)
class DiscreteSsmParams:
    A_bar: np.ndarray
    B_bar: np.ndarray


def _phi(z: np.ndarray, em1: np.ndarray | None = None) -> np.ndarray:
    """``expm1(z) / z`` with the series ``1 + z/2`` near zero."""
    z = np.asarray(z, dtype=float)
    em1 = np.expm1(z) if em1 is None else em1
    small = np.abs(z) < SERIES_THRESHOLD
    if not small.any():
        return em1 / z
    return np.where(small, 1.0 + 0.5 * z, em1 / np.where(small, 1.0, z))


def _dphi(z: np.ndarray, a_bar: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Derivative of ``_phi``: ``(exp(z) - phi(z)) / z``, series below 1e-3."""
    small = np.abs(z) < 1e-3
    if not small.any():
        return (a_bar - phi) / z
    series = 0.5 + z * (1.0 / 3.0 + z * (0.125 + z / 30.0))
    return np.where(small, series, (a_bar - phi) / np.where(small, 1.0, z))


def zoh_discretize(params: SsmParams) -> DiscreteSsmParams:
    """Zero-order hold: ``Abar = exp(dA)``, ``Bbar = (dA)^-1 (exp(dA) - 1) dB``."""
    A = np.asarray(params.A, dtype=float)
    B = np.asarray(params.B, dtype=float)
    delta = np.asarray(params.delta, dtype=float)
    if np.any(~(delta > 0)):
        raise ParameterError("step size delta must be strictly positive")
    d = delta[..., None]
    z = d * A
    em1 = np.expm1(z)
    return DiscreteSsmParams(A_bar=em1 + 1.0, B_bar=_phi(z, em1) * d * B)


# -- affine recurrence evaluation ------------------------------------------

def _scan_sequential(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    h = np.empty_like(b)
    if len(b) == 0:
        return h
    h[0] = b[0]
    for t in range(1, len(b)):
        h[t] = a[t] * h[t - 1] + b[t]
    return h


def _scan_parallel(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Work-efficient prefix scan: combine adjacent pairs, recurse, fill in evens."""
    T = len(b)
    if T <= 1:
        return b.copy()
    n = T // 2
    a_even, a_odd = a[0 : 2 * n : 2], a[1 : 2 * n : 2]
    b_even, b_odd = b[0 : 2 * n : 2], b[1 : 2 * n : 2]
    # pair (t=2k, t=2k+1) composed into one element ending at 2k+1
    h_odd = _scan_parallel(a_odd * a_even, a_odd * b_even + b_odd)
    h = np.empty_like(b)
    h[1 : 2 * n : 2] = h_odd
    h[0] = b[0]
    # remaining even positions 2k (k >= 1) follow from h[2k-1]
    h[2::2] = a[2::2] * h_odd[: len(h[2::2])] + b[2::2]
    return h


def linear_scan(a: np.ndarray, b: np.ndarray, axis: int = 0, method: str = "sequential", h0=None) -> np.ndarray:
    """All states of ``h_t = a_t * h_{t-1} + b_t`` along ``axis`` (``h_{-1} = h0`` or 0)."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    a = np.moveaxis(a, axis, 0)
    b = np.moveaxis(b, axis, 0)
    if h0 is not None and len(b):
        b = b.copy()
        b[0] = b[0] + a[0] * h0
    if method == "sequential":
        h = _scan_sequential(a, b)
    elif method == "parallel":
        h = _scan_parallel(np.ascontiguousarray(a), np.ascontiguousarray(b))
    else:
        raise ValueError(f"unknown scan method {method!r}")
    return np.moveaxis(h, 0, axis)


def _ssm_scan(x, disc: DiscreteSsmParams, C, h0, method: str, return_state: bool):
    x = np.asarray(x, dtype=float)
    if x.shape[0] == 0:
        y = np.zeros_like(x)
        return (y, None) if return_state else y
    b = np.asarray(disc.B_bar) * x[..., None]
    h = linear_scan(disc.A_bar, b, axis=0, method=method, h0=h0)
    y = (h * np.asarray(C)).sum(axis=-1)
    return (y, h[-1]) if return_state else y


def ssm_scan_sequential(x, disc: DiscreteSsmParams, C, h0=None, return_state: bool = False):
    """Run the discrete SSM step by step.

    ``x`` has time first, ``(T,)`` or ``(T, channels...)``; ``A_bar``, ``B_bar``
    and ``C`` end in the state axis and broadcast against ``x[..., None]``
    (prefix them with a time axis for time-varying parameters).
    """
    return _ssm_scan(x, disc, C, h0, "sequential", return_state)


def ssm_scan_parallel(x, disc: DiscreteSsmParams, C, h0=None, return_state: bool = False):
    """Same contract as :func:`ssm_scan_sequential`, via an associative prefix scan."""
    return _ssm_scan(x, disc, C, h0, "parallel", return_state)


# -- differentiable selective scan -----------------------------------------

def selective_scan(u, delta, A, B, C, method: str = "sequential") -> Tensor:
    """Input-dependent SSM over a batch.

    Shapes: ``u``, ``delta``: (batch, T, channels); ``A``: (channels, N);
    ``B``, ``C``: (batch, T, N). Returns ``y`` of shape (batch, T, channels) with
    per-step ZOH discretization.

    ``method="sequential"`` runs the fused compiled kernel; ``"parallel"``
    evaluates the recurrence (and its adjoint) with the associative prefix
    scan on NumPy arrays. Only hidden states are kept for the backward pass.
    """
    u, delta, A, B, C = (as_tensor(t) for t in (u, delta, A, B, C))
    if u.shape != delta.shape or B.shape != C.shape or u.shape[:2] != B.shape[:2]:
        raise DimensionError(f"selective_scan: u{u.shape} delta{delta.shape} B{B.shape} C{C.shape}")
    if A.shape != (u.shape[-1], B.shape[-1]):
        raise DimensionError(f"selective_scan: A{A.shape} vs channels {u.shape[-1]}, state {B.shape[-1]}")
    if method == "sequential":
        return _selective_scan_fused(u, delta, A, B, C)
    if method == "parallel":
        return _selective_scan_prefix(u, delta, A, B, C)
    raise ValueError(f"unknown scan method {method!r}")


def _f64(*tensors):
    return tuple(np.ascontiguousarray(t.data, dtype=np.float64) for t in tensors)


def _selective_scan_fused(u, delta, A, B, C) -> Tensor:
    arrays = _f64(u, delta, A, B, C)

    def a_bar():
        z = arrays[1][..., None] * arrays[2]
        return np.exp(z, out=z)

    y, h = _scan_kernels.selective_scan_fwd(*arrays, a_bar())

    def backward(gy):
        gy = np.ascontiguousarray(gy, dtype=np.float64)
        grads = _scan_kernels.selective_scan_bwd(gy, *arrays, a_bar(), h)
        return tuple(g.astype(t.dtype, copy=False) for g, t in zip(grads, (u, delta, A, B, C)))

    return make_result(y.astype(u.dtype, copy=False), (u, delta, A, B, C), backward, "selective_scan")


def _selective_scan_prefix(u, delta, A, B, C) -> Tensor:
    uu, dd, AA, BB, CC = _f64(u, delta, A, B, C)

    def discretize():
        d = dd[..., None]
        z = d * AA
        em1 = np.expm1(z)
        phi = _phi(z, em1)
        return d, z, em1 + 1.0, phi, d * phi * BB[:, :, None, :]

    _, _, a_bar, _, b_bar = discretize()
    h = linear_scan(a_bar, b_bar * uu[..., None], axis=1, method="parallel")
    y = np.einsum("btin,btn->bti", h, CC)
    del a_bar, b_bar

    def backward(gy):
        d, z, a_bar, phi, b_bar = discretize()
        dh = gy[..., None] * CC[:, :, None, :]
        # adjoint recurrence runs backward in time with the next step's transition
        a_next = np.zeros_like(a_bar)
        a_next[:, :-1] = a_bar[:, 1:]
        g = linear_scan(a_next[:, ::-1], dh[:, ::-1], axis=1, method="parallel")[:, ::-1]
        dC = np.einsum("bti,btin->btn", gy, h)
        h_prev = np.zeros_like(h)
        h_prev[:, 1:] = h[:, :-1]
        dz = g * h_prev * a_bar
        du = (g * b_bar).sum(axis=-1)
        db_bar = g * uu[..., None]
        dz += db_bar * d * BB[:, :, None, :] * _dphi(z, a_bar, phi)
        ddelta = (dz * AA).sum(axis=-1) + (db_bar * phi * BB[:, :, None, :]).sum(axis=-1)
        dA = (dz * d).sum(axis=(0, 1))
        dB = (db_bar * d * phi).sum(axis=2)
        grads = (du, ddelta, dA, dB, dC)
        return tuple(g_.astype(t.dtype, copy=False) for g_, t in zip(grads, (u, delta, A, B, C)))

    return make_result(y.astype(u.dtype, copy=False), (u, delta, A, B, C), backward, "selective_scan")


# -- Mamba block -----------------------------------------------------------

def _inverse_softplus(y: np.ndarray) -> np.ndarray:
    return y + np.log(-np.expm1(-y))


class MambaBlock(Module):
    """Pre-norm residual Mamba block.

    ``x + out(ssm(silu(conv(in_x(norm x)))) * silu(in_gate(norm x)))`` where the
    SSM's ``B``, ``C`` and step size are linear functions of the post-conv
    activation and ``A = -exp(A_log)``.
    """

    def __init__(
        self,
        d_model: int,
        rng: np.random.Generator,
        d_state: int = 16,
        expand: int = 2,
        conv_width: int = 4,
        dt_min: float = 1e-3,
        dt_max: float = 1e-1,
        scan_method: str = "sequential",
    ):
        d_inner = expand * d_model
        self.d_model, self.d_inner, self.d_state = d_model, d_inner, d_state
        self.scan_method = scan_method
        self.norm = LayerNorm(d_model)
        self.in_x = Linear(d_model, d_inner, rng)
        self.in_gate = Linear(d_model, d_inner, rng)
        self.conv_kernel = parameter(rng.uniform(-1, 1, size=(conv_width, d_inner)) / np.sqrt(conv_width))
        self.conv_bias = parameter(np.zeros(d_inner))
        self.proj_B = Linear(d_inner, d_state, rng, bias=False)
        self.proj_C = Linear(d_inner, d_state, rng, bias=False)
        self.proj_dt = Linear(d_inner, d_inner, rng, std=0.1 / np.sqrt(d_inner))
        dt = np.exp(rng.uniform(np.log(dt_min), np.log(dt_max), size=d_inner))
        self.proj_dt.bias.data[:] = _inverse_softplus(dt)
        self.A_log = parameter(np.log(np.tile(np.arange(1, d_state + 1, dtype=float), (d_inner, 1))))
        self.D_skip = parameter(np.ones(d_inner))
        self.out = Linear(d_inner, d_model, rng, std=1.0 / np.sqrt(d_inner))

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[-1] != self.d_model:
            raise DimensionError(f"MambaBlock expects (batch, T, {self.d_model}), got {x.shape}")
        h = self.norm(x)
        u = F.silu(F.conv1d_causal(self.in_x(h), self.conv_kernel, self.conv_bias))
        delta = F.softplus(self.proj_dt(u))
        A = -self.A_log.exp()
        y = selective_scan(u, delta, A, self.proj_B(u), self.proj_C(u), self.scan_method)
        y = y + u * self.D_skip
        gate = F.silu(self.in_gate(h))
        return x + self.out(y * gate)
