"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 0.0) -> float:
    """``||a - b|| / max(||a||, ||b||, floor)``; zero when both vanish.

    ``floor`` keeps gradients that are identically zero (e.g. a bias the output
    is invariant to) from turning finite-difference noise into an error of 1.
    """
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), floor)
    if scale < 1e-300:
        return 0.0
    return float(np.linalg.norm(a - b)) / scale


def numeric_grad(
    fn: Callable[[], Tensor],
    x: Tensor,
    h: float = 1e-5,
    indices: Sequence[tuple[int, ...]] | None = None,
) -> np.ndarray:
    """Central differences of scalar ``fn()`` w.r.t. ``x.data`` (in place perturbation).

    With ``indices`` only those coordinates are probed and a flat array in the
    same order is returned.
    """
    coords = list(np.ndindex(x.shape)) if indices is None else list(indices)
    out = np.empty(len(coords))
    for i, idx in enumerate(coords):
        orig = x.data[idx]
        x.data[idx] = orig + h
        fp = float(fn().data)
        x.data[idx] = orig - h
        fm = float(fn().data)
        x.data[idx] = orig
        out[i] = (fp - fm) / (2 * h)
    return out.reshape(x.shape) if indices is None else out


def check_gradients(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-5,
) -> float:
    """Worst relative error between backprop and central differences over ``inputs``.

    ``fn`` must rebuild its graph on each call. With ``max_coords`` a random
    subset of coordinates per input is probed. Errors are relative per input,
    with ``floor`` as the smallest gradient norm used for scaling.
    """
    for t in inputs:
        t.grad = None
    fn().backward()
    analytic = [np.zeros(t.shape) if t.grad is None else t.grad.copy() for t in inputs]
    worst = 0.0
    for t, g in zip(inputs, analytic):
        if max_coords is not None and t.size > max_coords:
            rng = rng or np.random.default_rng(0)
            flat = rng.choice(t.size, size=max_coords, replace=False)
            idx = [np.unravel_index(i, t.shape) for i in flat]
            num = numeric_grad(fn, t, h, idx)
            ana = np.array([g[i] for i in idx])
        else:
            num = numeric_grad(fn, t, h)
            ana = g
        worst = max(worst, relative_error(ana, num, floor))
    return worst
