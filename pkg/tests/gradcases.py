"""Random instances for finite-difference checks of every differentiable op.

Each builder takes a Generator and returns ``(fn, inputs)`` where ``fn()``
rebuilds a scalar graph from the leaf tensors in ``inputs``.
"""

import numpy as np

from querymamba.numerics import Tensor, functional as F
from querymamba.numerics import tensor as T
from querymamba.ssm_core import selective_scan


def leaf(rng, *shape, low=None, high=None):
    data = rng.normal(size=shape) if low is None else rng.uniform(low, high, size=shape)
    return Tensor(data, requires_grad=True)


def _weighted(out, w):
    # random projection makes the scalar depend on every output coordinate
    return T.tsum(T.mul(out, w))


def _unary(op, **kw):
    def build(rng):
        x = leaf(rng, 3, 4, **kw)
        w = rng.normal(size=(3, 4))
        return (lambda: _weighted(op(x), w)), [x]
    return build


def _binary(op, shape_a=(3, 4), shape_b=(3, 4), **kw):
    def build(rng):
        a, b = leaf(rng, *shape_a), leaf(rng, *shape_b, **kw)
        w = rng.normal(size=np.broadcast_shapes(shape_a, shape_b))
        return (lambda: _weighted(op(a, b), w)), [a, b]
    return build


def _matmul(rng):
    a, b = leaf(rng, 2, 3, 4), leaf(rng, 4, 5)
    w = rng.normal(size=(2, 3, 5))
    return (lambda: _weighted(T.matmul(a, b), w)), [a, b]


def _reduce(op):
    def build(rng):
        x = leaf(rng, 3, 4, 2)
        w = rng.normal(size=(3, 2))
        return (lambda: _weighted(op(x, axis=1), w)), [x]
    return build


def _reshape(rng):
    x = leaf(rng, 3, 4)
    w = rng.normal(size=(2, 6))
    return (lambda: _weighted(T.reshape(x, (2, 6)), w)), [x]


def _transpose(rng):
    x = leaf(rng, 2, 3, 4)
    w = rng.normal(size=(4, 2, 3))
    return (lambda: _weighted(T.transpose(x, (2, 0, 1)), w)), [x]


def _getitem(rng):
    x = leaf(rng, 5, 3)
    idx = np.array([0, 2, 2, 4])  # repeated index accumulates
    w = rng.normal(size=(4, 2))
    return (lambda: _weighted(T.getitem(x, (idx, slice(1, 3))), w)), [x]


def _concat(rng):
    a, b = leaf(rng, 2, 3), leaf(rng, 4, 3)
    w = rng.normal(size=(6, 3))
    return (lambda: _weighted(T.concat([a, b], axis=0), w)), [a, b]


def _stack(rng):
    a, b = leaf(rng, 2, 3), leaf(rng, 2, 3)
    w = rng.normal(size=(2, 2, 3))
    return (lambda: _weighted(T.stack([a, b], axis=1), w)), [a, b]


def _outer(rng):
    a, b = leaf(rng, 4), leaf(rng, 3)
    w = rng.normal(size=(4, 3))
    return (lambda: _weighted(T.outer(a, b), w)), [a, b]


def _softmax_like(op):
    def build(rng):
        x = leaf(rng, 3, 5)
        w = rng.normal(size=(3, 5))
        return (lambda: _weighted(op(x, axis=-1), w)), [x]
    return build


def _cross_entropy(rng):
    x = leaf(rng, 2, 3, 5)
    targets = rng.integers(0, 5, size=(2, 3))
    targets[0, 1] = -1
    return (lambda: F.cross_entropy(x, targets)), [x]


def _layer_norm(rng):
    x, g, b = leaf(rng, 3, 6), leaf(rng, 6), leaf(rng, 6)
    w = rng.normal(size=(3, 6))
    return (lambda: _weighted(F.layer_norm(x, g, b), w)), [x, g, b]


def _linear(rng):
    x, W, b = leaf(rng, 2, 3, 4), leaf(rng, 4, 5), leaf(rng, 5)
    w = rng.normal(size=(2, 3, 5))
    return (lambda: _weighted(F.linear(x, W, b), w)), [x, W, b]


def _conv1d(rng):
    x, k, b = leaf(rng, 2, 6, 3), leaf(rng, 4, 3), leaf(rng, 3)
    w = rng.normal(size=(2, 6, 3))
    return (lambda: _weighted(F.conv1d_causal(x, k, b), w)), [x, k, b]


def _selective_scan(method):
    def build(rng):
        u = leaf(rng, 2, 7, 3)
        delta = leaf(rng, 2, 7, 3, low=0.05, high=0.8)
        A = leaf(rng, 3, 4, low=-2.0, high=-0.2)
        B, C = leaf(rng, 2, 7, 4), leaf(rng, 2, 7, 4)
        w = rng.normal(size=(2, 7, 3))
        return (lambda: _weighted(selective_scan(u, delta, A, B, C, method=method), w)), [u, delta, A, B, C]
    return build


OP_CASES = {
    "add": _binary(T.add, (3, 4), (4,)),
    "sub": _binary(T.sub, (3, 1), (3, 4)),
    "neg": _unary(T.neg),
    "mul": _binary(T.mul, (3, 4), (1, 4)),
    "div": _binary(T.div, low=0.5, high=2.0),
    "power": _unary(lambda x: T.power(x, 2.5), low=0.5, high=2.0),
    "exp": _unary(T.exp),
    "log": _unary(T.log, low=0.3, high=3.0),
    "sqrt": _unary(T.sqrt, low=0.3, high=3.0),
    "matmul": _matmul,
    "sum": _reduce(T.tsum),
    "mean": _reduce(T.mean),
    "reshape": _reshape,
    "transpose": _transpose,
    "getitem": _getitem,
    "concat": _concat,
    "stack": _stack,
    "outer": _outer,
    "sigmoid": _unary(F.sigmoid),
    "silu": _unary(F.silu),
    "softplus": _unary(F.softplus),
    "gelu": _unary(F.gelu),
    "softmax": _softmax_like(F.softmax),
    "log_softmax": _softmax_like(F.log_softmax),
    "cross_entropy": _cross_entropy,
    "layer_norm": _layer_norm,
    "linear": _linear,
    "conv1d_causal": _conv1d,
    "selective_scan_sequential": _selective_scan("sequential"),
    "selective_scan_parallel": _selective_scan("parallel"),
}


def tiny_model_case(rng, seed: int):
    """A 1-encoder-layer, 1-decoder-layer model with its loss as the scalar."""
    from querymamba.pipeline import QueryMamba, TrainConfig, compute_loss

    cfg = TrainConfig(
        d_model=8, d_input=5, d_state=4, layers_enc=1, layers_dec=1, n_heads=2, num_future=3,
        long_len=4, short_len=3, num_verbs=3, num_nouns=4, seed=seed,
    )
    model = QueryMamba(cfg)
    # a random point in parameter space rather than the init, where zero query
    # content leaves the first decoder layer norm at its singular point
    for p in model.parameters().values():
        p.data += rng.normal(0, 0.1, size=p.shape)
    M = rng.normal(size=(2, 7, 5))
    targets = np.stack([rng.integers(0, 3, size=(2, 3)), rng.integers(0, 4, size=(2, 3))], axis=-1)

    def fn():
        loss, _ = compute_loss(model(M), targets, cfg)
        return loss

    return fn, list(model.parameters().values())
