from . import functional
from .functional import (
    conv1d_causal,
    cross_entropy,
    gelu,
    layer_norm,
    linear,
    log_softmax,
    sigmoid,
    silu,
    softmax,
    softplus,
)
from .gradcheck import check_gradients, numeric_grad, relative_error
from .nn import LayerNorm, Linear, Module, parameter
from .optim import AdamW, clip_grad_norm, cosine_lr
from .rng import derive_seed, make_rng
from .tensor import (
    ComputationTape,
    DimensionError,
    Tensor,
    add,
    as_tensor,
    concat,
    default_dtype,
    div,
    exp,
    get_default_dtype,
    getitem,
    log,
    matmul,
    mean,
    mul,
    no_grad,
    outer,
    reshape,
    set_default_dtype,
    sqrt,
    stack,
    sub,
    transpose,
    tsum,
)
