from .gradcheck import EvaluationError, grad_check
from .ops import (
    ConfigError,
    DimensionError,
    add,
    dropout,
    embedding,
    layer_norm,
    linear,
    log_softmax,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    scaled_dot_attention,
    softmax,
    sub,
    transpose,
)
from .tensor import Tensor, no_grad, topological_order

__all__ = [
    "ConfigError",
    "DimensionError",
    "EvaluationError",
    "Tensor",
    "add",
    "dropout",
    "embedding",
    "grad_check",
    "layer_norm",
    "linear",
    "log_softmax",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "relu",
    "reshape",
    "scaled_dot_attention",
    "softmax",
    "sub",
    "topological_order",
    "transpose",
]
