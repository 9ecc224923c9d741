from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .nn import MLP, LayerNorm, Linear, Module, MultiHeadAttention, parameter
from .optim import AdamW, adamw_step, clip_grad_norm
from .tensor import (
    GradientTape,
    NonFiniteError,
    ShapeError,
    Tensor,
    add,
    as_tensor,
    concatenate,
    div,
    embedding,
    exp,
    gelu,
    getitem,
    layer_norm,
    log,
    matmul,
    mean,
    mul,
    neg,
    power,
    reshape,
    scaled_dot_product_attention,
    softmax,
    square,
    sub,
    sum_,
    tanh,
    transpose,
    where,
)

__all__ = [
    "AdamW", "CheckpointError", "GradientTape", "LayerNorm", "Linear", "MLP", "Module",
    "MultiHeadAttention", "NonFiniteError", "ShapeError", "Tensor", "adamw_step", "add",
    "as_tensor", "clip_grad_norm", "concatenate", "div", "embedding", "exp", "gelu", "getitem",
    "layer_norm", "load_checkpoint", "log", "matmul", "mean", "mul", "neg", "parameter", "power",
    "reshape", "save_checkpoint", "scaled_dot_product_attention", "softmax", "square", "sub",
    "sum_", "tanh", "transpose", "where",
]
