"""Minimal reverse-mode autodiff over numpy float64 arrays."""

from .checkpoint import CheckpointError, load_checkpoint, restore_into, save_checkpoint
from .gradcheck import grad_check
from .optim import Adam, clip_global_norm, global_grad_norm
from .rng import (
    DROPOUT_STREAM,
    INIT_STREAM,
    SAMPLE_STREAM,
    SHUFFLE_STREAM,
    seeded_rng,
)
from .tensor import (
    ContractError,
    ShapeError,
    Tensor,
    add,
    affine,
    backward,
    concat,
    div,
    dropout,
    embedding_lookup,
    exp,
    gather,
    grad_enabled,
    layer_norm,
    log,
    log_softmax,
    lstm_cell,
    matmul,
    mean,
    mul,
    narrow,
    no_grad,
    parameter,
    relu,
    reshape,
    row,
    scaled_dot_product,
    sigmoid,
    softmax,
    sqrt,
    stack_rows,
    sub,
    sum_,
    tanh,
    transpose,
)

__all__ = [
    "Adam",
    "CheckpointError",
    "ContractError",
    "DROPOUT_STREAM",
    "INIT_STREAM",
    "SAMPLE_STREAM",
    "SHUFFLE_STREAM",
    "ShapeError",
    "Tensor",
    "add",
    "affine",
    "backward",
    "clip_global_norm",
    "concat",
    "div",
    "dropout",
    "embedding_lookup",
    "exp",
    "gather",
    "global_grad_norm",
    "grad_check",
    "grad_enabled",
    "layer_norm",
    "load_checkpoint",
    "log",
    "log_softmax",
    "lstm_cell",
    "matmul",
    "mean",
    "mul",
    "narrow",
    "no_grad",
    "parameter",
    "relu",
    "reshape",
    "restore_into",
    "row",
    "save_checkpoint",
    "scaled_dot_product",
    "seeded_rng",
    "sigmoid",
    "softmax",
    "sqrt",
    "stack_rows",
    "sub",
    "sum_",
    "tanh",
    "transpose",
]
