"""Minimal differentiable computation substrate: tensors, tape, primitives."""

from .gradcheck import GradCheckError, grad_check
from .ops import (
    PROB_FLOOR,
    ValidationError,
    add,
    attention,
    clamp,
    cross_entropy,
    dropout,
    gather_rows,
    gelu,
    kl_uniform,
    layer_norm,
    log,
    log_softmax,
    matmul,
    mean_,
    mul,
    neg,
    pick,
    relu,
    reshape,
    select_index,
    softmax,
    sub,
    sum_,
    transpose,
)
from .tensor import DiffcoreError, ShapeError, Tape, TapeError, Tensor, active_tape

__all__ = [
    "PROB_FLOOR",
    "DiffcoreError",
    "GradCheckError",
    "ShapeError",
    "Tape",
    "TapeError",
    "Tensor",
    "ValidationError",
    "active_tape",
    "add",
    "attention",
    "clamp",
    "cross_entropy",
    "dropout",
    "gather_rows",
    "gelu",
    "grad_check",
    "kl_uniform",
    "layer_norm",
    "log",
    "log_softmax",
    "matmul",
    "mean_",
    "mul",
    "neg",
    "pick",
    "relu",
    "reshape",
    "select_index",
    "softmax",
    "sub",
    "sum_",
    "transpose",
]
