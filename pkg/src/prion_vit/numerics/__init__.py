from . import tensor as ops
from .gradcheck import GradCheckReport, NondeterministicFunctionError, grad_check, rel_err
from .rng import make_rng, restore_rng, rng_state
from .tensor import (
    GradientMap,
    Tape,
    TapeConsumedError,
    Tensor,
    active_tape,
    backward,
    layer_norm,
    matmul,
    no_grad,
    relu,
    sigmoid,
    softmax,
)

__all__ = [
    "GradCheckReport",
    "GradientMap",
    "NondeterministicFunctionError",
    "Tape",
    "TapeConsumedError",
    "Tensor",
    "active_tape",
    "backward",
    "grad_check",
    "layer_norm",
    "make_rng",
    "matmul",
    "no_grad",
    "ops",
    "rel_err",
    "relu",
    "restore_rng",
    "rng_state",
    "sigmoid",
    "softmax",
]
