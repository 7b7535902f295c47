"""
Minimal reverse-mode autodiff engine used by every training path.
"""

from . import ops
from .gradcheck import finite_diff_grad_check
from .optim import AdamMoments, AdamOptimizer, adam_step
from .parameter import Parameter, ParameterStore, count_trainable
from .rng import SeededRng, derive_seed, mix64
from .tensor import Tape, Tensor, backward, is_grad_enabled, no_grad, record

__all__ = [
    "ops",
    "finite_diff_grad_check",
    "AdamMoments",
    "AdamOptimizer",
    "adam_step",
    "Parameter",
    "ParameterStore",
    "count_trainable",
    "SeededRng",
    "derive_seed",
    "mix64",
    "Tape",
    "Tensor",
    "backward",
    "is_grad_enabled",
    "no_grad",
    "record",
]
