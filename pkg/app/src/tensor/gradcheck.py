from typing import Callable

import numpy as np

from ..core.errors import GradCheckError
from .tensor import Tape, Tensor, backward, no_grad

ScalarFn = Callable[[Tensor], Tensor]


def finite_diff_grad_check(f: ScalarFn, x: Tensor, h: float = 1e-5, floor: float = 1e-12) -> float:
    """
    Compare the tape gradient of ``f`` at ``x`` against central differences.

    Args:
        f: Deterministic function returning a scalar Tensor
        x: Point of evaluation (use f64 for tight tolerances)
        h: Finite-difference step
        floor: Smallest denominator of the relative error; coordinates whose
            gradients are both below it are compared in absolute terms

    Returns:
        Max over coordinates of |a - n| / max(|a|, |n|, floor)
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if floor <= 0:
        raise ValueError("floor must be positive")
    base = x.data.copy()

    with no_grad():
        first = f(Tensor(base)).data.copy()
        second = f(Tensor(base)).data.copy()
    if first.tobytes() != second.tobytes():
        raise GradCheckError("function is not deterministic: two evaluations differ")

    point = Tensor(base, requires_grad=True)
    with Tape():
        out = f(point)
        backward(out)
    analytic = point.grad if point.grad is not None else np.zeros_like(base)

    numeric = np.zeros_like(base)
    flat = numeric.reshape(-1)
    with no_grad():
        for i in range(base.size):
            shifted = base.copy().reshape(-1)
            shifted[i] += h
            f_plus = f(Tensor(shifted.reshape(base.shape))).item()
            shifted[i] -= 2 * h
            f_minus = f(Tensor(shifted.reshape(base.shape))).item()
            flat[i] = (f_plus - f_minus) / (2 * h)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
