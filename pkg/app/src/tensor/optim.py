import logging
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from ..core.errors import ShapeError
from .parameter import Parameter

logger = logging.getLogger(__name__)


class AdamMoments:
    """First/second moment buffers keyed by parameter name, zero at t=0"""

    def __init__(self):
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def buffers(self, param: Parameter):
        if param.name not in self.m:
            self.m[param.name] = np.zeros_like(param.data)
            self.v[param.name] = np.zeros_like(param.data)
        return self.m[param.name], self.v[param.name]


def adam_step(
    params: Sequence[Parameter],
    grads: Mapping[str, Optional[np.ndarray]],
    moments: AdamMoments,
    lr: float,
    t: int,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """
    One bias-corrected Adam update, in place.

    Args:
        params: Parameters to consider; frozen ones are skipped untouched
        grads: Gradient per parameter name (missing or None means no update)
        moments: Moment buffers, updated in place
        lr: Learning rate
        t: 1-based step number used for bias correction
    """
    if t < 1:
        raise ValueError(f"Adam step number must be >= 1, got {t}")
    for param in params:
        if not param.trainable:
            continue
        grad = grads.get(param.name)
        if grad is None:
            continue
        if grad.shape != param.data.shape:
            raise ShapeError(
                f"grad shape {grad.shape} does not match parameter {param.name} {param.data.shape}"
            )
        m, v = moments.buffers(param)
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        step = lr * m_hat / (np.sqrt(v_hat) + eps)
        np.subtract(param.data, step.astype(param.data.dtype), out=param.data)


class AdamOptimizer:
    """
    Adam over a fixed parameter list, reading gradients from ``tensor.grad``
    """

    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.moments = AdamMoments()

    def zero_grad(self) -> None:
        for param in self.params:
            param.tensor.grad = None

    def step(self) -> None:
        self.t += 1
        grads = {p.name: p.tensor.grad for p in self.params}
        adam_step(
            self.params,
            grads,
            self.moments,
            lr=self.lr,
            t=self.t,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
        )
