import numpy as np

from ..models.config_models import StrategyKind
from ..tensor import ops
from ..tensor.rng import SeededRng
from ..tensor.tensor import Tensor
from ..tensor.ops import sigmoid_array
from .base import AdaptationStrategy


class LinearProbeStrategy(AdaptationStrategy):
    """
    Single-logit linear head on frozen penultimate image features.

    Trains ``w`` [d_model] and ``b`` with binary cross entropy; the fake
    probability is ``sigmoid(w . penultimate + b)``.
    """

    kind = StrategyKind.LINEAR_PROBE
    feature = "penultimate"

    def _init_parameters(self, rng: SeededRng) -> None:
        d = self.backbone.config.d_model
        dtype = self.backbone.dtype
        # zero init keeps the untrained head at exactly 0.5
        self.params.new("linear.w", np.zeros((d, 1), dtype=dtype))
        self.params.new("linear.b", np.zeros((), dtype=dtype))

    def logits(self, features: Tensor) -> Tensor:
        out = features @ self.p("linear.w") + self.p("linear.b")
        return ops.reshape(out, (features.shape[0],))

    def loss(self, features: Tensor, labels: np.ndarray) -> Tensor:
        return ops.binary_cross_entropy_with_logit(self.logits(features), labels)

    def fake_probability(self, features: Tensor) -> np.ndarray:
        return sigmoid_array(self.logits(features).data.astype(np.float64))
