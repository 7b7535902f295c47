import numpy as np

from ..models.config_models import StrategyKind
from ..tensor import ops
from ..tensor.rng import SeededRng
from ..tensor.tensor import Tensor
from ..vlm.contrastive import cosine_logits
from .base import AdaptationStrategy
from .zero_shot import class_text_embeddings


class AdapterStrategy(AdaptationStrategy):
    """
    Bottleneck adapter on the image branch.

    ``A(f) = W2 relu(W1 f + b1) + b2`` is blended residually with the frozen
    image embedding, ``f' = normalize(alpha A(f) + (1 - alpha) f)``, and
    classified against the frozen class-word text embeddings.
    """

    kind = StrategyKind.ADAPTER

    def _init_parameters(self, rng: SeededRng) -> None:
        d = self.backbone.config.d_embed
        hidden = d // self.spec.reduction
        dtype = self.backbone.dtype
        self.params.new("adapter.w1", rng.split("w1").normal((d, hidden), std=d**-0.5, dtype=dtype))
        self.params.new("adapter.b1", np.zeros((hidden,), dtype=dtype))
        self.params.new("adapter.w2", rng.split("w2").normal((hidden, d), std=hidden**-0.5, dtype=dtype))
        self.params.new("adapter.b2", np.zeros((d,), dtype=dtype))
        self._class_embs = None

    def class_embeddings(self) -> Tensor:
        if self._class_embs is None:
            self._class_embs = class_text_embeddings(self.backbone, self.vocab).detach()
        return self._class_embs

    def adapt(self, features: Tensor) -> Tensor:
        hidden = ops.relu(features @ self.p("adapter.w1") + self.p("adapter.b1"))
        adapted = hidden @ self.p("adapter.w2") + self.p("adapter.b2")
        alpha = self.spec.alpha
        return ops.l2_normalize(adapted * alpha + features * (1.0 - alpha))

    def logits(self, features: Tensor) -> Tensor:
        return cosine_logits(self.adapt(features), self.class_embeddings(), self.backbone.scale())
