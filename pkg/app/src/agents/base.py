"""
Common surface of the four adaptation strategies.
"""

import logging
from abc import ABC, abstractmethod
from typing import List

import numpy as np

from ..models.config_models import StrategyKind, StrategySpec
from ..tensor import ops
from ..tensor.parameter import Parameter, ParameterStore
from ..tensor.rng import SeededRng
from ..tensor.tensor import Tensor
from ..vlm.encoder import DualEncoder
from ..vlm.vocab import Vocabulary
from .zero_shot import softmax_fake

logger = logging.getLogger(__name__)


class AdaptationStrategy(ABC):
    """
    A classifier built on top of a DualEncoder backbone.

    Subclasses own their extra parameters in ``self.params`` and decide which
    image features they consume.  Frozen-backbone strategies hold a
    ``frozen_view`` of the backbone; the caller's parameter flags are untouched.
    """

    kind: StrategyKind
    # "penultimate" or "embedding"
    feature: str = "embedding"
    freezes_backbone: bool = True

    def __init__(self, backbone: DualEncoder, spec: StrategySpec, vocab: Vocabulary, seed: int = 0):
        if spec.kind != self.kind:
            raise ValueError(f"{type(self).__name__} cannot run a {spec.kind.value} spec")
        spec.check_against(backbone.config)
        self.backbone = backbone.frozen_view() if self.freezes_backbone else backbone
        self.spec = spec
        self.vocab = vocab
        self.seed = seed
        self.params = ParameterStore()
        self._init_parameters(SeededRng(seed).split(self.kind.value))

    @abstractmethod
    def _init_parameters(self, rng: SeededRng) -> None:
        """Create the strategy parameters"""

    def p(self, name: str) -> Tensor:
        return self.params[name].tensor

    def trainable_parameters(self) -> List[Parameter]:
        return self.params.trainable()

    def all_parameters(self) -> List[Parameter]:
        """Backbone then strategy parameters, the checkpoint order"""
        return list(self.backbone.params) + list(self.params)

    def features(self, images: np.ndarray) -> Tensor:
        """
        Image features this strategy consumes.

        Frozen backbones are run without recording; the result is a constant.
        """
        if self.freezes_backbone:
            penultimate, emb = self.backbone.embed_images(images)
            return Tensor._wrap(penultimate if self.feature == "penultimate" else emb)
        penultimate, emb = self.backbone.image_features(images)
        return penultimate if self.feature == "penultimate" else emb

    @abstractmethod
    def logits(self, features: Tensor) -> Tensor:
        """[b] logit (single-output heads) or [b, 2] class logits (real, fake)"""

    def loss(self, features: Tensor, labels: np.ndarray) -> Tensor:
        return ops.cross_entropy_with_logits(self.logits(features), labels)

    def fake_probability(self, features: Tensor) -> np.ndarray:
        return softmax_fake(self.logits(features).data)

    def after_step(self) -> None:
        """Hook run after every optimizer step"""
