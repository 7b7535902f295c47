from typing import List

import numpy as np

from ..models.config_models import StrategyKind, StrategySpec
from ..tensor import ops
from ..tensor.parameter import Parameter
from ..tensor.rng import SeededRng
from ..tensor.tensor import Tensor
from ..vlm.contrastive import cosine_logits
from ..vlm.encoder import DualEncoder
from ..vlm.vocab import Vocabulary
from .base import AdaptationStrategy
from .zero_shot import class_text_embeddings


def multi_positive_contrastive_loss(logits: Tensor, labels: np.ndarray) -> Tensor:
    """
    Contrastive loss against the two unique class captions.

    The image->text term is cross entropy over the two captions.  In the
    text->image term each caption's positives are all batch images of its
    class; its loss is the mean negative log-softmax over those images, and
    the term averages over the classes present in the batch.  The result is
    the mean of both terms.

    Args:
        logits: Scaled similarities [b, 2] (real, fake)
        labels: 0/1 per image
    """
    labels = np.asarray(labels, dtype=np.int64)
    image_to_text = ops.cross_entropy_with_logits(logits, labels)

    b = labels.shape[0]
    weights = np.zeros((2, b), dtype=logits.dtype)
    present = [c for c in (0, 1) if np.any(labels == c)]
    for c in present:
        positives = labels == c
        weights[c, positives] = 1.0 / (positives.sum() * len(present))
    log_probs = ops.log_softmax(ops.swapaxes(logits, 0, 1), axis=1)
    text_to_image = -ops.sum(log_probs * Tensor._wrap(weights))
    return (image_to_text + text_to_image) * 0.5


class FineTuneStrategy(AdaptationStrategy):
    """
    Full fine-tuning of a private copy of the backbone, classifying against
    the class-word caption embeddings of the model being trained.
    """

    kind = StrategyKind.FINE_TUNE
    freezes_backbone = False

    def __init__(self, backbone: DualEncoder, spec: StrategySpec, vocab: Vocabulary, seed: int = 0):
        backbone = backbone.clone()
        backbone.params.set_trainable(True)
        super().__init__(backbone, spec, vocab, seed)

    def _init_parameters(self, rng: SeededRng) -> None:
        pass

    def trainable_parameters(self) -> List[Parameter]:
        return self.backbone.params.trainable()

    def logits(self, features: Tensor) -> Tensor:
        classes = class_text_embeddings(self.backbone, self.vocab)
        return cosine_logits(features, classes, self.backbone.scale())

    def loss(self, features: Tensor, labels: np.ndarray) -> Tensor:
        return multi_positive_contrastive_loss(self.logits(features), labels)

    def after_step(self) -> None:
        self.backbone.clamp_logit_scale()
