"""
Adaptation strategies that turn the dual encoder into a real/fake classifier.
"""

from .accounting import parameter_ledger, trainable_parameter_count
from .adapted_model import AdaptedModel, build_strategy, verify_frozen
from .adapter import AdapterStrategy
from .base import AdaptationStrategy
from .fine_tune import FineTuneStrategy, multi_positive_contrastive_loss
from .linear_probe import LinearProbeStrategy
from .prompt_tune import PromptTuneStrategy, assemble_prompt
from .trainer import train_adaptation
from .zero_shot import class_text_embeddings, zero_shot_probability


def classify(model: AdaptedModel, image) -> float:
    """Fake probability of one image under an adapted model"""
    return model.classify(image)


__all__ = [
    "AdaptationStrategy",
    "AdaptedModel",
    "AdapterStrategy",
    "FineTuneStrategy",
    "LinearProbeStrategy",
    "PromptTuneStrategy",
    "assemble_prompt",
    "build_strategy",
    "class_text_embeddings",
    "classify",
    "multi_positive_contrastive_loss",
    "parameter_ledger",
    "train_adaptation",
    "trainable_parameter_count",
    "verify_frozen",
    "zero_shot_probability",
]
