"""
Prompt tuning: learn M context vectors shared by both class prompts.

The prompt of class word ``w`` is ``[SOS] V_1 ... V_M w [EOS] [PAD]...`` in
token-embedding space; only ``V`` trains.
"""

from typing import Tuple

import numpy as np

from ..core.errors import CapacityError
from ..models.config_models import StrategyKind
from ..prompts.classes import CLASS_WORDS, EOS_TOKEN, PAD_TOKEN, SOS_TOKEN
from ..tensor import ops
from ..tensor.rng import SeededRng
from ..tensor.tensor import Tensor
from ..vlm.contrastive import cosine_logits
from ..vlm.encoder import DualEncoder
from ..vlm.vocab import Vocabulary
from .base import AdaptationStrategy

CONTEXT_INIT_STD = 0.02


def assemble_prompt(
    context: Tensor, class_word: str, model: DualEncoder, vocab: Vocabulary
) -> Tuple[Tensor, int]:
    """
    Build the embedded prompt sequence for one class word.

    Args:
        context: Context vectors [M, d_model]
        class_word: Word whose frozen token embedding follows the context
        model: Backbone providing the token embedding table
        vocab: Closed vocabulary

    Returns:
        (sequence [L, d_model] without positional embeddings, eos_pos = M + 2)
    """
    m = context.shape[0] if context.ndim == 2 else 0
    if m < 1:
        raise ValueError(f"prompt context needs at least one vector, got shape {context.shape}")
    length = model.config.context_len
    if m + 3 > length:
        raise CapacityError(
            f"{m} context tokens plus [SOS], class and [EOS] exceed context length {length}"
        )
    ids = (
        [vocab.id_of(SOS_TOKEN)]
        + [vocab.id_of(class_word), vocab.id_of(EOS_TOKEN)]
        + [vocab.id_of(PAD_TOKEN)] * (length - m - 3)
    )
    rows = model.embed_tokens(np.asarray(ids, dtype=np.int64))
    sequence = ops.concat([rows[0:1], context, rows[1:]], axis=0)
    return sequence, m + 2


class PromptTuneStrategy(AdaptationStrategy):
    """
    Class prompts with learned front context; cross entropy over the scaled
    cosine similarities to the two prompt embeddings.
    """

    kind = StrategyKind.PROMPT_TUNE

    def _init_parameters(self, rng: SeededRng) -> None:
        shape = (self.spec.m, self.backbone.config.d_model)
        self.params.new(
            "prompt.context", rng.normal(shape, std=CONTEXT_INIT_STD, dtype=self.backbone.dtype)
        )
        # fail at construction rather than on the first batch
        if self.spec.m + 3 > self.backbone.config.context_len:
            raise CapacityError(
                f"m={self.spec.m} does not fit context length {self.backbone.config.context_len}"
            )

    def class_embeddings(self) -> Tensor:
        """Prompt text embeddings [2, d_embed] for (real, fake)"""
        sequences, eos = [], []
        for word in CLASS_WORDS:
            sequence, eos_pos = assemble_prompt(self.p("prompt.context"), word, self.backbone, self.vocab)
            sequences.append(ops.reshape(sequence, (1,) + sequence.shape))
            eos.append(eos_pos)
        batch = ops.concat(sequences, axis=0)
        return self.backbone.text_features(batch, np.asarray(eos, dtype=np.int64))

    def logits(self, features: Tensor) -> Tensor:
        return cosine_logits(features, self.class_embeddings(), self.backbone.scale())
