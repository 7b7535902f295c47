import logging
from typing import List, Sequence, Tuple

import numpy as np

from ..core.errors import DataError, NonFiniteError, TrainingDivergedError
from ..models.sample_models import SampleRecord
from ..tensor.optim import AdamOptimizer
from ..tensor.rng import SeededRng
from ..tensor.tensor import Tape, backward
from .contrastive import clip_contrastive_loss
from .encoder import DualEncoder
from .vocab import Vocabulary, stack_tokens, tokenize

logger = logging.getLogger(__name__)


def batch_slices(order: np.ndarray, batch: int, min_size: int = 1) -> List[np.ndarray]:
    """
    Split a permutation into consecutive batches.

    A trailing batch smaller than ``min_size`` is merged into the one before it.
    """
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    chunks = [order[i : i + batch] for i in range(0, len(order), batch)]
    if len(chunks) > 1 and len(chunks[-1]) < min_size:
        tail = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], tail])
    return chunks


def pretrain_toy(
    model: DualEncoder,
    dataset: Sequence[SampleRecord],
    vocab: Vocabulary,
    epochs: int = 10,
    batch: int = 64,
    lr: float = 1e-3,
    seed: int = 7,
) -> Tuple[DualEncoder, List[float]]:
    """
    Contrastive pre-training on captioned samples, in place.

    Args:
        model: Encoder to train; every parameter is trained
        dataset: Samples whose captions tokenize under ``vocab``
        vocab: Closed vocabulary
        epochs: Passes over the data (0 leaves the model untouched)
        batch: Pairs per contrastive batch
        lr: Adam learning rate
        seed: Shuffling seed

    Returns:
        (model, mean loss per epoch)
    """
    if len(dataset) == 0:
        raise DataError("Cannot pre-train on an empty dataset")
    if len(dataset) < 2:
        raise DataError("Contrastive pre-training needs at least 2 samples")

    context_len = model.config.context_len
    ids, eos = stack_tokens([tokenize(s.caption, vocab, context_len) for s in dataset])
    images = np.stack([s.image for s in dataset]).astype(model.dtype)

    model.params.set_trainable(True)
    optimizer = AdamOptimizer(model.parameters(), lr=lr)
    rng = SeededRng(seed).split("pretrain")
    curve: List[float] = []
    step = 0

    for epoch in range(epochs):
        order = rng.split(epoch).permutation(len(dataset))
        losses = []
        for index in batch_slices(order, batch, min_size=2):
            step += 1
            optimizer.zero_grad()
            try:
                with Tape():
                    _, image_emb = model.image_features(images[index])
                    text_emb = model.text_features(model.embed_tokens(ids[index]), eos[index])
                    loss = clip_contrastive_loss(image_emb, text_emb, model.scale())
                    backward(loss)
            except NonFiniteError as e:
                raise TrainingDivergedError(step, lr, str(e)) from e
            optimizer.step()
            model.clamp_logit_scale()
            losses.append(loss.item())
        curve.append(float(np.mean(losses)))
        logger.info(
            f"Pretrain epoch {epoch + 1}/{epochs}: loss {curve[-1]:.4f}, "
            f"scale {model.scale_value():.2f}"
        )

    return model, curve
