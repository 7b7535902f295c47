import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import NonFiniteError, TrainingDivergedError, TrainingError
from ..data.perturb import augment_images
from ..models.config_models import StrategySpec
from ..models.sample_models import SampleRecord
from ..tensor.optim import AdamOptimizer
from ..tensor.rng import SeededRng
from ..tensor.tensor import Tape, Tensor, backward
from ..vlm.encoder import DualEncoder
from ..vlm.pretrain import batch_slices
from ..vlm.vocab import Vocabulary
from .adapted_model import AdaptedModel, build_strategy

logger = logging.getLogger(__name__)


def train_adaptation(
    backbone: DualEncoder,
    spec: StrategySpec,
    train_set: Sequence[SampleRecord],
    epochs: int = 10,
    batch: int = 64,
    seed: int = 7,
    lr: Optional[float] = None,
    vocab: Optional[Vocabulary] = None,
) -> Tuple[AdaptedModel, List[float]]:
    """
    Train one adaptation strategy on a labelled train set.

    Frozen-backbone strategies leave every backbone parameter bitwise
    unchanged; FineTune trains a private copy of the backbone.

    Args:
        backbone: Pre-trained dual encoder
        spec: Strategy and hyperparameters
        train_set: Samples containing both classes
        epochs: Passes over the data (0 returns the initialised strategy)
        batch: Minibatch size
        seed: Seed for initialisation, shuffling and augmentation
        lr: Learning rate, defaults to spec.learning_rate
        vocab: Closed vocabulary, defaults to the built-in one

    Returns:
        (AdaptedModel, mean loss per epoch)
    """
    if len(train_set) == 0:
        raise TrainingError("Cannot train on an empty train set")
    labels = np.asarray([s.label for s in train_set], dtype=np.int64)
    if len(np.unique(labels)) < 2:
        raise TrainingError(
            f"Train set must contain both classes, found only label {int(labels[0])}"
        )
    vocab = vocab or Vocabulary.default()
    lr = lr if lr is not None else spec.learning_rate

    strategy = build_strategy(backbone, spec, vocab, seed)
    model = AdaptedModel(strategy)
    params = strategy.trainable_parameters()
    optimizer = AdamOptimizer(params, lr=lr)
    logger.info(
        f"Training {spec.kind.value} on {len(train_set)} samples: "
        f"{model.trainable_count()} trainable parameters, lr={lr:g}, epochs={epochs}"
    )

    images = np.stack([s.image for s in train_set]).astype(backbone.dtype)
    cached = None
    if strategy.freezes_backbone and not spec.augment and epochs > 0:
        cached = strategy.features(images).data

    rng = SeededRng(seed).split("adapt")
    curve: List[float] = []
    step = 0
    for epoch in range(epochs):
        epoch_rng = rng.split(epoch)
        order = epoch_rng.split("order").permutation(len(train_set))
        losses = []
        for index in batch_slices(order, batch):
            step += 1
            optimizer.zero_grad()
            try:
                with Tape():
                    if cached is not None:
                        features = Tensor._wrap(cached[index])
                    else:
                        batch_images = images[index]
                        if spec.augment:
                            batch_images = augment_images(batch_images, epoch_rng.split(step))
                        features = strategy.features(batch_images)
                    loss = strategy.loss(features, labels[index])
                    backward(loss)
            except NonFiniteError as e:
                raise TrainingDivergedError(step, lr, str(e)) from e
            optimizer.step()
            strategy.after_step()
            losses.append(loss.item())
        curve.append(float(np.mean(losses)))
        logger.info(f"{spec.kind.value} epoch {epoch + 1}/{epochs}: loss {curve[-1]:.4f}")

    return model, curve
