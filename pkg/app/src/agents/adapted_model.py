import hashlib
import logging
from typing import Dict, Iterable, Type

import numpy as np

from ..models.config_models import StrategyKind, StrategySpec
from ..models.run_models import FreezeReport
from ..tensor.parameter import Parameter
from ..tensor.tensor import no_grad
from ..vlm.encoder import DualEncoder
from ..vlm.vocab import Vocabulary
from .adapter import AdapterStrategy
from .base import AdaptationStrategy
from .fine_tune import FineTuneStrategy
from .linear_probe import LinearProbeStrategy
from .prompt_tune import PromptTuneStrategy

logger = logging.getLogger(__name__)

STRATEGIES: Dict[StrategyKind, Type[AdaptationStrategy]] = {
    StrategyKind.LINEAR_PROBE: LinearProbeStrategy,
    StrategyKind.FINE_TUNE: FineTuneStrategy,
    StrategyKind.PROMPT_TUNE: PromptTuneStrategy,
    StrategyKind.ADAPTER: AdapterStrategy,
}


def build_strategy(backbone: DualEncoder, spec: StrategySpec, vocab: Vocabulary, seed: int = 0) -> AdaptationStrategy:
    return STRATEGIES[spec.kind](backbone, spec, vocab, seed)


def parameter_digests(params: Iterable[Parameter]) -> Dict[str, str]:
    return {p.name: p.digest() for p in params}


def combined_digest(digests: Dict[str, str]) -> str:
    """SHA-256 over the per-parameter digests in name order"""
    h = hashlib.sha256()
    for name in sorted(digests):
        h.update(digests[name].encode("ascii"))
    return h.hexdigest()


class AdaptedModel:
    """
    A trained (or freshly initialised) strategy on its backbone.

    The digest of every frozen parameter is recorded on construction so that
    :meth:`verify_frozen` can prove the backbone was not touched.
    """

    def __init__(self, strategy: AdaptationStrategy):
        self.strategy = strategy
        self._frozen_digests = parameter_digests(self.frozen_parameters())
        self.frozen_digest = combined_digest(self._frozen_digests)

    @property
    def backbone(self) -> DualEncoder:
        return self.strategy.backbone

    @property
    def spec(self) -> StrategySpec:
        return self.strategy.spec

    @property
    def vocab(self) -> Vocabulary:
        return self.strategy.vocab

    @property
    def seed(self) -> int:
        return self.strategy.seed

    def frozen_parameters(self):
        return self.strategy.backbone.params.frozen() + self.strategy.params.frozen()

    def parameters(self):
        return self.strategy.all_parameters()

    def trainable_count(self) -> int:
        return int(sum(p.size for p in self.strategy.trainable_parameters()))

    def classify_batch(self, images: np.ndarray, batch: int = 128) -> np.ndarray:
        """Fake probabilities (float64) for planar images [n, 3, H, W]"""
        images = np.asarray(images)
        if images.ndim == 3:
            images = images[None]
        scores = []
        with no_grad():
            for start in range(0, len(images), batch):
                features = self.strategy.features(images[start : start + batch])
                scores.append(self.strategy.fake_probability(features))
        if not scores:
            return np.zeros((0,), dtype=np.float64)
        return np.clip(np.concatenate(scores).astype(np.float64), 0.0, 1.0)

    def classify(self, image: np.ndarray) -> float:
        """Fake probability of one planar image [3, H, W]"""
        return float(self.classify_batch(np.asarray(image)[None])[0])

    def verify_frozen(self) -> FreezeReport:
        """Recompute the frozen-partition digests and compare bitwise"""
        if self.spec.kind == StrategyKind.FINE_TUNE:
            return FreezeReport(applicable=False)
        current = parameter_digests(self.frozen_parameters())
        for name, digest in self._frozen_digests.items():
            if current.get(name) != digest:
                logger.warning(f"Frozen parameter changed: {name}")
                return FreezeReport(applicable=True, frozen_ok=False, first_diff=name)
        return FreezeReport(applicable=True, frozen_ok=True)


def verify_frozen(model: AdaptedModel) -> FreezeReport:
    return model.verify_frozen()
