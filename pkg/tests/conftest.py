from pathlib import Path

import numpy as np
import pytest

from app.src.core.config import DataSection, ExperimentConfig, TrainingSection
from app.src.data.splits import build_splits
from app.src.data.synth import materialize
from app.src.models.config_models import EncoderConfig
from app.src.models.sample_models import FAKE_FAMILIES, SplitSpec
from app.src.vlm.encoder import build_backbone
from app.src.vlm.vocab import Vocabulary

FIXTURES = Path(__file__).parent / "fixtures"

TINY_SIDE = 8
TINY_CATEGORIES = 4


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def tiny_config() -> EncoderConfig:
    return EncoderConfig(
        d_model=8, n_layers=1, n_heads=2, d_embed=8, patch_size=4, image_side=TINY_SIDE, context_len=12
    )


@pytest.fixture
def vocab() -> Vocabulary:
    return Vocabulary.default()


@pytest.fixture
def backbone(tiny_config, vocab):
    return build_backbone(tiny_config, vocab, seed=0)


@pytest.fixture
def backbone_f64(tiny_config, vocab):
    return build_backbone(tiny_config, vocab, seed=0, dtype="f64")


@pytest.fixture
def split():
    return build_splits(
        SplitSpec(
            train_size=40,
            eval_size=12,
            categories=TINY_CATEGORIES,
            eval_families=FAKE_FAMILIES,
            seed=3,
        )
    )


@pytest.fixture
def train_set(split):
    return materialize(split.train, TINY_SIDE)


@pytest.fixture
def eval_sets(split):
    return {family: materialize(entries, TINY_SIDE) for family, entries in split.evaluation.items()}


@pytest.fixture
def images(train_set) -> np.ndarray:
    return np.stack([s.image for s in train_set[:6]])


@pytest.fixture
def experiment(tiny_config) -> ExperimentConfig:
    return ExperimentConfig(
        model=tiny_config,
        data=DataSection(train_size=40, eval_size=12, categories=TINY_CATEGORIES, pretrain_size=16),
        training=TrainingSection(epochs=1, batch=16, seed=3, pretrain_epochs=1),
    )
