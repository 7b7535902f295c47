"""
Experiment sweeps: robustness grid, train-size ablation, strategy comparison,
few-shot training and feature export.
"""

import logging
from functools import partial
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..agents.trainer import train_adaptation
from ..core.config import ExperimentConfig
from ..core.errors import DataError, TrainingError, VLMError
from ..data.perturb import gaussian_blur, jpeg_roundtrip
from ..data.splits import build_splits, kshot_subset
from ..data.synth import materialize
from ..models.config_models import StrategyKind, StrategySpec
from ..models.metrics_models import MetricsReport, RunMetadata, SweepCell, SweepResult
from ..models.sample_models import GeneratorFamily, SampleRecord, SplitSpec
from ..vlm.encoder import DualEncoder
from ..vlm.vocab import Vocabulary
from .metrics import Scorer, accuracy_at_threshold, average_precision, evaluate, score_samples

logger = logging.getLogger(__name__)

EvalSets = Dict[GeneratorFamily, List[SampleRecord]]


def robustness_sweep(
    scorer: Scorer,
    eval_sets: EvalSets,
    metadata: RunMetadata,
    qualities: Sequence[int] = (75, 50),
    sigmas: Sequence[float] = (1.0, 2.0),
) -> SweepResult:
    """
    Score every eval set under each perturbation setting.

    Cells are produced in a fixed order: identity, JPEG per quality, blur per
    sigma, each over the families in ``eval_sets`` order.  A failing cell
    records its error and the sweep continues.
    """
    grid = [("identity", None, None)]
    grid += [("jpeg", float(q), partial(jpeg_roundtrip, quality=int(q))) for q in qualities]
    grid += [("blur", float(s), partial(gaussian_blur, sigma=float(s))) for s in sigmas]

    cells: List[SweepCell] = []
    for perturbation, parameter, transform in grid:
        for family, samples in eval_sets.items():
            family = GeneratorFamily(family)
            try:
                items = score_samples(scorer, samples, transform)
                cell = SweepCell(
                    perturbation=perturbation,
                    parameter=parameter,
                    family=family.value,
                    ap=average_precision(items),
                    acc=accuracy_at_threshold(items),
                )
                logger.info(
                    f"Sweep {perturbation}({parameter}) {family.value}: AP {cell.ap:.4f}, acc {cell.acc:.4f}"
                )
            except (VLMError, ValueError) as e:
                logger.warning(f"Sweep cell {perturbation}({parameter}) {family.value} failed: {e}")
                cell = SweepCell(
                    perturbation=perturbation, parameter=parameter, family=family.value, error=str(e)
                )
            cells.append(cell)
    return SweepResult(cells=cells, metadata=metadata)


def _metadata(config: ExperimentConfig, spec: StrategySpec, seed: int, train_size: int, **extra) -> RunMetadata:
    return RunMetadata(
        strategy=spec.kind.value,
        seed=seed,
        config_digest=config.digest(),
        train_size=train_size,
        extra={k: str(v) for k, v in extra.items()},
    )


def load_eval_sets(config: ExperimentConfig, seed: Optional[int] = None) -> EvalSets:
    """Materialise the eval half of the configured split"""
    split = build_splits(
        SplitSpec(
            train_size=0,
            eval_size=config.data.eval_size,
            categories=config.data.categories,
            eval_families=config.data.families,
            seed=config.training.seed if seed is None else seed,
        )
    )
    side = config.model.image_side
    return {family: materialize(entries, side) for family, entries in split.evaluation.items()}


def train_and_evaluate(
    backbone: DualEncoder,
    spec: StrategySpec,
    train_set: Sequence[SampleRecord],
    eval_sets: EvalSets,
    config: ExperimentConfig,
    vocab: Vocabulary,
    seed: int,
    **extra,
) -> MetricsReport:
    model, curve = train_adaptation(
        backbone,
        spec,
        train_set,
        epochs=config.training.epochs,
        batch=config.training.batch,
        seed=seed,
        vocab=vocab,
    )
    metadata = _metadata(config, spec, seed, len(train_set), **extra)
    if curve:
        metadata.extra["final_loss"] = repr(curve[-1])
    return evaluate(model.classify_batch, eval_sets, metadata)


def size_ablation(
    backbone: DualEncoder,
    spec: StrategySpec,
    sizes: Sequence[int],
    seed: int,
    config: ExperimentConfig,
    vocab: Optional[Vocabulary] = None,
    eval_sets: Optional[EvalSets] = None,
) -> List[MetricsReport]:
    """
    Train a fresh strategy per train size and evaluate each on all families.

    Smaller train sets are prefixes of larger ones under the same seed.

    Args:
        backbone: Pre-trained encoder (never modified)
        spec: Strategy to train
        sizes: Ascending even train sizes
        seed: Split and training seed
        config: Experiment settings (epochs, batch, eval size, categories)
    """
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise DataError("size ablation needs at least one train size")
    if any(s % 2 for s in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DataError(f"ablation sizes must be even and strictly ascending, got {sizes}")
    vocab = vocab or Vocabulary.default()
    eval_sets = eval_sets if eval_sets is not None else load_eval_sets(config, seed)

    largest = build_splits(
        SplitSpec(
            train_size=sizes[-1],
            eval_size=0,
            categories=config.data.categories,
            eval_families=(),
            seed=seed,
        )
    )
    pool = materialize(largest.train, config.model.image_side)

    reports = []
    for size in sizes:
        logger.info(f"Ablation: training {spec.kind.value} on {size} samples")
        try:
            reports.append(
                train_and_evaluate(backbone, spec, pool[:size], eval_sets, config, vocab, seed)
            )
        except VLMError as e:
            raise TrainingError(f"Ablation failed at train size {size}: {e}") from e
    return reports


def strategy_specs(base: StrategySpec, kinds: Optional[Sequence[StrategyKind]] = None) -> List[StrategySpec]:
    """One spec per kind, sharing the base hyperparameters but each kind's default lr"""
    kinds = kinds or list(StrategyKind)
    return [base.model_copy(update={"kind": StrategyKind(k), "lr": None}) for k in kinds]


def compare_strategies(
    backbone: DualEncoder,
    specs: Sequence[StrategySpec],
    train_set: Sequence[SampleRecord],
    eval_sets: EvalSets,
    config: ExperimentConfig,
    seed: int,
    vocab: Optional[Vocabulary] = None,
) -> Dict[str, MetricsReport]:
    """Train every spec on the same data and evaluate on the same eval sets"""
    vocab = vocab or Vocabulary.default()
    reports: Dict[str, MetricsReport] = {}
    for spec in specs:
        reports[spec.kind.value] = train_and_evaluate(
            backbone, spec, train_set, eval_sets, config, vocab, seed
        )
    return reports


def fewshot_experiment(
    backbone: DualEncoder,
    specs: Sequence[StrategySpec],
    train_set: Sequence[SampleRecord],
    k: int,
    eval_sets: EvalSets,
    config: ExperimentConfig,
    seed: int,
    vocab: Optional[Vocabulary] = None,
) -> Dict[str, MetricsReport]:
    """k real + k fake samples per category, then :func:`compare_strategies`"""
    subset = kshot_subset(train_set, k, seed, categories=config.data.categories)
    if not subset:
        raise TrainingError("k-shot subset is empty")
    logger.info(f"Few-shot: {len(subset)} samples (k={k} per class per category)")
    return compare_strategies(backbone, specs, subset, eval_sets, config, seed, vocab)


def export_features(backbone: DualEncoder, eval_sets: EvalSets) -> pd.DataFrame:
    """
    One row per eval image: source_id, label, family, then e0..e{d-1} of the
    image embedding.
    """
    frames = []
    for family, samples in eval_sets.items():
        family = GeneratorFamily(family)
        _, emb = backbone.embed_images(np.stack([s.image for s in samples]))
        frame = pd.DataFrame(emb.astype(np.float64), columns=[f"e{i}" for i in range(emb.shape[1])])
        frame.insert(0, "family", family.value)
        frame.insert(0, "label", [s.label for s in samples])
        frame.insert(0, "source_id", np.arange(len(samples)))
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)
