import itertools

import numpy as np
import pytest
from pydantic import ValidationError

from app.src.agents import train_adaptation
from app.src.core.config import DataSection, ExperimentConfig
from app.src.core.errors import DataError, MetricError
from app.src.data import build_splits, materialize, pretraining_corpus
from app.src.eval import (
    accuracy_at_threshold,
    aggregate_by_family,
    average_precision,
    compare_strategies,
    evaluate,
    export_features,
    fewshot_experiment,
    load_eval_sets,
    mean_ap,
    robustness_sweep,
    score_items,
    size_ablation,
    strategy_specs,
)
from app.src.models.config_models import StrategyKind, StrategySpec
from app.src.models.metrics_models import RunMetadata, ScoredItem
from app.src.models.sample_models import FAKE_FAMILIES, SplitSpec
from app.src.tensor.rng import SeededRng
from app.src.vlm import Vocabulary, build_backbone, pretrain_toy


def _metadata(strategy="zero_shot"):
    return RunMetadata(strategy=strategy, seed=0, config_digest="0" * 64)


def _constant(value=0.5):
    return lambda images: np.full(len(images), value)


def _reference_ap(ranked):
    """Area under the precision/recall step curve"""
    positives = sum(ranked)
    area, hits, previous_recall = 0.0, 0, 0.0
    for rank, label in enumerate(ranked, start=1):
        hits += label
        recall = hits / positives
        area += (recall - previous_recall) * hits / rank
        previous_recall = recall
    return area


# metrics


def test_average_precision_by_hand():
    items = score_items([0.9, 0.8, 0.7], [1, 0, 1])
    assert average_precision(items) == pytest.approx(0.833333, abs=1e-6)


def test_average_precision_matches_reference_for_every_ranking():
    rng = SeededRng(21)
    cases = 0
    for n in range(1, 11):
        for labels in itertools.product((0, 1), repeat=n):
            if not any(labels):
                continue
            # the same ranking under several shuffles of distinct scores
            for shuffle in range(5):
                scores = np.linspace(1.0, 0.05, n)
                order = rng.split(n).split(shuffle).permutation(n)
                shuffled_scores = scores[order]
                shuffled_labels = [labels[i] for i in order]
                ap = average_precision(score_items(shuffled_scores, shuffled_labels))
                assert ap == pytest.approx(_reference_ap(labels), rel=1e-12)
                cases += 1
    assert cases >= 10_000


def test_average_precision_by_hand_four_items():
    items = score_items([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
    assert average_precision(items) == pytest.approx(0.833333333, abs=1e-9)


@pytest.mark.parametrize(
    "transform",
    [lambda s: s**3, lambda s: 0.5 * s + 0.25, lambda s: 1.0 / (1.0 + np.exp(-8.0 * (s - 0.5)))],
)
def test_average_precision_is_invariant_under_monotone_transforms(transform):
    rng = SeededRng(8)
    scores = rng.uniform(40)
    labels = (rng.uniform(40) < 0.5).astype(int).tolist()
    labels[0], labels[1] = 0, 1
    assert average_precision(score_items(transform(scores), labels)) == pytest.approx(
        average_precision(score_items(scores, labels)), rel=1e-12
    )


def test_accuracy_flips_with_labels():
    rng = SeededRng(9)
    scores = rng.uniform(50)
    labels = (rng.uniform(50) < 0.5).astype(int)
    accuracy = accuracy_at_threshold(score_items(scores, labels))
    flipped = accuracy_at_threshold(score_items(scores, 1 - labels))
    assert accuracy + flipped == pytest.approx(1.0, abs=1e-12)


def test_average_precision_ignores_item_order():
    items = score_items([0.2, 0.9, 0.4, 0.6], [0, 1, 1, 0])
    assert average_precision(items) == average_precision(items[::-1])


def test_ties_break_by_source_id():
    tied_real_first = [ScoredItem(score=0.5, label=0, source_id=0), ScoredItem(score=0.5, label=1, source_id=1)]
    tied_fake_first = [ScoredItem(score=0.5, label=0, source_id=1), ScoredItem(score=0.5, label=1, source_id=0)]
    assert average_precision(tied_real_first) == 0.5
    assert average_precision(tied_fake_first) == 1.0


def test_accuracy_threshold_is_inclusive():
    items = score_items([0.5, 0.49, 0.5], [1, 0, 0])
    assert accuracy_at_threshold(items) == pytest.approx(2 / 3)
    assert accuracy_at_threshold(items, threshold=0.4) == pytest.approx(1 / 3)


def test_metric_errors():
    with pytest.raises(MetricError):
        average_precision(score_items([0.1, 0.2], [0, 0]))
    with pytest.raises(MetricError):
        accuracy_at_threshold([])
    with pytest.raises(MetricError):
        mean_ap([])
    assert mean_ap([0.5, 1.0]) == 0.75


@pytest.mark.parametrize("score", [1.5, -0.1, float("nan")])
def test_scored_item_range(score):
    with pytest.raises(ValidationError):
        ScoredItem(score=score, label=1, source_id=0)


def test_evaluate_constant_scorer(eval_sets):
    report = evaluate(_constant(), eval_sets, _metadata())
    assert [row.dataset for row in report.rows] == [f"synth_{f.value}" for f in FAKE_FAMILIES]
    for row in report.rows:
        assert (row.n_real, row.n_fake) == (6, 6)
        # ties rank by position and the sets interleave real/fake
        assert row.ap == 0.5
        assert row.acc == 0.5
    assert report.map == 0.5 and report.mean_acc == 0.5


def test_aggregate_by_family(eval_sets):
    frame = aggregate_by_family(evaluate(_constant(), eval_sets, _metadata()))
    assert list(frame.family) == [f.value for f in FAKE_FAMILIES] + ["average"]
    assert frame.iloc[-1].datasets == 3


# sweeps


def test_robustness_sweep_grid_order(eval_sets):
    result = robustness_sweep(_constant(), eval_sets, _metadata(), qualities=(75, 50), sigmas=(1.0, 2.0))
    assert len(result.cells) == 15
    settings = [(c.perturbation, c.parameter) for c in result.cells[::3]]
    assert settings == [("identity", None), ("jpeg", 75.0), ("jpeg", 50.0), ("blur", 1.0), ("blur", 2.0)]
    assert [c.family for c in result.cells[:3]] == [f.value for f in FAKE_FAMILIES]
    assert result.cell("blur", 2.0, "gan_like").ap == 0.5


def test_robustness_sweep_records_failed_cells(eval_sets):
    calls = [0]

    def flaky(images):
        calls[0] += 1
        if calls[0] > 9:
            raise DataError("scorer failed")
        return np.full(len(images), 0.5)

    result = robustness_sweep(flaky, eval_sets, _metadata())
    assert len(result.cells) == 15
    assert all(c.error is None for c in result.cells[:9])
    for cell in result.cells[9:]:
        assert cell.perturbation == "blur"
        assert cell.ap is None and cell.error == "scorer failed"


@pytest.mark.parametrize("sizes", [[], [10, 7], [20, 10], [8, 8]])
def test_size_ablation_rejects_bad_sizes(backbone, experiment, eval_sets, sizes):
    spec = StrategySpec(kind=StrategyKind.LINEAR_PROBE)
    with pytest.raises(DataError):
        size_ablation(backbone, spec, sizes, 3, experiment, eval_sets=eval_sets)


def test_size_ablation_trains_one_model_per_size(backbone, vocab, experiment, eval_sets):
    spec = StrategySpec(kind=StrategyKind.LINEAR_PROBE)
    before = {p.name: p.data.tobytes() for p in backbone.parameters()}
    reports = size_ablation(backbone, spec, [8, 16], 3, experiment, vocab, eval_sets)
    assert [r.metadata.train_size for r in reports] == [8, 16]
    assert all(r.metadata.strategy == "linear" for r in reports)
    assert all(len(r.rows) == 3 for r in reports)
    assert {p.name: p.data.tobytes() for p in backbone.parameters()} == before


def test_strategy_specs_reset_learning_rate():
    specs = strategy_specs(StrategySpec(kind=StrategyKind.ADAPTER, lr=0.5, m=4))
    assert [s.kind for s in specs] == list(StrategyKind)
    assert all(s.lr is None and s.m == 4 for s in specs)


def test_fewshot_experiment(backbone, vocab, experiment, train_set, eval_sets):
    specs = [StrategySpec(kind=StrategyKind.LINEAR_PROBE)]
    reports = fewshot_experiment(backbone, specs, train_set, 1, eval_sets, experiment, 3, vocab)
    assert list(reports) == ["linear"]
    assert reports["linear"].metadata.train_size == 8
    with pytest.raises(DataError):
        fewshot_experiment(backbone, specs, train_set, 9, eval_sets, experiment, 3, vocab)


def test_load_eval_sets_follows_config(experiment, eval_sets):
    loaded = load_eval_sets(experiment)
    assert list(loaded) == list(FAKE_FAMILIES)
    for family, samples in loaded.items():
        assert [s.seed for s in samples] == [s.seed for s in eval_sets[family]]


def test_export_features(backbone, eval_sets):
    frame = export_features(backbone, eval_sets)
    assert list(frame.columns[:3]) == ["source_id", "label", "family"]
    assert list(frame.columns[3:]) == [f"e{i}" for i in range(backbone.config.d_embed)]
    assert len(frame) == 36
    norms = np.linalg.norm(frame[[f"e{i}" for i in range(8)]].to_numpy(), axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-5)


# toy-scale end to end

TOY_SEED = 7
IN_DISTRIBUTION = "gan_like"
UNSEEN = ("diffusion_like", "commercial_like")


@pytest.fixture(scope="module")
def toy_config():
    return ExperimentConfig(data=DataSection(train_size=2000, eval_size=400))


@pytest.fixture(scope="module")
def toy_backbone(toy_config):
    vocab = Vocabulary.default()
    config = toy_config
    corpus = pretraining_corpus(config.data.pretrain_size, config.data.categories, TOY_SEED, config.model.image_side)
    backbone = build_backbone(config.model, vocab, seed=TOY_SEED)
    pretrain_toy(
        backbone,
        corpus,
        vocab,
        epochs=config.training.pretrain_epochs,
        batch=config.training.batch,
        lr=config.training.pretrain_lr,
        seed=TOY_SEED,
    )
    return backbone


@pytest.fixture(scope="module")
def toy_train_set(toy_config):
    split = build_splits(
        SplitSpec(
            train_size=toy_config.data.train_size,
            eval_size=0,
            categories=toy_config.data.categories,
            eval_families=(),
            seed=TOY_SEED,
        )
    )
    return materialize(split.train, toy_config.model.image_side)


@pytest.fixture(scope="module")
def toy_eval_sets(toy_config):
    return load_eval_sets(toy_config, TOY_SEED)


@pytest.fixture(scope="module")
def toy_reports(toy_backbone, toy_config, toy_train_set, toy_eval_sets):
    specs = strategy_specs(toy_config.strategy)
    return compare_strategies(toy_backbone, specs, toy_train_set, toy_eval_sets, toy_config, TOY_SEED)


def _family_ap(report):
    return {row.family: row.ap for row in report.rows}


@pytest.mark.slow
def test_toy_strategies_detect_the_training_family(toy_reports):
    assert sorted(toy_reports) == sorted(k.value for k in StrategyKind)
    for kind, report in toy_reports.items():
        aps = _family_ap(report)
        assert aps[IN_DISTRIBUTION] >= 0.95, kind
        assert all(ap > 0.5 for ap in aps.values()), (kind, aps)


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["prompt", "linear"])
def test_toy_strategies_generalize_to_unseen_families(toy_reports, kind):
    aps = _family_ap(toy_reports[kind])
    for family in UNSEEN:
        assert aps[family] >= 0.70, (family, aps)


@pytest.mark.slow
def test_perturbations_do_not_improve_detection(toy_backbone, toy_config, toy_train_set, toy_eval_sets):
    spec = StrategySpec(kind=StrategyKind.LINEAR_PROBE)
    model, _ = train_adaptation(toy_backbone, spec, toy_train_set, seed=TOY_SEED)
    result = robustness_sweep(
        model.classify_batch, toy_eval_sets, _metadata("linear"), toy_config.eval.qualities, toy_config.eval.sigmas
    )
    assert len(result.cells) == 3 * (1 + len(toy_config.eval.qualities) + len(toy_config.eval.sigmas))
    assert all(cell.error is None for cell in result.cells)
    for cell in result.cells:
        if cell.perturbation != "identity":
            baseline = result.cell("identity", None, cell.family)
            assert cell.ap <= baseline.ap + 0.02, (cell.perturbation, cell.parameter, cell.family)


@pytest.mark.slow
def test_sixteen_shot_training_detects_the_training_family(toy_backbone, toy_config, toy_train_set, toy_eval_sets):
    specs = strategy_specs(toy_config.strategy)
    reports = fewshot_experiment(toy_backbone, specs, toy_train_set, 16, toy_eval_sets, toy_config, TOY_SEED)
    for kind, report in reports.items():
        assert report.metadata.train_size == 640
        assert _family_ap(report)[IN_DISTRIBUTION] >= 0.80, kind


@pytest.mark.slow
@pytest.mark.parametrize("kind", list(StrategyKind))
def test_more_training_data_does_not_hurt(toy_backbone, toy_config, toy_eval_sets, kind):
    sizes = [2000, 4000, 6000, 8000]
    spec = StrategySpec(kind=kind)
    reports = size_ablation(toy_backbone, spec, sizes, TOY_SEED, toy_config, eval_sets=toy_eval_sets)
    assert [r.metadata.train_size for r in reports] == sizes
    assert reports[-1].map >= reports[0].map - 0.05
