"""
Rank and threshold metrics over scored eval items.

"fake" is the positive class everywhere.
"""

import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..core.errors import MetricError
from ..models.metrics_models import MetricsReport, MetricsRow, RunMetadata, ScoredItem
from ..models.sample_models import GeneratorFamily, SampleRecord

logger = logging.getLogger(__name__)

Scorer = Callable[[np.ndarray], np.ndarray]
ImageTransform = Callable[[np.ndarray], np.ndarray]

DEFAULT_THRESHOLD = 0.5


def score_items(scores: Sequence[float], labels: Sequence[int], source_ids: Optional[Sequence[int]] = None) -> List[ScoredItem]:
    if source_ids is None:
        source_ids = range(len(scores))
    return [
        ScoredItem(score=float(s), label=int(y), source_id=int(i))
        for s, y, i in zip(scores, labels, source_ids)
    ]


def ranked_labels(items: Sequence[ScoredItem]) -> List[int]:
    """Labels in rank order: descending score, ties by ascending source id"""
    scores = np.asarray([item.score for item in items], dtype=np.float64)
    ids = np.asarray([item.source_id for item in items], dtype=np.int64)
    order = np.lexsort((ids, -scores))
    return [items[i].label for i in order]


def average_precision(items: Sequence[ScoredItem]) -> float:
    """
    Average precision of the fake class.

    Args:
        items: Scored items with at least one positive

    Returns:
        (1/P) * sum over positive ranks of precision at that rank
    """
    labels = ranked_labels(items)
    positives = sum(labels)
    if positives == 0:
        raise MetricError("Average precision is undefined without positive items")
    precisions = []
    hits = 0
    for rank, label in enumerate(labels, start=1):
        if label == 1:
            hits += 1
            precisions.append(hits / rank)
    return math.fsum(precisions) / positives


def accuracy_at_threshold(items: Sequence[ScoredItem], threshold: float = DEFAULT_THRESHOLD) -> float:
    """Fraction of items where (score >= threshold) matches (label == 1)"""
    if len(items) == 0:
        raise MetricError("Accuracy is undefined for an empty item list")
    correct = sum(1 for item in items if (item.score >= threshold) == (item.label == 1))
    return correct / len(items)


def mean_ap(reports: Iterable[Union[MetricsRow, float]]) -> float:
    """Unweighted mean of per-dataset APs"""
    values = [r.ap if isinstance(r, MetricsRow) else float(r) for r in reports]
    if not values:
        raise MetricError("mAP needs at least one dataset")
    return math.fsum(values) / len(values)


def mean_accuracy(rows: Iterable[MetricsRow]) -> float:
    values = [row.acc for row in rows]
    if not values:
        raise MetricError("Mean accuracy needs at least one dataset")
    return math.fsum(values) / len(values)


def dataset_name(family: Union[GeneratorFamily, str]) -> str:
    return f"synth_{GeneratorFamily(family).value}"


def metrics_row(dataset: str, family: str, items: Sequence[ScoredItem]) -> MetricsRow:
    n_fake = sum(item.label for item in items)
    return MetricsRow(
        dataset=dataset,
        family=family,
        n_real=len(items) - n_fake,
        n_fake=n_fake,
        ap=average_precision(items),
        acc=accuracy_at_threshold(items),
    )


def build_report(rows: List[MetricsRow], metadata: RunMetadata) -> MetricsReport:
    return MetricsReport(rows=rows, map=mean_ap(rows), mean_acc=mean_accuracy(rows), metadata=metadata)


def score_samples(scorer: Scorer, samples: Sequence[SampleRecord], transform: Optional[ImageTransform] = None) -> List[ScoredItem]:
    """Score eval samples; source ids are positions in ``samples``"""
    images = [s.image if transform is None else transform(s.image) for s in samples]
    scores = np.asarray(scorer(np.stack(images)), dtype=np.float64)
    return score_items(scores, [s.label for s in samples])


def evaluate(
    scorer: Scorer,
    eval_sets: Dict[GeneratorFamily, List[SampleRecord]],
    metadata: RunMetadata,
    transform: Optional[ImageTransform] = None,
) -> MetricsReport:
    """
    Score every eval set and build the per-dataset report.

    Args:
        scorer: Maps planar images [n, 3, H, W] to fake probabilities
        eval_sets: Balanced samples per fake family, in evaluation order
        metadata: Run identity
        transform: Optional perturbation applied to each image before scoring
    """
    rows = []
    for family, samples in eval_sets.items():
        family = GeneratorFamily(family)
        items = score_samples(scorer, samples, transform)
        rows.append(metrics_row(dataset_name(family), family.value, items))
        logger.info(f"{rows[-1].dataset}: AP {rows[-1].ap:.4f}, acc {rows[-1].acc:.4f}")
    return build_report(rows, metadata)


def aggregate_by_family(report: MetricsReport) -> pd.DataFrame:
    """
    Mean AP/accuracy per generator family plus an ``average`` row.

    Returns:
        DataFrame with columns family, datasets, ap, acc
    """
    frame = pd.DataFrame([row.model_dump() for row in report.rows])
    grouped = (
        frame.groupby("family", sort=False)
        .agg(datasets=("dataset", "count"), ap=("ap", "mean"), acc=("acc", "mean"))
        .reset_index()
    )
    average = pd.DataFrame(
        [{"family": "average", "datasets": len(frame), "ap": report.map, "acc": report.mean_acc}]
    )
    return pd.concat([grouped, average], ignore_index=True)
