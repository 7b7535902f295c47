import logging
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple, TypeVar

from ..core.errors import DataError
from ..models.sample_models import GeneratorFamily, Split, SplitEntry, SplitSpec
from ..tensor.rng import SeededRng, derive_seed

logger = logging.getLogger(__name__)

Item = TypeVar("Item")


def _balanced_entries(
    size: int,
    fake_family: GeneratorFamily,
    categories: int,
    seed: int,
    stream: str,
) -> List[SplitEntry]:
    """
    ``size / 2`` real and fake entries, interleaved real/fake.

    Entry ``i`` depends only on ``i``, so a smaller split is a prefix of a
    larger one with the same seed.
    """
    if size % 2 != 0:
        raise DataError(f"split sizes must be even for class balance, got {size}")
    entries = []
    for i in range(size // 2):
        category = i % categories
        for family in (GeneratorFamily.REAL, fake_family):
            entries.append(
                SplitEntry(
                    family=family,
                    category=category,
                    seed=derive_seed(seed, stream, family.value, i),
                    label=family.label,
                )
            )
    return entries


def build_splits(spec: SplitSpec) -> Split:
    """
    Train on REAL + one fake family, evaluate on every fake family.

    Args:
        spec: Sizes, families and seed

    Returns:
        Split with balanced train entries and one balanced eval set per family,
        each paired with fresh REAL samples
    """
    train = _balanced_entries(spec.train_size, spec.train_family, spec.categories, spec.seed, "train")
    evaluation: Dict[GeneratorFamily, List[SplitEntry]] = {}
    for family in spec.eval_families:
        evaluation[family] = _balanced_entries(
            spec.eval_size, family, spec.categories, spec.seed, f"eval/{family.value}"
        )

    seen = {e.seed for e in train}
    for family, entries in evaluation.items():
        overlap = seen.intersection(e.seed for e in entries)
        if overlap:
            raise DataError(f"train and {family.value} eval seeds overlap ({len(overlap)} seeds)")
        seen.update(e.seed for e in entries)

    logger.info(
        f"Built split: {len(train)} train samples, "
        f"{', '.join(f'{f.value}={len(e)}' for f, e in evaluation.items())} eval samples"
    )
    return Split(train=train, evaluation=evaluation, spec=spec)


def kshot_subset(
    train: Sequence[Item],
    k: int,
    seed: int,
    categories: Optional[int] = None,
) -> List[Item]:
    """
    Keep exactly ``k`` real and ``k`` fake samples per category.

    Args:
        train: Items with ``category`` and ``label`` attributes
        k: Samples per class per category
        seed: Sampling seed
        categories: Category count that must all be covered; defaults to the
            categories present in ``train``

    Returns:
        Subset ordered by category, then class, then original position
    """
    if k < 0:
        raise DataError(f"k must be non-negative, got {k}")
    groups: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for index, item in enumerate(train):
        groups[(item.category, item.label)].append(index)

    wanted = range(categories) if categories is not None else sorted({c for c, _ in groups})
    shortfalls = []
    for category in wanted:
        for label in (0, 1):
            available = len(groups.get((category, label), ()))
            if available < k:
                shortfalls.append(
                    f"category {category} {'fake' if label else 'real'}: need {k}, have {available} "
                    f"(short by {k - available})"
                )
    if shortfalls:
        raise DataError("Not enough samples for k-shot subset: " + "; ".join(shortfalls))

    subset: List[Item] = []
    for category in wanted:
        for label in (0, 1):
            pool = groups.get((category, label), [])
            picked = SeededRng(derive_seed(seed, "kshot", category, label)).choice(len(pool), k)
            subset.extend(train[pool[i]] for i in sorted(picked.tolist()))
    return subset
