"""Filtering, n-per-class subsets and stratified train/val splits."""

import logging
import math

import numpy as np

from sslprobe.data.types import DatasetManifest, SubsetSpec
from sslprobe.errors import CapacityError, ContractError, StratificationError

logger = logging.getLogger(__name__)


def filter_single_object(manifest: DatasetManifest) -> DatasetManifest:
    """Keep the records whose source image has exactly one annotated object."""
    kept = [r for r in manifest.records if r.object_count == 1]
    logger.debug("Single-object filter kept %d of %d records", len(kept), len(manifest))
    return manifest.derive(kept)


def restrict_classes(manifest: DatasetManifest, classes: tuple[str, ...] | list[str]) -> DatasetManifest:
    """Keep records of the given classes; the class list becomes the sorted selection."""
    wanted = set(classes)
    missing = wanted - set(manifest.class_names)
    if missing:
        raise ContractError(f"Classes {sorted(missing)} are not in the manifest")
    kept = [r for r in manifest.records if r.category in wanted]
    return manifest.derive(kept, class_names=sorted(wanted))


def build_subset(manifest: DatasetManifest, spec: SubsetSpec) -> DatasetManifest:
    """Sample exactly ``spec.n_per_class`` records of each requested class.

    Sampling is uniform without replacement, seeded by ``spec.seed``; classes
    are visited in sorted order so the draw does not depend on how the caller
    ordered ``spec.classes``. Selected records keep their manifest order.

    Raises:
        CapacityError: a class has fewer than n records.
    """
    groups = manifest.indices_by_class()
    rng = np.random.default_rng(spec.seed)
    chosen: list[int] = []
    for category in sorted(spec.classes):
        available = groups.get(category, [])
        if len(available) < spec.n_per_class:
            raise CapacityError(category, len(available), spec.n_per_class)
        picked = rng.permutation(len(available))[: spec.n_per_class]
        chosen.extend(available[i] for i in picked)
    chosen.sort()
    return manifest.derive(
        [manifest.records[i] for i in chosen],
        class_names=sorted(spec.classes),
    )


def _train_count(count: int, train_fraction: float) -> int:
    # Round half up, and leave at least one record on each side.
    n_train = math.floor(train_fraction * count + 0.5)
    return min(max(n_train, 1), count - 1)


def split_train_val(
    manifest: DatasetManifest, train_fraction: float, seed: int
) -> tuple[DatasetManifest, DatasetManifest]:
    """Per-class stratified split into (train, val).

    Unlabeled records form a single group, so the same call splits an SSL
    pool. Both outputs keep manifest order.

    Raises:
        ContractError: train_fraction outside (0, 1).
        StratificationError: a class with fewer than two records.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ContractError(f"train_fraction must be in (0, 1), got {train_fraction}")

    groups = manifest.indices_by_class()
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    for category in sorted(groups, key=lambda c: (c is not None, c or "")):
        members = groups[category]
        if len(members) < 2:
            raise StratificationError(
                f"Class {category!r} has {len(members)} record(s); at least 2 are needed to split"
            )
        order = rng.permutation(len(members))
        n_train = _train_count(len(members), train_fraction)
        train_idx.extend(members[i] for i in order[:n_train])

    train_set = set(train_idx)
    train = [r for i, r in enumerate(manifest.records) if i in train_set]
    val = [r for i, r in enumerate(manifest.records) if i not in train_set]
    pool = manifest.split == "pool"
    return (
        manifest.derive(train, split="pool" if pool else "train"),
        manifest.derive(val, split="pool" if pool else "val"),
    )
