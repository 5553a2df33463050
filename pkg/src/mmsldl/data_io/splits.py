"""Seeded per-class train/test splits and stratified folds."""
import numpy as np

from ..errors import DatasetError, InvalidParameterError


def _class_indices(labels):
    labels = np.asarray(labels, dtype=int)
    return {int(c): np.flatnonzero(labels == c) for c in np.unique(labels)}


def split_indices(labels, train_per_class, seed):
    """Index arrays ``(train, test)``; each is sorted by class, then by original index."""
    if train_per_class < 1:
        raise InvalidParameterError("train_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c, idx in _class_indices(labels).items():
        if idx.size <= train_per_class:
            raise DatasetError(
                f"class {c} has {idx.size} samples, need more than train_per_class={train_per_class}"
            )
        pick = np.zeros(idx.size, dtype=bool)
        pick[rng.choice(idx.size, size=train_per_class, replace=False)] = True
        train.append(idx[pick])
        test.append(idx[~pick])
    return np.concatenate(train), np.concatenate(test)


def split_train_test(dataset, train_per_class, seed):
    """Split a LabeledDataset into ``(train, test)`` LabeledDatasets."""
    tr, ts = split_indices(dataset.labels, train_per_class, seed)
    if any(n <= train_per_class for n in dataset.per_class_counts):
        bad = int(np.argmax(dataset.per_class_counts <= train_per_class))
        raise DatasetError(f"class {dataset.class_names[bad]!r} has too few samples")
    return dataset.subset(tr), dataset.subset(ts)


def stratified_folds(labels, k, seed):
    """``k`` (train_idx, val_idx) pairs; each class is dealt round-robin after a seeded shuffle."""
    if k < 2:
        raise InvalidParameterError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(labels), dtype=int)
    for c, idx in _class_indices(labels).items():
        if idx.size < k:
            raise DatasetError(f"class {c} has {idx.size} samples, fewer than {k} folds")
        fold_of[rng.permutation(idx)] = np.arange(idx.size) % k
    return [(np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)) for f in range(k)]
