"""Planted union-of-subspaces data with two column-aligned views."""
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError


@dataclass
class SyntheticData:
    X1: np.ndarray
    X2: np.ndarray
    labels: np.ndarray
    bases1: list
    bases2: list
    clean1: np.ndarray
    clean2: np.ndarray
    mask1: np.ndarray
    mask2: np.ndarray

    @property
    def views(self):
        return (self.X1, self.X2)


def _orthonormal(rng, d, r):
    q, _ = np.linalg.qr(rng.standard_normal((d, r)))
    return q


def plant_sparse_corruption(X, fraction, rng):
    """Replace a random ``fraction`` of entries by +-1. Returns ``(X_corrupt, mask)``."""
    if not 0.0 <= fraction <= 0.5:
        raise InvalidParameterError(f"corruption fraction must lie in [0, 0.5], got {fraction}")
    X = np.array(X, dtype=float)
    mask = rng.random(X.shape) < fraction
    signs = rng.choice([-1.0, 1.0], size=X.shape)
    X[mask] = signs[mask]
    return X, mask


def synth_multimodal(classes, per_class, dim, rank, corruption=0.0, seed=0,
                     cross_modal_overlap=0.0, amplitude=0.3, view_mix=0.5, mean_strength=2.0):
    """Draw ``classes`` rank-``rank`` subspaces and sample two views per column.

    View 1 of class ``c`` lives in a random orthonormal basis ``B_c``. View 2
    applies a fixed orthogonal map ``T`` to a basis that is pulled towards a
    subspace shared by every class by ``cross_modal_overlap`` (0 keeps the
    classes as separable as in view 1), with coefficients partially redrawn
    (``view_mix`` is the weight of the fresh draw). Coefficients are Gaussian
    around a class mean of norm ``mean_strength`` times the per-coordinate
    spread, so every class sits in a cone like real image classes rather than
    symmetrically around the origin. Entries have RMS of order ``amplitude``.
    """
    if rank >= dim:
        raise InvalidParameterError("subspace rank must be smaller than the ambient dimension")
    if classes < 1 or per_class < 1:
        raise InvalidParameterError("need at least one class and one sample per class")
    if not 0.0 <= cross_modal_overlap < 1.0:
        raise InvalidParameterError("cross_modal_overlap must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    T = _orthonormal(rng, dim, dim)
    shared = _orthonormal(rng, dim, rank)
    coef_scale = amplitude * np.sqrt(dim / rank / (1.0 + mean_strength ** 2))
    cols1, cols2, bases1, bases2 = [], [], [], []
    for _ in range(classes):
        B1 = _orthonormal(rng, dim, rank)
        B2 = np.sqrt(1 - cross_modal_overlap) * B1 + np.sqrt(cross_modal_overlap) * shared
        B2, _ = np.linalg.qr(T @ B2)
        centre = rng.standard_normal(rank)
        centre *= mean_strength * np.sqrt(rank) / np.linalg.norm(centre)
        a = (centre[:, None] + rng.standard_normal((rank, per_class))) * coef_scale
        g = (centre[:, None] + rng.standard_normal((rank, per_class))) * coef_scale
        b = np.sqrt(1 - view_mix ** 2) * a + view_mix * g
        cols1.append(B1 @ a)
        cols2.append(B2 @ b)
        bases1.append(B1)
        bases2.append(B2)
    clean1 = np.hstack(cols1)
    clean2 = np.hstack(cols2)
    labels = np.repeat(np.arange(classes), per_class)
    X1, mask1 = plant_sparse_corruption(clean1, corruption, rng)
    X2, mask2 = plant_sparse_corruption(clean2, corruption, rng)
    return SyntheticData(X1, X2, labels, bases1, bases2, clean1, clean2, mask1, mask2)


def dump_synthetic(data, path, spec=None):
    """Write views, labels and a ``ground_truth`` blob set to an archive directory."""
    from .archive import write_archive

    mats = {"X1": data.X1, "X2": data.X2, "labels": data.labels.astype(float)}
    for K, (bases, clean, mask) in enumerate(
        ((data.bases1, data.clean1, data.mask1), (data.bases2, data.clean2, data.mask2)), start=1
    ):
        mats[f"ground_truth/clean{K}"] = clean
        mats[f"ground_truth/mask{K}"] = mask.astype(float)
        for c, B in enumerate(bases):
            mats[f"ground_truth/basis{K}_c{c}"] = B
    manifest = {"kind": "mmsldl-synthetic", "spec": dict(spec or {})}
    return write_archive(path, manifest, mats)


def load_synthetic(path):
    from .archive import read_archive

    doc, m = read_archive(path)
    C = int(m["labels"].max()) + 1
    return SyntheticData(
        m["X1"], m["X2"], m["labels"][:, 0].astype(int),
        [m[f"ground_truth/basis1_c{c}"] for c in range(C)],
        [m[f"ground_truth/basis2_c{c}"] for c in range(C)],
        m["ground_truth/clean1"], m["ground_truth/clean2"],
        m["ground_truth/mask1"] > 0, m["ground_truth/mask2"] > 0,
    )
