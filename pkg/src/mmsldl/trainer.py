"""Joint two-modality training and test-time coding."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .classifier import fit_class_stats, fuse_and_classify, make_ridge, candidate_label
from .config import Hyperparams
from .errors import InvalidInputError, NumericalFailureError
from .ksvd import ksvd_init
from .slrdl import (
    Dictionary,
    IdealCode,
    build_ideal_code,
    check_sorted_labels,
    dictionary_converged,
    refine_dictionary,
    solve_coding,
)

N_MODALITIES = 2


@dataclass
class ModelBundle:
    dictionaries: list
    train_codes: list
    train_errors: list
    ideal_code: IdealCode
    ridge: list
    class_stats: list
    hyperparams: Hyperparams
    label_map: list
    joint_codes: list = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_classes(self):
        return len(self.label_map)

    @property
    def train_labels(self):
        return np.repeat(np.arange(self.n_classes), self.ideal_code.per_class_counts)


def _check_views(X1, X2, labels):
    X1 = np.asarray(X1, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    labels = check_sorted_labels(labels).astype(int)
    if X1.ndim != 2 or X2.ndim != 2:
        raise InvalidInputError("each modality must be a d x n matrix")
    if X1.shape[1] != X2.shape[1] or X1.shape[1] != labels.size:
        raise InvalidInputError(
            f"modalities are not column aligned: {X1.shape[1]}, {X2.shape[1]} columns, {labels.size} labels"
        )
    for K, X in enumerate((X1, X2), start=1):
        if not np.all(np.isfinite(X)):
            raise InvalidInputError(f"modality {K} contains non-finite values")
    return X1, X2, labels


def code_samples(X, D, h):
    """Code ``X`` over a fixed dictionary with the coupling switched off.

    Columns are processed in a content-determined order so that permuting
    the input permutes the output exactly.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[1] == 0:
        return np.zeros((D.atom_count, 0)), np.zeros_like(X)
    order = np.lexsort(X[::-1])
    res = solve_coding(X[:, order], D, None, None, h.replace(alpha=0.0))
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    return res.Z[:, inv], res.E[:, inv]


def _learn_dictionaries(views, labels, counts, Q, h, log, partner=None):
    n = labels.size
    dicts = []
    for X in views:
        blocks = [X[:, labels == c] for c in range(len(counts))]
        dicts.append(ksvd_init(blocks, counts, h.ksvd_sparsity, h.ksvd_iters))
    Z_last = [np.zeros((dicts[0].atom_count, n)) for _ in views]
    if partner is not None:
        Z_last.append(partner)
    traces = []
    for t in range(h.max_outer_alternations):
        stable = []
        for K, X in enumerate(views):
            try:
                res = solve_coding(X, dicts[K], Q, Z_last[-1 - K], h)
                D_new, d_iters, d_conv = refine_dictionary(dicts[K], res.state, X, h)
            except NumericalFailureError as exc:
                exc.diagnostics.update({"modality": K + 1, "alternation": t})
                raise
            traces.append({
                "alternation": t,
                "modality": K + 1,
                "coding_converged": res.converged,
                "coding_iterations": res.iterations,
                "feas": res.history["feas"],
                "zw": res.history["zw"],
                "dict_iterations": d_iters,
                "dict_converged": d_conv,
            })
            stable.append(dictionary_converged(D_new, dicts[K], h))
            dicts[K] = D_new
            Z_last[K] = res.state.Z
        log(f"alternation {t}: dictionaries stable={stable}")
        if all(stable):
            break
    return dicts, Z_last[:len(views)], traces


def train_single_modality(X, labels, h=None, log=None):
    """One-modality variant whose coupling term becomes ``alpha ||Z - Q||_F^2``.

    Implemented by pinning the partner codes to the identity, which is
    valid because the dictionary has one atom per training sample.
    Returns ``(dictionary, ridge, train_codes)``.
    """
    h = h or Hyperparams()
    log = log or (lambda msg: None)
    X = np.asarray(X, dtype=float)
    labels = check_sorted_labels(labels).astype(int)
    if X.ndim != 2 or X.shape[1] != labels.size:
        raise InvalidInputError("X must have one column per label")
    counts = np.bincount(labels)
    Q = build_ideal_code(labels, counts)
    dicts, _, traces = _learn_dictionaries((X,), labels, counts, Q, h, log, partner=np.eye(labels.size))
    Z, _ = code_samples(X, dicts[0], h)
    return dicts[0], make_ridge(Z, labels, counts, h.lambda_ridge), Z


def train(X1, X2, labels, h=None, label_map=None, log=None):
    """Learn both dictionaries, recode the training set and fit the classifiers."""
    h = h or Hyperparams()
    log = log or (lambda msg: None)
    X1, X2, labels = _check_views(X1, X2, labels)
    views = (X1, X2)
    C = int(labels.max()) + 1 if labels.size else 0
    counts = np.bincount(labels, minlength=C)
    if np.any(counts == 0):
        raise InvalidInputError(f"classes without training samples: {np.flatnonzero(counts == 0).tolist()}")
    Q = build_ideal_code(labels, counts)
    t0 = time.perf_counter()
    dicts, joint, traces = _learn_dictionaries(views, labels, counts, Q, h, log)
    t_dict = time.perf_counter() - t0

    codes, errors, ridge, stats = [], [], [], []
    for K, X in enumerate(views):
        Z, E = code_samples(X, dicts[K], h)
        codes.append(Z)
        errors.append(E)
        ridge.append(make_ridge(Z, labels, counts, h.lambda_ridge))
        stats.append([fit_class_stats(X[:, labels == c], h.rpca_lambda) for c in range(C)])
    diagnostics = {
        "traces": traces,
        "runtime_dictionary_s": t_dict,
        "runtime_total_s": time.perf_counter() - t0,
        "all_coding_converged": all(tr["coding_converged"] for tr in traces),
    }
    return ModelBundle(
        dictionaries=dicts,
        train_codes=codes,
        train_errors=errors,
        ideal_code=Q,
        ridge=ridge,
        class_stats=stats,
        hyperparams=h,
        label_map=list(label_map) if label_map is not None else [str(c) for c in range(C)],
        joint_codes=joint,
        diagnostics=diagnostics,
    )


@dataclass
class Prediction:
    labels: np.ndarray
    candidates: np.ndarray
    decisions: list
    codes: list

    @property
    def agreement_rate(self):
        if self.candidates.shape[1] == 0:
            return float("nan")
        return float(np.mean(self.candidates[0] == self.candidates[1]))


def predict(model, X1, X2, h=None):
    h = h or model.hyperparams
    views = (np.asarray(X1, dtype=float), np.asarray(X2, dtype=float))
    if views[0].shape[1] != views[1].shape[1]:
        raise InvalidInputError("test modalities are not column aligned")
    codes = [code_samples(X, model.dictionaries[K], h)[0] for K, X in enumerate(views)]
    n = views[0].shape[1]
    decisions = [
        fuse_and_classify(model, [codes[0][:, i], codes[1][:, i]], [views[0][:, i], views[1][:, i]])
        for i in range(n)
    ]
    cands = np.array([d.candidates for d in decisions], dtype=int).T.reshape(2, n)
    return Prediction(np.array([d.winner for d in decisions], dtype=int), cands, decisions, codes)


def predict_single_modality(model, X, K, h=None):
    """Ridge-candidate labels of modality ``K`` alone (no fusion)."""
    h = h or model.hyperparams
    Z, _ = code_samples(X, model.dictionaries[K], h)
    return np.array([candidate_label(model.ridge[K], Z[:, i])[0] for i in range(Z.shape[1])], dtype=int)
