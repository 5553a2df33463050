"""Ridge scoring, per-class robust PCA statistics and cross-modal fusion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalFailureError
from .prox_ops import soft_threshold, spectral_norm, svt, thin_svd

BASIS_RANK_TOL = 1e-8


@dataclass
class RidgeClassifier:
    W_hat: np.ndarray
    H: np.ndarray
    lambda_ridge: float
    Q_score: np.ndarray

    @property
    def n_classes(self):
        return self.W_hat.shape[0]


@dataclass
class ClassNoiseStats:
    L: np.ndarray
    S_bar: np.ndarray
    basis: np.ndarray
    converged: bool = True


@dataclass
class FusionDecision:
    candidates: tuple
    errors: np.ndarray | None
    normalized: np.ndarray | None
    winner: int

    @property
    def agreed(self):
        return self.candidates[0] == self.candidates[1]


@dataclass
class RpcaResult:
    L: np.ndarray
    S: np.ndarray
    converged: bool
    iterations: int

    def __iter__(self):
        return iter((self.L, self.S))


def build_label_matrix(labels, C):
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise InvalidInputError(f"labels must lie in [0, {C})")
    H = np.zeros((C, labels.size))
    H[labels, np.arange(labels.size)] = 1.0
    return H


def fit_ridge(Z, H, lambda_ridge):
    """Closed-form multivariate ridge: ``H Z^T (Z Z^T + lambda I)^{-1}``."""
    Z = np.asarray(Z, dtype=float)
    H = np.asarray(H, dtype=float)
    if Z.shape[1] != H.shape[1]:
        raise InvalidInputError(f"Z has {Z.shape[1]} columns but H has {H.shape[1]}")
    G = Z @ Z.T + lambda_ridge * np.eye(Z.shape[0])
    if lambda_ridge == 0 and np.linalg.cond(G) > 1e14:
        raise NumericalFailureError("Z Z^T is singular and lambda_ridge is 0", {"cond": np.linalg.cond(G)})
    try:
        return np.linalg.solve(G, Z @ H.T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("ridge system is singular", {"lambda_ridge": lambda_ridge}) from exc


def class_score_matrix(atoms_per_class):
    """C x n_atoms class-indicator rows: the ideal code collapsed to one row per class."""
    atoms_per_class = np.asarray(atoms_per_class, dtype=int)
    atom_labels = np.repeat(np.arange(len(atoms_per_class)), atoms_per_class)
    return build_label_matrix(atom_labels, len(atoms_per_class))


def make_ridge(Z, labels, atoms_per_class, lambda_ridge):
    C = len(atoms_per_class)
    H = build_label_matrix(labels, C)
    return RidgeClassifier(fit_ridge(Z, H, lambda_ridge), H, float(lambda_ridge),
                           class_score_matrix(atoms_per_class))


def candidate_label(ridge, z_ts):
    z_ts = np.asarray(z_ts, dtype=float).ravel()
    if z_ts.size != ridge.W_hat.shape[1]:
        raise InvalidInputError(f"code has length {z_ts.size}, expected {ridge.W_hat.shape[1]}")
    s = (ridge.W_hat + ridge.Q_score) @ z_ts
    # np.argmax picks the first maximum, i.e. the lowest class id on ties
    return int(np.argmax(s)), s


def rpca(Xc, lambda_rpca=None, tol=1e-7, max_iter=1000, rho=1.5):
    """Inexact augmented Lagrange multiplier RPCA: ``Xc = L + S``."""
    X = np.asarray(Xc, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise InvalidInputError("rpca needs a d x p block with p >= 1")
    d, p = X.shape
    if lambda_rpca is None:
        lambda_rpca = 1.0 / np.sqrt(max(d, p))
    x_norm = np.linalg.norm(X)
    if x_norm == 0:
        return RpcaResult(np.zeros_like(X), np.zeros_like(X), True, 0)
    two = spectral_norm(X)
    Y = X / max(two, np.max(np.abs(X)) / lambda_rpca)
    mu = 1.25 / two
    mu_bar = mu * 1e7
    S = np.zeros_like(X)
    L = np.zeros_like(X)
    for it in range(1, max_iter + 1):
        L = svt(X - S + Y / mu, 1.0 / mu)
        S = soft_threshold(X - L + Y / mu, lambda_rpca / mu)
        R = X - L - S
        Y = Y + mu * R
        mu = min(mu * rho, mu_bar)
        if np.linalg.norm(R) / x_norm < tol:
            return RpcaResult(L, S, True, it)
    return RpcaResult(L, S, False, max_iter)


def orthonormal_basis(L, rel_tol=BASIS_RANK_TOL):
    f = thin_svd(L)
    if f.S.size == 0 or f.S[0] == 0:
        return np.zeros((L.shape[0], 0))
    return f.U[:, f.S > rel_tol * f.S[0]]


def fit_class_stats(Xc, lambda_rpca=None):
    Xc = np.asarray(Xc, dtype=float)
    if Xc.ndim == 2 and Xc.shape[1] == 1:
        # a lone sample gives nothing to separate noise from; keep it whole
        res = RpcaResult(Xc.copy(), np.zeros_like(Xc), True, 0)
    else:
        res = rpca(Xc, lambda_rpca)
    return ClassNoiseStats(L=res.L, S_bar=res.S.mean(axis=1), basis=orthonormal_basis(res.L),
                           converged=res.converged)


def class_stats(model, c, K):
    """Noise statistics of class ``c`` in modality ``K`` (0-based) of a trained model."""
    return model.class_stats[K][c]


def reconstruction_error(x_ts, stats):
    """Squared distance of ``x_ts - S_bar`` to the class low-rank subspace."""
    v = np.asarray(x_ts, dtype=float).ravel() - stats.S_bar
    B = stats.basis
    if B.shape[1]:
        v = v - B @ (B.T @ v)
    return float(v @ v)


def normalize_pair(errs):
    total = errs.sum()
    if total <= 0 or not np.isfinite(total):
        return np.full_like(errs, 0.5)
    return errs / total


def fuse(c1, c2, stats_per_modality, x_per_modality):
    """Pick between two disagreeing candidates by summed normalized residuals."""
    if c1 == c2:
        return FusionDecision((c1, c2), None, None, c1)
    cands = (c1, c2)
    errs = np.array([[reconstruction_error(x, stats[c]) for c in cands]
                     for stats, x in zip(stats_per_modality, x_per_modality)])
    norm = np.vstack([normalize_pair(row) for row in errs])
    total = norm.sum(axis=0)
    if total[0] < total[1]:
        winner = c1
    elif total[1] < total[0]:
        winner = c2
    else:
        winner = min(c1, c2)
    return FusionDecision(cands, errs, norm, winner)


def fuse_and_classify(model, z_ts, x_ts):
    """Full decision for one test sample given its code and raw view per modality."""
    c1, _ = candidate_label(model.ridge[0], z_ts[0])
    c2, _ = candidate_label(model.ridge[1], z_ts[1])
    return fuse(c1, c2, model.class_stats, x_ts)
