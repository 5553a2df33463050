"""Structured low-rank dictionary learning for a single modality.

Coding runs the linearized ADMM loop with adaptive penalty over
``(Z, W, E, Y, M, mu)`` for the constrained problem

    min ||Z||_* + beta ||W||_1 + lam ||E||_1 + alpha ||Z Z_o^T - Q||_F^2
    s.t. X = D Z + E,  W = Z

followed by the damped closed-form dictionary refit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import Hyperparams
from .errors import (
    InvalidConfigurationError,
    InvalidInputError,
    InvalidStateError,
    NumericalFailureError,
)
from .prox_ops import soft_threshold, spectral_norm, svt

TIKHONOV_COND = 1e12
TIKHONOV_SCALE = 1e-10


@dataclass(frozen=True)
class Dictionary:
    atoms: np.ndarray
    class_offsets: tuple

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        offsets = tuple(int(o) for o in self.class_offsets)
        if atoms.ndim != 2:
            raise InvalidInputError("dictionary atoms must be a d x C matrix")
        if len(offsets) < 2 or offsets[0] != 0 or offsets[-1] != atoms.shape[1]:
            raise InvalidInputError(f"class_offsets {offsets} do not partition {atoms.shape[1]} atoms")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise InvalidInputError(f"class_offsets {offsets} must be strictly increasing")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "class_offsets", offsets)

    @property
    def atom_count(self):
        return self.atoms.shape[1]

    @property
    def n_classes(self):
        return len(self.class_offsets) - 1

    @property
    def atoms_per_class(self):
        return np.diff(self.class_offsets)

    def block(self, c):
        return slice(self.class_offsets[c], self.class_offsets[c + 1])

    def atom_labels(self):
        return np.repeat(np.arange(self.n_classes), self.atoms_per_class)

    @classmethod
    def from_blocks(cls, blocks):
        offsets = np.concatenate([[0], np.cumsum([b.shape[1] for b in blocks])])
        return cls(np.hstack(blocks), tuple(offsets))


@dataclass(frozen=True)
class IdealCode:
    Q: np.ndarray
    per_class_counts: tuple


@dataclass
class SolverState:
    Z: np.ndarray
    W: np.ndarray
    E: np.ndarray
    Y: np.ndarray
    M: np.ndarray
    mu: float
    eta: float
    iter: int = 0

    @classmethod
    def zeros(cls, D, X, h):
        n_atoms = D.atom_count
        d, n = X.shape
        return cls(
            Z=np.zeros((n_atoms, n)),
            W=np.zeros((n_atoms, n)),
            E=np.zeros((d, n)),
            Y=np.zeros((d, n)),
            M=np.zeros((n_atoms, n)),
            mu=float(h.mu0),
            eta=spectral_norm(D.atoms) ** 2,
        )


@dataclass
class CodingResult:
    Z: np.ndarray
    E: np.ndarray
    converged: bool
    iterations: int
    history: dict = field(default_factory=dict)
    state: SolverState = None


def check_sorted_labels(labels):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise InvalidInputError("labels must be a 1-D sequence")
    if labels.size and np.any(np.diff(labels) < 0):
        raise InvalidInputError(
            "labels must be sorted by class; build the dataset with "
            "LabeledDataset.from_unsorted first"
        )
    return labels


def build_ideal_code(labels, atoms_per_class):
    """Block-diagonal ideal code: column i holds p_L on the atoms of class L."""
    labels = check_sorted_labels(labels).astype(int)
    atoms_per_class = np.asarray(atoms_per_class, dtype=int)
    C = len(atoms_per_class)
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise InvalidInputError(f"labels must lie in [0, {C})")
    counts = np.bincount(labels, minlength=C)
    if not np.array_equal(counts, atoms_per_class):
        raise InvalidConfigurationError(
            f"atoms per class {atoms_per_class.tolist()} must equal samples per class {counts.tolist()}"
        )
    atom_labels = np.repeat(np.arange(C), atoms_per_class)
    same = atom_labels[:, None] == labels[None, :]
    Q = np.where(same, counts[labels][None, :], 0).astype(float)
    return IdealCode(Q=Q, per_class_counts=tuple(int(c) for c in counts))


def _check_mu(state):
    if not state.mu > 0:
        raise InvalidStateError(f"penalty mu must be positive, got {state.mu}")


def _coupling_terms(Z, Q, Z_other, alpha):
    """Gradient of ``alpha ||Z Z_o^T - Q||_F^2`` and its Lipschitz constant."""
    if alpha == 0 or Z_other is None or np.size(Z_other) == 0:
        return None, 0.0
    Q = Q.Q if isinstance(Q, IdealCode) else np.asarray(Q)
    grad = 2.0 * alpha * (Z @ Z_other.T - Q) @ Z_other
    lip = 2.0 * alpha * spectral_norm(Z_other) ** 2 if np.any(Z_other) else 0.0
    return grad, lip


def update_Z(state, D, X, Q, Z_other, h):
    """One linearized proximal step on the nuclear norm.

    The smooth part is the augmented-Lagrangian quadratic (curvature bounded
    by ``eta * mu``) plus the cross-modal coupling. The step length is the
    inverse of ``eta * mu + 2 alpha ||Z_o||_2^2``, which reduces to the plain
    ``1 / (eta * mu)`` when the coupling is inactive.
    """
    _check_mu(state)
    mu, eta = state.mu, state.eta
    A = D.atoms if isinstance(D, Dictionary) else np.asarray(D)
    if A.shape[0] != X.shape[0] or A.shape[1] != state.Z.shape[0] or X.shape[1] != state.Z.shape[1]:
        raise InvalidInputError(
            f"shape mismatch: D {A.shape}, X {X.shape}, Z {state.Z.shape}"
        )
    Z = state.Z
    grad = -mu * (A.T @ (X - A @ Z - state.E + state.Y / mu)) + mu * (Z - state.W + state.M / mu)
    g_c, lip_c = _coupling_terms(Z, Q, Z_other, h.alpha)
    if g_c is not None:
        grad = grad + g_c
    step = eta * mu + lip_c
    if not np.all(np.isfinite(grad)) or step <= 0:
        raise NumericalFailureError(
            "non-finite gradient in Z update",
            {"iter": state.iter, "mu": mu, "eta": eta, "Z": Z.copy(), "E": state.E.copy()},
        )
    return svt(Z - grad / step, 1.0 / step)


def update_W(state, h):
    _check_mu(state)
    return soft_threshold(state.Z + state.M / state.mu, h.beta / state.mu)


def update_E(state, D, X, h):
    _check_mu(state)
    A = D.atoms if isinstance(D, Dictionary) else np.asarray(D)
    return soft_threshold(state.Y / state.mu + X - A @ state.Z, h.lam / state.mu)


def update_multipliers_and_penalty(state, D, X, h):
    A = D.atoms if isinstance(D, Dictionary) else np.asarray(D)
    if X.shape != state.E.shape or state.Z.shape != state.W.shape:
        raise InvalidInputError("multiplier update received inconsistent shapes")
    state.Y = state.Y + state.mu * (X - A @ state.Z - state.E)
    state.M = state.M + state.mu * (state.Z - state.W)
    state.mu = min(h.rho * state.mu, h.mu_max)
    state.iter += 1
    return state


def residuals(state, D, X):
    A = D.atoms if isinstance(D, Dictionary) else np.asarray(D)
    feas = X - A @ state.Z - state.E
    zw = state.Z - state.W
    r_feas = float(np.max(np.abs(feas))) if feas.size else 0.0
    r_zw = float(np.max(np.abs(zw))) if zw.size else 0.0
    return r_feas, r_zw


def coding_converged(state, D, X, h):
    r_feas, r_zw = residuals(state, D, X)
    return r_feas < h.eps_solver and r_zw < h.eps_solver


def solve_coding(X, D, Q, Z_other, h):
    """Run the LADMAP loop from the all-zero iterate.

    Returns the converged iterate, or the iterate with the smallest
    stopping residual flagged ``converged=False`` when the cap is hit.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != D.atoms.shape[0]:
        raise InvalidInputError(f"X must be d x n with d={D.atoms.shape[0]}, got {X.shape}")
    if h.alpha > 0 and (Z_other is None or np.size(Z_other) == 0):
        raise InvalidConfigurationError("alpha > 0 requires the other modality's codes")
    if h.alpha > 0:
        Z_other = np.asarray(Z_other, dtype=float)
        if Z_other.shape[1] != X.shape[1] or Q is None:
            raise InvalidInputError("coupling needs Z_other with matching columns and an ideal code")
    else:
        Z_other = None

    state = SolverState.zeros(D, X, h)
    hist = {"feas": [], "zw": [], "mu": []}
    best = None
    best_res = np.inf
    converged = False
    for _ in range(h.max_inner_iters):
        state.Z = update_Z(state, D, X, Q, Z_other, h)
        state.W = update_W(state, h)
        state.E = update_E(state, D, X, h)
        r_feas, r_zw = residuals(state, D, X)
        hist["feas"].append(r_feas)
        hist["zw"].append(r_zw)
        hist["mu"].append(state.mu)
        update_multipliers_and_penalty(state, D, X, h)
        if not (np.isfinite(r_feas) and np.isfinite(r_zw)):
            raise NumericalFailureError("coding iterate diverged", {"history": hist, "iter": state.iter})
        if r_feas < h.eps_solver and r_zw < h.eps_solver:
            converged = True
            break
        res = max(r_feas, r_zw)
        if res < best_res:
            best_res = res
            best = (state.Z.copy(), state.E.copy())
    if converged or best is None:
        Z, E = state.Z, state.E
    else:
        Z, E = best
    return CodingResult(Z=Z, E=E, converged=converged, iterations=state.iter, history=hist, state=state)


def dictionary_update_target(D, state, X):
    """Closed-form minimizer over D of the quadratic coding term.

    ``(Y/mu + X - E) Z^T (Z Z^T)^{-1}`` with a small Tikhonov floor when the
    Gram matrix is badly conditioned.
    """
    Z = state.Z
    G = Z @ Z.T
    tr = float(np.trace(G))
    if tr == 0 or not np.isfinite(tr):
        dead = [c for c in range(D.n_classes) if not np.any(Z[D.block(c)])]
        raise NumericalFailureError(
            f"Z Z^T is singular: codes vanish on class blocks {dead}",
            {"dead_class_blocks": dead, "trace": tr},
        )
    if np.linalg.cond(G) > TIKHONOV_COND:
        G = G + (TIKHONOV_SCALE * tr / G.shape[0]) * np.eye(G.shape[0])
    B = state.Y / state.mu + X - state.E
    try:
        return np.linalg.solve(G, Z @ B.T).T
    except np.linalg.LinAlgError as exc:
        dead = [c for c in range(D.n_classes) if not np.any(Z[D.block(c)])]
        raise NumericalFailureError(
            f"dictionary normal equations failed (class blocks with no energy: {dead})",
            {"dead_class_blocks": dead},
        ) from exc


def update_dictionary(D, state, X, h):
    """Damped dictionary refit followed by atom renormalization.

    ``state.Z`` and ``state.W`` rows are rescaled in place so that the
    product of the undamped-normalized dictionary and the codes is kept.
    Atoms that receive no update keep their previous direction.
    """
    if h.gamma == 1.0:
        return D
    target = dictionary_update_target(D, state, X)
    mixed = h.gamma * D.atoms + (1.0 - h.gamma) * target
    norms = np.linalg.norm(mixed, axis=0)
    dead = norms <= 1e-12 * max(1.0, float(norms.max(initial=0.0)))
    mixed[:, dead] = D.atoms[:, dead]
    norms[dead] = 1.0
    state.Z = state.Z * norms[:, None]
    state.W = state.W * norms[:, None]
    return Dictionary(mixed / norms, D.class_offsets)


def dictionary_converged(D_new, D_old, h):
    a = D_new.atoms if isinstance(D_new, Dictionary) else np.asarray(D_new)
    b = D_old.atoms if isinstance(D_old, Dictionary) else np.asarray(D_old)
    if a.shape != b.shape:
        raise InvalidInputError(f"dictionary shapes differ: {a.shape} vs {b.shape}")
    return bool(np.max(np.abs(a - b), initial=0.0) < h.eps_dict)


def refine_dictionary(D, state, X, h):
    """Repeat the damped update until successive dictionaries agree."""
    for it in range(1, h.max_dict_iters + 1):
        D_new = update_dictionary(D, state, X, h)
        done = dictionary_converged(D_new, D, h)
        D = D_new
        if done:
            return D, it, True
    return D, h.max_dict_iters, False
