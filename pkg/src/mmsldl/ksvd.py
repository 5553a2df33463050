"""Per-class KSVD used to initialize the dictionaries."""
import numpy as np

from .errors import InvalidInputError
from .slrdl import Dictionary


def omp_sparse_code(D, x, sparsity):
    """Orthogonal matching pursuit with a least-squares refit at every step."""
    A = D.atoms if isinstance(D, Dictionary) else np.asarray(D, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    n_atoms = A.shape[1]
    if sparsity < 1 or sparsity > n_atoms:
        raise InvalidInputError(f"sparsity must lie in [1, {n_atoms}], got {sparsity}")
    coef = np.zeros(n_atoms)
    scale = np.linalg.norm(x)
    if scale == 0:
        return coef
    active = []
    residual = x.copy()
    sol = np.zeros(0)
    for _ in range(sparsity):
        corr = np.abs(A.T @ residual)
        corr[active] = -1.0
        k = int(np.argmax(corr))
        if corr[k] <= 1e-12 * scale:
            break
        active.append(k)
        sol, *_ = np.linalg.lstsq(A[:, active], x, rcond=None)
        residual = x - A[:, active] @ sol
        if np.linalg.norm(residual) <= 1e-12 * scale:
            break
    coef[active] = sol
    return coef


def _initial_atoms(X, k):
    d, p = X.shape
    norms = np.linalg.norm(X, axis=0)
    atoms = np.zeros((d, k))
    for j in range(k):
        if norms[j] > 0:
            atoms[:, j] = X[:, j] / norms[j]
        else:
            atoms[j % d, j] = 1.0
    return atoms


def ksvd_class(X, n_atoms, sparsity, iters):
    """KSVD on one class block.

    Returns ``(atoms, trace)`` where ``trace[t]`` is the total squared
    reconstruction error after round ``t`` (``trace[0]`` is the initial
    error). A new OMP code is only accepted for a sample if it does not
    increase that sample's error, which keeps the trace non-increasing.
    """
    X = np.asarray(X, dtype=float)
    d, p = X.shape
    if p == 0:
        raise InvalidInputError("KSVD needs at least one sample per class")
    if n_atoms > p:
        raise InvalidInputError(f"cannot allocate {n_atoms} atoms from {p} samples")
    sparsity = int(min(sparsity, n_atoms))
    Dk = _initial_atoms(X, n_atoms)
    codes = np.column_stack([omp_sparse_code(Dk, X[:, i], sparsity) for i in range(p)])
    trace = [float(np.sum((X - Dk @ codes) ** 2))]
    for _ in range(iters):
        for i in range(p):
            new = omp_sparse_code(Dk, X[:, i], sparsity)
            if np.sum((X[:, i] - Dk @ new) ** 2) <= np.sum((X[:, i] - Dk @ codes[:, i]) ** 2):
                codes[:, i] = new
        for k in range(n_atoms):
            users = np.flatnonzero(codes[k])
            if users.size == 0:
                # unused atom: swap in the worst represented sample
                err = np.sum((X - Dk @ codes) ** 2, axis=0)
                worst = int(np.argmax(err))
                if err[worst] > 0:
                    r = X[:, worst] - Dk @ codes[:, worst]
                    Dk[:, k] = r / np.linalg.norm(r)
                continue
            R = X[:, users] - Dk @ codes[:, users] + np.outer(Dk[:, k], codes[k, users])
            U, S, Vt = np.linalg.svd(R, full_matrices=False)
            if S[0] == 0:
                continue
            Dk[:, k] = U[:, 0]
            codes[k, users] = S[0] * Vt[0]
        trace.append(float(np.sum((X - Dk @ codes) ** 2)))
    return Dk, trace


def default_sparsity(atoms_per_class):
    atoms_per_class = np.asarray(atoms_per_class)
    return int(max(1, min(10, atoms_per_class.sum() // len(atoms_per_class))))


def ksvd_init(X_per_class, atoms_per_class, sparsity=None, iters=10):
    if len(X_per_class) != len(atoms_per_class):
        raise InvalidInputError("need one atom count per class")
    if sparsity is None:
        sparsity = default_sparsity(atoms_per_class)
    blocks = []
    for c, (Xc, k) in enumerate(zip(X_per_class, atoms_per_class)):
        if np.asarray(Xc).ndim != 2 or np.asarray(Xc).shape[1] == 0:
            raise InvalidInputError(f"class {c} has no samples")
        Dk, _ = ksvd_class(Xc, int(k), sparsity, iters)
        blocks.append(Dk)
    return Dictionary.from_blocks(blocks)
