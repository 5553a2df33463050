"""Proximal and spectral primitives used by every solver in the package."""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, NumericalFailureError

RANK_FLOOR = 1e-12


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def rank(self, rel_tol=RANK_FLOOR):
        if self.S.size == 0 or self.S[0] == 0:
            return 0
        return int(np.count_nonzero(self.S > rel_tol * self.S[0]))

    def reconstruct(self):
        return (self.U * self.S) @ self.V.T


def _as_finite_matrix(M, name="M"):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[None, :]
    if M.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return M


def _check_tau(tau):
    if not np.isfinite(tau) or tau < 0:
        raise InvalidParameterError(f"threshold must be a finite non-negative scalar, got {tau!r}")


def soft_threshold(M, tau):
    """Entrywise shrinkage ``sign(m) * max(|m| - tau, 0)``.

    >>> soft_threshold(np.array([[-3.0, 2.0]]), 1.0)
    array([[-2.,  1.]])
    """
    _check_tau(tau)
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("soft_threshold input contains non-finite entries")
    if tau == 0:
        return M.copy()
    return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0)


def thin_svd(M):
    M = _as_finite_matrix(M)
    d, n = M.shape
    r = min(d, n)
    if r == 0:
        return SvdFactors(np.zeros((d, 0)), np.zeros(0), np.zeros((n, 0)))
    try:
        U, S, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        # gesdd occasionally fails where the slower gesvd succeeds
        try:
            import scipy.linalg

            U, S, Vt = scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc2:
            raise NumericalFailureError(
                "SVD did not converge",
                {"shape": M.shape, "gesdd": str(exc), "gesvd": str(exc2)},
            ) from exc2
    return SvdFactors(U, S, Vt.T)


def svt(M, tau):
    """Singular value thresholding, the proximal map of ``tau * ||.||_*``."""
    _check_tau(tau)
    f = thin_svd(M)
    s = np.maximum(f.S - tau, 0.0)
    keep = s > 0
    if not np.any(keep):
        return np.zeros(np.shape(M) if np.ndim(M) == 2 else (1, np.size(M)))
    return (f.U[:, keep] * s[keep]) @ f.V[:, keep].T


def spectral_norm(M):
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        raise InvalidInputError("spectral norm of an empty matrix is undefined")
    f = thin_svd(M)
    return float(f.S[0])


def nuclear_norm(M):
    return float(np.sum(thin_svd(M).S))
