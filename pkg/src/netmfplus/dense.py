"""Small dense kernels used by the randomized factorizations."""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as la

from .errors import InputError, RankDeficiencyError

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12


def eig_svd(Y: np.ndarray, rank_tol: float = RANK_TOL):
    """Economy SVD of a tall matrix through the eigendecomposition of Y^T Y.

    Returns ``(Q, S, V)`` with ``Y = Q @ diag(S) @ V.T``, ``S`` nonincreasing.
    Much cheaper than QR when n >> l, but squares the condition number, so a
    Gram eigenvalue below ``rank_tol * max`` raises RankDeficiencyError;
    callers should switch to :func:`qr_orth` in that case.
    """
    Y = np.asarray(Y, dtype=np.float64)
    n, l = Y.shape
    if n < l:
        raise InputError(f"eig_svd needs a tall matrix, got {n}x{l}")
    B = Y.T @ Y
    B = (B + B.T) * 0.5
    w, V = la.eigh(B)
    w, V = w[::-1], V[:, ::-1]
    if w[0] <= 0 or w[-1] <= rank_tol * w[0]:
        raise RankDeficiencyError(
            f"eig_svd input is numerically rank deficient (min/max Gram eigenvalue "
            f"{w[-1]:.3e}/{w[0]:.3e}); use QR orthonormalization instead")
    S = np.sqrt(w)
    Q = (Y @ V) / S
    return Q, S, V


def qr_orth(Y: np.ndarray) -> np.ndarray:
    """Householder-QR orthonormal basis with Y's column count."""
    Q, _ = np.linalg.qr(np.asarray(Y, dtype=np.float64), mode="reduced")
    return Q


def orthonormalize(Y: np.ndarray, *, fallback: bool = True) -> np.ndarray:
    """Orthonormal basis for range(Y) via eig_svd, falling back to QR.

    A second eig_svd pass restores orthogonality lost to the squared
    condition number when Y is badly conditioned but still full rank.
    """
    try:
        Q, S, _ = eig_svd(Y)
    except RankDeficiencyError:
        if not fallback:
            raise
        logger.warning("eig_svd rank deficiency; falling back to QR orthonormalization")
        return qr_orth(Y)
    if S[0] > 1e4 * S[-1]:
        Q, _, _ = eig_svd(Q)
    return Q


def sym_eig(S: np.ndarray, sym_tol: float = 1e-8):
    """Eigendecomposition of a symmetric matrix, ordered by descending |lambda|.

    Ties in magnitude go to the larger signed value first.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InputError("sym_eig needs a square matrix")
    scale = max(np.abs(S).max(), 1.0)
    if np.abs(S - S.T).max() > sym_tol * scale:
        raise InputError("sym_eig input is not symmetric")
    w, U = la.eigh((S + S.T) * 0.5)
    top = max(np.abs(w).max(), np.finfo(float).tiny)
    mag = np.round(np.abs(w) / top, 12)
    order = np.lexsort((-w, -mag))
    return U[:, order], w[order]


def small_svd(S: np.ndarray):
    S = np.asarray(S, dtype=np.float64)
    if not np.all(np.isfinite(S)):
        raise InputError("small_svd input has non-finite entries")
    U, sig, Vt = la.svd(S, full_matrices=False, lapack_driver="gesdd")
    return U, sig, Vt.T


def core_solve(PtQ: np.ndarray, Z: np.ndarray, rank_tol: float = 1e-10) -> np.ndarray:
    """Least-squares core ``S = (PtQ)^+ Z (PtQ^T)^+``, symmetrized.

    Solved in two passes through one QR factorization of PtQ: first
    ``PtQ W = Z`` for W (h x y), then ``PtQ S^T = W^T``.
    """
    PtQ = np.asarray(PtQ, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    y, h = PtQ.shape
    if Z.shape != (y, y):
        raise InputError(f"core matrix must be {y}x{y}, got {Z.shape}")
    if y < h:
        raise InputError(f"core_solve needs at least {h} sketch rows, got {y}")
    Qr, R = np.linalg.qr(PtQ, mode="reduced")
    diag = np.abs(np.diag(R))
    if diag.min() <= rank_tol * diag.max():
        raise RankDeficiencyError("sampled basis is rank deficient: increase s3 or reduce d")
    W = la.solve_triangular(R, Qr.T @ Z)          # h x y
    St = la.solve_triangular(R, Qr.T @ W.T)       # h x h, equals S^T
    return (St + St.T) * 0.5
