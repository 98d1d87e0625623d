"""Dense reference constructions for desk-scale verification.

Everything here builds n x n matrices and is meant for tests, acceptance
runs and the ``oracle`` CLI command only.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import eigsh

from ._rng import make_rng
from .errors import InputError
from .freigs import EigenPair
from .graph import CsrGraph, volume
from .sketch import TRUNC_LOG, FactorPair, elementwise_log

DENSE_BUDGET = 12000


def _check_budget(n: int) -> None:
    if n > DENSE_BUDGET:
        raise InputError(f"dense oracle limited to n <= {DENSE_BUDGET}, got {n}")


def dense_netmf_oracle(g: CsrGraph, T: int = 10, b: float = 1.0, *, exact: bool = True,
                       pair: EigenPair | None = None, logmode: str = TRUNC_LOG) -> np.ndarray:
    """NetMF matrix logmode(vol/(bT) * sum_{r=1..T} (D^-1 A)^r D^-1).

    With ``exact=False`` the random-walk sum is replaced by its low-rank model
    built from ``pair``: D^(a-1) U L (sum_r K^(r-1)) U^T D^(a-1).
    """
    _check_budget(g.n)
    d = g.degrees.astype(np.float64)
    scale = volume(g) / (b * T)
    if exact:
        P = g.dense_adjacency() / d[:, None]
        # Horner: S = P (I + P (I + ...)), T factors of P
        S = P.copy()
        for _ in range(T - 1):
            S[np.diag_indices_from(S)] += 1.0
            S = P @ S
        M = S / d[None, :]
    else:
        if pair is None:
            raise InputError("exact=False needs an EigenPair")
        a = pair.alpha
        N = (d ** (a - 0.5))[:, None] * pair.U
        low = (N * pair.eigenvalues) @ N.T            # approximates D^-1/2 A D^-1/2
        acc = np.zeros_like(low)
        power = np.eye(g.n)
        for _ in range(T):
            power = power @ low
            acc += power
        M = acc / np.sqrt(d)[:, None] / np.sqrt(d)[None, :]
    M = (M + M.T) * 0.5
    return elementwise_log(scale * M, logmode)


def dense_factor_matrix(fp: FactorPair) -> np.ndarray:
    _check_budget(fp.n)
    M = fp.F @ fp.C @ fp.F.T
    return elementwise_log(fp.scale * ((M + M.T) * 0.5), fp.logmode)


def exact_truncated_svd(M: np.ndarray, d: int):
    """Top-d singular triplets of a dense symmetric matrix via its |eigenvalues|."""
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    if d >= n - 1 or n <= 600:
        w, V = la.eigh(M)
    else:
        w, V = eigsh(M, k=d, which="LM")
    order = np.argsort(-np.abs(w))[:d]
    w, V = w[order], V[:, order]
    return V, np.abs(w), V * np.sign(np.where(w == 0, 1.0, w))


def exact_embedding(M: np.ndarray, d: int) -> np.ndarray:
    U, sig, _ = exact_truncated_svd(M, d)
    return U * np.sqrt(sig)[None, :]


def best_rank_error(M: np.ndarray, r: int) -> float:
    """||M - M_r||_F for the optimal rank-r approximation."""
    s = la.svdvals(M)
    return float(np.sqrt(np.sum(s[r:] ** 2)))


def basic_randomized_svd(X: np.ndarray, k: int, q: int = 2, s: int = 10, seed: int = 0):
    """Textbook Gaussian-sketch randomized SVD with QR-stabilized power iterations."""
    X = np.asarray(X, dtype=np.float64)
    m, n = X.shape
    if k + s > min(m, n):
        raise InputError("k + s exceeds the matrix dimensions")
    rng = make_rng(seed)
    Q, _ = np.linalg.qr(X @ rng.standard_normal((n, k + s)))
    for _ in range(q):
        G, _ = np.linalg.qr(X.T @ Q)
        Q, _ = np.linalg.qr(X @ G)
    Uh, sig, Vt = la.svd(Q.T @ X, full_matrices=False)
    return Q @ Uh[:, :k], sig[:k], Vt[:k].T
