"""Fast randomized eigendecomposition of the degree-scaled adjacency D^-a A D^-a."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import make_rng
from .dense import orthonormalize, sym_eig
from .errors import InputError, RankDeficiencyError
from .graph import CsrGraph, spmm_modified_laplacian


@dataclass(frozen=True)
class EigenPair:
    U: np.ndarray        # n x k, orthonormal columns
    eigenvalues: np.ndarray  # length k, descending |lambda|
    alpha: float
    k: int
    s1: int
    q: int
    seed: int


def freigs(g: CsrGraph, alpha: float, k: int, s1: int = 10, q: int = 10,
           seed: int = 0, *, strict: bool = False) -> EigenPair:
    """Top-k eigenpairs of X = D^-alpha A D^-alpha by randomized sketching.

    Sketch X with an n x (k+s1) Gaussian matrix, run ``q`` passes of
    ``Q <- orth(X X Q)``, then solve the small Rayleigh-Ritz problem
    ``Q^T X Q``. X is only ever applied matrix-free.

    With ``strict=True`` an eig_svd rank failure is raised instead of being
    handled by the QR fallback.
    """
    if k < 1:
        raise InputError("k must be at least 1")
    if s1 < 0 or q < 0:
        raise InputError("s1 and q must be nonnegative")
    l = k + s1
    if l > g.n:
        raise InputError(f"k + s1 = {l} exceeds the vertex count {g.n}")

    def X(M):
        return spmm_modified_laplacian(g, alpha, M)

    def orth(M, where):
        try:
            return orthonormalize(M, fallback=not strict)
        except RankDeficiencyError as exc:
            raise RankDeficiencyError(f"freigs {where}: {exc}") from exc

    rng = make_rng(seed)
    omega = rng.standard_normal((g.n, l))
    Q = orth(X(omega), "initial sketch")
    for i in range(q):
        Q = orth(X(X(Q)), f"power iteration {i + 1}")
    S = Q.T @ X(Q)
    S = (S + S.T) * 0.5
    Uh, lam = sym_eig(S)
    U = Q @ Uh[:, :k]
    return EigenPair(U=U, eigenvalues=lam[:k].copy(), alpha=alpha, k=k, s1=s1, q=q, seed=seed)


def dense_modified_laplacian(g: CsrGraph, alpha: float) -> np.ndarray:
    A = g.dense_adjacency()
    dpow = g.degrees.astype(np.float64) ** (-alpha)
    return dpow[:, None] * A * dpow[None, :]


DENSE_LIMIT = 2000


def approximation_error(g: CsrGraph, pair: EigenPair) -> tuple[float, float]:
    """Frobenius error of the rescaled low-rank model and the spectral tail.

    ``lhs = ||D^-1/2 A D^-1/2 - D^(a-1/2) U L U^T D^(a-1/2)||_F`` and
    ``tail = sqrt(sum_{j>k} lambda_j^2)`` over the full spectrum of
    D^-a A D^-a, both from dense matrices.
    """
    if g.n > DENSE_LIMIT:
        raise InputError(f"dense construction limited to n <= {DENSE_LIMIT}")
    if pair.k < 1:
        raise InputError("k must be at least 1")
    a = pair.alpha
    d = g.degrees.astype(np.float64)
    N = dense_modified_laplacian(g, 0.5)
    W = (d ** (a - 0.5))[:, None] * pair.U
    lhs = float(np.linalg.norm(N - (W * pair.eigenvalues) @ W.T))
    lam = np.linalg.eigvalsh(dense_modified_laplacian(g, a))
    mag = np.sort(np.abs(lam))[::-1]
    tail = float(np.sqrt(np.sum(mag[pair.k:] ** 2)))
    return lhs, tail


def residual(g: CsrGraph, pair: EigenPair) -> float:
    """||X U - U diag(L)||_F / ||L||_2."""
    R = spmm_modified_laplacian(g, pair.alpha, pair.U) - pair.U * pair.eigenvalues
    return float(np.linalg.norm(R) / np.linalg.norm(pair.eigenvalues))


__all__ = ["EigenPair", "freigs", "approximation_error", "residual",
           "dense_modified_laplacian"]
