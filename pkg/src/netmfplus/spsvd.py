"""Single-pass randomized SVD of the implicit NetMF matrix with sparse-sign sketches."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._rng import child_seeds
from .dense import core_solve, orthonormalize, small_svd
from .errors import InputError
from .sketch import (DEFAULT_BATCH_ROWS, DEFAULT_MAX_BLOCK_BYTES, FactorPair,
                     gen_sparse_sign, sketch_y, sketch_z)

logger = logging.getLogger(__name__)

# singular values below this fraction of the largest are treated as zero
SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray
    Sigma: np.ndarray
    V: np.ndarray
    # intermediate range basis and core, kept for diagnostics
    Q: np.ndarray | None = None
    S: np.ndarray | None = None


def single_pass_svd(fp: FactorPair, d: int, s2: int, s3: int, z: int = 8, seed: int = 0,
                    *, batch_rows: int = DEFAULT_BATCH_ROWS,
                    max_block_bytes: int = DEFAULT_MAX_BLOCK_BYTES) -> SvdResult:
    """Rank-d SVD of trunc_log(scale * F C F^T) touching the target once.

    The range sketch ``Y = M Psi`` gives the basis ``Q``; the core sketch
    ``Z = Pi^T M Pi`` is solved for ``S ~ Q^T M Q`` by least squares, and the
    SVD of the small ``S`` is lifted back through ``Q``.
    """
    n = fp.n
    if d < 1:
        raise InputError("d must be at least 1")
    if s2 < 0 or s3 < s2:
        raise InputError(f"need 0 <= s2 <= s3, got s2={s2}, s3={s3}")
    h1, h2 = d + s2, d + s3
    if h1 > n:
        raise InputError(f"d + s2 = {h1} exceeds n = {n}")
    z = min(z, n)
    psi_seed, pi_seed = child_seeds(seed, 2)
    psi = gen_sparse_sign(n, h1, z, psi_seed)
    Y = sketch_y(fp, psi, batch_rows)
    Q = orthonormalize(Y)
    pi = gen_sparse_sign(n, h2, z, pi_seed)
    Z = sketch_z(fp, pi, max_block_bytes)
    PtQ = _sparse_sign_transpose_times(pi, Q)
    S = core_solve(PtQ, Z)
    Uh, sig, Vh = small_svd(S)
    return SvdResult(U=Q @ Uh[:, :d], Sigma=sig[:d].copy(), V=Q @ Vh[:, :d], Q=Q, S=S)


def _sparse_sign_transpose_times(pi, Q: np.ndarray) -> np.ndarray:
    """Pi^T Q (h x l)."""
    out = Q[pi.rows[:, 0]] * pi.signs[:, :1]
    for t in range(1, pi.z):
        out += Q[pi.rows[:, t]] * pi.signs[:, t : t + 1]
    return out


def embedding_from_svd(r: SvdResult) -> np.ndarray:
    """E = U sqrt(Sigma)."""
    sig = np.asarray(r.Sigma, dtype=np.float64)
    if sig.size and np.any(sig < 0):
        raise InputError("singular values must be nonnegative")
    top = sig.max() if sig.size else 0.0
    sig = np.where(sig < SIGMA_FLOOR * top, 0.0, sig)
    return r.U * np.sqrt(sig)[None, :]
