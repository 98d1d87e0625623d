"""Sparse-sign test matrices and the implicit sketches of trunc_log(scale * F C F^T).

The n x n target is never formed: products are evaluated on row batches
against the rows of F selected by the test matrix's support.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from ._rng import make_rng
from .errors import InputError, ResourceLimitError
from .freigs import EigenPair
from .graph import CsrGraph, volume

logger = logging.getLogger(__name__)

TRUNC_LOG = "trunc_log"
LOG1P = "log1p"
LOG_MODES = (TRUNC_LOG, LOG1P)

DEFAULT_BATCH_ROWS = 4096
DEFAULT_MAX_BLOCK_BYTES = 2 << 30
_LOG1P_FLOOR = -1.0 + 1e-12


@dataclass(frozen=True)
class SparseSignMatrix:
    """Column-compressed n x h matrix with exactly z entries of +-1 per column."""

    n: int
    h: int
    z: int
    rows: np.ndarray   # h x z, distinct within a column
    signs: np.ndarray  # h x z, entries in {-1, +1}
    p: np.ndarray      # sorted unique union of all rows

    @property
    def v(self) -> int:
        return int(self.p.size)

    def positions(self) -> np.ndarray:
        """Index of every stored row inside ``p`` (h x z)."""
        return np.searchsorted(self.p, self.rows)

    def toarray(self) -> np.ndarray:
        out = np.zeros((self.n, self.h))
        cols = np.repeat(np.arange(self.h), self.z)
        out[self.rows.ravel(), cols] = self.signs.ravel()
        return out


def gen_sparse_sign(n: int, h: int, z: int, seed) -> SparseSignMatrix:
    if h < 1:
        raise InputError("h must be at least 1")
    if z < 2 or z > n:
        raise InputError(f"column sparsity z must satisfy 2 <= z <= n, got z={z}, n={n}")
    rng = make_rng(seed)
    rows = np.empty((h, z), dtype=np.int64)
    for j in range(h):
        rows[j] = rng.choice(n, size=z, replace=False)
    signs = np.where(rng.random((h, z)) < 0.5, -1.0, 1.0)
    return SparseSignMatrix(n=n, h=h, z=z, rows=rows, signs=signs, p=np.unique(rows))


def elementwise_log(x, mode: str = TRUNC_LOG):
    """trunc_log: max(0, ln x) with nonpositive x mapped to 0; log1p: ln(1 + x).

    log1p arguments at or below -1 are clamped to -1 + 1e-12 with a warning
    reporting how many entries were affected.
    """
    arr = np.asarray(x, dtype=np.float64)
    if mode == TRUNC_LOG:
        out = np.log(np.maximum(arr, 1.0))
    elif mode == LOG1P:
        bad = arr <= -1.0
        nbad = int(np.count_nonzero(bad))
        if nbad:
            warnings.warn(f"log1p: clamped {nbad} arguments <= -1", RuntimeWarning, stacklevel=2)
            arr = np.where(bad, _LOG1P_FLOOR, arr)
        out = np.log1p(arr)
    else:
        raise InputError(f"unknown log mode {mode!r}; expected one of {LOG_MODES}")
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class FactorPair:
    """Implicit target trunc_log(scale * F C F^T)."""

    F: np.ndarray
    C: np.ndarray
    scale: float
    logmode: str = TRUNC_LOG

    @property
    def n(self) -> int:
        return self.F.shape[0]


def build_factor_pair(g: CsrGraph, pair: EigenPair, T: int, b: float = 1.0,
                      logmode: str = TRUNC_LOG) -> FactorPair:
    """F = D^(a-1) U and C = L * sum_{r<T} K^r with K = U^T D^(2a-1) U L."""
    if T < 1 or b <= 0:
        raise InputError("T must be >= 1 and b > 0")
    if logmode not in LOG_MODES:
        raise InputError(f"unknown log mode {logmode!r}")
    a = pair.alpha
    d = g.degrees.astype(np.float64)
    U, lam = pair.U, pair.eigenvalues
    K = (U.T @ ((d ** (2 * a - 1))[:, None] * U)) * lam[None, :]
    k = lam.size
    eye = np.eye(k)
    acc = eye.copy()
    for _ in range(T - 1):  # Horner: I + K (I + K (...))
        acc = eye + K @ acc
    C = lam[:, None] * acc
    C = (C + C.T) * 0.5
    if not np.all(np.isfinite(C)):
        raise InputError("factor core has non-finite entries")
    F = (d ** (a - 1))[:, None] * U
    return FactorPair(F=F, C=C, scale=volume(g) / (b * T), logmode=logmode)


def _apply_sign_cols(G: np.ndarray, pos: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """G @ Psi_p where Psi_p is given by per-column positions and signs."""
    out = G[:, pos[:, 0]] * signs[:, 0]
    for t in range(1, pos.shape[1]):
        out += G[:, pos[:, t]] * signs[:, t]
    return out


def sketch_y(fp: FactorPair, psi: SparseSignMatrix,
             batch_rows: int = DEFAULT_BATCH_ROWS) -> np.ndarray:
    """Y = logmode(scale * F C F[p]^T) @ Psi, evaluated batch_rows rows at a time."""
    if psi.n != fp.n:
        raise InputError(f"test matrix has {psi.n} rows, factor has {fp.n}")
    if batch_rows < 1:
        raise InputError("batch_rows must be positive")
    Fp_t = np.ascontiguousarray(fp.F[psi.p].T)   # k x v
    CFp_t = fp.C @ Fp_t
    pos, signs = psi.positions(), psi.signs
    Y = np.empty((fp.n, psi.h))
    for start in range(0, fp.n, batch_rows):
        stop = min(start + batch_rows, fp.n)
        G = fp.F[start:stop] @ CFp_t
        G = elementwise_log(fp.scale * G, fp.logmode)
        Y[start:stop] = _apply_sign_cols(G, pos, signs)
    return Y


def sketch_z(fp: FactorPair, pi: SparseSignMatrix,
             max_block_bytes: int = DEFAULT_MAX_BLOCK_BYTES) -> np.ndarray:
    """Z = Pi^T logmode(scale * F C F^T) Pi using only the sampled v x v block."""
    if pi.n != fp.n:
        raise InputError(f"test matrix has {pi.n} rows, factor has {fp.n}")
    need = 8 * pi.v * pi.v
    if need > max_block_bytes:
        raise ResourceLimitError(
            f"sampled block needs {need / 2**20:.0f} MiB (v={pi.v}), ceiling is "
            f"{max_block_bytes / 2**20:.0f} MiB; use a smaller s3 or z")
    Fp = fp.F[pi.p]
    B = (Fp @ fp.C) @ Fp.T
    B = elementwise_log(fp.scale * ((B + B.T) * 0.5), fp.logmode)
    pos, signs = pi.positions(), pi.signs
    BP = _apply_sign_cols(B, pos, signs)          # v x y
    Z = _apply_sign_cols(np.ascontiguousarray(BP.T), pos, signs)  # y x y
    return (Z + Z.T) * 0.5


def estimate_sketch_bytes(n: int, k: int, h: int, z: int, batch_rows: int) -> int:
    """Rough peak working set of sketch_y in bytes."""
    v = min(n, z * h)
    return 8 * (min(batch_rows, n) * (v + h) + n * h + k * v)


__all__ = ["SparseSignMatrix", "FactorPair", "gen_sparse_sign", "build_factor_pair",
           "sketch_y", "sketch_z", "elementwise_log", "TRUNC_LOG", "LOG1P",
           "estimate_sketch_bytes"]
