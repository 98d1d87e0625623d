"""Undirected simple graphs in CSR form and matrix-free products with them."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._rng import make_rng
from .errors import GraphFormatError, InputError

logger = logging.getLogger(__name__)

# prefer OpenMP / workqueue; probing an outdated TBB only produces warnings
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

CSR_MAGIC = b"NMFP"
# version 1: 32-bit neighbor ids, version 2: 64-bit neighbor ids
CSR_VERSION_ID32 = 1
CSR_VERSION_ID64 = 2

_parallel = True


def set_parallel(enabled: bool) -> None:
    """Toggle the row-parallel SPMM kernels (sequential mode when False)."""
    global _parallel
    _parallel = bool(enabled)


@dataclass(frozen=True)
class CsrGraph:
    n: int
    m: int
    offsets: np.ndarray
    neighbors: np.ndarray
    degrees: np.ndarray
    # new_id -> original vertex id in the source file
    vmap: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in ("offsets", "neighbors", "degrees"):
            getattr(self, name).setflags(write=False)

    def __eq__(self, other):
        # structural equality; id width and vmap are storage details
        if not isinstance(other, CsrGraph):
            return NotImplemented
        return (self.n == other.n and self.m == other.m
                and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.neighbors, other.neighbors))

    __hash__ = None

    def neighbors_of(self, u: int) -> np.ndarray:
        return self.neighbors[self.offsets[u] : self.offsets[u + 1]]

    def validate(self) -> None:
        """Check every structural invariant; raise GraphFormatError on the first violation."""
        off, nbr, deg = self.offsets, self.neighbors, self.degrees
        if off.shape != (self.n + 1,) or deg.shape != (self.n,):
            raise GraphFormatError("offsets/degrees have wrong length")
        if off[0] != 0 or off[-1] != 2 * self.m or nbr.shape != (2 * self.m,):
            raise GraphFormatError("offsets must start at 0 and end at 2m")
        if np.any(np.diff(off) < 0):
            raise GraphFormatError("offsets must be nondecreasing")
        if not np.array_equal(deg, np.diff(off)):
            raise GraphFormatError("degrees disagree with offsets")
        if np.any(deg <= 0):
            raise GraphFormatError("isolated vertex present")
        if nbr.size and (nbr.min() < 0 or nbr.max() >= self.n):
            raise GraphFormatError("neighbor id out of range")
        rows = np.repeat(np.arange(self.n), deg)
        if np.any(rows == nbr):
            raise GraphFormatError("self-loop present")
        # strictly increasing inside each row
        step = np.diff(nbr.astype(np.int64))
        same_row = rows[1:] == rows[:-1]
        if np.any(step[same_row] <= 0):
            raise GraphFormatError("neighbor lists must be strictly increasing")
        fwd = rows.astype(np.int64) * self.n + nbr
        bwd = nbr.astype(np.int64) * self.n + rows
        if not np.array_equal(np.sort(fwd), np.sort(bwd)):
            raise GraphFormatError("adjacency is not symmetric")

    def edges(self) -> np.ndarray:
        """All undirected edges as an (m, 2) array with u < v, lexicographically sorted."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        nbr = self.neighbors.astype(np.int64)
        keep = rows < nbr
        return np.stack([rows[keep], nbr[keep]], axis=1)

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(2 * self.m, dtype=np.float64)
        return sp.csr_matrix((data, self.neighbors, self.offsets), shape=(self.n, self.n))

    def dense_adjacency(self) -> np.ndarray:
        return self.adjacency().toarray()


@dataclass(frozen=True)
class EdgeSet:
    pairs: np.ndarray  # (count, 2), u < v

    def __len__(self) -> int:
        return len(self.pairs)


def from_edges(edges, n: int | None = None, *, drop_isolated: bool = True,
               id_dtype=np.int32) -> CsrGraph:
    """Build a simple undirected graph from an (E, 2) array of vertex pairs.

    Pairs are symmetrized and deduplicated, self-loops are dropped. Vertices
    left with zero degree are removed when ``drop_isolated`` is set and the
    surviving ids are compacted; ``vmap`` records the original id of each
    new vertex.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n is None:
        n = int(edges.max()) + 1 if edges.size else 0
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise InputError("edge endpoint out of range")
    u, v = edges[:, 0], edges[:, 1]
    keep = u != v
    u, v = u[keep], v[keep]
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    key = np.unique(lo * n + hi)
    lo, hi = key // n, key % n
    vmap = np.arange(n, dtype=np.int64)
    if drop_isolated:
        present = np.zeros(n, dtype=bool)
        present[lo] = True
        present[hi] = True
        if not present.all():
            dropped = int(n - present.sum())
            logger.info("dropping %d zero-degree vertices", dropped)
            new_id = np.cumsum(present) - 1
            lo, hi = new_id[lo], new_id[hi]
            vmap = vmap[present]
            n = int(present.sum())
    if lo.size == 0:
        raise GraphFormatError("graph has no edges")
    rows = np.concatenate([lo, hi])
    cols = np.concatenate([hi, lo])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    degrees = np.bincount(rows, minlength=n).astype(np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=offsets[1:])
    return CsrGraph(n=n, m=int(lo.size), offsets=offsets,
                    neighbors=cols.astype(id_dtype), degrees=degrees, vmap=vmap)


def largest_component(g: CsrGraph) -> CsrGraph:
    ncomp, label = connected_components(g.adjacency(), directed=False)
    if ncomp == 1:
        return g
    giant = np.argmax(np.bincount(label))
    keep = label == giant
    new_id = np.cumsum(keep) - 1
    e = g.edges()
    e = e[keep[e[:, 0]]]
    sub = from_edges(new_id[e], int(keep.sum()), id_dtype=g.neighbors.dtype)
    base = g.vmap if g.vmap is not None else np.arange(g.n)
    return CsrGraph(sub.n, sub.m, sub.offsets, sub.neighbors, sub.degrees, base[keep])


def load_edge_list(path, *, one_indexed: bool = False,
                   keep_largest_component: bool = False) -> CsrGraph:
    """Parse a text edge list ("u v" per line, '#'/'%' comments, commas allowed).

    Lines with a third column are rejected: weighted graphs are unsupported.
    """
    base = 1 if one_indexed else 0
    pairs = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s[0] in "#%":
                continue
            tok = s.replace(",", " ").split()
            if len(tok) != 2:
                if len(tok) > 2:
                    raise GraphFormatError(
                        f"{path}:{lineno}: weighted or multi-column edge lines are not supported")
                raise GraphFormatError(f"{path}:{lineno}: expected 'u v', got {s!r}")
            try:
                a, b = int(tok[0]), int(tok[1])
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: unparseable line {s!r}") from None
            if a < base or b < base:
                raise GraphFormatError(f"{path}:{lineno}: vertex id below index base {base}")
            pairs.append((a, b))
    if not pairs:
        raise GraphFormatError(f"{path}: empty graph")
    arr = np.asarray(pairs, dtype=np.int64) - base
    try:
        g = from_edges(arr)
    except GraphFormatError as exc:
        raise GraphFormatError(f"{path}: {exc}") from None
    # record ids as written in the file
    g = CsrGraph(g.n, g.m, g.offsets, g.neighbors, g.degrees, g.vmap + base)
    if keep_largest_component:
        g = largest_component(g)
    return g


def write_vmap(g: CsrGraph, path) -> Path:
    path = Path(str(path) + ".vmap")
    vmap = g.vmap if g.vmap is not None else np.arange(g.n)
    with open(path, "w") as fh:
        for new, orig in enumerate(vmap):
            fh.write(f"{new} {int(orig)}\n")
    return path


def read_vmap(path) -> np.ndarray:
    data = np.loadtxt(path, dtype=np.int64, ndmin=2)
    out = np.empty(len(data), dtype=np.int64)
    out[data[:, 0]] = data[:, 1]
    return out


def save_csr(g: CsrGraph, path) -> None:
    """Binary CSR: magic, u32 version, u64 n, u64 m, offsets (u64), neighbors; little-endian."""
    wide = g.neighbors.dtype.itemsize == 8
    version = CSR_VERSION_ID64 if wide else CSR_VERSION_ID32
    with open(path, "wb") as fh:
        fh.write(CSR_MAGIC)
        fh.write(struct.pack("<IQQ", version, g.n, g.m))
        fh.write(g.offsets.astype("<u8").tobytes())
        fh.write(g.neighbors.astype("<u8" if wide else "<u4").tobytes())


def load_csr(path, vmap_path=None) -> CsrGraph:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CSR_MAGIC:
        raise GraphFormatError(f"{path}: not a CSR cache (bad magic)")
    version, n, m = struct.unpack_from("<IQQ", raw, 4)
    if version not in (CSR_VERSION_ID32, CSR_VERSION_ID64):
        raise GraphFormatError(f"{path}: unsupported version {version}")
    pos = 4 + struct.calcsize("<IQQ")
    width = 4 if version == CSR_VERSION_ID32 else 8
    need = pos + 8 * (n + 1) + width * 2 * m
    if len(raw) != need:
        raise GraphFormatError(f"{path}: truncated or oversized file")
    offsets = np.frombuffer(raw, "<u8", n + 1, pos).astype(np.int64)
    pos += 8 * (n + 1)
    nbr = np.frombuffer(raw, "<u4" if width == 4 else "<u8", 2 * m, pos)
    nbr = nbr.astype(np.int32 if width == 4 else np.int64)
    vmap = None
    if vmap_path is None and Path(str(path) + ".vmap").exists():
        vmap_path = str(path) + ".vmap"
    if vmap_path is not None:
        vmap = read_vmap(vmap_path)
    g = CsrGraph(n, m, offsets, nbr, np.diff(offsets), vmap)
    g.validate()
    return g


def volume(g: CsrGraph) -> float:
    return float(2 * g.m)


@numba.njit(cache=True)
def _spmm_seq(offsets, neighbors, scale, X, out):
    n, c = X.shape
    for u in range(n):
        for t in range(offsets[u], offsets[u + 1]):
            v = neighbors[t]
            s = scale[v]
            for j in range(c):
                out[u, j] += s * X[v, j]


@numba.njit(parallel=True, cache=True)
def _spmm_par(offsets, neighbors, scale, X, out):
    n, c = X.shape
    # one writer per destination row; per-row summation order is fixed,
    # so results match the sequential kernel bit for bit
    for u in numba.prange(n):
        for t in range(offsets[u], offsets[u + 1]):
            v = neighbors[t]
            s = scale[v]
            for j in range(c):
                out[u, j] += s * X[v, j]


def _adjacency_apply(g: CsrGraph, X: np.ndarray, col_scale: np.ndarray) -> np.ndarray:
    """out[u] = sum_{v in N(u)} col_scale[v] * X[v]."""
    X = np.asarray(X, dtype=np.float64)
    vec = X.ndim == 1
    if vec:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != g.n:
        raise InputError(f"operand has {X.shape[0]} rows, graph has {g.n} vertices")
    X = np.ascontiguousarray(X)
    out = np.zeros_like(X)
    kernel = _spmm_par if _parallel else _spmm_seq
    kernel(g.offsets, g.neighbors, np.ascontiguousarray(col_scale, dtype=np.float64), X, out)
    return out[:, 0] if vec else out


def spmm_modified_laplacian(g: CsrGraph, alpha: float, X: np.ndarray) -> np.ndarray:
    """D^-alpha A D^-alpha X without forming any n x n matrix."""
    if not 0.0 < alpha <= 0.5:
        raise InputError(f"alpha must lie in (0, 0.5], got {alpha}")
    dpow = g.degrees.astype(np.float64) ** (-alpha)
    out = _adjacency_apply(g, X, dpow)
    return out * (dpow[:, None] if out.ndim == 2 else dpow)


def spmm_norm_laplacian(g: CsrGraph, X: np.ndarray) -> np.ndarray:
    """(I - D^-1 A) X."""
    X = np.asarray(X, dtype=np.float64)
    ones = np.ones(g.n)
    AX = _adjacency_apply(g, X, ones)
    dinv = 1.0 / g.degrees.astype(np.float64)
    return X - AX * (dinv[:, None] if AX.ndim == 2 else dinv)


def split_edges(g: CsrGraph, fraction: float, seed: int) -> tuple[CsrGraph, EdgeSet]:
    """Hold out round(fraction * m) edges without isolating any vertex."""
    if not 0.0 < fraction < 1.0:
        raise InputError("fraction must lie in (0, 1)")
    if fraction * g.m < 1:
        raise InputError("at least one test edge required")
    want = int(round(fraction * g.m))
    edges = g.edges()
    rng = make_rng(seed)
    order = rng.permutation(len(edges))
    deg = g.degrees.copy()
    held = np.zeros(len(edges), dtype=bool)
    count = 0
    for idx in order:
        if count == want:
            break
        a, b = edges[idx]
        # a pick that would strand an endpoint is rejected and the next one tried
        if deg[a] > 1 and deg[b] > 1:
            deg[a] -= 1
            deg[b] -= 1
            held[idx] = True
            count += 1
    if count < want:
        raise InputError(f"only {count} of {want} edges can be held out without isolating vertices")
    train = from_edges(edges[~held], g.n, drop_isolated=False, id_dtype=g.neighbors.dtype)
    train = CsrGraph(train.n, train.m, train.offsets, train.neighbors, train.degrees, g.vmap)
    return train, EdgeSet(edges[held])
