"""Random graph generators used by tests, acceptance runs and demos."""

from __future__ import annotations

import numpy as np

from ._rng import make_rng
from .graph import CsrGraph, from_edges, largest_component


def _sample_blocks(block_of: np.ndarray, P: np.ndarray, rng, chunk: int = 512) -> np.ndarray:
    n = block_of.size
    parts = []
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        prob = P[block_of[rows][:, None], block_of[None, :]]
        hit = rng.random((rows.size, n)) < prob
        hit &= np.arange(n)[None, :] > rows[:, None]
        r, c = np.nonzero(hit)
        parts.append(np.stack([rows[r], c], axis=1))
    return np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)


def erdos_renyi(n: int, p: float, seed: int = 0, *, giant: bool = True) -> CsrGraph:
    """G(n, p); isolated vertices are dropped and, with ``giant``, only the largest component kept."""
    rng = make_rng(seed)
    edges = _sample_blocks(np.zeros(n, dtype=np.int64), np.array([[p]]), rng)
    g = from_edges(edges, n)
    return largest_component(g) if giant else g


def stochastic_block_model(sizes, p_in: float, p_out: float, seed: int = 0):
    """Planted-partition graph; returns (graph, block id per vertex of the returned graph)."""
    sizes = list(sizes)
    block_of = np.repeat(np.arange(len(sizes)), sizes)
    P = np.full((len(sizes), len(sizes)), p_out)
    np.fill_diagonal(P, p_in)
    rng = make_rng(seed)
    edges = _sample_blocks(block_of, P, rng)
    g = largest_component(from_edges(edges, block_of.size))
    return g, block_of[g.vmap]
