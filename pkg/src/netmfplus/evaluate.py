"""Downstream evaluation: multi-label vertex classification and link prediction."""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, log_expit

from ._rng import child_seeds, make_rng
from .errors import InputError
from .graph import CsrGraph, EdgeSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelSet:
    """Binary vertex-label indicators stored as a CSR matrix (n x L)."""

    indicator: sp.csr_matrix
    label_ids: np.ndarray | None = None  # original label id per column

    @property
    def n(self) -> int:
        return self.indicator.shape[0]

    @property
    def n_labels(self) -> int:
        return self.indicator.shape[1]

    @classmethod
    def from_lists(cls, lists, n_labels: int | None = None) -> "LabelSet":
        rows = [i for i, labs in enumerate(lists) for _ in labs]
        cols = [c for labs in lists for c in labs]
        if n_labels is None:
            n_labels = max(cols) + 1 if cols else 0
        if cols and (min(cols) < 0 or max(cols) >= n_labels):
            raise InputError("label id out of range")
        data = np.ones(len(rows), dtype=np.int8)
        ind = sp.csr_matrix((data, (rows, cols)), shape=(len(lists), n_labels))
        ind.sum_duplicates()
        ind.data[:] = 1
        return cls(ind)

    def dense(self) -> np.ndarray:
        return self.indicator.toarray().astype(bool)


def load_labels(path, n: int, vmap: np.ndarray | None = None) -> LabelSet:
    """Read "vertex_id label_id" lines; vertex ids are original ids translated through vmap."""
    if vmap is None:
        vmap = np.arange(n)
    lookup = {int(orig): new for new, orig in enumerate(vmap)}
    pairs = []
    skipped = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s[0] in "#%":
                continue
            tok = s.replace(",", " ").split()
            if len(tok) != 2:
                raise InputError(f"{path}:{lineno}: expected 'vertex_id label_id'")
            try:
                v, lab = int(tok[0]), int(tok[1])
            except ValueError:
                raise InputError(f"{path}:{lineno}: unparseable line {s!r}") from None
            if v not in lookup:
                skipped += 1
                continue
            pairs.append((lookup[v], lab))
    if skipped:
        logger.warning("%d label lines refer to vertices not in the graph", skipped)
    if not pairs:
        raise InputError(f"{path}: no usable labels")
    arr = np.asarray(pairs, dtype=np.int64)
    label_ids, cols = np.unique(arr[:, 1], return_inverse=True)
    ind = sp.csr_matrix((np.ones(len(arr), dtype=np.int8), (arr[:, 0], cols)),
                        shape=(n, len(label_ids)))
    ind.sum_duplicates()
    ind.data[:] = 1
    return LabelSet(ind, label_ids)


# ---------------------------------------------------------------- F1

def f1_scores(pred, truth, labels=None) -> tuple[float, float]:
    """Micro- and macro-averaged F1 of binary indicator matrices.

    Micro pools TP/FP/FN over all labels; macro averages per-label F1 over
    ``labels`` (default: every label that occurs in either matrix).
    """
    P = _as_bool(pred)
    Y = _as_bool(truth)
    if P.shape != Y.shape:
        raise InputError("prediction and truth shapes differ")
    tp = (P & Y).sum(axis=0).astype(np.float64)
    fp = (P & ~Y).sum(axis=0).astype(np.float64)
    fn = (~P & Y).sum(axis=0).astype(np.float64)
    denom = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = 2 * tp.sum() / denom if denom > 0 else 0.0
    if labels is None:
        labels = np.flatnonzero(tp + fp + fn > 0)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        return float(micro), 0.0
    per_denom = 2 * tp[labels] + fp[labels] + fn[labels]
    per = np.divide(2 * tp[labels], per_denom, out=np.zeros(labels.size), where=per_denom > 0)
    return float(micro), float(per.mean())


def _as_bool(M) -> np.ndarray:
    if sp.issparse(M):
        M = M.toarray()
    return np.asarray(M).astype(bool)


# ---------------------------------------------------------------- logistic regression

@dataclass
class LogRegResult:
    W: np.ndarray       # features x labels
    bias: np.ndarray    # labels
    grad_norm: np.ndarray
    iterations: int


def fit_logistic_ovr(X: np.ndarray, Y: np.ndarray, l2: float = 1.0, max_iter: int = 500,
                     tol: float = 1e-6) -> LogRegResult:
    """One-vs-rest L2-regularized logistic regression by full-batch gradient descent.

    Each label minimizes ``sum_i log(1 + exp(-y_i (w.x_i + b))) + l2/2 ||w||^2``
    (intercept unpenalized). All labels run in lockstep with their own
    Armijo backtracking step; a label stops once its gradient norm is below
    ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    S = np.where(np.asarray(Y, dtype=bool), 1.0, -1.0)   # n x L signs
    n, f = X.shape
    L = S.shape[1]
    Xb = np.hstack([X, np.ones((n, 1))])
    W = np.zeros((f + 1, L))
    reg = np.full(f + 1, l2)
    reg[-1] = 0.0

    def loss_grad(W):
        margin = S * (Xb @ W)
        loss = -log_expit(margin).sum(axis=0) + 0.5 * (reg[:, None] * W * W).sum(axis=0)
        coef = -S * expit(-margin)
        grad = Xb.T @ coef + reg[:, None] * W
        return loss, grad

    loss, grad = loss_grad(W)
    gnorm = np.linalg.norm(grad, axis=0)
    # initial step from a bound on the Hessian's largest eigenvalue
    lip = 0.25 * np.linalg.norm(Xb, 2) ** 2 + l2
    step = np.full(L, 1.0 / lip)
    active = gnorm > tol
    it = 0
    while it < max_iter and active.any():
        it += 1
        step[active] *= 2.0
        cand_step = step.copy()
        for _ in range(60):
            Wn = W - cand_step[None, :] * grad
            ln = _loss(Xb, S, Wn, reg)
            ok = ln <= loss - 0.5 * cand_step * gnorm ** 2
            ok |= ~active
            if ok.all():
                break
            cand_step = np.where(ok, cand_step, 0.5 * cand_step)
        step = cand_step
        W = np.where(active[None, :], W - step[None, :] * grad, W)
        loss, grad = loss_grad(W)
        gnorm = np.linalg.norm(grad, axis=0)
        active = gnorm > tol
    return LogRegResult(W=W[:-1], bias=W[-1], grad_norm=gnorm, iterations=it)


def _loss(Xb, S, W, reg):
    margin = S * (Xb @ W)
    return -log_expit(margin).sum(axis=0) + 0.5 * (reg[:, None] * W * W).sum(axis=0)


def predict_top_t(scores: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Mark the ``counts[i]`` highest-scoring labels of each row."""
    n, L = scores.shape
    order = np.argsort(-scores, axis=1, kind="stable")
    rank = np.empty_like(order)
    rank[np.arange(n)[:, None], order] = np.arange(L)[None, :]
    return rank < np.asarray(counts)[:, None]


def classify_split(E: np.ndarray, labels: LabelSet, train_idx, test_idx,
                   l2: float = 1.0, max_iter: int = 500) -> tuple[float, float]:
    """Train on ``train_idx``, predict top-t labels on ``test_idx``, return (micro, macro)."""
    Y = labels.dense()
    train_idx = np.asarray(train_idx)
    test_idx = np.asarray(test_idx)
    Ytr = Y[train_idx]
    present = Ytr.any(axis=0)
    missing = np.flatnonzero(~present)
    if missing.size:
        warnings.warn(f"{missing.size} labels absent from the training split; "
                      "excluded from Macro-F1", RuntimeWarning, stacklevel=2)
    model = fit_logistic_ovr(E[train_idx], Ytr, l2=l2, max_iter=max_iter)
    scores = E[test_idx] @ model.W + model.bias
    scores[:, ~present] = -np.inf
    Yte = Y[test_idx]
    counts = Yte.sum(axis=1)
    pred = predict_top_t(scores, counts)
    keep = counts > 0
    seen = Yte[keep].any(axis=0) | pred[keep].any(axis=0)
    macro_labels = np.flatnonzero(present & seen)
    return f1_scores(pred[keep], Yte[keep], labels=macro_labels)


def eval_classification(E, labels: LabelSet, train_ratios=(0.1, 0.5, 0.9), repeats: int = 5,
                        seed: int = 0, l2: float = 1.0, max_iter: int = 500) -> list[dict]:
    """Average Micro/Macro-F1 over ``repeats`` uniform splits per training ratio.

    Only vertices carrying at least one label take part. Test vertices with t
    true labels receive their t top-scoring labels.
    """
    E = _matrix(E)
    if E.shape[0] != labels.n:
        raise InputError("embedding and label set disagree on vertex count")
    labeled = np.flatnonzero(np.diff(labels.indicator.indptr) > 0)
    rows = []
    for ratio, ss in zip(train_ratios, child_seeds(seed, len(train_ratios))):
        if not 0.0 < ratio < 1.0:
            raise InputError(f"training ratio must lie in (0, 1), got {ratio}")
        rng = make_rng(ss)
        micro, macro = [], []
        n_train = max(1, int(round(ratio * labeled.size)))
        for _ in range(repeats):
            perm = rng.permutation(labeled)
            mi, ma = classify_split(E, labels, perm[:n_train], perm[n_train:], l2, max_iter)
            micro.append(mi)
            macro.append(ma)
        rows.append(dict(ratio=float(ratio), micro_f1=float(np.mean(micro)),
                         macro_f1=float(np.mean(macro))))
    return rows


# ---------------------------------------------------------------- link prediction

@dataclass(frozen=True)
class LinkMetrics:
    mr: float
    mrr: float
    hits1: float
    hits10: float
    hits50: float
    auc: float
    evaluated: int = 0
    skipped: int = 0

    def check(self) -> None:
        ok = (self.hits1 <= self.hits10 <= self.hits50 <= 1.0 and 0.0 <= self.auc <= 1.0
              and self.mr >= 1.0 and 0.0 < self.mrr <= 1.0)
        if not ok:
            raise AssertionError(f"link metrics out of range: {self}")

    def as_dict(self) -> dict:
        return asdict(self)


def sample_negatives(test: EdgeSet, g: CsrGraph, negatives_per_edge: int, seed) -> np.ndarray:
    """Corrupt the tail of each test edge (u, v) into uniform non-neighbors of u.

    Returns a (len(test), negatives_per_edge) array; rows for heads that are
    adjacent to every other vertex are filled with -1.
    """
    rng = make_rng(seed)
    pairs = np.asarray(test.pairs, dtype=np.int64)
    held = {}
    for a, b in pairs:
        held.setdefault(int(a), set()).add(int(b))
        held.setdefault(int(b), set()).add(int(a))
    out = np.full((len(pairs), negatives_per_edge), -1, dtype=np.int64)
    for i, (u, _) in enumerate(pairs):
        forbidden = np.union1d(g.neighbors_of(u), list(held.get(int(u), ())) + [u])
        avail = g.n - forbidden.size
        if avail <= 0:
            continue
        got = np.empty(0, dtype=np.int64)
        while got.size < negatives_per_edge:
            cand = rng.integers(0, g.n, size=2 * (negatives_per_edge - got.size) + 8)
            cand = cand[~np.isin(cand, forbidden, assume_unique=False)]
            got = np.concatenate([got, cand])
        out[i] = got[:negatives_per_edge]
    return out


def _matrix(E) -> np.ndarray:
    return np.asarray(getattr(E, "E", E), dtype=np.float64)


def eval_link_prediction(E, test: EdgeSet, g: CsrGraph, negatives_per_edge: int = 1000,
                         seed: int = 0, *, cosine: bool = False,
                         negatives: np.ndarray | None = None) -> LinkMetrics:
    """Rank each held-out edge among corrupted candidates sharing its head.

    Ranks are pessimistic (a negative tying the positive ranks above it).
    AUC is the Mann-Whitney statistic over every (positive, negative) score
    pair in the run, with ties counted as one half.
    """
    X = _matrix(E)
    if cosine:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = X / np.where(norms > 0, norms, 1.0)
    pairs = np.asarray(test.pairs, dtype=np.int64)
    if pairs.size == 0:
        raise InputError("empty test edge set")
    if pairs.max() >= X.shape[0]:
        raise InputError("test edge endpoint outside the embedding")
    if negatives is None:
        negatives = sample_negatives(test, g, negatives_per_edge, seed)
    valid = negatives[:, 0] >= 0
    skipped = int((~valid).sum())
    if skipped:
        warnings.warn(f"{skipped} test edges skipped: no valid corruption", RuntimeWarning,
                      stacklevel=2)
    pairs, negatives = pairs[valid], negatives[valid]
    if len(pairs) == 0:
        raise InputError("no test edge could be evaluated")
    u = pairs[:, 0]
    pos = np.einsum("ij,ij->i", X[u], X[pairs[:, 1]])
    neg = np.empty(negatives.shape)
    chunk = max(1, (1 << 24) // max(1, negatives.shape[1] * X.shape[1]))
    for start in range(0, len(pairs), chunk):
        sl = slice(start, start + chunk)
        neg[sl] = np.einsum("ij,ikj->ik", X[u[sl]], X[negatives[sl]])
    rank = 1 + (neg >= pos[:, None]).sum(axis=1)
    auc = _pairwise_auc(pos, neg.ravel())
    m = LinkMetrics(mr=float(rank.mean()), mrr=float((1.0 / rank).mean()),
                    hits1=float((rank <= 1).mean()), hits10=float((rank <= 10).mean()),
                    hits50=float((rank <= 50).mean()), auc=auc,
                    evaluated=len(pairs), skipped=skipped)
    m.check()
    return m


def _pairwise_auc(pos: np.ndarray, neg: np.ndarray) -> float:
    neg = np.sort(neg)
    below = np.searchsorted(neg, pos, side="left")
    equal = np.searchsorted(neg, pos, side="right") - below
    wins = 2 * int(below.sum()) + int(equal.sum())   # doubled to stay integral
    return wins / (2.0 * pos.size * neg.size)
