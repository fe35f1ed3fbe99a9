"""Clustering of top-t orderings.

* :func:`ebms` - exponential blurring mean shift, nonparametric
* :func:`kmeans` - K-means with the top-t Kendall distance
* :func:`em_mixture` - EM for a mixture of single-theta IGM models
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .consensus import bbound_r, local_search, sort_rows
from .estimation import THETA_CAP, theta_mle
from .model import log_psi
from .rankings import CentralOrdering, as_ordering, kendall_topt_matrix
from .stats import CostMatrix

__all__ = [
    "Clustering",
    "EBMSResult",
    "KMeansResult",
    "EMResult",
    "scale_rhs",
    "solve_scale",
    "kernel_weights",
    "ebms",
    "kmeans",
    "em_mixture",
    "classification_error",
]

log = logging.getLogger(__name__)

SCALE_BOUNDS = (1e-6, 50.0)
EXACT_MAX_ITEMS = 12


@dataclass
class Clustering:
    assignment: tuple
    representatives: dict = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return len(set(self.assignment))

    def sizes(self) -> dict:
        out: dict = {}
        for lab in self.assignment:
            out[lab] = out.get(lab, 0) + 1
        return out


def _labels(c) -> list:
    return list(c.assignment) if isinstance(c, Clustering) else list(c)


def classification_error(predicted, truth) -> float:
    """1 - accuracy of the best one-to-one matching of cluster labels."""
    p, t = _labels(predicted), _labels(truth)
    if len(p) != len(t):
        raise ValueError("clusterings cover different numbers of points")
    if not p:
        return 0.0
    pl = {lab: k for k, lab in enumerate(dict.fromkeys(p))}
    tl = {lab: k for k, lab in enumerate(dict.fromkeys(t))}
    conf = np.zeros((len(pl), len(tl)))
    for a, b in zip(p, t):
        conf[pl[a], tl[b]] += 1
    rows, cols = linear_sum_assignment(conf, maximize=True)
    return 1.0 - conf[rows, cols].sum() / len(p)


# -- scale equation -----------------------------------------------------------

def scale_rhs(theta, t: int):
    """t e^-theta / (1 - e^-theta) - sum_{j=1..t} j e^{-j theta} / (1 - e^{-j theta})."""
    theta = np.asarray(theta, dtype=float)
    j = np.arange(1, t + 1)
    th = theta[..., None]
    out = -t / np.expm1(-theta) - t - np.sum(-j / np.expm1(-j * th) - j, axis=-1)
    # identity used: e^-x / (1 - e^-x) = -1 / expm1(-x) - 1
    return float(out) if out.ndim == 0 else out


def solve_scale(avg_pairwise: float, t: int, bounds=SCALE_BOUNDS, with_flag: bool = False):
    """Kernel scale theta whose expected distance matches ``avg_pairwise``.

    The right-hand side decreases from t(t-1)/4 (theta -> 0) to 0; averages
    outside that range are clamped to ``bounds`` and flagged.
    """
    if t < 2:
        raise ValueError("the scale equation is degenerate for t = 1")
    lo, hi = bounds
    clamped = False
    if avg_pairwise >= scale_rhs(lo, t):
        theta, clamped = lo, True
    elif avg_pairwise <= scale_rhs(hi, t):
        theta, clamped = hi, True
    else:
        a, b = lo, hi
        while b - a > 1e-12:
            mid = 0.5 * (a + b)
            if scale_rhs(mid, t) > avg_pairwise:
                a = mid
            else:
                b = mid
        theta = 0.5 * (a + b)
    if clamped:
        log.warning("average distance %g outside (0, %g): scale clamped to %g", avg_pairwise, t * (t - 1) / 4, theta)
    return (theta, clamped) if with_flag else theta


# -- weighted statistics of many orderings --------------------------------------

class _Pool:
    """Orderings of equal length stored as an integer matrix over a vocabulary."""

    def __init__(self, lists: Sequence[Sequence[int]]):
        self.lists = [tuple(x) for x in lists]
        lengths = {len(x) for x in self.lists}
        if len(lengths) != 1:
            raise ValueError("all orderings must have the same length")
        self.t = lengths.pop()
        vocab = sorted({i for x in self.lists for i in x})
        self.vocab = np.array(vocab, dtype=np.int64)
        lookup = {item: k for k, item in enumerate(vocab)}
        self.G = np.array([[lookup[i] for i in x] for x in self.lists], dtype=np.intp)
        self.ii, self.jj = np.triu_indices(self.t, k=1)

    def matrix(self, rows: np.ndarray, weights: np.ndarray, items: np.ndarray | None = None) -> CostMatrix:
        """Cost matrix of sum_r weights[r] * R(lists[rows[r]]).

        ``items`` (vocabulary indices) fixes the item set; by default it is
        the union of the selected orderings.
        """
        G = self.G[rows]
        if items is None:
            items = np.unique(G)
        local = np.searchsorted(items, G)
        n = len(items)
        w = np.asarray(weights, dtype=float)
        q = np.bincount(local.ravel(), weights=np.repeat(w, self.t), minlength=n)
        # item at position b sits below the item at position a < b
        flat = (local[:, self.jj] * n + local[:, self.ii]).ravel()
        Q = np.bincount(flat, weights=np.repeat(w, len(self.ii)), minlength=n * n).reshape(n, n)
        R = q[:, None] - Q
        return CostMatrix(tuple(self.vocab[items].tolist()), R)


def _consensus(cm: CostMatrix, exact_max_items: int, start=None):
    if cm.n <= exact_max_items:
        return bbound_r(cm)
    res = sort_rows(cm, refine=True)
    if start is not None:
        alt = local_search(start, cm)
        if alt.cost < res.cost:
            res = alt
    return res


# -- EBMS -----------------------------------------------------------------------

@dataclass
class EBMSResult:
    clustering: Clustering
    iterations: int
    converged: bool
    scales: list = field(default_factory=list)
    clamped: list = field(default_factory=list)
    n_distinct: list = field(default_factory=list)
    cycled: bool = False


def _average_distance(d: np.ndarray, counts: np.ndarray, mode: str, pool: "_Pool | None" = None) -> float:
    n = len(counts)
    iu = np.triu_indices(n, k=1)
    if mode == "distinct":
        return float(d[iu].mean())
    if mode == "weighted":
        N = counts.sum()
        return float((np.outer(counts, counts)[iu] * d[iu]).sum() / (N * (N - 1) / 2))
    if mode == "local":
        # only pairs no farther apart than two orderings of the same t items;
        # pairs from different clusters carry no information on the spread
        t = pool.t
        near = d[iu] <= t * (t - 1) / 2
        if near.any():
            return float(d[iu][near].mean())
        return float(d[iu].mean())
    raise ValueError(f"unknown scale mode {mode!r}")


def kernel_weights(d: np.ndarray, theta: float) -> np.ndarray:
    """Row-normalized exp(-theta d); every row sums to one."""
    logits = -theta * np.asarray(d, dtype=float)
    return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))


def ebms(data: Sequence[Sequence[int]], scale="local", max_iter: int = 100,
         exact_max_items: int = EXACT_MAX_ITEMS, weight_floor: float = 1e-12,
         bounds=SCALE_BOUNDS, rescale: bool = False) -> EBMSResult:
    """Exponential blurring mean shift over equal-length top-t orderings.

    Each round: merge identical orderings, compute pairwise distances,
    solve for the kernel scale, replace every ordering by the top-t prefix
    of the consensus of its kernel-weighted neighbours.  Stops when no
    ordering moves.  Kernel weights below ``weight_floor`` times the
    largest weight are dropped from the shifted statistics.

    ``scale`` is a number (fixed kernel scale) or the name of the
    average used on the left of the scale equation: ``"distinct"`` (all
    pairs of distinct orderings), ``"weighted"`` (all pairs of data
    points) or ``"local"`` (pairs at most t(t-1)/2 apart).  The scale is
    solved on the input data and kept; ``rescale=True`` solves it again
    every round.
    """
    points = [as_ordering(x) for x in data]
    if not points:
        raise ValueError("no data to cluster")
    t = len(points[0])
    if any(len(x) != t for x in points):
        raise ValueError("ebms needs orderings of equal length")
    current = list(points)
    scales, clamped, sizes = [], [], []
    seen = {tuple(current)}
    converged = cycled = False
    it = 0
    for it in range(1, max_iter + 1):
        distinct = list(dict.fromkeys(current))
        sizes.append(len(distinct))
        if len(distinct) == 1:
            converged = True
            it -= 1
            break
        index = {x: k for k, x in enumerate(distinct)}
        counts = np.bincount([index[x] for x in current], minlength=len(distinct)).astype(float)
        d = kendall_topt_matrix(distinct).astype(float)
        pool = _Pool(distinct)
        if not isinstance(scale, str):
            theta, flag = float(scale), False
        elif scales and not rescale:
            theta, flag = scales[-1], clamped[-1]
        else:
            avg = _average_distance(d, counts, scale, pool)
            theta, flag = solve_scale(avg, t, bounds, with_flag=True) if t > 1 else (bounds[1], True)
        scales.append(theta)
        clamped.append(flag)
        alpha = kernel_weights(d, theta)
        moved = {}
        for i in range(len(distinct)):
            w = counts * alpha[i]
            keep = np.flatnonzero(w >= weight_floor * w.max())
            res = _consensus(pool.matrix(keep, w[keep]), exact_max_items, start=distinct[i])
            moved[distinct[i]] = res.sigma.prefix[:t]
        new = [moved[x] for x in current]
        if new == current:
            converged = True
            break
        current = new
        key = tuple(current)
        if key in seen:
            log.warning("ebms revisited a configuration after %d rounds; stopping", it)
            cycled = True
            break
        seen.add(key)
    labels = {}
    assignment = tuple(labels.setdefault(x, len(labels)) for x in current)
    reps = {lab: x for x, lab in labels.items()}
    return EBMSResult(Clustering(assignment, reps), it, converged, scales, clamped, sizes, cycled)


# -- K-means --------------------------------------------------------------------

@dataclass
class KMeansResult:
    clustering: Clustering
    centers: list
    objective: float
    iterations: int
    trace: list = field(default_factory=list)


def _kmeans_once(points, pool: _Pool, K: int, rng: np.random.Generator, max_iter: int,
                 exact_max_items: int) -> KMeansResult:
    distinct = list(dict.fromkeys(points))
    if K > len(distinct):
        raise ValueError(f"K={K} exceeds the {len(distinct)} distinct orderings")
    t = pool.t
    centers = [distinct[k] for k in rng.choice(len(distinct), size=K, replace=False)]
    rows = np.arange(len(points))
    assign = None
    trace = []  # (objective before, objective after) per assignment step
    it = 0
    for it in range(1, max_iter + 1):
        d = kendall_topt_matrix(points, centers)
        before = float(d[rows, assign].sum()) if assign is not None else math.inf
        new = np.argmin(d, axis=1)
        # empty clusters take the point farthest from its center
        for k in range(K):
            if not np.any(new == k):
                far = int(np.argmax(d[rows, new]))
                new[far] = k
                centers[k] = points[far]
                d[far, k] = 0
        trace.append((before, float(d[rows, new].sum())))
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for k in range(K):
            members = np.flatnonzero(assign == k)
            res = _consensus(pool.matrix(members, np.ones(len(members))), exact_max_items, start=centers[k])
            cand = res.sigma.prefix[:t]
            mem = [points[m] for m in members]
            # the consensus minimises a surrogate; keep it only if it does not hurt
            if kendall_topt_matrix(mem, [cand]).sum() <= kendall_topt_matrix(mem, [centers[k]]).sum():
                centers[k] = cand
    d = kendall_topt_matrix(points, centers)
    objective = float(d[np.arange(len(points)), assign].sum())
    reps = {k: centers[k] for k in range(K)}
    return KMeansResult(Clustering(tuple(int(a) for a in assign), reps), centers, objective, it, trace)


def kmeans(data: Sequence[Sequence[int]], K: int, seed=None, max_iter: int = 100, n_init: int = 10,
           exact_max_items: int = EXACT_MAX_ITEMS) -> KMeansResult:
    """K-means on top-t orderings; keeps the restart with the lowest objective.

    Centers start at K distinct random data points; assignment uses the
    top-t Kendall distance (ties to the lowest cluster index) and each
    center becomes the top-t consensus of its members.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    points = [as_ordering(x) for x in data]
    pool = _Pool(points)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        res = _kmeans_once(points, pool, K, rng, max_iter, exact_max_items)
        if best is None or res.objective < best.objective:
            best = res
    return best


# -- EM mixture -----------------------------------------------------------------

@dataclass
class EMResult:
    clustering: Clustering
    weights: np.ndarray
    params: list  # (CentralOrdering, theta) per component
    responsibilities: np.ndarray
    log_lik: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    dropped: list = field(default_factory=list)


def _component_logp(pool: _Pool, order: Sequence[int], theta: float) -> np.ndarray:
    """log P of every pooled ordering under a single-theta IGM."""
    sigma = CentralOrdering(order)
    rank = np.array([sigma.rank(int(i)) for i in pool.vocab], dtype=np.int64)
    rk = rank[pool.G]
    above = np.zeros_like(rk)
    for j in range(1, pool.t):
        above[:, j] = (rk[:, :j] < rk[:, [j]]).sum(axis=1)
    codes = rk - 1 - above
    return -theta * codes.sum(axis=1) - pool.t * log_psi(theta)


def em_mixture(data: Sequence[Sequence[int]], K: int, seed=None, max_iter: int = 100, tol: float = 1e-6,
               init: str = "kmeans", min_weight: float = 1e-6, theta_cap: float = THETA_CAP) -> EMResult:
    """EM for a K-component mixture of single-theta IGM models.

    Each component's central ordering covers every observed item.  The
    M-step never accepts an ordering of higher weighted cost than the
    previous one, so the observed-data log-likelihood does not decrease.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    points = [as_ordering(x) for x in data]
    pool = _Pool(points)
    N = len(points)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    all_items = np.arange(len(pool.vocab))
    rows = np.arange(N)

    if init == "kmeans":
        km = kmeans(points, K, seed=rng)
        resp = np.zeros((N, K))
        resp[rows, np.array(km.clustering.assignment)] = 1.0
    elif init == "random":
        resp = rng.dirichlet(np.ones(K), size=N)
    else:
        raise ValueError(f"unknown init {init!r}")

    orders: list = [None] * K
    thetas = np.ones(K)
    weights = np.full(K, 1.0 / K)
    trace = []
    dropped = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # M-step
        weights = resp.sum(axis=0) / N
        keep = [k for k in range(len(weights)) if weights[k] >= min_weight]
        if len(keep) < len(weights):
            dropped.extend(k for k in range(len(weights)) if k not in keep)
            log.warning("em_mixture dropped %d collapsed component(s)", len(weights) - len(keep))
            resp = resp[:, keep]
            resp /= resp.sum(axis=1, keepdims=True)
            weights = resp.sum(axis=0) / N
            orders = [orders[k] for k in keep]
            thetas = thetas[keep]
        for k in range(resp.shape[1]):
            cm = pool.matrix(rows, resp[:, k], items=all_items)
            res = sort_rows(cm, refine=True)
            if orders[k] is not None:
                alt = local_search(orders[k], cm)
                if alt.cost <= res.cost:
                    res = alt
            orders[k] = res.sigma.prefix
            T_k = resp[:, k].sum() * pool.t
            thetas[k], _ = theta_mle(T_k, res.cost, theta_cap)
        # E-step
        logp = np.column_stack([_component_logp(pool, orders[k], thetas[k]) for k in range(len(orders))])
        joint = logp + np.log(weights)
        ll = float(logsumexp(joint, axis=1).sum())
        resp = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        trace.append(ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    hard = np.argmax(resp, axis=1)
    reps = {k: tuple(orders[k][: pool.t]) for k in range(len(orders))}
    params = [(CentralOrdering(orders[k]), float(thetas[k])) for k in range(len(orders))]
    return EMResult(Clustering(tuple(int(h) for h in hard), reps), weights, params, resp, trace, it, converged, dropped)
