"""Sparse sufficient statistics of top-t ranking data.

For rank j the statistics are

* ``q[i]``      number of orderings with item i at rank j
* ``Q[i, k]``   number of orderings with item i at rank j and item k above it
* ``N``         number of orderings of length >= j

The precedence cost matrix is ``R_j = q_j 1^T - Q_j`` with a zero diagonal.
Only nonzero keys are stored; dense matrices are built on request over the
finite set of observed items.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .rankings import CentralOrdering, as_ordering

__all__ = [
    "RankStats",
    "SuffStats",
    "CostMatrix",
    "accumulate",
    "weighted_combine",
    "lower_triangle_cost",
    "rank_costs",
]

# a rank index, "aggregate", or a theta vector (one weight per rank)
Selector = Union[int, str, Sequence[float]]


@dataclass
class RankStats:
    j: int
    q: dict = field(default_factory=dict)
    Q: dict = field(default_factory=dict)
    N: float = 0.0

    def R(self, i: int, k: int) -> float:
        """Entry R_{i,k} computed on demand (zero on the diagonal)."""
        if i == k:
            return 0.0
        return self.q.get(i, 0.0) - self.Q.get((i, k), 0.0)

    def scaled(self, w: float) -> "RankStats":
        return RankStats(
            self.j,
            {i: w * v for i, v in self.q.items()},
            {key: w * v for key, v in self.Q.items()},
            w * self.N,
        )


@dataclass
class CostMatrix:
    """Dense precedence costs over a finite list of items.

    ``R[a, b]`` is the cost paid when ``items[b]`` is placed above
    ``items[a]``; the diagonal is zero.
    """

    items: tuple
    R: np.ndarray

    def __post_init__(self):
        self.items = tuple(self.items)
        self.R = np.asarray(self.R, dtype=float)
        n = len(self.items)
        if self.R.shape != (n, n):
            raise ValueError(f"cost matrix shape {self.R.shape} does not match {n} items")
        self.R = self.R.copy()
        np.fill_diagonal(self.R, 0.0)

    @property
    def n(self) -> int:
        return len(self.items)

    def index(self, order: Sequence[int]) -> np.ndarray:
        lookup = {item: k for k, item in enumerate(self.items)}
        return np.array([lookup[i] for i in order], dtype=np.intp)

    def cost(self, order: Sequence[int]) -> float:
        """Lower-triangle cost of ``order`` (a permutation of ``items``)."""
        p = self.index(order)
        if len(p) != self.n or len(set(p.tolist())) != self.n:
            raise ValueError("order must be a permutation of the matrix items")
        return float(np.tril(self.R[np.ix_(p, p)], -1).sum())

    def restrict(self, items: Sequence[int]) -> "CostMatrix":
        p = self.index(items)
        return CostMatrix(tuple(items), self.R[np.ix_(p, p)])


class SuffStats:
    """Per-rank statistics plus rank-summed aggregates.

    Counts are floats so that weighted (fractional) data is handled by the
    same code as plain counts.
    """

    def __init__(self, per_rank: Sequence[RankStats]):
        self.per_rank = list(per_rank)
        for j, rs in enumerate(self.per_rank, 1):
            if rs.j != j:
                raise ValueError("per-rank statistics must be indexed 1..t_max")

    @property
    def t_max(self) -> int:
        return len(self.per_rank)

    @property
    def N(self) -> float:
        """Number (or total weight) of orderings."""
        return self.per_rank[0].N if self.per_rank else 0.0

    @property
    def N_j(self) -> np.ndarray:
        return np.array([rs.N for rs in self.per_rank], dtype=float)

    @property
    def T(self) -> float:
        return float(sum(rs.N for rs in self.per_rank))

    @cached_property
    def items(self) -> tuple[int, ...]:
        """Observed items, sorted by id."""
        seen = set()
        for rs in self.per_rank:
            seen.update(i for i, v in rs.q.items() if v != 0)
        return tuple(sorted(seen))

    @property
    def n_items(self) -> int:
        return len(self.items)

    @cached_property
    def aggregate_q(self) -> dict:
        out: dict = defaultdict(float)
        for rs in self.per_rank:
            for i, v in rs.q.items():
                out[i] += v
        return dict(out)

    @cached_property
    def aggregate_Q(self) -> dict:
        out: dict = defaultdict(float)
        for rs in self.per_rank:
            for key, v in rs.Q.items():
                out[key] += v
        return dict(out)

    def __repr__(self):
        return f"SuffStats(t_max={self.t_max}, N={self.N:g}, T={self.T:g}, n_items={self.n_items})"

    def is_empty(self) -> bool:
        return self.t_max == 0 or self.N <= 0

    # -- dense views -------------------------------------------------------

    def _dense(self, q: dict, Q: dict, lookup: dict, n: int) -> np.ndarray:
        R = np.zeros((n, n))
        if q:
            idx = np.fromiter((lookup[i] for i in q), dtype=np.intp, count=len(q))
            R[idx, :] += np.fromiter(q.values(), dtype=float, count=len(q))[:, None]
        if Q:
            rows = np.fromiter((lookup[a] for a, _ in Q), dtype=np.intp, count=len(Q))
            cols = np.fromiter((lookup[b] for _, b in Q), dtype=np.intp, count=len(Q))
            np.subtract.at(R, (rows, cols), np.fromiter(Q.values(), dtype=float, count=len(Q)))
        np.fill_diagonal(R, 0.0)
        return R

    def rank_matrices(self, items: Sequence[int] | None = None) -> np.ndarray:
        """Stack of dense ``R_j`` over ``items``, shape ``(t_max, n, n)``."""
        items = self.items if items is None else tuple(items)
        lookup = {i: k for k, i in enumerate(items)}
        return np.stack([self._dense(rs.q, rs.Q, lookup, len(items)) for rs in self.per_rank])

    def matrix(self, selector: Selector = "aggregate", items: Sequence[int] | None = None) -> CostMatrix:
        """Dense cost matrix for one rank, the aggregate, or a theta-weighting."""
        items = self.items if items is None else tuple(items)
        lookup = {i: k for k, i in enumerate(items)}
        n = len(items)
        if isinstance(selector, str):
            if selector != "aggregate":
                raise ValueError(f"unknown selector {selector!r}")
            return CostMatrix(items, self._dense(self.aggregate_q, self.aggregate_Q, lookup, n))
        if isinstance(selector, (int, np.integer)):
            rs = self.per_rank[int(selector) - 1]
            return CostMatrix(items, self._dense(rs.q, rs.Q, lookup, n))
        theta = np.asarray(selector, dtype=float)
        if len(theta) < self.t_max:
            raise ValueError("theta-weighted selector needs one weight per rank")
        R = np.zeros((n, n))
        for th, rs in zip(theta, self.per_rank):
            R += th * self._dense(rs.q, rs.Q, lookup, n)
        return CostMatrix(items, R)

    # -- combination -------------------------------------------------------

    def scaled(self, w: float) -> "SuffStats":
        return SuffStats([rs.scaled(w) for rs in self.per_rank])

    def merge(self, other: "SuffStats") -> "SuffStats":
        return weighted_combine([(1.0, self), (1.0, other)])


def accumulate(data: Iterable[Sequence[int]], weights: Iterable[float] | None = None) -> SuffStats:
    """Sufficient statistics of a collection of top-t orderings.

    Orderings may have different lengths.  ``weights`` optionally gives a
    (non-negative) weight per ordering.
    """
    data = [as_ordering(pi) for pi in data]
    if not data:
        raise ValueError("cannot accumulate statistics of an empty dataset")
    weights = [1.0] * len(data) if weights is None else [float(w) for w in weights]
    if len(weights) != len(data):
        raise ValueError("one weight per ordering is required")
    t_max = max(len(pi) for pi in data)
    qs = [defaultdict(float) for _ in range(t_max)]
    Qs = [defaultdict(float) for _ in range(t_max)]
    Ns = [0.0] * t_max
    for pi, w in zip(data, weights):
        if w == 0:
            continue
        for j, item in enumerate(pi):
            qs[j][item] += w
            Ns[j] += w
            Qj = Qs[j]
            for above in pi[:j]:
                Qj[item, above] += w
    return SuffStats([RankStats(j + 1, dict(qs[j]), dict(Qs[j]), Ns[j]) for j in range(t_max)])


def weighted_combine(parts: Iterable[tuple[float, SuffStats]]) -> SuffStats:
    """Linear combination sum_k w_k * stats_k of sufficient statistics."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to combine")
    ws = [float(w) for w, _ in parts]
    if any(not np.isfinite(w) or w < 0 for w in ws):
        raise ValueError("weights must be finite and non-negative")
    if not any(w > 0 for w in ws):
        raise ValueError("at least one weight must be positive")
    t_max = max(s.t_max for _, s in parts)
    qs = [defaultdict(float) for _ in range(t_max)]
    Qs = [defaultdict(float) for _ in range(t_max)]
    Ns = [0.0] * t_max
    for w, stats in zip(ws, (s for _, s in parts)):
        if w == 0:
            continue
        for j, rs in enumerate(stats.per_rank):
            for i, v in rs.q.items():
                qs[j][i] += w * v
            for key, v in rs.Q.items():
                Qs[j][key] += w * v
            Ns[j] += w * rs.N
    return SuffStats([RankStats(j + 1, dict(qs[j]), dict(Qs[j]), Ns[j]) for j in range(t_max)])


def _sparse_cost(q: dict, Q: dict, sigma: CentralOrdering) -> float:
    # sum over l of q_l * (#items above l) minus the precedence counts that
    # sigma agrees with
    total = 0.0
    for item, v in q.items():
        total += v * (sigma.rank(item) - 1)
    for (item, above), v in Q.items():
        if sigma.rank(above) < sigma.rank(item):
            total -= v
    return total


def lower_triangle_cost(stats: SuffStats, selector: Selector, sigma: CentralOrdering, strict: bool = True) -> float:
    """L_sigma of R_j, of the aggregate R, or of sum_j theta_j R_j.

    With ``strict`` (the default) sigma's prefix must list every observed
    item.  Otherwise the tail rule ranks unlisted items and the value is
    still the exact lower-triangle sum of the infinite matrix.
    """
    if strict:
        missing = [i for i in stats.items if sigma.rank(i) > len(sigma.prefix)]
        if missing:
            raise ValueError(f"central ordering omits observed items {missing[:5]}")
    if isinstance(selector, str):
        if selector != "aggregate":
            raise ValueError(f"unknown selector {selector!r}")
        return _sparse_cost(stats.aggregate_q, stats.aggregate_Q, sigma)
    if isinstance(selector, (int, np.integer)):
        rs = stats.per_rank[int(selector) - 1]
        return _sparse_cost(rs.q, rs.Q, sigma)
    theta = list(selector)
    if len(theta) < stats.t_max:
        raise ValueError("theta-weighted selector needs one weight per rank")
    return float(sum(th * _sparse_cost(rs.q, rs.Q, sigma) for th, rs in zip(theta, stats.per_rank)))


def rank_costs(stats: SuffStats, sigma: CentralOrdering, strict: bool = True) -> np.ndarray:
    """Vector of L_sigma(R_j) for j = 1..t_max."""
    return np.array([lower_triangle_cost(stats, j, sigma, strict) for j in range(1, stats.t_max + 1)])
