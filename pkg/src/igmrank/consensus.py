"""Consensus (central ordering) search over a precedence cost matrix.

All searchers minimise the lower-triangle cost of a :class:`CostMatrix`,
i.e. the sum of ``R[l, i]`` over pairs where ``i`` is placed above ``l``.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

import numpy as np

from .rankings import CentralOrdering
from .stats import CostMatrix

__all__ = [
    "SearchResult",
    "bbound_r",
    "greedy_search",
    "sort_rows",
    "local_search",
    "search",
    "tie_groups",
    "SEARCHERS",
]

log = logging.getLogger(__name__)

DEFAULT_NODE_BUDGET = 1_000_000
TIE_TOL = 1e-9


@dataclass
class SearchResult:
    sigma: CentralOrdering
    cost: float
    optimal: bool = False
    expanded: int = 0
    trace: list = field(default_factory=list)

    @property
    def order(self) -> tuple:
        return self.sigma.prefix


def _tol(cm: CostMatrix) -> float:
    scale = float(np.abs(cm.R).max()) if cm.n else 0.0
    return TIE_TOL * max(1.0, scale)


def tie_groups(cm: CostMatrix, order) -> tuple[tuple[int, int], ...]:
    """Maximal contiguous blocks of ``order`` whose pairs all cost the same
    in either direction.  Every internal reordering of such a block has the
    same total cost."""
    p = cm.index(order)
    R = cm.R
    tol = _tol(cm)
    groups = []
    start = 0
    for k in range(1, len(p) + 1):
        if k < len(p):
            block = p[start:k]
            x = p[k]
            if np.all(np.abs(R[x, block] - R[block, x]) <= tol):
                continue
        if k - start > 1:
            groups.append((start, k))
        start = k
    return tuple(groups)


def _result(cm: CostMatrix, idx, optimal: bool, expanded: int = 0, trace=None) -> SearchResult:
    order = tuple(cm.items[k] for k in idx)
    groups = tie_groups(cm, order) if optimal else ()
    return SearchResult(CentralOrdering(order, groups), cm.cost(order), optimal, expanded, trace or [])


def sort_rows(cm: CostMatrix, refine: bool = False) -> SearchResult:
    """Sort items by the column sums r_l = sum_k R[k, l] (ties: item id).

    With ``refine=True`` the result is polished by :func:`local_search`.
    """
    if cm.n == 0:
        raise ValueError("empty cost matrix")
    r = cm.R.sum(axis=0)
    idx = sorted(range(cm.n), key=lambda k: (r[k], cm.items[k]))
    res = _result(cm, idx, optimal=cm.n == 1)
    if refine:
        return local_search(res.sigma, cm)
    return res


def local_search(start, cm: CostMatrix) -> SearchResult:
    """Apply the best improving adjacent transposition until none improves.

    ``start`` is a :class:`CentralOrdering` or a sequence of items; items of
    ``cm`` missing from it are appended by id.
    """
    prefix = start.prefix if isinstance(start, CentralOrdering) else tuple(start)
    present = set(cm.items)
    order = [i for i in prefix if i in present]
    seen = set(order)
    order += [i for i in sorted(cm.items) if i not in seen]
    p = cm.index(order)
    R = cm.R
    tol = _tol(cm)
    cost = float(np.tril(R[np.ix_(p, p)], -1).sum())
    trace = [cost]
    while len(p) > 1:
        a, b = p[:-1], p[1:]
        # swapping neighbours (a above b) -> (b above a)
        delta = R[a, b] - R[b, a]
        k = int(np.argmin(delta))
        if not delta[k] < -tol:
            break
        p[k], p[k + 1] = p[k + 1], p[k]
        cost += float(delta[k])
        trace.append(cost)
    res = _result(cm, p, optimal=cm.n == 1, trace=trace)
    return res


def greedy_search(cm: CostMatrix) -> SearchResult:
    """Depth-first descent taking the child with the smallest C + A."""
    if cm.n == 0:
        raise ValueError("empty cost matrix")
    R = cm.R
    M = np.minimum(R, R.T)
    remaining = list(range(cm.n))
    colsum = R.sum(axis=0)  # cost of placing k next, over remaining items
    msum = M.sum(axis=1)
    path = []
    while remaining:
        rem = np.array(remaining)
        # C increment is colsum[k]; bound drops by msum[k]
        score = colsum[rem] - msum[rem]
        k = int(rem[np.argmin(score)])  # first minimum -> lowest index
        path.append(k)
        remaining.remove(k)
        colsum -= R[k, :]
        msum -= M[:, k]
    return _result(cm, path, optimal=cm.n == 1)


def bbound_r(cm: CostMatrix, node_budget: int = DEFAULT_NODE_BUDGET, incumbent: SearchResult | None = None) -> SearchResult:
    """Exact best-first branch and bound over item prefixes.

    Each node stores its path, the path cost C and the admissible bound
    A = sum over unordered remaining pairs of min(R[a, b], R[b, a]).  The
    first complete path taken off the queue is optimal.  A heuristic
    incumbent prunes the queue; if ``node_budget`` expansions are used up
    the incumbent is returned with ``optimal=False``.
    """
    n = cm.n
    if n == 0:
        raise ValueError("empty cost matrix")
    if n == 1:
        return _result(cm, [0], optimal=True)
    R = cm.R
    M = np.minimum(R, R.T)
    tol = _tol(cm)
    if incumbent is None:
        incumbent = sort_rows(cm, refine=True)
    upper = incumbent.cost

    full = (1 << n) - 1
    A0 = float(np.triu(M, 1).sum())
    # heap entries: (T, -depth, path, C, A, mask); path tuples compare lexicographically
    heap = [(A0, 0, (), 0.0, A0, 0)]
    best_c = {0: 0.0}
    expanded = 0
    while heap:
        T, negd, path, C, A, mask = heapq.heappop(heap)
        if mask == full:
            return _result(cm, path, optimal=True, expanded=expanded)
        if best_c.get(mask, np.inf) < C - tol:
            continue
        if expanded >= node_budget:
            log.warning("bbound_r node budget %d exhausted; returning heuristic ordering", node_budget)
            incumbent.expanded = expanded
            incumbent.optimal = False
            return incumbent
        expanded += 1
        rem = np.array([k for k in range(n) if not mask >> k & 1])
        sub = R[np.ix_(rem, rem)]
        dC = sub.sum(axis=0)
        dA = M[np.ix_(rem, rem)].sum(axis=1)
        last = len(rem) == 2
        for pos, k in enumerate(rem.tolist()):
            c2 = C + float(dC[pos])
            a2 = A - float(dA[pos])
            if a2 < 0:
                a2 = 0.0
            t2 = c2 + a2
            if t2 > upper + tol:
                continue
            m2 = mask | (1 << k)
            p2 = path + (k,)
            if last:
                # one item left: its placement is forced and free
                other = int(rem[1 - pos])
                m2 = full
                p2 = p2 + (other,)
                a2 = 0.0
                t2 = c2
            prev = best_c.get(m2)
            if prev is not None and prev <= c2 + tol:
                continue
            best_c[m2] = c2
            heapq.heappush(heap, (round(t2, 9), -len(p2), p2, c2, a2, m2))
    # the incumbent itself was pruned only if nothing beats it
    incumbent.optimal = True
    incumbent.expanded = expanded
    incumbent.sigma = CentralOrdering(incumbent.sigma.prefix, tie_groups(cm, incumbent.sigma.prefix))
    return incumbent


def search(cm: CostMatrix, searcher: str = "bbound", node_budget: int = DEFAULT_NODE_BUDGET,
           start=None) -> SearchResult:
    """Dispatch to a named searcher.

    ``start`` (an ordering) seeds the heuristics: the result is never worse
    than a local search from ``start``.
    """
    if searcher == "bbound":
        inc = sort_rows(cm, refine=True)
        if start is not None:
            alt = local_search(start, cm)
            if alt.cost < inc.cost:
                inc = alt
        return bbound_r(cm, node_budget=node_budget, incumbent=inc)
    if searcher == "greedy":
        res = greedy_search(cm)
    elif searcher in ("sortrows", "sort_rows"):
        res = sort_rows(cm, refine=True)
    else:
        raise ValueError(f"unknown searcher {searcher!r}")
    if start is not None:
        alt = local_search(start, cm)
        if alt.cost < res.cost - _tol(cm):
            res = alt
    return res


SEARCHERS = ("bbound", "greedy", "sortrows")
