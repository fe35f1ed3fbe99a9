"""Top-t orderings, central orderings, stagewise codes and distances.

Items are positive integers.  A top-t ordering is a tuple of distinct item
ids, best first.  A :class:`CentralOrdering` is a finite prefix followed by
every remaining positive integer in increasing order, which makes it a total
order over the (unbounded) item universe.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CentralOrdering",
    "as_ordering",
    "codes_of",
    "ordering_from_codes",
    "d_theta",
    "kendall_topt",
    "kendall_topt_matrix",
    "inversions",
]


def as_ordering(items: Iterable[int]) -> tuple[int, ...]:
    """Validate and return a top-t ordering as a tuple of ints."""
    pi = tuple(int(i) for i in items)
    if not pi:
        raise ValueError("a top-t ordering needs at least one item")
    if len(set(pi)) != len(pi):
        raise ValueError(f"repeated item in ordering {pi}")
    if min(pi) < 1:
        raise ValueError(f"item ids must be positive integers, got {pi}")
    return pi


@dataclass(frozen=True)
class CentralOrdering:
    """Finite prefix plus the canonical tail (unlisted ids ascending).

    ``tie_groups`` holds half-open ``(start, stop)`` prefix position ranges
    whose internal order is not determined by the data.
    """

    prefix: tuple[int, ...] = ()
    tie_groups: tuple[tuple[int, int], ...] = ()
    _rank: dict = field(default=None, init=False, repr=False, compare=False)
    _sorted: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        prefix = tuple(int(i) for i in self.prefix)
        if len(set(prefix)) != len(prefix):
            raise ValueError("central ordering prefix has repeated items")
        if prefix and min(prefix) < 1:
            raise ValueError("item ids must be positive integers")
        groups = tuple(sorted((int(a), int(b)) for a, b in self.tie_groups))
        last = 0
        for a, b in groups:
            if not (last <= a < b <= len(prefix)):
                raise ValueError(f"invalid tie group {(a, b)}")
            last = b
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "tie_groups", groups)
        object.__setattr__(self, "_rank", {item: r for r, item in enumerate(prefix, 1)})
        object.__setattr__(self, "_sorted", sorted(prefix))

    @classmethod
    def identity(cls) -> "CentralOrdering":
        return cls(())

    def __len__(self):
        return len(self.prefix)

    def rank(self, item: int) -> int:
        """1-based rank of ``item``, using the tail rule for unlisted ids."""
        r = self._rank.get(item)
        if r is not None:
            return r
        # unlisted ids follow the prefix in increasing order
        below = bisect.bisect_left(self._sorted, item)
        return len(self.prefix) + item - below

    def item_at(self, rank: int) -> int:
        """Inverse of :meth:`rank`."""
        if rank < 1:
            raise ValueError("ranks start at 1")
        if rank <= len(self.prefix):
            return self.prefix[rank - 1]
        k = rank - len(self.prefix)
        # k-th positive integer that is not in the prefix
        x = k
        for p in self._sorted:
            if p <= x:
                x += 1
            else:
                break
        return x

    def top(self, t: int) -> tuple[int, ...]:
        """First ``t`` items of the full ordering."""
        return tuple(self.item_at(r) for r in range(1, t + 1))

    def covers(self, items: Iterable[int]) -> bool:
        return all(i in self._rank for i in items)

    def groups(self) -> list[tuple[int, ...]]:
        """Prefix split into blocks; tie groups become multi-item blocks."""
        out, pos = [], 0
        for a, b in self.tie_groups:
            out.extend((item,) for item in self.prefix[pos:a])
            out.append(self.prefix[a:b])
            pos = b
        out.extend((item,) for item in self.prefix[pos:])
        return out


def codes_of(pi: Sequence[int], sigma: CentralOrdering) -> tuple[int, ...]:
    """Stagewise codes s_1..s_t of ``pi`` relative to ``sigma``.

    s_j counts the items of sigma that precede pi[j] and have not been used
    by pi[0..j-1].
    """
    ranks = [sigma.rank(i) for i in pi]
    codes = []
    for j, r in enumerate(ranks):
        codes.append(r - 1 - sum(1 for rp in ranks[:j] if rp < r))
    return tuple(codes)


def ordering_from_codes(s: Sequence[int], sigma: CentralOrdering) -> tuple[int, ...]:
    """Rebuild the top-t ordering whose codes under ``sigma`` are ``s``."""
    used: list[int] = []  # ranks already taken, kept sorted
    out = []
    for code in s:
        code = int(code)
        if code < 0:
            raise ValueError("codes must be non-negative")
        r = code + 1
        for u in used:
            if u <= r:
                r += 1
            else:
                break
        bisect.insort(used, r)
        out.append(sigma.item_at(r))
    return tuple(out)


def d_theta(pi: Sequence[int], sigma: CentralOrdering, theta: Sequence[float]) -> float:
    """Weighted code distance sum_j theta_j * s_j."""
    if len(theta) < len(pi):
        raise ValueError(f"theta has {len(theta)} entries, ordering has {len(pi)}")
    if any(not th > 0 for th in theta):
        raise ValueError("theta entries must be strictly positive")
    return float(sum(th * s for th, s in zip(theta, codes_of(pi, sigma))))


def inversions(order: Sequence[int], reference: Sequence[int]) -> int:
    """Number of discordant pairs between two orderings of the same items."""
    pos = {item: k for k, item in enumerate(reference)}
    seq = [pos[i] for i in order]
    return sum(1 for a, b in combinations(seq, 2) if a > b)


def kendall_topt(a: Sequence[int], b: Sequence[int]) -> int:
    """Hausdorff Kendall distance between two top-t lists.

    Each list is read as a partial order on the union of both item sets:
    its own items in list order, all other union items tied below them.
    The distance is the Hausdorff distance between the two sets of linear
    extensions, which reduces to the forced disagreements plus the larger
    of the two free blocks:

        d = F + max(C(|b \\ a|, 2), C(|a \\ b|, 2))
    """
    pos_a = {item: k for k, item in enumerate(a)}
    pos_b = {item: k for k, item in enumerate(b)}
    common = [i for i in a if i in pos_b]
    c = len(common)
    only_a = len(a) - c
    only_b = len(b) - c

    forced = only_a * only_b
    # shared pairs ordered differently
    for x, y in combinations(common, 2):
        if pos_b[x] > pos_b[y]:
            forced += 1
    # one shared item, one item listed only in a (resp. b)
    for k, item in enumerate(a):
        if item not in pos_b:
            forced += sum(1 for other in a[k + 1:] if other in pos_b)
    for k, item in enumerate(b):
        if item not in pos_a:
            forced += sum(1 for other in b[k + 1:] if other in pos_a)

    return forced + max(only_b * (only_b - 1) // 2, only_a * (only_a - 1) // 2)


def kendall_topt_matrix(rows: Sequence[Sequence[int]], cols: Sequence[Sequence[int]] | None = None) -> np.ndarray:
    """Vectorised :func:`kendall_topt` for every (row, col) pair.

    Returns an int array of shape ``(len(rows), len(cols))``; ``cols``
    defaults to ``rows``.
    """
    symmetric = cols is None
    if symmetric:
        cols = rows
    elif len(rows) > len(cols):
        # the distance is symmetric; loop over the shorter side
        return kendall_topt_matrix(cols, rows).T
    vocab: dict[int, int] = {}
    for lst in list(rows) + ([] if symmetric else list(cols)):
        for item in lst:
            vocab.setdefault(item, len(vocab))
    tcol = max(len(c) for c in cols)
    # position (1-based) of each vocab item in each column list, 0 if absent
    P = np.zeros((len(cols), len(vocab) + 1), dtype=np.int32)
    lengths = np.empty(len(cols), dtype=np.int64)
    for r, lst in enumerate(cols):
        lengths[r] = len(lst)
        for k, item in enumerate(lst):
            P[r, vocab[item]] = k + 1
    unknown = len(vocab)  # column of zeros for row items unseen among cols

    out = np.zeros((len(rows), len(cols)), dtype=np.int64)
    pairs = {}
    for r, a in enumerate(rows):
        ta = len(a)
        idx = [vocab.get(item, unknown) for item in a]
        pb = P[:, idx]  # (ncols, ta): where a's items sit in each col
        present = pb > 0
        c = present.sum(axis=1)
        only_a = ta - c
        only_b = lengths - c
        forced = only_a * only_b
        if ta > 1:
            if ta not in pairs:
                pairs[ta] = np.triu_indices(ta, k=1)
            ii, jj = pairs[ta]
            both = present[:, ii] & present[:, jj]
            forced += (both & (pb[:, ii] > pb[:, jj])).sum(axis=1)
            forced += (~present[:, ii] & present[:, jj]).sum(axis=1)
        # items of b above a shared item but missing from a
        forced += np.where(present, pb - 1, 0).sum(axis=1) - c * (c - 1) // 2
        free = np.maximum(only_b * (only_b - 1) // 2, only_a * (only_a - 1) // 2)
        out[r] = forced + free
    return out
