"""Slow, independent reference implementations used by the tests."""
from __future__ import annotations

import functools
import itertools
import math

import numpy as np
from scipy import integrate


def codes_by_zero_counting(pi, sigma_items):
    """Codes from the permutation matrix picture.

    ``sigma_items`` lists sigma's first M items (M large enough).  Column j
    of Sigma^T Pi has its 1 at sigma's row of pi_j; the code counts the
    rows above it that are still free (not used by an earlier column).
    """
    used = set()
    out = []
    for item in pi:
        row = sigma_items.index(item)
        out.append(sum(1 for above in sigma_items[:row] if above not in used))
        used.add(item)
    return tuple(out)


def kendall(x, y):
    pos = {item: k for k, item in enumerate(y)}
    return sum(1 for a, b in itertools.combinations(x, 2) if pos[a] > pos[b])


def extensions(lst, union):
    rest = [i for i in union if i not in lst]
    return [tuple(lst) + p for p in itertools.permutations(rest)]


def hausdorff_kendall(a, b):
    """Hausdorff Kendall distance between the extension sets of two top lists."""
    union = sorted(set(a) | set(b))
    ea, eb = extensions(a, union), extensions(b, union)
    d = np.array([[kendall(x, y) for y in eb] for x in ea])
    return int(max(d.min(axis=1).max(), d.min(axis=0).max()))


def all_costs(R):
    """Lower-triangle cost of every ordering of range(n): (perms, costs)."""
    n = len(R)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    cost = np.zeros(len(perms))
    for a in range(n):
        for b in range(a + 1, n):
            # item at position a sits above the item at position b
            cost += R[perms[:, b], perms[:, a]]
    return perms, cost


def brute_min_cost(R) -> float:
    if len(R) == 1:
        return 0.0
    return float(all_costs(np.asarray(R, dtype=float))[1].min())


def log_prob_direct(pi, sigma_items, theta):
    s = codes_by_zero_counting(pi, sigma_items)
    return -sum(th * sj - math.log1p(-math.exp(-th)) for th, sj in zip(theta, s))


def theta_density(theta, S, m):
    """Normalised exp(-S theta) (1 - exp(-theta))^m by quadrature."""
    f = lambda x: math.exp(-S * x) * (-math.expm1(-x)) ** m
    Z = integrate.quad(f, 0, math.inf, limit=200)[0]
    return f(theta) / Z


def theta_cdf_table(S, m, upper=None, n=4000):
    """(grid, CDF) of the normalised theta density by piecewise quadrature."""
    f = lambda x: math.exp(-S * x) * (-math.expm1(-x)) ** m
    Z = integrate.quad(f, 0, math.inf, limit=200)[0]
    if upper is None:
        upper = 60.0 / S + 5.0
    grid = np.linspace(0, upper, n)
    pieces = [integrate.quad(f, lo, hi)[0] for lo, hi in zip(grid[:-1], grid[1:])]
    cdf = np.concatenate([[0.0], np.cumsum(pieces)]) / Z
    return grid, np.minimum(cdf, 1.0)


def random_prior(rng, items, t, nu=None):
    """Valid hyperparameters with random sparse support over ``items``."""
    from igmrank.bayes import PriorHyper

    items = list(items)
    nu = float(rng.uniform(0.2, 5.0)) if nu is None else nu
    k = int(rng.integers(1, len(items) + 1))
    lam = {int(i): float(rng.uniform(0.01, 1)) for i in rng.choice(items, size=k, replace=False)}
    total = sum(lam.values())
    lam = {i: v / total for i, v in lam.items()}
    Lam = {}
    for j in range(2, t + 1):
        pairs = [(a, b) for a in items for b in items if a != b]
        pick = rng.choice(len(pairs), size=int(rng.integers(1, min(len(pairs), 8) + 1)), replace=False)
        w = rng.uniform(0.01, 1, len(pick))
        w *= (j - 1) / w.sum()
        Lam[j] = {(int(pairs[p][0]), int(pairs[p][1])): float(x) for p, x in zip(pick, w)}
    return PriorHyper(nu, t, lam, Lam)


@functools.lru_cache(maxsize=None)
def _hausdorff_canonical(a, b):
    union = sorted(set(a) | set(b))
    ea = np.array(extensions(a, union))
    eb = np.array(extensions(b, union))
    u = len(union)
    pos_a = np.argsort(ea, axis=1)  # items are 0..u-1 after relabelling
    pos_b = np.argsort(eb, axis=1)
    i, j = np.triu_indices(u, k=1)
    sa = pos_a[:, i] < pos_a[:, j]
    sb = pos_b[:, i] < pos_b[:, j]
    d = (sa[:, None, :] != sb[None, :, :]).sum(axis=2)
    return int(max(d.min(axis=1).max(), d.min(axis=0).max()))


def hausdorff_kendall_fast(a, b):
    """Same quantity as :func:`hausdorff_kendall`, vectorised and cached.

    Items are relabelled by first appearance, which leaves every
    Kendall distance unchanged.
    """
    label = {}
    for x in tuple(a) + tuple(b):
        label.setdefault(x, len(label))
    return _hausdorff_canonical(tuple(label[x] for x in a), tuple(label[x] for x in b))
