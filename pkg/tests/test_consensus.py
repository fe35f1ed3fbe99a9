import numpy as np
import pytest
from hypothesis import given, strategies as st

from igmrank.consensus import bbound_r, greedy_search, local_search, search, sort_rows, tie_groups
from igmrank.stats import CostMatrix, accumulate
from oracles import all_costs, brute_min_cost


def random_cm(rng, n, integer=True):
    R = rng.integers(0, 6, (n, n)).astype(float) if integer else rng.uniform(0, 3, (n, n))
    return CostMatrix(tuple(range(10, 10 + n)), R)


def test_two_rankings_bbound(two_rankings):
    cm = accumulate(two_rankings).matrix("aggregate")
    res = bbound_r(cm)
    assert res.optimal and res.cost == 1
    assert res.order[:2] == (1, 2)
    assert res.sigma.groups()[-1] in ((3, 4), (4, 3))


def test_single_item():
    cm = CostMatrix((5,), np.zeros((1, 1)))
    for res in (bbound_r(cm), sort_rows(cm), greedy_search(cm)):
        assert res.order == (5,) and res.cost == 0
    with pytest.raises(ValueError):
        bbound_r(CostMatrix((), np.zeros((0, 0))))
    with pytest.raises(ValueError):
        search(cm, "nope")


def test_bbound_matches_brute_force():
    rng = np.random.default_rng(1)
    for trial in range(60):
        cm = random_cm(rng, int(rng.integers(2, 8)), integer=trial % 2 == 0)
        best = brute_min_cost(cm.R)
        res = bbound_r(cm)
        assert res.optimal
        assert res.cost == pytest.approx(best, abs=1e-9)
        assert greedy_search(cm).cost >= best - 1e-9
        assert sort_rows(cm).cost >= best - 1e-9


def test_tie_groups_are_exactly_interchangeable():
    rng = np.random.default_rng(4)
    for _ in range(40):
        cm = random_cm(rng, 5)
        cm.R[:] = np.minimum(cm.R, 2)  # plenty of ties
        np.fill_diagonal(cm.R, 0)
        res = bbound_r(cm)
        for a, b in tie_groups(cm, res.order):
            block = list(res.order[a:b])
            for k in range(len(block) - 1):
                swapped = list(res.order)
                swapped[a + k], swapped[a + k + 1] = swapped[a + k + 1], swapped[a + k]
                assert cm.cost(swapped) == pytest.approx(res.cost)


def test_local_search_recovers_optimum_after_swap():
    rng = np.random.default_rng(9)
    for _ in range(30):
        cm = random_cm(rng, 6, integer=False)
        opt = bbound_r(cm)
        order = list(opt.order)
        k = int(rng.integers(0, 5))
        order[k], order[k + 1] = order[k + 1], order[k]
        res = local_search(order, cm)
        assert res.cost == pytest.approx(opt.cost)
        assert all(b <= a + 1e-12 for a, b in zip(res.trace, res.trace[1:]))
        assert res.cost == pytest.approx(cm.cost(res.order))


def test_local_search_appends_missing_items():
    cm = CostMatrix((1, 2, 3), np.ones((3, 3)))
    assert set(local_search((3,), cm).order) == {1, 2, 3}


def test_cost_decomposes_into_pairs():
    rng = np.random.default_rng(2)
    cm = random_cm(rng, 6, integer=False)
    perms, costs = all_costs(cm.R)
    for p, c in zip(perms[::37], costs[::37]):
        order = [cm.items[k] for k in p]
        assert cm.cost(order) == pytest.approx(c)
        # reversal pays the complementary pairs
        total = np.triu(cm.R + cm.R.T, 1).sum()
        assert cm.cost(order) + cm.cost(order[::-1]) == pytest.approx(total)


def test_node_budget_flag():
    rng = np.random.default_rng(0)
    cm = random_cm(rng, 9, integer=False)
    res = bbound_r(cm, node_budget=1)
    assert not res.optimal
    assert res.cost >= bbound_r(cm).cost - 1e-9


def test_search_deterministic_and_respects_start():
    rng = np.random.default_rng(12)
    cm = random_cm(rng, 7)
    for name in ("bbound", "greedy", "sortrows"):
        a, b = search(cm, name), search(cm, name)
        assert a.order == b.order and a.cost == b.cost
    opt = bbound_r(cm)
    assert search(cm, "greedy", start=opt.order).cost == pytest.approx(opt.cost)


@given(st.integers(2, 7), st.integers(0, 10_000))
def test_searchers_bounded_by_optimum(n, seed):
    cm = random_cm(np.random.default_rng(seed), n)
    best = brute_min_cost(cm.R)
    assert bbound_r(cm).cost == pytest.approx(best)
    for name in ("greedy", "sortrows"):
        assert search(cm, name).cost >= best - 1e-9
