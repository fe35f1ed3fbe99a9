import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from igmrank.rankings import CentralOrdering, codes_of
from igmrank.stats import CostMatrix, accumulate, lower_triangle_cost, rank_costs, weighted_combine

A, B, C, D = 1, 2, 3, 4


def datasets(n_items=6, max_t=4, max_n=8):
    lst = st.lists(st.integers(1, n_items), min_size=1, max_size=max_t, unique=True).map(tuple)
    return st.lists(lst, min_size=1, max_size=max_n)


def test_two_rankings_counts(two_rankings):
    s = accumulate(two_rankings)
    assert list(s.N_j) == [2, 2, 2]
    assert s.T == 6
    assert s.per_rank[0].q == {A: 2}
    assert s.per_rank[1].q == {B: 2}
    assert s.per_rank[2].q == {C: 1, D: 1}
    assert s.per_rank[1].Q == {(B, A): 2}
    assert s.per_rank[2].Q == {(C, A): 1, (C, B): 1, (D, A): 1, (D, B): 1}
    assert s.aggregate_q == {A: 2, B: 2, C: 1, D: 1}


def test_single_and_replicated():
    s = accumulate([(7,)])
    assert s.N == 1 and s.T == 1 and s.per_rank[0].q == {7: 1} and s.per_rank[0].Q == {}
    s = accumulate([(1, 2)] * 5)
    assert list(s.N_j) == [5, 5] and s.per_rank[1].Q == {(2, 1): 5}


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        accumulate([])
    with pytest.raises(ValueError):
        accumulate([(1, 2, 1)])
    with pytest.raises(ValueError):
        weighted_combine([(0.0, accumulate([(1,)]))])


def test_two_rankings_costs(two_rankings):
    s = accumulate(two_rankings)
    assert lower_triangle_cost(s, "aggregate", CentralOrdering((A, B, C, D))) == 1
    assert lower_triangle_cost(s, "aggregate", CentralOrdering((A, B, D, C))) == 1
    assert lower_triangle_cost(accumulate([(3, 1, 2)]), 2, CentralOrdering((3, 1, 2))) == 0
    with pytest.raises(ValueError):
        lower_triangle_cost(s, "aggregate", CentralOrdering((A, B, C)))


@given(datasets())
def test_invariants(data):
    s = accumulate(data)
    assert s.T == pytest.approx(sum(s.N_j))
    for rs in s.per_rank:
        assert sum(rs.q.values()) == pytest.approx(rs.N)
        rowsum = {}
        for (i, _), v in rs.Q.items():
            rowsum[i] = rowsum.get(i, 0) + v
        for i, v in rs.q.items():
            assert rowsum.get(i, 0) == pytest.approx((rs.j - 1) * v)
    n_keys = sum(len(rs.Q) for rs in s.per_rank)
    assert n_keys <= sum(len(p) * (len(p) - 1) // 2 for p in data)
    for i, v in s.aggregate_q.items():
        assert v == sum(1 for p in data if i in p)


@given(datasets(), st.randoms(use_true_random=False))
def test_order_independent(data, rnd):
    shuffled = list(data)
    rnd.shuffle(shuffled)
    a, b = accumulate(data), accumulate(shuffled)
    for ra, rb in zip(a.per_rank, b.per_rank):
        assert ra.q == pytest.approx(rb.q) and ra.Q == pytest.approx(rb.Q)


@given(datasets(n_items=5, max_t=3, max_n=6))
def test_codes_sum_equals_rank_cost(data):
    """Per rank, the summed codes over the data equal L_sigma(R_j) for every sigma."""
    s = accumulate(data)
    items = s.items
    for perm in itertools.permutations(items):
        sigma = CentralOrdering(perm)
        codes = np.zeros(s.t_max)
        for pi in data:
            c = codes_of(pi, sigma)
            codes[: len(c)] += c
        assert np.allclose(rank_costs(s, sigma), codes)


@given(datasets(), datasets())
def test_weighted_combine_linear(d1, d2):
    a, b = accumulate(d1), accumulate(d2)
    both = weighted_combine([(1, a), (1, b)])
    ref = accumulate(d1 + d2)
    for x, y in zip(both.per_rank, ref.per_rank):
        assert x.q == pytest.approx(y.q) and x.Q == pytest.approx(y.Q) and x.N == pytest.approx(y.N)
    doubled = weighted_combine([(2.0, a)])
    assert doubled.T == pytest.approx(2 * a.T)
    half = weighted_combine([(0.5, a), (0.5, a)])
    assert half.per_rank[0].q == pytest.approx(a.per_rank[0].q)


def test_weighted_accumulate_matches_combine():
    data = [(1, 2, 3), (2, 4), (3, 1, 5)]
    w = [0.2, 1.5, 3.0]
    s = accumulate(data, weights=w)
    ref = weighted_combine([(wi, accumulate([p])) for wi, p in zip(w, data)])
    assert s.per_rank[2].Q == pytest.approx(ref.per_rank[2].Q)


@given(datasets(n_items=7))
def test_dense_matrix_cost_matches_sparse(data):
    s = accumulate(data)
    rng = np.random.default_rng(len(data))
    cm = s.matrix("aggregate")
    assert np.all(np.diag(cm.R) == 0)
    for _ in range(5):
        perm = tuple(rng.permutation(s.items).tolist())
        assert cm.cost(perm) == pytest.approx(lower_triangle_cost(s, "aggregate", CentralOrdering(perm)))
        theta = rng.uniform(0.1, 2, s.t_max)
        assert s.matrix(theta).cost(perm) == pytest.approx(lower_triangle_cost(s, theta, CentralOrdering(perm)))


def test_cost_matrix_restrict():
    cm = CostMatrix((1, 2, 3), np.array([[0, 1, 2], [3, 0, 4], [5, 6, 0]], dtype=float))
    sub = cm.restrict((3, 1))
    assert sub.items == (3, 1) and sub.R[0, 1] == 5
