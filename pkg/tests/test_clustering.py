import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from igmrank.clustering import (
    SCALE_BOUNDS,
    classification_error,
    ebms,
    em_mixture,
    kernel_weights,
    kmeans,
    scale_rhs,
    solve_scale,
)
from igmrank.data import generate_mixture
from igmrank.estimation import fit_single_theta
from igmrank.model import IGMParams, ThetaVector, sample
from igmrank.rankings import CentralOrdering, kendall_topt_matrix
from igmrank.stats import accumulate


@pytest.fixture(scope="module")
def small_mixture():
    ds, labels, centers = generate_mixture((1.5, 1.5), per_cluster=30, outliers=0, t=4, universe=200, seed=3)
    return ds.rankings, labels


def test_solve_scale_examples():
    assert solve_scale(1 / 3, 2) == pytest.approx(math.log(2), abs=1e-6)
    for t in (2, 4, 8):
        for th in (0.1, 0.7, 2.0):
            assert solve_scale(scale_rhs(th, t), t) == pytest.approx(th, abs=1e-8)
    with pytest.raises(ValueError):
        solve_scale(0.5, 1)


def test_scale_rhs_monotone_and_bounded():
    grid = np.linspace(0.01, 10, 400)
    for t in (2, 4, 8):
        r = scale_rhs(grid, t)
        assert np.all(np.diff(r) < 0)
        assert np.all(r < t * (t - 1) / 4) and np.all(r > 0)
        assert scale_rhs(1e-5, t) == pytest.approx(t * (t - 1) / 4, rel=1e-3)


def test_solve_scale_clamps():
    th, flag = solve_scale(100.0, 4, with_flag=True)
    assert flag and th == SCALE_BOUNDS[0]
    th, flag = solve_scale(0.0, 4, with_flag=True)
    assert flag and th == SCALE_BOUNDS[1]


@given(st.integers(2, 12), st.floats(0.0, 20.0))
def test_kernel_weights_rows_sum_to_one(n, theta):
    rng = np.random.default_rng(n)
    d = rng.integers(0, 30, (n, n)).astype(float)
    d = np.triu(d, 1) + np.triu(d, 1).T
    a = kernel_weights(d, theta)
    assert np.allclose(a.sum(axis=1), 1.0)
    assert np.all(a > 0) and np.all(a <= 1)


def test_classification_error_examples():
    truth = [0] * 150 + [1] * 150 + [2] * 150 + list(range(3, 53))
    assert classification_error(truth, truth) == 0
    perm = {k: (k * 7 + 3) % 53 for k in range(53)}
    assert classification_error([perm[x] for x in truth], truth) == 0
    assert classification_error([0] * 500, truth) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        classification_error([0, 1], [0])


def test_ebms_small(small_mixture):
    data, labels = small_mixture
    res = ebms(data)
    assert res.converged and not res.cycled and res.iterations <= 10
    assert classification_error(res.clustering, labels) <= 0.05
    assert all(len(r) == 4 for r in res.clustering.representatives.values())
    with pytest.raises(ValueError):
        ebms([(1, 2), (1, 2, 3)])
    with pytest.raises(ValueError):
        ebms([])


def test_ebms_degenerate_inputs():
    res = ebms([(1, 2, 3)] * 5)
    assert res.clustering.n_clusters == 1 and res.iterations == 0
    res = ebms([(1, 2, 3), (4, 5, 6)], scale=0.5)
    assert res.scales[0] == 0.5


def test_kmeans(small_mixture):
    data, labels = small_mixture
    one = kmeans(data, 1, seed=0)
    glob = fit_single_theta(accumulate(data)).sigma.prefix[:4]
    assert kendall_topt_matrix(data, [one.centers[0]]).sum() <= kendall_topt_matrix(data, [glob]).sum()
    two = kmeans(data, 2, seed=0)
    assert classification_error(two.clustering, labels) <= 0.1
    for before, after in two.trace:
        assert after <= before
    with pytest.raises(ValueError):
        kmeans(data, 0)


def test_kmeans_well_separated_three():
    ds, labels, _ = generate_mixture((1.5, 1.5, 1.5), per_cluster=40, outliers=0, t=5, universe=300, seed=9)
    res = kmeans(ds.rankings, 3, seed=1)
    assert 1 - classification_error(res.clustering, labels) >= 0.9


def test_em(small_mixture):
    data, labels = small_mixture
    res = em_mixture(data, 2, seed=0)
    ll = res.log_lik
    assert all(b >= a - 1e-9 for a, b in zip(ll, ll[1:]))
    assert np.allclose(res.responsibilities.sum(axis=1), 1)
    assert res.weights.sum() == pytest.approx(1)
    assert classification_error(res.clustering, labels) <= 0.1


def test_em_single_component_matches_single_theta():
    p = IGMParams(CentralOrdering((5, 3, 8, 1)), ThetaVector.constant(1.0, 4))
    data = sample(p, 4, seed=2, size=60)
    res = em_mixture(data, 1, seed=0)
    fit = fit_single_theta(accumulate(data))
    assert res.params[0][1] == pytest.approx(fit.theta[0], abs=1e-9)
    assert res.log_lik[-1] == pytest.approx(fit.log_lik, abs=1e-6)
    assert np.all(res.responsibilities == 1)
