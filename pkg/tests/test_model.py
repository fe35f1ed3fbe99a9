import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from igmrank.model import IGMParams, ThetaVector, log_likelihood, log_prob, log_psi, psi, sample, sample_codes
from igmrank.rankings import CentralOrdering, codes_of
from igmrank.stats import accumulate
from oracles import log_prob_direct

IDENT = CentralOrdering.identity()


def test_psi_examples():
    assert psi(math.log(2)) == pytest.approx(2.0, abs=1e-12)
    assert log_psi(math.log(2)) == pytest.approx(math.log(2), abs=1e-12)
    # expm1 keeps full precision near zero
    assert psi(1e-8) == pytest.approx(1e8 + 0.5, rel=1e-12)
    assert psi(50.0) == pytest.approx(1.0, abs=1e-20)
    for bad in (0.0, -1.0, float("nan")):
        with pytest.raises(ValueError):
            psi(bad)


def test_theta_vector():
    with pytest.raises(ValueError):
        ThetaVector([1.0, 0.0])
    with pytest.raises(ValueError):
        ThetaVector([])
    with pytest.raises(ValueError):
        ThetaVector([1.0, 2.0, 3.0], tied_from=2)
    th = ThetaVector.tied([2.0], 0.5, 4)
    assert tuple(th) == (2.0, 0.5, 0.5, 0.5) and th.tied_from == 2
    assert ThetaVector.constant(0.3, 3).is_constant()
    assert tuple(ThetaVector([1.0, 2.0]).extended(4)) == (1.0, 2.0, 2.0, 2.0)


def test_log_prob_examples():
    p = IGMParams(IDENT, ThetaVector.constant(math.log(2), 3))
    assert log_prob((1, 2, 3), p) == pytest.approx(-3 * math.log(2), abs=1e-12)
    assert log_prob((2, 1, 3), p) == pytest.approx(-4 * math.log(2), abs=1e-12)
    with pytest.raises(ValueError):
        log_prob((1, 2, 3, 4), p)


def test_log_prob_matches_direct_formula():
    rng = np.random.default_rng(5)
    for _ in range(100):
        sigma_items = [int(x) + 1 for x in rng.permutation(12)]
        pi = tuple(sigma_items[k] for k in rng.permutation(12)[: rng.integers(1, 6)])
        theta = rng.uniform(0.05, 3, len(pi))
        lp = log_prob(pi, IGMParams(CentralOrdering(tuple(sigma_items)), ThetaVector(theta)))
        assert lp == pytest.approx(log_prob_direct(pi, sigma_items, theta), abs=1e-12)


@given(st.lists(st.lists(st.integers(1, 6), min_size=1, max_size=4, unique=True).map(tuple), min_size=1, max_size=10),
       st.permutations(list(range(1, 7))), st.floats(0.05, 4.0), st.booleans())
def test_likelihood_from_stats_equals_sum(data, perm, th, constant):
    stats = accumulate(data)
    t = stats.t_max
    theta = ThetaVector.constant(th, t) if constant else ThetaVector([th * (1 + 0.3 * j) for j in range(t)])
    params = IGMParams(CentralOrdering(tuple(perm)), theta)
    assert log_likelihood(stats, params) == pytest.approx(sum(log_prob(p, params) for p in data), abs=1e-9)


def test_doubling_data_doubles_log_likelihood(two_rankings):
    params = IGMParams(CentralOrdering((1, 2, 3, 4)), ThetaVector([0.4, 0.9, 1.3]))
    once = log_likelihood(accumulate(two_rankings), params)
    assert log_likelihood(accumulate(two_rankings * 2), params) == pytest.approx(2 * once, abs=1e-12)


def test_mode_is_most_probable():
    sigma = CentralOrdering((4, 2, 7))
    p = IGMParams(sigma, ThetaVector([0.3, 1.1, 0.2]))
    mode = sigma.top(3)
    best = log_prob(mode, p)
    rng = np.random.default_rng(0)
    for _ in range(200):
        pi = tuple(int(x) + 1 for x in rng.permutation(9)[:3])
        if pi != mode:
            assert log_prob(pi, p) < best


def test_sample_deterministic_and_distinct():
    p = IGMParams(CentralOrdering((3, 1, 2)), ThetaVector.constant(0.5, 4))
    a = sample(p, 4, seed=11, size=50)
    assert a == sample(p, 4, seed=11, size=50)
    assert all(len(set(x)) == 4 for x in a)
    assert isinstance(sample(p, 2, seed=1), tuple)
    with pytest.raises(ValueError):
        sample(p, 5, seed=1)
    with pytest.raises(ValueError):
        sample(p, 0, seed=1)


def test_sample_code_frequencies():
    rng = np.random.default_rng(2024)
    n = 50_000
    theta = [0.4, 2.0]
    codes = sample_codes(theta, n, rng)
    for col, th in enumerate(theta):
        counts = np.bincount(codes[:, col], minlength=8)[:8]
        p = np.exp(-th * np.arange(8)) * -np.expm1(-th)
        sd = np.sqrt(n * p * (1 - p))
        assert np.all(np.abs(counts - n * p) <= 4 * sd + 1)


def test_sampled_codes_round_trip():
    sigma = CentralOrdering((9, 4, 1))
    p = IGMParams(sigma, ThetaVector.constant(0.8, 5))
    rng = np.random.default_rng(8)
    for pi in sample(p, 5, seed=rng, size=100):
        s = codes_of(pi, sigma)
        assert all(x >= 0 for x in s) and len(s) == 5


def test_code_frequency_z_scores_are_calibrated():
    # over many seeds the per-k z statistics behave like standard normals
    th, n = math.log(2), 20_000
    k = np.arange(11)
    p = np.exp(-th * k) * -np.expm1(-th)
    Z = []
    for seed in range(150):
        c = sample_codes([th], n, np.random.default_rng(seed))[:, 0]
        Z.append((np.bincount(c, minlength=11)[:11] - n * p) / np.sqrt(n * p * (1 - p)))
    Z = np.array(Z)
    assert np.all(np.abs(Z.mean(axis=0)) < 0.35)
    assert np.all(np.abs(Z.std(axis=0) - 1) < 0.25)
