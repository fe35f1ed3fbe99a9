"""Maximum-likelihood estimation of IGM parameters.

The objective is the negative log-likelihood

    J(theta, sigma) = sum_j [theta_j L_sigma(R_j) + N_j log psi(theta_j)]

For a fixed sigma every theta_j has the closed form log(1 + N_j / L_j); for
a fixed theta the sigma-step is a consensus search on sum_j theta_j R_j.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .consensus import DEFAULT_NODE_BUDGET, search
from .model import IGMParams, ThetaVector, log_psi
from .rankings import CentralOrdering
from .stats import CostMatrix, SuffStats

__all__ = [
    "FitResult",
    "THETA_CAP",
    "theta_mle",
    "fit_single_theta",
    "fit_general_theta",
    "fit_tied",
    "bic",
    "bic_select",
]

log = logging.getLogger(__name__)

THETA_CAP = 50.0
MAX_ITER = 200
REL_TOL = 1e-8


@dataclass
class FitResult:
    params: IGMParams
    neg_log_lik: float
    iterations: int = 1
    converged: bool = True
    exact_sigma: bool = False
    degenerate: bool = False
    history: list = field(default_factory=list)
    n_obs: float = 0.0

    @property
    def theta(self) -> ThetaVector:
        return self.params.theta

    @property
    def sigma(self) -> CentralOrdering:
        return self.params.sigma

    @property
    def log_lik(self) -> float:
        return -self.neg_log_lik


def theta_mle(count: float, cost: float, cap: float = THETA_CAP) -> tuple[float, bool]:
    """log(1 + count / cost), capped; the flag marks a capped (degenerate) value."""
    if cost <= 0:
        return cap, True
    th = math.log1p(count / cost)
    if th > cap:
        return cap, True
    return th, False


def _objective(theta: np.ndarray, L: np.ndarray, Nj: np.ndarray) -> float:
    return float(np.sum(theta * L + Nj * log_psi(theta)))


def _check(stats: SuffStats):
    if stats is None or stats.is_empty():
        raise ValueError("cannot fit an empty dataset")


def fit_single_theta(stats: SuffStats, searcher: str = "bbound", node_budget: int = DEFAULT_NODE_BUDGET,
                     theta_cap: float = THETA_CAP) -> FitResult:
    """One shared theta: sigma minimises L_sigma(R), then theta = log(1 + T / L)."""
    _check(stats)
    res = search(stats.matrix("aggregate"), searcher, node_budget)
    L = max(res.cost, 0.0)
    th, degenerate = theta_mle(stats.T, L, theta_cap)
    if degenerate:
        log.info("single-theta fit is degenerate (L=%g); theta capped at %g", L, th)
    theta = ThetaVector.constant(th, stats.t_max)
    J = th * L + stats.T * log_psi(th)
    return FitResult(IGMParams(res.sigma, theta), J, 1, True, res.optimal, degenerate, [J], stats.N)


def _rank_costs_dense(Rs: np.ndarray, p: np.ndarray) -> np.ndarray:
    sub = Rs[:, p][:, :, p]
    return np.tril(sub, -1).sum(axis=(1, 2))


def _alternate(stats: SuffStats, r: int, init_theta, tol: float, max_iter: int, searcher: str,
               node_budget: int, theta_cap: float) -> FitResult:
    t = stats.t_max
    if init_theta is None:
        theta = np.full(t, 0.1)
    else:
        theta = np.asarray(ThetaVector(init_theta).extended(t)[:t], dtype=float)
    if np.ptp(theta[r - 1:]) > 0:
        theta[r - 1:] = theta[r - 1:].mean()
    items = stats.items
    Rs = stats.rank_matrices(items)
    Nj = stats.N_j
    sigma = None
    history = []
    exact = True
    degenerate = False
    converged = False
    J_prev = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        cm = CostMatrix(items, np.tensordot(theta, Rs, axes=1))
        res = search(cm, searcher, node_budget, start=None if sigma is None else sigma.prefix)
        if sigma is not None and res.cost > cm.cost(sigma.prefix):
            # keep the previous ordering: the sigma-step must not increase J
            res.sigma, res.optimal = sigma, False
        sigma = res.sigma
        exact = res.optimal
        L = _rank_costs_dense(Rs, cm.index(sigma.prefix))
        L = np.maximum(L, 0.0)
        new = np.empty(t)
        flags = []
        for j in range(r - 1):
            new[j], f = theta_mle(Nj[j], L[j], theta_cap)
            flags.append(f)
        new[r - 1:], f = theta_mle(Nj[r - 1:].sum(), L[r - 1:].sum(), theta_cap)
        flags.append(f)
        theta = new
        degenerate = any(flags)
        J = _objective(theta, L, Nj)
        history.append(J)
        if abs(J_prev - J) < tol * (1.0 + abs(J)):
            converged = True
            break
        J_prev = J
    tv = ThetaVector(theta, tied_from=r if r < t or t == 1 else None)
    return FitResult(IGMParams(sigma, tv), history[-1], it, converged, exact, degenerate, history, stats.N)


def fit_general_theta(stats: SuffStats, init_theta: Sequence[float] | None = None, tol: float = REL_TOL,
                      max_iter: int = MAX_ITER, searcher: str = "bbound",
                      node_budget: int = DEFAULT_NODE_BUDGET, theta_cap: float = THETA_CAP) -> FitResult:
    """Alternate sigma-steps and closed-form theta-steps, one theta per rank.

    Stops when J changes by less than ``tol * (1 + |J|)`` or after
    ``max_iter`` rounds.  J never increases between rounds.
    """
    _check(stats)
    return _alternate(stats, stats.t_max, init_theta, tol, max_iter, searcher, node_budget, theta_cap)


def fit_tied(stats: SuffStats, r: int, init_theta: Sequence[float] | None = None, tol: float = REL_TOL,
             max_iter: int = MAX_ITER, searcher: str = "bbound",
             node_budget: int = DEFAULT_NODE_BUDGET, theta_cap: float = THETA_CAP) -> FitResult:
    """Fit Theta_r: free theta_1..theta_{r-1}, one shared theta for ranks >= r.

    The shared value has the pooled closed form
    log(1 + sum_{j>=r} N_j / sum_{j>=r} L_j).
    """
    _check(stats)
    if not 1 <= r <= stats.t_max:
        raise ValueError(f"r must lie in 1..{stats.t_max}, got {r}")
    if r == 1:
        return fit_single_theta(stats, searcher, node_budget, theta_cap)
    return _alternate(stats, r, init_theta, tol, max_iter, searcher, node_budget, theta_cap)


def bic(fit: FitResult, r: int) -> float:
    """-2 log L + r log N, counting only the continuous parameters."""
    return 2.0 * fit.neg_log_lik + r * math.log(fit.n_obs)


def bic_select(stats: SuffStats, r_candidates: Iterable[int], **fit_kwargs) -> tuple[int, dict]:
    """Fit every tied model in ``r_candidates`` and return the BIC choice.

    Ties go to the smaller r.  Returns ``(r, {r: FitResult})``.
    """
    cands = sorted(set(int(r) for r in r_candidates))
    if not cands:
        raise ValueError("no candidate models")
    fits = {r: fit_tied(stats, r, **fit_kwargs) for r in cands}
    scores = {r: bic(f, r) for r, f in fits.items()}
    best = min(cands, key=lambda r: (scores[r], r))
    return best, fits
