"""Conjugate prior for the IGM model.

Hyperparameters are a strength ``nu``, a non-negative vector ``lambda1``
and non-negative matrices ``Lambda[j]`` (j = 2..t) with total mass j - 1;
they play the role of normalized q_1 and Q_j.  The matching pseudo-cost
matrices are

    R0_1 = lambda1 1^T,    R0_j = Lambda_j (11^T / (j-1) - I).

Given sigma, each theta_j has the posterior density

    p(theta_j | sigma) ∝ exp(-S_j theta_j) (1 - exp(-theta_j))^m

with S_j = L_sigma(nu R0_j + R_j) and m = nu + N; under x = exp(-theta_j)
this is a Beta(S_j, m + 1) law for x.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np
from scipy import special

from .consensus import DEFAULT_NODE_BUDGET, search
from .model import log_psi
from .rankings import CentralOrdering
from .stats import CostMatrix, SuffStats, lower_triangle_cost

__all__ = [
    "PriorHyper",
    "SigmaScore",
    "validate_prior",
    "posterior_update",
    "prior_costs",
    "s_star",
    "log_prior_density",
    "theta_conditional_logpdf",
    "theta_conditional_mode",
    "sample_theta",
    "sigma_log_score",
    "map_sigma",
    "prior_to_json",
    "prior_from_json",
]

MASS_TOL = 1e-9


@dataclass
class PriorHyper:
    nu: float
    t: int
    lambda1: dict = field(default_factory=dict)
    Lambda: dict = field(default_factory=dict)  # j -> {(i, i_prev): value}

    def items(self) -> set:
        out = set(self.lambda1)
        for mat in self.Lambda.values():
            for a, b in mat:
                out.update((a, b))
        return out


class SigmaScore(NamedTuple):
    log_score: float
    improper: bool


def validate_prior(h: PriorHyper) -> list[str]:
    """List the violated conditions; an empty list means the prior is valid."""
    problems = []
    if not (h.nu > 0 and math.isfinite(h.nu)):
        problems.append(f"nu must be positive, got {h.nu}")
    if h.t < 1:
        problems.append(f"t must be at least 1, got {h.t}")
    for i, v in h.lambda1.items():
        if not v >= 0:
            problems.append(f"lambda1[{i}] = {v} is negative")
    for j in range(2, h.t + 1):
        mat = h.Lambda.get(j, {})
        for key, v in mat.items():
            if not v >= 0:
                problems.append(f"Lambda_{j}[{key[0]},{key[1]}] = {v} is negative")
        mass = sum(mat.values())
        if abs(mass - (j - 1)) > MASS_TOL * max(1.0, j - 1):
            problems.append(f"Lambda_{j} has total mass {mass:g}, expected {j - 1}")
    extra = sorted(j for j in h.Lambda if not 2 <= j <= h.t)
    if extra:
        problems.append(f"Lambda given for ranks outside 2..{h.t}: {extra}")
    return problems


def _require_valid(h: PriorHyper):
    problems = validate_prior(h)
    if problems:
        raise ValueError("invalid prior: " + "; ".join(problems))


def posterior_update(h: PriorHyper, stats: SuffStats | None) -> PriorHyper:
    """Hyperparameters after observing ``stats``.

    nu' = nu + N, lambda1' = (nu lambda1 + q_1) / (nu + N) and
    Lambda_j' = (nu Lambda_j + Q_j) / (nu + N).  All orderings must have
    length ``h.t``.
    """
    _require_valid(h)
    if stats is None or stats.is_empty():
        return PriorHyper(h.nu, h.t, dict(h.lambda1), {j: dict(m) for j, m in h.Lambda.items()})
    N = stats.N
    if stats.t_max != h.t or np.any(np.abs(stats.N_j - N) > MASS_TOL * max(1.0, N)):
        raise ValueError(f"posterior update needs orderings of length exactly t={h.t}")
    nu2 = h.nu + N
    lam = {i: h.nu * v for i, v in h.lambda1.items()}
    for i, v in stats.per_rank[0].q.items():
        lam[i] = lam.get(i, 0.0) + v
    Lam = {}
    for j in range(2, h.t + 1):
        mat = {key: h.nu * v for key, v in h.Lambda.get(j, {}).items()}
        for key, v in stats.per_rank[j - 1].Q.items():
            mat[key] = mat.get(key, 0.0) + v
        Lam[j] = {key: v / nu2 for key, v in mat.items()}
    return PriorHyper(nu2, h.t, {i: v / nu2 for i, v in lam.items()}, Lam)


def prior_costs(h: PriorHyper, sigma: CentralOrdering) -> np.ndarray:
    """L_sigma(R0_j) for j = 1..t over the (finite) prior support."""
    out = np.zeros(h.t)
    out[0] = sum(v * (sigma.rank(i) - 1) for i, v in h.lambda1.items())
    for j in range(2, h.t + 1):
        mat = h.Lambda.get(j, {})
        rows: dict = {}
        for (i, _), v in mat.items():
            rows[i] = rows.get(i, 0.0) + v
        total = sum(v / (j - 1) * (sigma.rank(i) - 1) for i, v in rows.items())
        total -= sum(v for (i, ip), v in mat.items() if sigma.rank(ip) < sigma.rank(i))
        out[j - 1] = total
    return out


def s_star(h: PriorHyper, stats: SuffStats | None, sigma: CentralOrdering) -> np.ndarray:
    """S_j = L_sigma(nu R0_j + R_j) for j = 1..t."""
    S = h.nu * prior_costs(h, sigma)
    if stats is not None and not stats.is_empty():
        if stats.t_max > h.t:
            raise ValueError("data has more ranks than the prior")
        for j in range(1, stats.t_max + 1):
            S[j - 1] += lower_triangle_cost(stats, j, sigma, strict=False)
    return S


def log_prior_density(h: PriorHyper, sigma: CentralOrdering, theta) -> float:
    """Unnormalized log density -nu sum_j [theta_j L_sigma(R0_j) + log psi(theta_j)]."""
    theta = np.asarray(theta, dtype=float)[: h.t]
    return -h.nu * float(np.sum(theta * prior_costs(h, sigma) + log_psi(theta)))


def theta_conditional_logpdf(theta_j, S_star: float, strength: float, normalized: bool = False):
    """log of exp(-S theta) (1 - exp(-theta))^strength, optionally normalized.

    The normalizer is the Euler Beta function B(S, strength + 1).
    """
    theta_j = np.asarray(theta_j, dtype=float)
    if np.any(~(theta_j > 0)):
        raise ValueError("theta must be strictly positive")
    out = -S_star * theta_j + strength * np.log(-np.expm1(-theta_j))
    if normalized:
        if not S_star > 0:
            raise ValueError("density is improper for S* <= 0")
        out = out - special.betaln(S_star, strength + 1.0)
    return float(out) if out.ndim == 0 else out


def theta_conditional_mode(S_star: float, strength: float) -> tuple[float, bool]:
    """Mode log(1 + strength / S); returns ``(inf, False)`` when S <= 0."""
    if S_star <= 0:
        return math.inf, False
    return math.log1p(strength / S_star), True


def sample_theta(S_star: float, strength: float, seed=None, size: int | None = None):
    """Draw theta = -log x with x ~ Beta(S, strength + 1)."""
    if not S_star > 0:
        raise ValueError("S* must be positive to sample theta")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = rng.beta(S_star, strength + 1.0, size=size)
    # x can underflow to 0 for tiny S*; keep theta finite
    x = np.maximum(x, np.finfo(float).tiny)
    out = -np.log(x)
    return float(out) if size is None else out


def sigma_log_score(sigma: CentralOrdering, h: PriorHyper, stats: SuffStats | None) -> SigmaScore:
    """sum_j log B(S_j(sigma), 1 + nu + N), up to a sigma-free constant.

    Returns ``SigmaScore(inf, True)`` when some S_j <= 0.
    """
    _require_valid(h)
    S = s_star(h, stats, sigma)
    if np.any(S <= 0):
        return SigmaScore(math.inf, True)
    N = 0.0 if stats is None or stats.is_empty() else stats.N
    return SigmaScore(float(np.sum(special.betaln(S, 1.0 + h.nu + N))), False)


def _prior_matrices(h: PriorHyper, items) -> np.ndarray:
    """Dense R0_j over ``items``, shape ``(t, n, n)``, zero diagonal."""
    lookup = {i: k for k, i in enumerate(items)}
    n = len(items)
    out = np.zeros((h.t, n, n))
    for i, v in h.lambda1.items():
        out[0, lookup[i], :] += v
    for j in range(2, h.t + 1):
        for (a, b), v in h.Lambda.get(j, {}).items():
            out[j - 1, lookup[a], :] += v / (j - 1)
            out[j - 1, lookup[a], lookup[b]] -= v
    for j in range(h.t):
        np.fill_diagonal(out[j], 0.0)
    return out


def map_sigma(h: PriorHyper, stats: SuffStats | None, searcher: str = "bbound",
              node_budget: int = DEFAULT_NODE_BUDGET, max_iter: int = 50, theta_cap: float = 50.0):
    """Profiled MAP search for sigma.

    Alternates theta_j = mode of the theta_j conditional with a consensus
    search on sum_j theta_j (nu R0_j + R_j); the profiled objective
    sum_j [theta_j S_j - (nu + N) log(1 - exp(-theta_j))] never increases.
    Returns ``(sigma, theta, SigmaScore)``.
    """
    _require_valid(h)
    empty = stats is None or stats.is_empty()
    if not empty and stats.t_max > h.t:
        raise ValueError("data has more ranks than the prior")
    items = tuple(sorted(h.items() | (set() if empty else set(stats.items))))
    if not items:
        raise ValueError("neither the prior nor the data mention any item")
    M = h.nu * _prior_matrices(h, items)
    if not empty:
        M[: stats.t_max] += stats.rank_matrices(items)
    m = h.nu + (0.0 if empty else stats.N)
    theta = np.ones(h.t)
    sigma, prev = None, math.inf
    for _ in range(max_iter):
        cm = CostMatrix(items, np.tensordot(theta, M, axes=1))
        res = search(cm, searcher, node_budget, start=None if sigma is None else sigma.prefix)
        if sigma is not None and res.cost > cm.cost(sigma.prefix):
            res.sigma = sigma
        sigma = res.sigma
        p = cm.index(sigma.prefix)
        S = np.tril(M[:, p][:, :, p], -1).sum(axis=(1, 2))
        theta = np.array([min(theta_conditional_mode(s, m)[0], theta_cap) for s in S])
        obj = float(np.sum(theta * S - m * np.log(-np.expm1(-theta))))
        if prev - obj <= 1e-12 * (1.0 + abs(obj)):
            break
        prev = obj
    return sigma, theta, sigma_log_score(sigma, h, stats)


# -- serialization -------------------------------------------------------------

def prior_to_json(h: PriorHyper, tokens: Mapping[int, str] | None = None) -> str:
    """Sparse JSON document; ``tokens`` maps item ids to external names."""
    name = (lambda i: tokens[i]) if tokens else (lambda i: i)
    doc = {
        "nu": h.nu,
        "t": h.t,
        "lambda1": [[name(i), v] for i, v in sorted(h.lambda1.items())],
        "Lambda": {
            str(j): [[name(a), name(b), v] for (a, b), v in sorted(mat.items())]
            for j, mat in sorted(h.Lambda.items())
        },
    }
    return json.dumps(doc, indent=2)


def prior_from_json(text: str, intern=None) -> PriorHyper:
    """Parse :func:`prior_to_json` output.

    ``intern`` maps an external token to an item id; by default tokens must
    be integers.
    """
    doc = json.loads(text)
    conv = intern or int
    try:
        nu = float(doc["nu"])
        t = int(doc.get("t", 1 + max((int(j) for j in doc.get("Lambda", {})), default=0)))
        lam = {}
        for tok, v in doc.get("lambda1", []):
            lam[conv(tok)] = lam.get(conv(tok), 0.0) + float(v)
        Lam = {}
        for j, entries in doc.get("Lambda", {}).items():
            mat = {}
            for a, b, v in entries:
                key = (conv(a), conv(b))
                mat[key] = mat.get(key, 0.0) + float(v)
            Lam[int(j)] = mat
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed prior document: {exc}") from exc
    return PriorHyper(nu, t, lam, Lam)
