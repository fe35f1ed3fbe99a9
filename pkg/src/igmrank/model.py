"""The infinite generalized Mallows (IGM) model.

Each stagewise code s_j of a top-t ordering is an independent geometric
variable with P(s_j = k) = exp(-theta_j k) / psi(theta_j), where
psi(theta) = 1 / (1 - exp(-theta)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rankings import CentralOrdering, codes_of, ordering_from_codes
from .stats import SuffStats, lower_triangle_cost, rank_costs

__all__ = [
    "ThetaVector",
    "IGMParams",
    "psi",
    "log_psi",
    "log_prob",
    "log_likelihood",
    "sample_codes",
    "sample",
]


def log_psi(theta):
    """log psi(theta) = -log(1 - exp(-theta)), stable for tiny theta."""
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0)):
        raise ValueError("psi(theta) diverges for theta <= 0")
    out = -np.log(-np.expm1(-theta))
    return float(out) if out.ndim == 0 else out


def psi(theta):
    """Normalizer sum_k exp(-theta k) = 1 / (1 - exp(-theta))."""
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0)):
        raise ValueError("psi(theta) diverges for theta <= 0")
    out = -1.0 / np.expm1(-theta)
    return float(out) if out.ndim == 0 else out


class ThetaVector(tuple):
    """Strictly positive dispersion parameters theta_1..theta_t.

    ``tied_from`` records a tying scheme: ranks ``tied_from..t`` share one
    value.  ``None`` means every rank is free.
    """

    tied_from: int | None

    def __new__(cls, values: Sequence[float], tied_from: int | None = None):
        vals = tuple(float(v) for v in values)
        if not vals:
            raise ValueError("theta needs at least one value")
        if any(not (v > 0 and math.isfinite(v)) for v in vals):
            raise ValueError(f"theta entries must be finite and strictly positive: {vals}")
        self = super().__new__(cls, vals)
        if tied_from is not None:
            if not 1 <= tied_from <= len(vals):
                raise ValueError("tied_from must lie in 1..t")
            if len(set(vals[tied_from - 1:])) > 1:
                raise ValueError("tied ranks must share one value")
        self.tied_from = tied_from
        return self

    @classmethod
    def tied(cls, free: Sequence[float], shared: float, t: int) -> "ThetaVector":
        """Theta_r = (free..., shared, shared, ...) of length t, r = len(free)+1."""
        free = list(free)
        if len(free) >= t:
            raise ValueError("too many free parameters for t ranks")
        return cls(free + [shared] * (t - len(free)), tied_from=len(free) + 1)

    @classmethod
    def constant(cls, value: float, t: int) -> "ThetaVector":
        return cls([value] * t, tied_from=1)

    def is_constant(self) -> bool:
        return len(set(self)) == 1

    def extended(self, t: int) -> "ThetaVector":
        """Pad to length t by repeating the last value."""
        if t <= len(self):
            return self
        return ThetaVector(list(self) + [self[-1]] * (t - len(self)))


@dataclass(frozen=True)
class IGMParams:
    sigma: CentralOrdering
    theta: ThetaVector

    def __post_init__(self):
        if not isinstance(self.theta, ThetaVector):
            object.__setattr__(self, "theta", ThetaVector(self.theta))


def log_prob(pi: Sequence[int], params: IGMParams) -> float:
    """log P(pi) = -sum_j [theta_j s_j + log psi(theta_j)]."""
    theta = params.theta
    if len(theta) < len(pi):
        raise ValueError(f"theta covers {len(theta)} ranks, ordering has {len(pi)}")
    s = codes_of(pi, params.sigma)
    return -sum(th * sj + log_psi(th) for th, sj in zip(theta, s))


def log_likelihood(stats: SuffStats, params: IGMParams) -> float:
    """Dataset log-likelihood from sufficient statistics alone."""
    theta = params.theta
    if len(theta) < stats.t_max:
        raise ValueError(f"theta covers {len(theta)} ranks, data has {stats.t_max}")
    if theta.is_constant():
        th = theta[0]
        return -(th * lower_triangle_cost(stats, "aggregate", params.sigma) + stats.T * log_psi(th))
    th = np.asarray(theta[: stats.t_max])
    L = rank_costs(stats, params.sigma)
    return -float(np.sum(th * L + stats.N_j * log_psi(th)))


def sample_codes(theta: Sequence[float], size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-transform draws of the codes, shape ``(size, len(theta))``.

    P(s >= k) = exp(-theta k), so s = floor(-log(U) / theta) with U in (0, 1].
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0)):
        raise ValueError("theta entries must be strictly positive")
    u = 1.0 - rng.random((size, len(theta)))  # (0, 1]
    return np.floor(-np.log(u) / theta).astype(np.int64)


def sample(params: IGMParams, t: int, seed=None, size: int | None = None):
    """Draw top-t orderings from the model.

    ``seed`` may be an int or a :class:`numpy.random.Generator`.  Returns a
    single tuple when ``size`` is None, otherwise a list of tuples.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    if len(params.theta) < t:
        raise ValueError(f"theta covers {len(params.theta)} ranks, need {t}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    codes = sample_codes(params.theta[:t], 1 if size is None else size, rng)
    out = [ordering_from_codes(row, params.sigma) for row in codes]
    return out[0] if size is None else out
