"""Ranking datasets: file loading/saving and synthetic generation."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import IGMParams, ThetaVector, sample
from .rankings import CentralOrdering

__all__ = [
    "RankingDataset",
    "RankingFormatError",
    "Interner",
    "load_rankings",
    "save_rankings",
    "parse_rankings",
    "random_central",
    "generate_estimation_data",
    "generate_decay_data",
    "generate_mixture",
    "decay_theta",
]

_TOKEN = re.compile(r"[^,\s]+")


class RankingFormatError(ValueError):
    """Malformed ranking file; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, column: int | None = None, path: str | None = None):
        self.line = line
        self.column = column
        self.path = path
        where = f"line {line}" + (f", column {column}" if column else "")
        super().__init__(f"{path + ': ' if path else ''}{where}: {message}")


class Interner:
    """Maps external string tokens to dense ids 1..n in first-seen order."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.ids: dict[str, int] = {}
        self.tokens: list[str] = []
        for tok in tokens:
            self(tok)

    def __call__(self, token) -> int:
        token = str(token)
        i = self.ids.get(token)
        if i is None:
            self.tokens.append(token)
            i = self.ids[token] = len(self.tokens)
        return i

    def __len__(self):
        return len(self.tokens)

    def token(self, item: int) -> str:
        return self.tokens[item - 1]

    def get(self, token, default=None):
        return self.ids.get(str(token), default)


@dataclass
class RankingDataset:
    rankings: list
    dictionary: Interner = field(default_factory=Interner)
    source: dict = field(default_factory=dict)
    groups: list | None = None  # per-ranking group key (e.g. query id), if any

    def __len__(self):
        return len(self.rankings)

    def decode(self, ordering: Sequence[int]) -> list[str]:
        return [self.dictionary.token(i) for i in ordering]

    @classmethod
    def from_tokens(cls, lists: Iterable[Sequence], source: dict | None = None) -> "RankingDataset":
        interner = Interner()
        rankings = [tuple(interner(tok) for tok in lst) for lst in lists]
        return cls(rankings, interner, dict(source or {}))

    def by_group(self) -> dict:
        """Split into sub-datasets keyed by group, sharing the dictionary."""
        if self.groups is None:
            return {None: self}
        out: dict = {}
        for g, r in zip(self.groups, self.rankings):
            out.setdefault(g, []).append(r)
        return {g: RankingDataset(rs, self.dictionary, dict(self.source, group=g)) for g, rs in out.items()}


def parse_rankings(text: str, fmt: str = "list", path: str | None = None) -> RankingDataset:
    """Parse ranking text.

    ``list``: one ranking per line, tokens separated by commas and/or
    whitespace; blank lines and lines starting with ``#`` are skipped.
    ``grouped``: tab-separated ``group<TAB>source<TAB>tokens...`` lines,
    e.g. query id, search engine id and the ranked URLs.
    """
    if fmt not in ("list", "grouped"):
        raise ValueError(f"unknown ranking format {fmt!r}")
    interner = Interner()
    rankings, groups = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if fmt == "grouped":
            parts = raw.rstrip("\n").split("\t")
            if len(parts) < 3:
                raise RankingFormatError("expected group, source and at least one token", lineno, None, path)
            group = parts[0].strip()
            body_start = len(parts[0]) + len(parts[1]) + 2
            body = raw[body_start:]
        else:
            group, body_start, body = None, 0, raw
        tokens, seen = [], {}
        for m in _TOKEN.finditer(body):
            tok = m.group(0)
            col = body_start + m.start() + 1
            if tok in seen:
                raise RankingFormatError(f"item {tok!r} repeated (first at column {seen[tok]})", lineno, col, path)
            seen[tok] = col
            tokens.append(tok)
        if not tokens:
            if fmt == "grouped":
                continue  # an expert that returned nothing
            raise RankingFormatError("no items", lineno, None, path)
        rankings.append(tuple(interner(tok) for tok in tokens))
        groups.append(group)
    return RankingDataset(rankings, interner, {"path": path, "format": fmt},
                          groups if fmt == "grouped" else None)


def load_rankings(path, fmt: str = "list") -> RankingDataset:
    """Read a ranking file (see :func:`parse_rankings`)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_rankings(text, fmt, str(path))


def save_rankings(dataset: RankingDataset, path) -> None:
    """Write one comma-separated ranking per line using the external tokens."""
    lines = [",".join(dataset.decode(r)) for r in dataset.rankings]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


# -- synthetic data ---------------------------------------------------------------

def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_central(universe: int, seed=None) -> CentralOrdering:
    """Uniformly random ordering of items 1..universe, canonical tail after."""
    rng = _rng(seed)
    return CentralOrdering(tuple((rng.permutation(universe) + 1).tolist()))


def decay_theta(theta1: float, t: int) -> ThetaVector:
    """theta_j = 2^{-(j-1)/2} theta_1."""
    return ThetaVector([theta1 * 2.0 ** (-(j - 1) / 2) for j in range(1, t + 1)])


def _dataset(rankings, meta) -> RankingDataset:
    # ids are kept as-is; tokens are their decimal strings
    interner = Interner()
    for r in rankings:
        for i in r:
            interner.ids.setdefault(str(i), i)
    interner.tokens = [str(i) for i in range(1, max(interner.ids.values()) + 1)]
    return RankingDataset([tuple(r) for r in rankings], interner, meta)


def generate_estimation_data(theta: float | Sequence[float], t: int, N: int, universe: int = 1000, seed=None):
    """N top-t samples from an IGM with a random central ordering.

    ``theta`` is a constant or a per-rank vector.  Returns
    ``(dataset, params)``.
    """
    rng = _rng(seed)
    sigma = random_central(universe, rng)
    th = ThetaVector.constant(float(theta), t) if np.isscalar(theta) else ThetaVector(theta)
    params = IGMParams(sigma, th)
    data = sample(params, t, rng, size=N)
    return _dataset(data, {"generator": "igm", "t": t, "N": N, "theta": list(th)}), params


def generate_decay_data(theta1: float, t: int, N: int, universe: int = 1000, seed=None):
    return generate_estimation_data(list(decay_theta(theta1, t)), t, N, universe, seed)


def generate_mixture(thetas: Sequence[float] = (1.5, 1.0, 0.7), per_cluster: int = 150, outliers: int = 50,
                     t: int = 8, universe: int = 1000, seed=None):
    """Mixture of single-theta IGM clusters plus uniform outliers.

    Outliers are uniformly random t-subsets of the universe in random
    order; each is its own true cluster.  Returns
    ``(dataset, labels, centers)``.
    """
    rng = _rng(seed)
    data, labels, centers = [], [], []
    for c, th in enumerate(thetas):
        sigma = random_central(universe, rng)
        centers.append(sigma)
        data.extend(sample(IGMParams(sigma, ThetaVector.constant(th, t)), t, rng, size=per_cluster))
        labels.extend([c] * per_cluster)
    for k in range(outliers):
        data.append(tuple((rng.choice(universe, size=t, replace=False) + 1).tolist()))
        labels.append(len(thetas) + k)
    meta = {"generator": "mixture", "thetas": list(thetas), "per_cluster": per_cluster,
            "outliers": outliers, "t": t}
    return _dataset(data, meta), labels, centers
