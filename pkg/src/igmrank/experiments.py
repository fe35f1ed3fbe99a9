"""Experiment drivers for the synthetic estimation and clustering studies.

Every driver takes keyword parameters, runs independent replicates with
seeds split from one root seed, and returns a report dict with
``replicates`` (one record per run) and ``summary`` (table rows).
:func:`run_experiment` writes the report as JSON plus a CSV summary.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import classification_error, ebms, em_mixture, kmeans
from .data import decay_theta, generate_decay_data, generate_estimation_data, generate_mixture
from .estimation import bic, fit_general_theta, fit_single_theta, fit_tied
from .rankings import inversions, kendall_topt
from .stats import accumulate

__all__ = ["DRIVERS", "ExperimentConfig", "run_experiment", "table1", "fig4", "table3", "bic_grid", "max_workers"]

log = logging.getLogger(__name__)

WORKERS_ENV = "IGMRANK_MAX_WORKERS"


def max_workers() -> int:
    """Worker cap from the environment (default 1, i.e. run in-process)."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _seeds(seed: int, n: int) -> list[int]:
    # independent child seeds; stored as ints so records stay JSON friendly
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, np.uint32)[0]) for c in children]


def _guarded(fn, task):
    t0 = time.perf_counter()
    try:
        rec = fn(**task)
    except Exception as exc:  # recorded, the sweep goes on
        log.warning("replicate %s failed: %s", task, exc)
        rec = dict(task, error=f"{type(exc).__name__}: {exc}")
    rec["seconds"] = round(time.perf_counter() - t0, 4)
    return rec


def _run_all(fn, tasks: list[dict], workers: int | None = None) -> list[dict]:
    workers = max_workers() if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        return [_guarded(fn, task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_guarded, [fn] * len(tasks), tasks))


def _mean_sd(values) -> tuple[float, float]:
    x = np.asarray([v for v in values if v is not None and math.isfinite(v)], dtype=float)
    if len(x) == 0:
        return math.nan, math.nan
    return float(x.mean()), float(x.std(ddof=1)) if len(x) > 1 else 0.0


# -- single theta --------------------------------------------------------------

def _table1_rep(theta: float, t: int, N: int, universe: int, seed: int, searcher: str) -> dict:
    ds, truth = generate_estimation_data(theta, t, N, universe, seed)
    fit = fit_single_theta(accumulate(ds.rankings), searcher=searcher)
    est = fit.sigma.prefix
    return {
        "theta": theta, "t": t, "N": N, "seed": seed,
        "theta_hat": float(fit.theta[0]),
        "sigma_hat": list(est),
        "n_items": len(est),
        "ordering_error": inversions(est, truth.sigma.prefix),
        "prefix_error": kendall_topt(truth.sigma.top(t), fit.sigma.top(t)),
        "exact": fit.exact_sigma,
        "degenerate": fit.degenerate,
    }


def table1(thetas=(0.69, 1.38), ts=(2, 4, 8), Ns=(200, 500, 2000), replicates: int = 25,
           universe: int = 1000, seed: int = 0, searcher: str = "bbound", workers: int | None = None) -> dict:
    """Single-theta estimation grid: theta_hat mean/sd and ordering errors per cell."""
    cells = [(th, t, N) for th in thetas for t in ts for N in Ns]
    seeds = _seeds(seed, len(cells) * replicates)
    tasks = [dict(theta=th, t=t, N=N, universe=universe, seed=seeds[c * replicates + r], searcher=searcher)
             for c, (th, t, N) in enumerate(cells) for r in range(replicates)]
    reps = _run_all(_table1_rep, tasks, workers)
    summary = []
    for th, t, N in cells:
        rs = [r for r in reps if (r["theta"], r["t"], r["N"]) == (th, t, N)]
        ok = [r for r in rs if "error" not in r]
        mean, sd = _mean_sd(r["theta_hat"] for r in ok)
        n = max(len(ok), 1)
        summary.append({
            "theta": th, "t": t, "N": N, "mean": mean, "sd": sd,
            "dk0": sum(r["ordering_error"] == 0 for r in ok) / n,
            "dk1": sum(r["ordering_error"] == 1 for r in ok) / n,
            "dk2plus": sum(r["ordering_error"] >= 2 for r in ok) / n,
            "prefix0": sum(r["prefix_error"] == 0 for r in ok) / n,
            "runs": len(ok), "failed": len(rs) - len(ok),
        })
    return {"driver": "table1", "replicates": reps, "summary": summary}


# -- general theta -------------------------------------------------------------

def _fig4_rep(theta1: float, t: int, N: int, universe: int, seed: int, searcher: str, second_init: bool) -> dict:
    ds, truth = generate_decay_data(theta1, t, N, universe, seed)
    stats = accumulate(ds.rankings)
    fit = fit_general_theta(stats, searcher=searcher)
    rec = {
        "theta1": theta1, "t": t, "N": N, "seed": seed,
        "theta_hat": [float(x) for x in fit.theta],
        "J": fit.neg_log_lik,
        "J_history": fit.history,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "prefix_error": kendall_topt(truth.sigma.top(t), fit.sigma.top(t)),
    }
    if second_init:
        rng = np.random.default_rng(seed)
        init = rng.uniform(0.05, 2.0, size=t)
        alt = fit_general_theta(stats, init_theta=init, searcher=searcher)
        rec.update(init2=[float(x) for x in init], J_init2=alt.neg_log_lik, J_history_init2=alt.history,
                   theta_hat_init2=[float(x) for x in alt.theta])
    return rec


def fig4(theta1: float = 0.69, t: int = 8, Ns=(200, 2000), replicates: int = 50, universe: int = 1000,
         seed: int = 0, searcher: str = "bbound", second_init: bool = True, workers: int | None = None) -> dict:
    """Per-rank estimates under a decaying theta; summary holds boxplot quartiles."""
    seeds = _seeds(seed, len(Ns) * replicates)
    tasks = [dict(theta1=theta1, t=t, N=N, universe=universe, seed=seeds[c * replicates + r],
                  searcher=searcher, second_init=second_init)
             for c, N in enumerate(Ns) for r in range(replicates)]
    reps = _run_all(_fig4_rep, tasks, workers)
    truth = decay_theta(theta1, t)
    summary = []
    for N in Ns:
        ok = [r for r in reps if r["N"] == N and "error" not in r]
        if not ok:
            continue
        est = np.array([r["theta_hat"] for r in ok])
        for j in range(t):
            q = np.percentile(est[:, j], [0, 25, 50, 75, 100])
            q = [float(x) for x in q]
            summary.append({"N": N, "j": j + 1, "true": truth[j], "min": q[0], "q1": q[1],
                            "median": q[2], "q3": q[3], "max": q[4], "runs": len(ok)})
    return {"driver": "fig4", "replicates": reps, "summary": summary}


# -- clustering ----------------------------------------------------------------

def _table3_rep(t: int, thetas, per_cluster: int, outliers: int, universe: int, Ks, seed: int, scale) -> dict:
    ds, labels, _ = generate_mixture(thetas, per_cluster, outliers, t, universe, seed)
    rec = {"t": t, "seed": seed}
    res = ebms(ds.rankings, scale=scale)
    rec["ebms"] = classification_error(res.clustering, labels)
    rec["ebms_iterations"] = res.iterations
    rec["ebms_clusters"] = res.clustering.n_clusters
    rec["ebms_scales"] = res.scales
    km, em = {}, {}
    for K in Ks:
        km[K] = classification_error(kmeans(ds.rankings, K, seed=seed).clustering, labels)
        fit = em_mixture(ds.rankings, K, seed=seed)
        em[K] = classification_error(fit.clustering, labels)
        if K == len(thetas):
            m = fit.responsibilities.max(axis=1)
            lab = np.asarray(labels)
            rec["em_outlier_certainty"] = float(m[lab >= len(thetas)].mean()) if outliers else None
            rec["em_cluster_certainty"] = float(m[lab < len(thetas)].mean())
    rec["kmeans_by_K"] = {str(k): v for k, v in km.items()}
    rec["em_by_K"] = {str(k): v for k, v in em.items()}
    rec["kmeans"] = min(km.values())
    rec["em"] = min(em.values())
    return rec


def table3(ts=(4, 6, 8), runs: int = 10, thetas=(1.5, 1.0, 0.7), per_cluster: int = 150, outliers: int = 50,
           universe: int = 1000, Ks=(3, 4, 5), seed: int = 0, scale="local", workers: int | None = None) -> dict:
    """Classification error of EBMS, K-means and EM (best K) per t."""
    seeds = _seeds(seed, len(ts) * runs)
    tasks = [dict(t=t, thetas=list(thetas), per_cluster=per_cluster, outliers=outliers, universe=universe,
                  Ks=list(Ks), seed=seeds[c * runs + r], scale=scale)
             for c, t in enumerate(ts) for r in range(runs)]
    reps = _run_all(_table3_rep, tasks, workers)
    summary = []
    for t in ts:
        ok = [r for r in reps if r["t"] == t and "error" not in r]
        for method in ("ebms", "kmeans", "em"):
            mean, sd = _mean_sd(r[method] for r in ok)
            summary.append({"t": t, "method": method, "mean": mean, "sd": sd, "runs": len(ok)})
    return {"driver": "table3", "replicates": reps, "summary": summary}


# -- tied models and BIC ---------------------------------------------------------

def _bic_rep(kind: str, theta1: float, t: int, N: int, universe: int, seed: int, rs) -> dict:
    if kind == "constant":
        ds, _ = generate_estimation_data(theta1, t, N, universe, seed)
    else:
        ds, _ = generate_decay_data(theta1, t, N, universe, seed)
    stats = accumulate(ds.rankings)
    fits = {r: fit_tied(stats, r) for r in rs}
    scores = {r: bic(f, r) for r, f in fits.items()}
    best = min(rs, key=lambda r: (scores[r], r))
    return {"kind": kind, "theta1": theta1, "t": t, "N": N, "seed": seed, "chosen": best,
            "bic": {str(r): s for r, s in scores.items()},
            "theta_hat": {str(r): [float(x) for x in f.theta] for r, f in fits.items()}}


def bic_grid(kinds=("constant", "decay"), theta1: float = 1.38, t: int = 6, N: int = 500, replicates: int = 10,
             rs=None, universe: int = 1000, seed: int = 0, workers: int | None = None) -> dict:
    """How often BIC picks each tied model on constant and decaying data."""
    rs = list(rs) if rs is not None else list(range(1, t + 1))
    seeds = _seeds(seed, len(kinds) * replicates)
    tasks = [dict(kind=k, theta1=theta1, t=t, N=N, universe=universe, seed=seeds[c * replicates + r], rs=rs)
             for c, k in enumerate(kinds) for r in range(replicates)]
    reps = _run_all(_bic_rep, tasks, workers)
    summary = []
    for k in kinds:
        ok = [r for r in reps if r["kind"] == k and "error" not in r]
        for r in rs:
            summary.append({"kind": k, "r": r, "chosen": sum(x["chosen"] == r for x in ok), "runs": len(ok)})
    return {"driver": "bic", "replicates": reps, "summary": summary}


DRIVERS = {"table1": table1, "fig4": fig4, "table3": table3, "bic": bic_grid}


# -- config and report files ------------------------------------------------------

@dataclass
class ExperimentConfig:
    driver: str
    params: dict = field(default_factory=dict)
    out: str = "results"
    name: str | None = None
    plots: bool = True

    def __post_init__(self):
        if self.driver not in DRIVERS:
            raise ValueError(f"unknown driver {self.driver!r}; choose from {sorted(DRIVERS)}")
        for key in ("replicates", "runs", "N", "t", "universe", "per_cluster"):
            v = self.params.get(key)
            if v is not None and not (isinstance(v, int) and v > 0):
                raise ValueError(f"{key} must be a positive integer, got {v!r}")
        if "outliers" in self.params and not (isinstance(self.params["outliers"], int) and self.params["outliers"] >= 0):
            raise ValueError("outliers must be a non-negative integer")
        if "seed" in self.params and not isinstance(self.params["seed"], int):
            raise ValueError("seed must be an integer")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        unknown = set(doc) - {"driver", "params", "out", "name", "plots"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "driver" not in doc:
            raise ValueError("config needs a 'driver'")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_csv(rows: list[dict], path) -> None:
    path = Path(path)
    if not rows:
        path.write_text("", encoding="utf-8")
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})


def run_experiment(config: ExperimentConfig | dict) -> dict:
    """Run a configured driver and write ``<name>.json`` and ``<name>.csv``.

    With ``plots`` on, figures are rendered next to them (needs
    matplotlib).  Returns ``{"report": ..., "files": [...]}``.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    report = DRIVERS[config.driver](**config.params)
    report["config"] = {"driver": config.driver, "params": config.params}
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    name = config.name or config.driver
    files = [out / f"{name}.json", out / f"{name}.csv"]
    files[0].write_text(json.dumps(_jsonable(report), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    write_csv(report["summary"], files[1])
    if config.plots:
        from . import plotting
        files += plotting.render(report, out / name)
    return {"report": report, "files": [str(f) for f in files]}
