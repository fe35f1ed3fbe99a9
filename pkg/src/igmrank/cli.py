"""Command line interface: ``igmrank <command> [options]``.

Results go to stdout (or ``--out``) as JSON, sampled rankings as text.
Failures print a JSON object ``{"error": ..., "message": ...}`` on stderr
and exit nonzero (2 for usage errors, 1 otherwise).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bayes import map_sigma, posterior_update, prior_from_json, prior_to_json, sigma_log_score
from .clustering import ebms, em_mixture, kmeans
from .consensus import DEFAULT_NODE_BUDGET, SEARCHERS, search
from .data import RankingDataset, RankingFormatError, load_rankings, random_central
from .estimation import bic, bic_select, fit_general_theta, fit_single_theta, fit_tied
from .experiments import ExperimentConfig, run_experiment
from .model import IGMParams, ThetaVector, sample
from .stats import accumulate

log = logging.getLogger("igmrank")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_LOG = re.compile(r"^(?:ln|log)\(?([0-9.eE+-]+)\)?$")


def parse_theta(text: str) -> float:
    """A positive float, or ``lnX`` / ``ln(X)`` for the natural log of X."""
    s = text.strip().lower()
    m = _LOG.match(s)
    try:
        value = math.log(float(m.group(1))) if m else float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a theta value: {text!r}") from None
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"theta must be a positive finite number, got {text!r}")
    return value


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _scale(text: str):
    if text in ("distinct", "weighted", "local"):
        return text
    return parse_theta(text)


def _emit(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _sigma_doc(ds: RankingDataset, sigma) -> dict:
    return {
        "prefix": ds.decode(sigma.prefix),
        "blocks": [ds.decode(g) for g in sigma.groups()],
        "tie_groups": [ds.decode(sigma.prefix[a:b]) for a, b in sigma.tie_groups],
    }


def _fit_doc(ds: RankingDataset, fit, model: str) -> dict:
    doc = {"model": model}
    doc.update(_sigma_doc(ds, fit.sigma))
    doc.update(
        theta=[float(x) for x in fit.theta],
        neg_log_lik=fit.neg_log_lik,
        iterations=fit.iterations,
        converged=fit.converged,
        exact_sigma=fit.exact_sigma,
        degenerate=fit.degenerate,
        n_obs=fit.n_obs,
        n_items=len(fit.sigma.prefix),
    )
    return doc


def _parse_model(text: str):
    if text in ("single", "general", "bic"):
        return text, None
    m = re.fullmatch(r"tied:(\d+)", text)
    if m and int(m.group(1)) >= 1:
        return "tied", int(m.group(1))
    raise UsageError(f"--model must be single, general, bic or tied:R with R >= 1, got {text!r}")


def _fit_one(ds: RankingDataset, args) -> dict:
    stats = accumulate(ds.rankings)
    if stats.is_empty():
        raise ValueError("no rankings to fit")
    kind, r = _parse_model(args.model)
    kw = dict(searcher=args.searcher, node_budget=args.node_budget)
    if kind == "single":
        return _fit_doc(ds, fit_single_theta(stats, **kw), "single")
    if kind == "general":
        return _fit_doc(ds, fit_general_theta(stats, **kw), "general")
    if kind == "tied":
        if r > stats.t_max:
            raise UsageError(f"tied:{r} needs rankings of length >= {r}; longest is {stats.t_max}")
        return _fit_doc(ds, fit_tied(stats, r, **kw), f"tied:{r}")
    best, fits = bic_select(stats, range(1, stats.t_max + 1), **kw)
    doc = _fit_doc(ds, fits[best], f"tied:{best}")
    doc["bic"] = {str(k): bic(f, k) for k, f in fits.items()}
    return doc


def cmd_fit(args) -> int:
    ds = load_rankings(args.input, args.format)
    groups = ds.by_group()
    if args.format == "grouped":
        doc = {"groups": {}}
        for g, sub in groups.items():
            try:
                doc["groups"][g] = _fit_one(sub, args)
            except ValueError as exc:
                doc["groups"][g] = {"error": str(exc)}
    else:
        doc = _fit_one(ds, args)
    _emit(doc, args.out)
    return 0


def cmd_sample(args) -> int:
    thetas = args.theta
    if len(thetas) == 1:
        theta = ThetaVector.constant(thetas[0], args.t)
    elif len(thetas) >= args.t:
        theta = ThetaVector(thetas[: args.t])
    else:
        raise UsageError(f"give one theta or at least t={args.t} values, got {len(thetas)}")
    rng = np.random.default_rng(args.seed)
    sigma = random_central(args.universe, rng)
    data = sample(IGMParams(sigma, theta), args.t, rng, size=args.n)
    text = "".join(",".join(str(i) for i in r) + "\n" for r in data)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_consensus(args) -> int:
    ds = load_rankings(args.input, args.format)
    stats = accumulate(ds.rankings)
    if stats.is_empty():
        raise ValueError("no rankings given")
    res = search(stats.matrix("aggregate"), args.searcher, args.node_budget)
    doc = _sigma_doc(ds, res.sigma)
    doc.update(cost=res.cost, optimal=res.optimal, expanded=res.expanded, searcher=args.searcher)
    _emit(doc, args.out)
    return 0


def cmd_cluster(args) -> int:
    ds = load_rankings(args.input, args.format)
    if not ds.rankings:
        raise ValueError("no rankings given")
    method, _, k = args.method.partition(":")
    extra = {}
    if method == "ebms":
        if k:
            raise UsageError("ebms takes no K")
        res = ebms(ds.rankings, scale=args.scale)
        clustering = res.clustering
        extra = {"iterations": res.iterations, "converged": res.converged, "scales": res.scales}
    elif method in ("kmeans", "em"):
        if not k.isdigit() or int(k) < 1:
            raise UsageError(f"{method} needs a positive K, e.g. {method}:3")
        if method == "kmeans":
            res = kmeans(ds.rankings, int(k), seed=args.seed)
            clustering = res.clustering
            extra = {"objective": res.objective, "iterations": res.iterations}
        else:
            res = em_mixture(ds.rankings, int(k), seed=args.seed)
            clustering = res.clustering
            extra = {"log_lik": res.log_lik[-1], "iterations": res.iterations, "converged": res.converged,
                     "weights": [float(w) for w in res.weights],
                     "theta": [th for _, th in res.params]}
    else:
        raise UsageError(f"--method must be ebms, kmeans:K or em:K, got {args.method!r}")
    sizes = clustering.sizes()
    doc = {
        "method": args.method,
        "assignment": list(clustering.assignment),
        "clusters": {str(lab): {"size": sizes[lab], "representative": ds.decode(rep)}
                     for lab, rep in sorted(clustering.representatives.items())},
        "n_clusters": clustering.n_clusters,
    }
    doc.update(extra)
    _emit(doc, args.out)
    return 0


def cmd_posterior(args) -> int:
    ds = load_rankings(args.input, args.format) if args.input else RankingDataset([])
    prior = prior_from_json(Path(args.prior).read_text(encoding="utf-8"), intern=ds.dictionary)
    stats = accumulate(ds.rankings) if ds.rankings else None
    post = posterior_update(prior, stats)
    tokens = {i + 1: tok for i, tok in enumerate(ds.dictionary.tokens)}
    doc = {"posterior": json.loads(prior_to_json(post, tokens))}
    if args.map:
        sigma, theta, score = map_sigma(prior, stats, searcher=args.searcher)
        doc["map"] = dict(_sigma_doc(ds, sigma), theta=[float(x) for x in theta],
                          log_score=score.log_score if not score.improper else None, improper=score.improper)
    _emit(doc, args.out)
    return 0


def cmd_experiment(args) -> int:
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.out:
        doc["out"] = args.out
    if args.no_plots:
        doc["plots"] = False
    config = ExperimentConfig.from_dict(doc)
    result = run_experiment(config)
    _emit({"driver": config.driver, "files": result["files"], "summary": result["report"]["summary"]}, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="igmrank", description="Infinite generalized Mallows models for top-t rankings.")
    p.add_argument("--version", action="version", version=f"igmrank {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp, required=True):
        sp.add_argument("--input", required=required, help="ranking file, one ranking per line")
        sp.add_argument("--format", choices=("list", "grouped"), default="list",
                        help="grouped: tab-separated group, source, items (default: list)")
        sp.add_argument("--out", help="write JSON here instead of stdout")

    sp = sub.add_parser("fit", help="maximum likelihood fit")
    data_args(sp)
    sp.add_argument("--model", default="single", help="single, general, tied:R or bic (default: single)")
    sp.add_argument("--searcher", choices=SEARCHERS, default="bbound")
    sp.add_argument("--node-budget", type=_positive_int, default=DEFAULT_NODE_BUDGET)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("sample", help="draw rankings from a random-center model")
    sp.add_argument("--theta", type=parse_theta, nargs="+", required=True,
                    help="one value, or one per rank; lnX means log(X)")
    sp.add_argument("--t", type=_positive_int, required=True)
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--universe", type=_positive_int, default=1000, help="items in the random central ordering")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("consensus", help="central ordering of the data")
    data_args(sp)
    sp.add_argument("--searcher", choices=SEARCHERS, default="bbound")
    sp.add_argument("--node-budget", type=_positive_int, default=DEFAULT_NODE_BUDGET)
    sp.set_defaults(func=cmd_consensus)

    sp = sub.add_parser("cluster", help="cluster equal-length rankings")
    data_args(sp)
    sp.add_argument("--method", default="ebms", help="ebms, kmeans:K or em:K (default: ebms)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scale", type=_scale, default="local",
                    help="ebms kernel scale: local, distinct, weighted or a number (default: local)")
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("posterior", help="conjugate posterior update")
    data_args(sp, required=False)
    sp.add_argument("--prior", required=True, help="prior JSON document")
    sp.add_argument("--map", action="store_true", help="also run the profiled MAP search for sigma")
    sp.add_argument("--searcher", choices=SEARCHERS, default="bbound")
    sp.set_defaults(func=cmd_posterior)

    sp = sub.add_parser("experiment", help="run an experiment config")
    sp.add_argument("--config", required=True, help="JSON experiment config")
    sp.add_argument("--out", help="override the output directory")
    sp.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    sp.set_defaults(func=cmd_experiment)
    return p


def _fail(kind: str, exc: BaseException, code: int) -> int:
    doc = {"error": kind, "message": str(exc)}
    if isinstance(exc, RankingFormatError):
        doc.update(line=exc.line, column=exc.column, path=exc.path)
    sys.stderr.write(json.dumps(doc) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except RankingFormatError as exc:
        return _fail("format", exc, 1)
    except (OSError, ValueError) as exc:
        return _fail(type(exc).__name__, exc, 1)


if __name__ == "__main__":
    sys.exit(main())
