"""
Feature ranking, 1-NN evaluation and the repeated-holdout protocol.

Protocol defaults: 60/40 random train/test split, ten repeats, q in
{10, 20, 30, 40, 50}. Each method ranks features on the training columns
only; a 1-nearest-neighbour classifier restricted to the top-q features is
then scored on the test columns.
"""
import csv
import json
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import InvalidInputError, InvalidSplitError
from .locg import locg_solve
from .model import assemble_problem
from .scf import SolverConfig, scf_solve

__all__ = [
    "FeatureRanking",
    "AccuracyRecord",
    "ExperimentResult",
    "ranking_from_scores",
    "rank_features",
    "select_top_q",
    "one_nn_evaluate",
    "random_split",
    "run_experiment",
    "DEFAULT_Q_GRID",
    "ALPHA_GRID",
    "METHODS",
]

DEFAULT_Q_GRID = (10, 20, 30, 40, 50)
ALPHA_GRID = (0.01, 0.05, 0.1, 1, 10, 100)
METHODS = ("occa-fs", "peb-fs", "ttest")
SOLVERS = {"nepv": scf_solve, "accnepv": locg_solve}
MAX_SPLIT_RETRIES = 50


@dataclass
class FeatureRanking:
    """
    Features sorted by decreasing score.

    ``order`` holds 0-based feature indices; ties are broken by ascending
    index. ``trace`` is the solver history when the method has one.
    """

    order: np.ndarray
    scores: np.ndarray
    method: str
    metadata: dict = field(default_factory=dict)
    trace: object = field(default=None, repr=False)

    def to_dict(self):
        return {
            "method": self.method,
            "order": [int(i) for i in self.order],
            "scores": [float(s) for s in self.scores],
            "metadata": self.metadata,
        }

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(np.array(d["order"]), np.array(d["scores"]),
                   d["method"], d.get("metadata", {}))


def ranking_from_scores(scores, method, metadata=None, trace=None):
    scores = np.asarray(scores, dtype=float)
    order = np.argsort(-scores, kind="stable")
    return FeatureRanking(order, scores, method, metadata or {}, trace)


def rank_features(ds, alpha=0.01, solver="accnepv", cfg=None, eps0=None,
                  rank_check="raise"):
    """
    OCCA-FS ranking: solve OCCA21 on ``ds`` and score each feature by the
    norm of its row in the solution P.

    ``solver`` is ``"nepv"`` (plain SCF) or ``"accnepv"`` (LOCG).
    """
    if solver not in SOLVERS:
        raise InvalidInputError(f"solver must be one of {sorted(SOLVERS)}")
    cfg = cfg or SolverConfig()
    pd = assemble_problem(ds.X, ds.labels, alpha=alpha, eps0=eps0,
                          k=ds.k, rank_check=rank_check)
    t0 = time.perf_counter()
    P, trace = SOLVERS[solver](pd, cfg)
    elapsed = time.perf_counter() - t0
    meta = {
        "solver": solver,
        "alpha": alpha,
        "eps0": pd.eps0,
        "objective": trace.final.objective,
        "kkt_residual": trace.final.kkt_residual,
        "iterations": trace.n_iter,
        "termination": trace.termination,
        "seconds": elapsed,
    }
    return ranking_from_scores(np.linalg.norm(P, axis=1), "occa-fs", meta,
                               trace)


def select_top_q(ranking, q):
    """Indices of the q top-ranked features."""
    n = len(ranking.order)
    if not 1 <= q <= n:
        raise InvalidInputError(f"q must lie in [1, {n}], got {q}")
    return np.asarray(ranking.order[:q])


def one_nn_evaluate(train, test, features):
    """
    Accuracy of a 1-nearest-neighbour classifier on the given features.

    Distances are squared Euclidean; ties go to the lowest training index.
    """
    features = np.asarray(features, dtype=np.int64)
    if train.p == 0 or test.p == 0:
        raise InvalidSplitError("train and test sets must be nonempty")
    if features.size == 0:
        raise InvalidInputError("feature set is empty")
    Xtr = train.X[features].T
    Xte = test.X[features].T
    dist = cdist(Xte, Xtr, metric="sqeuclidean")
    pred = train.labels[np.argmin(dist, axis=1)]
    return float(np.mean(pred == test.labels))


def random_split(labels, split_frac, rng, stratify=False):
    """
    Random train/test index split.

    Draws are repeated (at most 50 times) until every class occurs in the
    training part.
    """
    labels = np.asarray(labels)
    p = labels.size
    k = int(labels.max())
    if not 0 < split_frac < 1:
        raise InvalidInputError("split_frac must lie in (0, 1)")
    for _ in range(MAX_SPLIT_RETRIES):
        if stratify:
            train = []
            for c in range(1, k + 1):
                idx = rng.permutation(np.flatnonzero(labels == c))
                train.append(idx[:max(1, int(round(split_frac * idx.size)))])
            train = np.concatenate(train)
        else:
            n_train = int(round(split_frac * p))
            train = rng.permutation(p)[:n_train]
        train = np.sort(train)
        test = np.setdiff1d(np.arange(p), train)
        if test.size and np.unique(labels[train]).size == k:
            return train, test
    raise InvalidSplitError(
        f"no split with all {k} classes in training after "
        f"{MAX_SPLIT_RETRIES} draws")


@dataclass
class AccuracyRecord:
    method: str
    q: int
    repeat: int
    accuracy: float


@dataclass
class ExperimentResult:
    """Raw accuracy records plus mean/std per (method, q)."""

    records: List[AccuracyRecord]
    methods: List[str]
    q_grid: List[int]
    repeats: int
    config: dict
    split_seeds: List[int]
    solve_summaries: List[dict] = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    traces: Dict[tuple, object] = field(default_factory=dict, repr=False)

    def accuracies(self, method, q):
        return np.array([r.accuracy for r in self.records
                         if r.method == method and r.q == q])

    def aggregate(self):
        """``{method: {q: (mean, std)}}`` using the sample std (ddof=1)."""
        out = {}
        for m in self.methods:
            out[m] = {}
            for q in self.q_grid:
                a = self.accuracies(m, q)
                std = float(np.std(a, ddof=1)) if a.size > 1 else 0.0
                out[m][q] = (float(np.mean(a)), std)
        return out

    def format_table(self):
        agg = self.aggregate()
        head = "q".ljust(6) + "".join(m.rjust(20) for m in self.methods)
        lines = [head]
        for q in self.q_grid:
            cells = "".join(
                f"{agg[m][q][0]:.4f} +- {agg[m][q][1]:.4f}".rjust(20)
                for m in self.methods)
            lines.append(str(q).ljust(6) + cells)
        return "\n".join(lines)

    def to_dict(self, include_timing=True):
        agg = self.aggregate()
        d = {
            "config": self.config,
            "methods": self.methods,
            "q_grid": self.q_grid,
            "repeats": self.repeats,
            "split_seeds": self.split_seeds,
            "records": [asdict(r) for r in self.records],
            "aggregates": [
                {"method": m, "q": q, "mean": agg[m][q][0],
                 "std": agg[m][q][1]}
                for m in self.methods for q in self.q_grid],
            "solves": [{k: v for k, v in s.items() if k != "seconds"}
                       for s in self.solve_summaries],
        }
        if include_timing:
            d["timing"] = self.timing
        return d

    def to_json(self, path, include_timing=True):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(include_timing), fh, indent=2)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "q", "repeat", "accuracy"])
            for r in self.records:
                w.writerow([r.method, r.q, r.repeat, repr(float(r.accuracy))])


def _method_key(name):
    return zlib.crc32(name.encode())


def _rank_with(method, train, alpha, solver, cfg, eps0, rank_check, seed):
    # Imported here: baselines depends on this module.
    from .baselines import pebfs_rank, ttest_rank
    cfg = SolverConfig(**{**asdict(cfg), "seed": seed})
    if method == "occa-fs":
        return rank_features(train, alpha, solver, cfg, eps0, rank_check)
    if method == "peb-fs":
        return pebfs_rank(train, alpha, cfg, eps0, rank_check)
    if method == "ttest":
        return ttest_rank(train)
    raise InvalidInputError(f"unknown method {method!r}")


def run_experiment(ds, methods=METHODS, q_grid=DEFAULT_Q_GRID, alpha=0.01,
                   repeats=10, split_frac=0.6, master_seed=0, solver="accnepv",
                   cfg=None, eps0=None, stratify=False, rank_check="raise",
                   workers=1):
    """
    Repeated random-holdout evaluation of feature rankers.

    Each (repeat, method) cell gets its own RNG stream derived from
    ``(master_seed, repeat, method)``, so results do not depend on
    ``workers`` or scheduling order. Rankings use training columns only.

    Returns
    -------
    ExperimentResult
    """
    methods = list(methods)
    q_grid = [int(q) for q in q_grid]
    if repeats < 1:
        raise InvalidInputError("repeats must be >= 1")
    if not q_grid or max(q_grid) > ds.n or min(q_grid) < 1:
        raise InvalidInputError(f"q_grid must lie in [1, {ds.n}]")
    for m in methods:
        if m not in METHODS:
            raise InvalidInputError(f"unknown method {m!r}")
    cfg = cfg or SolverConfig()
    t_start = time.perf_counter()

    splits, split_seeds = [], []
    for r in range(repeats):
        ss = np.random.SeedSequence([master_seed, r])
        split_seeds.append(int(ss.generate_state(1)[0]))
        splits.append(random_split(ds.labels, split_frac,
                                   np.random.default_rng(ss), stratify))

    def cell(r, m):
        train_idx, test_idx = splits[r]
        train, test = ds.samples(train_idx), ds.samples(test_idx)
        seed = int(np.random.SeedSequence(
            [master_seed, r, _method_key(m)]).generate_state(1)[0])
        ranking = _rank_with(m, train, alpha, solver, cfg, eps0,
                             rank_check, seed)
        accs = [one_nn_evaluate(train, test, select_top_q(ranking, q))
                for q in q_grid]
        return ranking, accs

    jobs = [(r, m) for r in range(repeats) for m in methods]
    if workers == 1:
        outputs = [cell(r, m) for r, m in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            outputs = list(ex.map(lambda job: cell(*job), jobs))

    records, summaries, traces = [], [], {}
    timing = {"cells": []}
    for (r, m), (ranking, accs) in zip(jobs, outputs):
        for q, a in zip(q_grid, accs):
            records.append(AccuracyRecord(m, q, r, a))
        if ranking.trace is not None:
            traces[(r, m)] = ranking.trace
            summaries.append({"repeat": r, "method": m,
                              **ranking.trace.summary()})
        timing["cells"].append({"repeat": r, "method": m,
                                "seconds": ranking.metadata.get("seconds")})
    timing["total_seconds"] = time.perf_counter() - t_start
    config = {"alpha": alpha, "split_frac": split_frac, "repeats": repeats,
              "master_seed": master_seed, "solver": solver,
              "stratify": stratify, "eps0": eps0,
              "solver_config": asdict(cfg)}
    return ExperimentResult(records, methods, q_grid, repeats, config,
                            split_seeds, summaries, timing, traces)
