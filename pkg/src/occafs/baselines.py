"""
Comparison rankers: a Welch T-test filter and the PEB-FS alternating solver.

PEB-FS minimizes the scaled least-squares objective

    g(P, gamma) = gamma^2 tr(P^T A P) - 2 gamma tr(P^T D) + alpha ||P||_{2,1}

by alternating a closed-form gamma-update with a P-update that takes the
orthogonal polar factor of the n-by-n matrix

    R(P) = [D, (gamma/2) A P_perp + (alpha/(2 gamma)) Gamma(P) P_perp],

``Gamma(P) = diag(1/||P[i, :]||)``, with R frozen at the current iterate.
That update does not solve the P-subproblem, so g may increase between
iterations. The update is left unmodified because the method serves as
a comparison.
"""
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .exceptions import InvalidInputError, NumericalError
from .linalg import orthonormalize_against
from .model import assemble_problem
from .pipeline import ranking_from_scores
from .scf import SolverConfig, SolverTrace, _start

__all__ = [
    "PebState",
    "ttest_rank",
    "peb_objective",
    "optimal_gamma",
    "pebfs_step",
    "pebfs_solve",
    "pebfs_rank",
]

P_CHANGE_TOL = 1e-8


def ttest_rank(ds):
    """
    Rank features by the largest one-vs-rest Welch t statistic.

    For each class c and feature i the two-sample t statistic (unequal
    variances) between class-c samples and all others is computed; the
    score is ``max_c |t_ic|``. Pairs where both groups have zero spread
    score 0.
    """
    labels = np.asarray(ds.labels)
    k = int(labels.max())
    if k < 2:
        raise InvalidInputError("t-test ranking needs at least two classes")
    counts = np.bincount(labels, minlength=k + 1)[1:]
    if np.any(counts < 2) or np.any(labels.size - counts < 2):
        raise InvalidInputError("every class (and its complement) needs "
                                ">= 2 samples for the t-test")
    X = np.asarray(ds.X, dtype=float)
    scores = np.zeros(X.shape[0])
    for c in range(1, k + 1):
        inside, outside = X[:, labels == c], X[:, labels != c]
        live = (np.ptp(inside, axis=1) > 0) | (np.ptp(outside, axis=1) > 0)
        t = np.zeros(X.shape[0])
        with np.errstate(divide="ignore", invalid="ignore"):
            t[live] = stats.ttest_ind(inside[live], outside[live], axis=1,
                                      equal_var=False).statistic
        t = np.where(np.isfinite(t), np.abs(t), 0.0)
        scores = np.maximum(scores, t)
    return ranking_from_scores(scores, "ttest", {"statistic": "welch-ovr-max"})


@dataclass
class PebState:
    P: np.ndarray
    gamma: float
    objective_g: float
    iteration: int


def peb_objective(pd, P, gamma):
    """``g(P, gamma)`` with the exact (unperturbed) (2,1)-norm."""
    P = np.asarray(P, dtype=float)
    l21 = float(np.linalg.norm(P, axis=1).sum())
    return (gamma * gamma * float(np.sum(P * (pd.A @ P)))
            - 2.0 * gamma * float(np.sum(P * pd.D)) + pd.alpha * l21)


def optimal_gamma(pd, P):
    """Minimizer ``tr(P^T D) / tr(P^T A P)`` of g over gamma."""
    P = np.asarray(P, dtype=float)
    return float(np.sum(P * pd.D)) / float(np.sum(P * (pd.A @ P)))


def _complement(P, rng):
    n, k = P.shape
    W = orthonormalize_against(P, rng.standard_normal((n, n - k)))
    if W.shape[1] != n:
        raise NumericalError("could not extend P to an orthonormal basis")
    return W[:, k:]


def pebfs_step(pd, P, rng):
    """
    One alternating step: gamma-update, then the frozen-R P-update.

    Returns ``(P_new, gamma)``; ``gamma`` is the value used for the
    P-update. Raises ``NumericalError`` when gamma is zero.
    """
    gamma = optimal_gamma(pd, P)
    if gamma == 0.0 or not np.isfinite(gamma):
        raise NumericalError("degenerate gamma: tr(P^T D) = 0")
    P_perp = _complement(P, rng)
    # Gamma(P) with the same eps0 regularization as the OCCA21 penalty
    gam = 1.0 / np.sqrt(np.sum(P * P, axis=1) + pd.eps0 ** 2)
    right = (0.5 * gamma) * (pd.A @ P_perp) + \
        (pd.alpha / (2.0 * gamma)) * (gam[:, None] * P_perp)
    R = np.hstack([pd.D, right])
    U, _, Vt = np.linalg.svd(R)
    P_new = U @ Vt[:, :pd.k]
    return P_new, gamma


def pebfs_solve(pd, cfg=None, P0=None, callback=None):
    """
    Run the PEB-FS alternation until P stops moving.

    The trace ``objective`` column holds ``g(P, gamma*(P))`` (to be
    minimized), which equals minus the unperturbed OCCA21 objective; the
    KKT column is NaN. Terminations are ``converged`` (``||P_new - P||_F <
    1e-8``), ``max-iter`` and ``degenerate-gamma``. No monotonicity check is
    applied.

    Returns
    -------
    P : (n, k) ndarray
    trace : SolverTrace
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    P = _start(pd, cfg, P0)
    rng = np.random.default_rng(cfg.seed)
    trace = SolverTrace("peb-fs")

    def record(it, P):
        gamma = optimal_gamma(pd, P)
        g = peb_objective(pd, P, gamma)
        trace.append(it, g, float("nan"), time.perf_counter() - t0)
        if callback is not None:
            callback(it, PebState(P, gamma, g, it))

    record(0, P)
    for it in range(1, cfg.max_iter + 1):
        try:
            P_new, _ = pebfs_step(pd, P, rng)
        except NumericalError:
            trace.termination = "degenerate-gamma"
            return P, trace
        change = float(np.linalg.norm(P_new - P))
        P = P_new
        record(it, P)
        if change < P_CHANGE_TOL:
            trace.termination = "converged"
            return P, trace
    trace.termination = "max-iter"
    return P, trace


def pebfs_rank(ds, alpha=0.01, cfg=None, eps0=None, rank_check="raise"):
    """PEB-FS ranking by the row norms of its final P."""
    cfg = cfg or SolverConfig()
    pd = assemble_problem(ds.X, ds.labels, alpha=alpha, eps0=eps0, k=ds.k,
                          rank_check=rank_check)
    t0 = time.perf_counter()
    P, trace = pebfs_solve(pd, cfg)
    meta = {
        "solver": "peb-fs",
        "alpha": alpha,
        "eps0": pd.eps0,
        "objective_g": trace.final.objective,
        "iterations": trace.n_iter,
        "termination": trace.termination,
        "seconds": time.perf_counter() - t0,
    }
    return ranking_from_scores(np.linalg.norm(P, axis=1), "peb-fs", meta,
                               trace)
