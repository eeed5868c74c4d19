"""
Plain SCF iteration for the OCCA21 eigenvector-dependent eigenproblem.

Each step forms H(P), takes an orthonormal basis of its top-k eigenspace
and rotates it by the polar factor of ``P_hat^T D``. Started inside the
cone ``{P : P^T D >= 0}`` the objective never decreases.
"""
import csv
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .exceptions import InvalidInputError, MonotonicityError
from .linalg import polar_factor, top_k_symmetric_eigvecs
from .model import _nepv_from_eval, check_stiefel, evaluate, is_psd_cone

__all__ = [
    "SolverConfig",
    "IterRecord",
    "SolverTrace",
    "initial_point",
    "enforce_psd_rotation",
    "scf_solve",
    "monotone_slack",
]

INIT_POLICIES = ("polar-of-D", "random-orthonormal", "user-supplied")


@dataclass(frozen=True)
class SolverConfig:
    kkt_tol: float = 1e-5
    max_iter: int = 500
    stagnation_tol: float = 1e-12
    seed: int = 0
    init_policy: str = "polar-of-D"
    # accelerated solver only
    inner_max_iter: int = 100
    cache: bool = True

    def __post_init__(self):
        if not self.kkt_tol > 0:
            raise InvalidInputError("kkt_tol must be positive")
        if self.max_iter < 1 or self.inner_max_iter < 1:
            raise InvalidInputError("iteration limits must be >= 1")
        if self.init_policy not in INIT_POLICIES:
            raise InvalidInputError(
                f"init_policy must be one of {INIT_POLICIES}")


@dataclass
class IterRecord:
    iteration: int
    objective: float
    kkt_residual: float
    seconds: float
    gap_warning: bool = False
    inner_iterations: int = 0


@dataclass
class SolverTrace:
    """Per-iteration history of a solve; row 0 is the starting point."""

    method: str
    records: List[IterRecord] = field(default_factory=list)
    termination: Optional[str] = None

    def append(self, *args, **kwargs):
        self.records.append(IterRecord(*args, **kwargs))

    @property
    def objectives(self):
        return np.array([r.objective for r in self.records])

    @property
    def kkt_residuals(self):
        return np.array([r.kkt_residual for r in self.records])

    @property
    def seconds(self):
        return np.array([r.seconds for r in self.records])

    @property
    def n_iter(self):
        return len(self.records) - 1

    @property
    def final(self):
        return self.records[-1]

    @property
    def gap_warnings(self):
        return sum(r.gap_warning for r in self.records)

    def is_monotone(self):
        f = self.objectives
        return bool(np.all(np.diff(f) >= -monotone_slack(f[:-1])))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "objective", "kkt_residual", "seconds"])
            for r in self.records:
                w.writerow([r.iteration, repr(float(r.objective)),
                            repr(float(r.kkt_residual)), f"{r.seconds:.6f}"])

    def summary(self):
        last = self.final
        return {
            "method": self.method,
            "termination": self.termination,
            "iterations": self.n_iter,
            "objective": last.objective,
            # None rather than NaN keeps the JSON output standard
            "kkt_residual": (last.kkt_residual
                             if np.isfinite(last.kkt_residual) else None),
            "gap_warnings": self.gap_warnings,
        }


def monotone_slack(f):
    return 1e-10 * (1.0 + np.abs(f))


def initial_point(pd, cfg=None):
    """
    Starting point on the Stiefel manifold.

    ``polar-of-D`` uses the polar factor of D when D has full column rank
    (``sigma_k > 1e-12 sigma_1``) and otherwise falls back to a seeded
    random orthonormal matrix.
    """
    cfg = cfg or SolverConfig()
    if cfg.init_policy == "user-supplied":
        raise InvalidInputError("user-supplied init needs an explicit P0")
    if cfg.init_policy == "polar-of-D":
        s = np.linalg.svd(pd.D, compute_uv=False)
        if s[0] > 0 and s[-1] > 1e-12 * s[0]:
            return polar_factor(pd.D)
    rng = np.random.default_rng(cfg.seed)
    G = rng.standard_normal((pd.dim, pd.k))
    Q, R = np.linalg.qr(G)
    return Q * np.sign(np.diag(R))


def enforce_psd_rotation(P, D):
    """
    Rotate P by the polar factor Q of ``P^T D``.

    Afterwards ``(PQ)^T D`` is symmetric PSD and ``tr((PQ)^T D)`` equals the
    trace norm of ``P^T D``, so the objective cannot decrease.
    """
    P = np.asarray(P, dtype=float)
    return P @ polar_factor(P.T @ D)


def _start(pd, cfg, P0):
    if P0 is None:
        P = initial_point(pd, cfg)
    else:
        P = check_stiefel(np.array(P0, dtype=float))
        if P.shape != (pd.dim, pd.k):
            raise InvalidInputError(
                f"P0 must be {pd.dim} x {pd.k}, got {P.shape}")
    if not is_psd_cone(P, pd.D):
        P = enforce_psd_rotation(P, pd.D)
    return P


def _check_increase(f_old, f_new, method, it):
    if f_new < f_old - monotone_slack(f_old):
        raise MonotonicityError(
            f"{method}: objective decreased at iteration {it} "
            f"({f_old!r} -> {f_new!r})")


class _Stagnation:
    def __init__(self, tol, patience):
        self.tol, self.patience, self.count = tol, patience, 0

    def update(self, f_old, f_new):
        rel = abs(f_new - f_old) / max(abs(f_old), np.finfo(float).tiny)
        self.count = self.count + 1 if rel < self.tol else 0
        return self.count >= self.patience


def scf_solve(pd, cfg=None, P0=None, callback=None):
    """
    Maximize the OCCA21 objective by SCF iteration.

    Parameters
    ----------
    pd : ProblemData
        Problem instance (a reduced problem works as well).
    cfg : SolverConfig, optional
    P0 : (n, k) ndarray, optional
        Starting point; overrides ``cfg.init_policy``.
    callback : callable, optional
        Called as ``callback(iteration, P)`` for every iterate, including
        the starting point.

    Returns
    -------
    P : (n, k) ndarray
        Final iterate, with ``P^T D`` symmetric PSD.
    trace : SolverTrace
        Termination is ``converged`` (KKT residual <= kkt_tol),
        ``stagnated`` (three tiny relative objective changes in a row) or
        ``max-iter``.

    Raises
    ------
    MonotonicityError
        If the objective drops beyond rounding slack.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    P = _start(pd, cfg, P0)
    ev = evaluate(pd, P)
    trace = SolverTrace("nepv")
    trace.append(0, ev.objective, ev.kkt_residual, time.perf_counter() - t0)
    if callback is not None:
        callback(0, P)
    stag = _Stagnation(cfg.stagnation_tol, 3)
    k = pd.k
    it = 0
    while True:
        if ev.kkt_residual <= cfg.kkt_tol:
            trace.termination = "converged"
            break
        if it >= cfg.max_iter:
            trace.termination = "max-iter"
            break
        it += 1
        H = _nepv_from_eval(pd, P, ev)
        P_hat, vals, nxt = top_k_symmetric_eigvecs(H, k, with_next=True)
        hnorm = max(abs(vals[0]), abs(nxt) if np.isfinite(nxt) else 0.0)
        gap_warn = bool(np.isfinite(nxt) and
                        vals[-1] - nxt < 1e-12 * max(hnorm, 1e-300))
        P_new = P_hat @ polar_factor(P_hat.T @ pd.D)
        ev_new = evaluate(pd, P_new)
        _check_increase(ev.objective, ev_new.objective, "nepv", it)
        done = stag.update(ev.objective, ev_new.objective)
        P, ev = P_new, ev_new
        trace.append(it, ev.objective, ev.kkt_residual,
                     time.perf_counter() - t0, gap_warn)
        if callback is not None:
            callback(it, P)
        if done and ev.kkt_residual > cfg.kkt_tol:
            trace.termination = "stagnated"
            break
    return P, trace
