"""
LOCG-accelerated solver.

Every outer step restricts the next iterate to the span of the current
iterate P, its Riemannian gradient and the previous iterate, and solves the
resulting m-dimensional OCCA21 problem (m <= 3k) by SCF. No n-by-n
eigenproblem is ever formed.
"""
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import orthonormalize_against
from .model import ProblemData, _nepv_from_eval, evaluate, objective
from .scf import (
    SolverConfig,
    SolverTrace,
    _check_increase,
    _Stagnation,
    _start,
    scf_solve,
)

__all__ = [
    "ReducedProblem",
    "build_subspace",
    "reduced_objective",
    "reduced_nepv_matrix",
    "locg_solve",
]


@dataclass(eq=False)
class ReducedProblem(ProblemData):
    """
    OCCA21 restricted to ``P = W Z`` for an orthonormal n-by-m basis W.

    ``A`` and ``D`` hold ``W^T A W`` and ``W^T D``; the penalty rows are the
    rows of ``W Z``. Objective values agree with the full problem.
    """

    W: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.validate = False
        super().__post_init__()
        W = np.asarray(self.W, dtype=float)
        W.setflags(write=False)
        self.W = W

    @property
    def n(self):
        return self.W.shape[0]

    @property
    def m(self):
        return self.W.shape[1]

    @property
    def w_rows(self):
        return self.W

    def penalty_rows(self, Z):
        return self.W @ Z

    def penalty_apply(self, w, Z):
        return self.W.T @ (w[:, None] * (self.W @ Z))

    def penalty_matrix(self, w):
        M = self.W.T @ (w[:, None] * self.W)
        return 0.5 * (M + M.T)


def _reduce(pd, W, AW):
    At = W.T @ AW
    At = 0.5 * (At + At.T)
    return ReducedProblem(At, W.T @ pd.D, alpha=pd.alpha, eps0=pd.eps0, W=W)


def build_subspace(pd, P, P_prev=None, R=None):
    """
    Search subspace ``W = orth([P, R(P), P_prev])`` and the reduced problem.

    The first k columns of W are P itself. Returns ``None`` when the
    Riemannian gradient R(P) is exactly zero and there is no previous
    iterate, i.e. P is already stationary.

    Parameters
    ----------
    R : ndarray, optional
        Precomputed Riemannian gradient at P.
    """
    P = np.asarray(P, dtype=float)
    if R is None:
        from .model import riemannian_gradient
        R = riemannian_gradient(pd, P)
    if not np.any(R) and P_prev is None:
        return None
    M = R if P_prev is None else np.hstack([R, P_prev])
    W = orthonormalize_against(P, M)
    return W, _reduce(pd, W, pd.A @ W)


def reduced_objective(rp, Z):
    """Objective of the reduced problem; equals ``objective(pd, W @ Z)``."""
    return objective(rp, Z)


def reduced_nepv_matrix(rp, Z):
    """
    m-by-m matrix ``2h[(D~ Z^T + Z D~^T) - h A~] - alpha W^T diag(1/s) W``,
    which equals ``W^T H(W Z) W``.
    """
    Z = np.asarray(Z, dtype=float)
    return _nepv_from_eval(rp, Z, evaluate(rp, Z))


def locg_solve(pd, cfg=None, P0=None, callback=None):
    """
    Maximize the OCCA21 objective with LOCG-accelerated SCF.

    The inner SCF on each reduced problem starts from ``Z0 = I_m[:, :k]``
    (which lifts to the current iterate) and stops at
    ``max(cfg.kkt_tol, kkt(P) / 8)`` or ``cfg.inner_max_iter`` steps.
    Outer termination uses the full-problem KKT residual, the same
    objective-stagnation guard as :func:`scf_solve`, and declares
    stagnation after two outer steps whose inner solve made no progress.

    With ``cfg.cache`` the product ``A @ P`` of the next iterate is taken
    as ``(A W) Z`` and only the new columns of W are multiplied by A.

    Returns
    -------
    P : (n, k) ndarray
    trace : SolverTrace
        Outer iterations; ``inner_iterations`` records inner SCF steps.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    P = _start(pd, cfg, P0)
    k = pd.k
    AP = pd.A @ P
    ev = evaluate(pd, P, AP)
    trace = SolverTrace("accnepv")
    trace.append(0, ev.objective, ev.kkt_residual, time.perf_counter() - t0)
    if callback is not None:
        callback(0, P)
    stag = _Stagnation(cfg.stagnation_tol, 3)
    P_prev = None
    idle = 0
    it = 0
    while True:
        if ev.kkt_residual <= cfg.kkt_tol:
            trace.termination = "converged"
            break
        if it >= cfg.max_iter:
            trace.termination = "max-iter"
            break
        it += 1
        G = ev.euclid_grad
        PtG = P.T @ G
        R = G - P @ (0.5 * (PtG + PtG.T))
        M = R if P_prev is None else np.hstack([R, P_prev])
        W = orthonormalize_against(P, M)
        if cfg.cache:
            AW = np.empty_like(W)
            AW[:, :k] = AP
            AW[:, k:] = pd.A @ W[:, k:]
        else:
            AW = pd.A @ W
        rp = _reduce(pd, W, AW)

        inner_tol = cfg.kkt_tol
        if np.isfinite(ev.kkt_residual):
            inner_tol = max(cfg.kkt_tol, ev.kkt_residual / 8.0)
        inner_cfg = replace(cfg, kkt_tol=inner_tol,
                            max_iter=cfg.inner_max_iter,
                            init_policy="user-supplied")
        Z0 = np.eye(W.shape[1], k)
        Z, inner = scf_solve(rp, inner_cfg, P0=Z0)

        P_new = W @ Z
        AP_new = AW @ Z if cfg.cache else pd.A @ P_new
        ev_new = evaluate(pd, P_new, AP_new)
        _check_increase(ev.objective, ev_new.objective, "accnepv", it)
        done = stag.update(ev.objective, ev_new.objective)
        idle = idle + 1 if np.linalg.norm(Z - Z0) <= 1e-14 else 0

        P_prev, P, AP, ev = P, P_new, AP_new, ev_new
        trace.append(it, ev.objective, ev.kkt_residual,
                     time.perf_counter() - t0, inner.gap_warnings > 0,
                     inner.n_iter)
        if callback is not None:
            callback(it, P)
        if ev.kkt_residual > cfg.kkt_tol and (done or idle >= 2):
            trace.termination = "stagnated"
            break
    return P, trace
