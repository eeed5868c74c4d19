"""
The OCCA21 problem: orthogonal CCA with a (perturbed) (2,1)-norm penalty.

For a feature-by-sample matrix X with class labels, the problem is

    maximize   f(P) = tr(P^T D)^2 / tr(P^T A P)
                      - alpha * sum_i sqrt(||P[i, :]||^2 + eps0^2)
    subject to P^T P = I_k,

with ``A = X C X^T``, ``D = X C Y^T``, C the centering matrix and Y the
one-hot label matrix. This module assembles (A, D) and evaluates the
objective, its Euclidean and Riemannian gradients, the symmetric matrix
function H(P) whose top-k eigenspace drives the SCF iteration, and the
normalized KKT residual used as stopping criterion.
"""
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import (
    DegenerateDenominatorError,
    InvalidInputError,
    InvalidLabelsError,
    RankDeficiencyError,
    SingularityError,
    UndefinedResidualError,
)

__all__ = [
    "ProblemData",
    "ModelEval",
    "RowNormCheck",
    "assemble_problem",
    "default_eps0",
    "evaluate",
    "objective",
    "h_ratio",
    "euclid_gradient",
    "nepv_matrix",
    "riemannian_gradient",
    "kkt_residual",
    "row_norm_bounds_check",
    "check_stiefel",
    "is_psd_cone",
]

STIEFEL_TOL = 1e-10


def default_eps0(n, k):
    """Row-norm perturbation ``1e-3 * sqrt(k / n)``."""
    return 1e-3 * np.sqrt(k / n)


@dataclass(eq=False)
class ProblemData:
    """
    One OCCA21 instance.

    Attributes
    ----------
    A : (n, n) ndarray
        Symmetric PSD scatter matrix.
    D : (n, k) ndarray
        Cross-covariance with the centered one-hot labels.
    alpha : float
        Weight of the (2,1)-norm penalty.
    eps0 : float
        Row-norm perturbation; 0 gives the exact (2,1)-norm.
    validate : bool
        Check symmetry, PSD-ness and the rank condition on construction.
    rank_check : {"raise", "warn", "off"}
        What to do when rank(A) <= n - k.

    Arrays are made read-only; treat an instance as immutable.
    """

    A: np.ndarray
    D: np.ndarray
    alpha: float = 0.0
    eps0: float = 0.0
    validate: bool = field(default=True, repr=False)
    rank_check: str = field(default="raise", repr=False)
    norm_A: float = field(init=False, repr=False)
    norm_D: float = field(init=False, repr=False)
    rank_deficient: bool = field(init=False, repr=False, default=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        D = np.array(self.D, dtype=float)
        if D.ndim == 1:
            D = D[:, None]
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidInputError(f"A must be square, got {A.shape}")
        if D.ndim != 2 or D.shape[0] != A.shape[0]:
            raise InvalidInputError(
                f"D must be {A.shape[0]} x k, got {D.shape}")
        if D.shape[1] > D.shape[0]:
            raise InvalidInputError("need k <= n")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(D))):
            raise InvalidInputError("A and D must be finite")
        if not self.alpha >= 0:
            raise InvalidInputError(f"alpha must be >= 0, got {self.alpha}")
        if not self.eps0 >= 0:
            raise InvalidInputError(f"eps0 must be >= 0, got {self.eps0}")
        if self.rank_check not in ("raise", "warn", "off"):
            raise InvalidInputError(f"unknown rank_check {self.rank_check!r}")
        self.alpha = float(self.alpha)
        self.eps0 = float(self.eps0)
        if self.validate:
            self._check_A(A, D.shape[1])
        A.setflags(write=False)
        D.setflags(write=False)
        self.A, self.D = A, D
        self.norm_A = float(np.linalg.norm(A))
        self.norm_D = float(np.linalg.norm(D))

    def _check_A(self, A, k):
        n = A.shape[0]
        fro = np.linalg.norm(A)
        if np.linalg.norm(A - A.T) > 1e-10 * fro:
            raise InvalidInputError("A is not symmetric")
        w = np.linalg.eigvalsh(A)
        spec = max(abs(w[0]), abs(w[-1]))
        if w[0] < -1e-10 * spec:
            raise InvalidInputError(
                f"A is not positive semidefinite (min eigenvalue {w[0]:.3e})")
        # (n-k+1)-th largest eigenvalue must be nonzero: rank(A) > n - k
        if self.rank_check != "off" and not w[k - 1] > 1e-12 * spec:
            self.rank_deficient = True
            msg = (f"rank(A) <= n - k = {n - k}: some k-dimensional subspace "
                   "lies in the null space of A, so tr(P^T A P) can vanish")
            if self.rank_check == "raise":
                raise RankDeficiencyError(msg)
            import warnings
            warnings.warn(msg, RuntimeWarning, stacklevel=3)

    @property
    def n(self):
        """Number of rows entering the (2,1)-norm penalty."""
        return self.D.shape[0]

    @property
    def dim(self):
        """Row dimension of the optimization variable."""
        return self.A.shape[0]

    @property
    def k(self):
        return self.D.shape[1]

    # Hooks describing how the rows of the penalty depend on P. The reduced
    # problem of the accelerated solver overrides these.
    def penalty_rows(self, P):
        return P

    def penalty_apply(self, w, P):
        """``sum_i w_i r_i r_i^T P`` where r_i^T are the penalty rows."""
        return w[:, None] * P

    def penalty_matrix(self, w):
        """``sum_i w_i r_i r_i^T``."""
        return np.diag(w)


def assemble_problem(X, labels, alpha=0.01, eps0=None, k=None,
                     rank_check="raise"):
    """
    Build (A, D) from a feature-by-sample data matrix and class labels.

    Parameters
    ----------
    X : (n, p) array_like
        Columns are samples.
    labels : (p,) array_like of int
        Class ids in ``1..k``; every class must occur.
    alpha : float
        Penalty weight.
    eps0 : float or None
        Row-norm perturbation. ``None`` uses ``1e-3 * sqrt(k / n)``.
    k : int, optional
        Number of classes; defaults to ``max(labels)``.
    rank_check : {"raise", "warn", "off"}
        Policy for rank(A) <= n - k, which sample-poor data always hits.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    if X.ndim != 2:
        raise InvalidInputError("X must be 2-D (features x samples)")
    n, p = X.shape
    if labels.shape != (p,):
        raise InvalidLabelsError(
            f"expected {p} labels, got shape {labels.shape}")
    if p < 2:
        raise InvalidInputError("need at least 2 samples")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("X contains NaN or Inf")
    if not np.issubdtype(labels.dtype, np.integer):
        raise InvalidLabelsError("labels must be integer class ids")
    if k is None:
        k = int(labels.max())
    if labels.min() < 1 or labels.max() > k:
        raise InvalidLabelsError(f"labels must lie in 1..{k}")
    present = np.bincount(labels, minlength=k + 1)[1:]
    if np.any(present == 0):
        missing = (np.flatnonzero(present == 0) + 1).tolist()
        raise InvalidLabelsError(f"classes {missing} have no samples")
    if n < k:
        raise InvalidInputError(f"need n >= k, got n={n}, k={k}")

    Y = np.zeros((k, p))
    Y[labels - 1, np.arange(p)] = 1.0
    Xc = X - X.mean(axis=1, keepdims=True)
    Yc = Y - Y.mean(axis=1, keepdims=True)
    A = Xc @ Xc.T
    A = 0.5 * (A + A.T)
    D = Xc @ Yc.T
    if eps0 is None:
        eps0 = default_eps0(n, k)
    return ProblemData(A, D, alpha=alpha, eps0=eps0, rank_check=rank_check)


class ModelEval(NamedTuple):
    objective: float
    h: float
    row_norms: np.ndarray
    euclid_grad: np.ndarray
    kkt_residual: float
    # cached intermediates reused by the solvers
    tr_PD: float
    tr_PAP: float
    inv_s: np.ndarray


def _traces(pd, P, AP):
    tPAP = float(np.sum(P * AP))
    tPD = float(np.sum(P * pd.D))
    if not tPAP > 1e-14 * pd.norm_A:
        raise DegenerateDenominatorError(
            f"tr(P^T A P) = {tPAP:.3e} is numerically zero")
    return tPD, tPAP


def _penalty_weights(pd, P):
    rn = np.linalg.norm(pd.penalty_rows(P), axis=1)
    if pd.alpha == 0.0:
        return rn, np.zeros_like(rn), 0.0
    if pd.eps0 == 0.0 and rn.min() < 1e-14:
        raise SingularityError(
            f"row {int(rn.argmin())} of P is zero and eps0 = 0")
    s = np.sqrt(rn * rn + pd.eps0 ** 2)
    return rn, 1.0 / s, float(s.sum())


def evaluate(pd, P, AP=None):
    """
    Objective, gradient and KKT residual of ``pd`` at P in one pass.

    ``AP`` may carry a precomputed ``pd.A @ P``. The KKT residual is NaN
    when its normalization is not positive (see :func:`kkt_residual`).
    """
    P = np.asarray(P, dtype=float)
    if AP is None:
        AP = pd.A @ P
    tPD, tPAP = _traces(pd, P, AP)
    h = tPD / tPAP
    rn, inv_s, s_sum = _penalty_weights(pd, P)
    f = tPD * tPD / tPAP - pd.alpha * s_sum
    grad = 2.0 * h * (pd.D - h * AP)
    if pd.alpha:
        grad -= pd.alpha * pd.penalty_apply(inv_s, P)
    PtG = P.T @ grad
    Lam = 0.5 * (PtG + PtG.T)
    denom = 2.0 * h * (pd.norm_D + h * pd.norm_A) + pd.n * pd.alpha
    if denom > 0:
        kkt = float(np.linalg.norm(grad - P @ Lam)) / denom
    else:
        kkt = float("nan")
    return ModelEval(f, h, rn, grad, kkt, tPD, tPAP, inv_s)


def objective(pd, P):
    """Perturbed objective ``f_eps0(P)``; P need not be orthonormal."""
    P = np.asarray(P, dtype=float)
    AP = pd.A @ P
    tPD, tPAP = _traces(pd, P, AP)
    # no weights needed here, so zero rows are fine even with eps0 = 0
    rn = np.linalg.norm(pd.penalty_rows(P), axis=1)
    penalty = pd.alpha * float(np.sqrt(rn * rn + pd.eps0 ** 2).sum()) \
        if pd.alpha else 0.0
    return tPD * tPD / tPAP - penalty


def h_ratio(pd, P):
    """``tr(P^T D) / tr(P^T A P)``."""
    P = np.asarray(P, dtype=float)
    tPD, tPAP = _traces(pd, P, pd.A @ P)
    return tPD / tPAP


def euclid_gradient(pd, P):
    """Euclidean gradient of the objective (ambient, not projected)."""
    return evaluate(pd, P).euclid_grad


def _nepv_from_eval(pd, P, ev):
    h = ev.h
    DPt = pd.D @ P.T
    H = 2.0 * h * ((DPt + DPt.T) - h * pd.A)
    if pd.alpha:
        H -= pd.alpha * pd.penalty_matrix(ev.inv_s)
    return H


def nepv_matrix(pd, P):
    """
    Symmetric matrix ``H(P)`` with ``H(P) P = grad f(P) + P [2 h D^T P]``.

    A maximizer spans the top-k eigenspace of H at itself.
    """
    P = np.asarray(P, dtype=float)
    return _nepv_from_eval(pd, P, evaluate(pd, P))


def riemannian_gradient(pd, P, ev=None):
    """Gradient projected onto the tangent space of the Stiefel manifold."""
    P = np.asarray(P, dtype=float)
    if ev is None:
        ev = evaluate(pd, P)
    G = ev.euclid_grad
    PtG = P.T @ G
    return G - P @ (0.5 * (PtG + PtG.T))


def kkt_residual(pd, P):
    """
    Normalized first-order residual

        ||G - P sym(P^T G)||_F / (2h (||D||_F + h ||A||_F) + n alpha).

    Raises
    ------
    UndefinedResidualError
        If the denominator is not positive (possible when alpha = 0 and
        h(P) <= 0).
    """
    ev = evaluate(pd, P)
    if np.isnan(ev.kkt_residual):
        raise UndefinedResidualError(
            f"KKT normalization is not positive at h = {ev.h:.3e}")
    return ev.kkt_residual


class RowNormCheck(NamedTuple):
    ok: bool
    violating_j: Optional[int]
    sorted_norms: np.ndarray
    bounds: np.ndarray


def row_norm_bounds_check(P, slack=1e-10):
    """
    Verify that the j-th largest row norm of an orthonormal n-by-k P is at
    least ``sqrt((k - j + 1) / (n - j + 1))`` for ``j = 1..k``.

    Returns the first violating (1-based) j, if any, as the witness.
    """
    P = np.asarray(P, dtype=float)
    n, k = P.shape
    norms = np.sort(np.linalg.norm(P, axis=1))[::-1][:k]
    j = np.arange(1, k + 1)
    bounds = np.sqrt((k - j + 1) / (n - j + 1))
    bad = np.flatnonzero(norms < bounds - slack)
    if bad.size:
        return RowNormCheck(False, int(bad[0]) + 1, norms, bounds)
    return RowNormCheck(True, None, norms, bounds)


def check_stiefel(P, tol=STIEFEL_TOL):
    """Return P as a float array, raising if ``||P^T P - I||_F > tol``."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[1] > P.shape[0]:
        raise InvalidInputError(f"P must be tall n x k, got {P.shape}")
    err = np.linalg.norm(P.T @ P - np.eye(P.shape[1]))
    if err > tol:
        raise InvalidInputError(f"P is not orthonormal (error {err:.2e})")
    return P


def is_psd_cone(P, D, tol=1e-10):
    """True when ``P^T D`` is symmetric PSD up to ``tol * ||D||_F``."""
    M = P.T @ D
    scale = tol * max(np.linalg.norm(D), np.finfo(float).tiny)
    if np.linalg.norm(M - M.T) > scale:
        return False
    return np.linalg.eigvalsh(0.5 * (M + M.T))[0] >= -scale
