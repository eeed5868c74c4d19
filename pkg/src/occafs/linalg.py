"""
Dense kernels used by the solvers.

Thin SVD, orthogonal polar factor, top-k eigenpairs of a symmetric
matrix, and two-pass block Gram-Schmidt against an orthonormal block.
Everything here is a pure function of its inputs.
"""
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .exceptions import InvalidInputError

__all__ = [
    "ThinSVDResult",
    "thin_svd",
    "polar_factor",
    "top_k_symmetric_eigvecs",
    "orthonormalize_against",
    "orth",
]


class ThinSVDResult(NamedTuple):
    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray


def _as_finite_matrix(B, name="B"):
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got ndim={B.ndim}")
    if not np.all(np.isfinite(B)):
        raise InvalidInputError(f"{name} contains NaN or Inf entries")
    return B


def thin_svd(B):
    """
    Thin SVD ``B = U diag(s) V^T`` of an m-by-n matrix with m >= n.

    Returns
    -------
    ThinSVDResult
        ``U`` is m-by-n with orthonormal columns, ``singular_values`` are
        sorted descending and ``V`` is n-by-n orthogonal.
    """
    B = _as_finite_matrix(B)
    m, n = B.shape
    if m < n:
        raise InvalidInputError(f"thin_svd needs m >= n, got {m}x{n}")
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    return ThinSVDResult(U, s, Vt.T)


def polar_factor(B):
    """
    Orthogonal polar factor ``Q = U V^T`` of B (m >= n).

    ``Q^T B = V diag(s) V^T`` is symmetric positive semidefinite. When B is
    rank deficient Q is not unique and any valid choice is returned.
    """
    U, _, V = thin_svd(B)
    return U @ V.T


def top_k_symmetric_eigvecs(H, k, with_next=False, sym_tol=1e-10):
    """
    Eigenpairs for the k algebraically largest eigenvalues of symmetric H.

    Parameters
    ----------
    H : (n, n) array_like
        Symmetric matrix; asymmetry beyond ``sym_tol * ||H||_F`` is rejected.
    k : int
        Number of eigenpairs, ``1 <= k <= n``.
    with_next : bool, optional
        Also return the (k+1)-th largest eigenvalue (NaN when k == n), which
        callers use to monitor the eigen-gap.

    Returns
    -------
    V : (n, k) ndarray
        Orthonormal eigenvectors, ordered like the eigenvalues.
    values : (k,) ndarray
        Eigenvalues in descending order.
    next_value : float
        Only when ``with_next`` is true.
    """
    H = _as_finite_matrix(H, "H")
    n = H.shape[0]
    if H.shape != (n, n):
        raise InvalidInputError(f"H must be square, got {H.shape}")
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must lie in [1, {n}], got {k}")
    hnorm = np.linalg.norm(H)
    if np.linalg.norm(H - H.T) > sym_tol * max(hnorm, np.finfo(float).tiny):
        raise InvalidInputError("H is not symmetric within tolerance")

    lo = n - k - 1 if (with_next and k < n) else n - k
    w, V = scipy.linalg.eigh(H, subset_by_index=[lo, n - 1], driver="evr")
    w = w[::-1]
    V = V[:, ::-1]
    vals, vecs = w[:k].copy(), np.ascontiguousarray(V[:, :k])
    if with_next:
        nxt = float(w[k]) if k < n else float("nan")
        return vecs, vals, nxt
    return vecs, vals


def _fix_signs(W):
    # Largest-magnitude entry of each column made positive, for determinism.
    if W.shape[1] == 0:
        return W
    idx = np.argmax(np.abs(W), axis=0)
    signs = np.sign(W[idx, np.arange(W.shape[1])])
    signs[signs == 0] = 1.0
    return W * signs


def orth(M, ref_norm=None):
    """
    Orthonormal basis of range(M) from its thin SVD.

    A direction is kept when its singular value exceeds
    ``1e-12 * (ref_norm + 1)``; ``ref_norm`` defaults to ``||M||_2``.
    """
    M = np.asarray(M, dtype=float)
    if M.shape[1] == 0:
        return M.copy()
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if ref_norm is None:
        ref_norm = s[0] if s.size else 0.0
    keep = s > 1e-12 * (ref_norm + 1.0)
    return _fix_signs(U[:, keep])


def orthonormalize_against(P, M):
    """
    Orthonormal basis ``W = [P, W2]`` of range([P, M]).

    The block M is projected against P and orthonormalized twice (classical
    Gram-Schmidt with one reorthogonalization pass); directions that vanish
    under projection are dropped, so W has between k and k + s columns.
    The first k columns of W are a verbatim copy of P.

    Parameters
    ----------
    P : (n, k) ndarray
        Orthonormal columns.
    M : (n, s) ndarray
        Block to append.
    """
    P = np.asarray(P, dtype=float)
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if P.shape[0] != M.shape[0]:
        raise InvalidInputError(
            f"row mismatch between P {P.shape} and M {M.shape}")
    if M.shape[1] == 0:
        return P.copy()
    pre = np.linalg.norm(M, 2)
    W = M - P @ (P.T @ M)
    W = orth(W, ref_norm=pre)
    W = W - P @ (P.T @ W)
    W = orth(W, ref_norm=1.0)
    out = np.empty((P.shape[0], P.shape[1] + W.shape[1]))
    out[:, :P.shape[1]] = P
    out[:, P.shape[1]:] = W
    return out
