"""Dense numerical kernels used by the solver.

All routines are deterministic LAPACK-backed computations; nothing here
is randomized. Pseudo-inverse semantics treat any eigen/singular value
below ``PINV_RTOL`` times the largest one as zero.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NegativeThreshold, NonFinite, ShapeMismatch, TooLarge
from .tensor_core import ivec, kronecker, vec

PINV_RTOL = 1e-12
VEC_KRON_MAX = 512


class SvdResult(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


class SymEig(NamedTuple):
    vectors: np.ndarray
    values: np.ndarray


def _finite(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFinite("input contains NaN or Inf")


def _matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got shape {m.shape}")
    return m


def svd(m) -> SvdResult:
    """Thin SVD with singular values sorted nonincreasing."""
    m = _matrix(m)
    _finite(m)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return SvdResult(u, s, vt)


def sym_eig(a) -> SymEig:
    """Eigendecomposition of a symmetric matrix (ascending eigenvalues)."""
    a = _matrix(a)
    _finite(a)
    if a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got {a.shape}")
    w, q = np.linalg.eigh(0.5 * (a + a.T))
    return SymEig(q, w)


def solve_spd(a, b) -> np.ndarray:
    """Minimum-norm least-squares solution of ``a @ x = b`` for symmetric PSD `a`.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Symmetric positive semidefinite matrix.
    b : array_like, shape (n,) or (n, k)

    Returns
    -------
    x : ndarray
        ``pinv(a) @ b`` where eigenvalues below ``1e-12 * max|eig|`` are
        dropped. Has the same number of dimensions as `b`.
    """
    b_arr = np.asarray(b, dtype=np.float64)
    a = _matrix(a)
    bm = _matrix(b_arr)
    _finite(a, bm)
    if a.shape[0] != a.shape[1] or bm.shape[0] != a.shape[0]:
        raise ShapeMismatch(f"cannot solve {a.shape} system with rhs {bm.shape}")
    if a.shape[0] == 0:
        return np.zeros_like(b_arr)
    q, w = sym_eig(a)
    scale = np.max(np.abs(w))
    keep = np.abs(w) > PINV_RTOL * scale if scale > 0 else np.zeros_like(w, dtype=bool)
    winv = np.zeros_like(w)
    winv[keep] = 1.0 / w[keep]
    x = q @ (winv[:, None] * (q.T @ bm))
    return x.reshape(b_arr.shape)


def _sylvester_shapes(a, b, c):
    a, b, c = _matrix(a), _matrix(b), _matrix(c)
    _finite(a, b, c)
    n, m = c.shape
    if a.shape != (n, n) or b.shape != (m, m):
        raise ShapeMismatch(f"A {a.shape}, B {b.shape} do not conform with C {c.shape}")
    return a, b, c


def solve_sylvester_spd(a, b, c) -> np.ndarray:
    """Solve ``a @ U + U @ b = c`` for symmetric PSD `a` (n x n) and `b` (m x m).

    Both sides are diagonalized, the equation becomes elementwise division
    by eigenvalue-pair sums, and pairs summing below
    ``1e-12 * (||a||_2 + ||b||_2)`` get a zero coefficient. That is the
    minimum-norm solution of the equivalent vectorized system.
    """
    a, b, c = _sylvester_shapes(a, b, c)
    qa, wa = sym_eig(a)
    qb, wb = sym_eig(b)
    denom = wa[:, None] + wb[None, :]
    scale = (np.max(np.abs(wa)) if wa.size else 0.0) + (np.max(np.abs(wb)) if wb.size else 0.0)
    keep = np.abs(denom) > PINV_RTOL * scale
    coef = qa.T @ c @ qb
    coef = np.divide(coef, denom, out=np.zeros_like(coef), where=keep)
    return qa @ coef @ qb.T


def solve_vec_kron(a, b, c, max_size: int = VEC_KRON_MAX) -> np.ndarray:
    """Explicit vectorized solve of ``a @ U + U @ b = c``.

    Builds ``kron(b, I_n) + kron(I_m, a)`` and applies its pseudo-inverse to
    ``vec(c)``. Memory is quadratic in ``n * m``; intended as a
    small-instance reference for :func:`solve_sylvester_spd`.
    """
    a, b, c = _sylvester_shapes(a, b, c)
    n, m = c.shape
    if n * m > max_size:
        raise TooLarge(f"n*m = {n * m} exceeds bound {max_size}")
    big = kronecker(b.T, np.eye(n)) + kronecker(np.eye(m), a)
    return ivec(solve_spd(big, vec(c)), (n, m))


def soft_threshold(m, eps: float) -> np.ndarray:
    """Entrywise ``sign(x) * max(|x| - eps, 0)``."""
    if eps < 0:
        raise NegativeThreshold(f"threshold must be >= 0, got {eps}")
    m = np.asarray(m, dtype=np.float64)
    return np.sign(m) * np.maximum(np.abs(m) - eps, 0.0)
