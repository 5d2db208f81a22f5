"""Prior operators (first-difference and DCT matrices) and rank estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroMatrix
from .linalg import svd


@dataclass(frozen=True)
class PriorOperators:
    """Operators attached to one mode: ``tv_u`` (L), ``tv_v`` (C), ``dct_u`` (B), ``dct_v`` (D)."""

    tv_u: np.ndarray
    tv_v: np.ndarray
    dct_u: np.ndarray
    dct_v: np.ndarray

    @classmethod
    def for_mode(cls, size: int, rank: int) -> "PriorOperators":
        return cls(
            tv_u=build_tv_matrix(size),
            tv_v=build_tv_matrix(rank),
            dct_u=build_dct_matrix(size),
            dct_v=build_dct_matrix(rank),
        )


def build_tv_matrix(size: int) -> np.ndarray:
    """``(size-1) x size`` first-difference matrix with ``L[i,i]=1, L[i,i+1]=-1``.

    For ``size == 1`` the result is an empty ``0 x 1`` matrix.
    """
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    out = np.zeros((size - 1, size))
    idx = np.arange(size - 1)
    out[idx, idx] = 1.0
    out[idx, idx + 1] = -1.0
    return out


def build_dct_matrix(size: int) -> np.ndarray:
    """Orthonormal DCT-II matrix; row `k` holds the `k`-th cosine atom."""
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    k = np.arange(size)[:, None]
    j = np.arange(size)[None, :]
    out = np.cos(np.pi * (2 * j + 1) * k / (2 * size))
    out *= np.sqrt(2.0 / size)
    out[0, :] = np.sqrt(1.0 / size)
    return out


def estimate_rank(unfolding, delta: float) -> int:
    """Number of singular values with ``sigma_i / sigma_1 > delta``.

    Clamped to ``[1, min(rows, cols)]``. Raises :class:`ZeroMatrix` when
    the input is identically zero.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    s = svd(unfolding).s
    if s.size == 0 or s[0] == 0.0:
        raise ZeroMatrix("cannot estimate the rank of a zero matrix")
    r = int(np.count_nonzero(s / s[0] > delta))
    return min(max(r, 1), s.size)
