"""Dense tensor algebra: norms, unfoldings and Kronecker-type products.

Tensors are plain ``numpy.ndarray`` objects of ``float64``. Whenever a
tensor is flattened, the linearization is column-major in mode order
(the first index varies fastest), so that

    vec(X)[i_1 + sum_{k>=2} (i_k - 1) * prod_{m<k} I_m]  ==  X[i_1, ..., i_N]

with 1-based indices. Mode arguments in this module are 1-based as well.
"""

from __future__ import annotations

from math import prod

import numpy as np

from .errors import ColumnMismatch, ModeOutOfRange, ShapeMismatch

__all__ = [
    "as_tensor",
    "vec",
    "ivec",
    "linear_index",
    "frobenius_norm",
    "inner_product",
    "unfold_mode",
    "fold_mode",
    "unfold_balanced",
    "kronecker",
    "khatri_rao",
]


def as_tensor(data) -> np.ndarray:
    """Return `data` as a float64 array with every dimension >= 1."""
    t = np.asarray(data, dtype=np.float64)
    if t.ndim == 0:
        t = t.reshape(1)
    if any(d < 1 for d in t.shape):
        raise ShapeMismatch(f"all dimensions must be >= 1, got {t.shape}")
    return t


def vec(m: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(m).reshape(-1, order="F")


def ivec(v: np.ndarray, shape) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v).reshape(shape, order="F")


def linear_index(index, shape) -> int:
    """1-based position of the 1-based multi-index `index` in :func:`vec` order."""
    if len(index) != len(shape):
        raise ShapeMismatch("index and shape must have the same length")
    pos, stride = 1, 1
    for i, d in zip(index, shape):
        if not 1 <= i <= d:
            raise ModeOutOfRange(f"index {i} outside 1..{d}")
        pos += (i - 1) * stride
        stride *= d
    return pos


def frobenius_norm(t) -> float:
    t = np.asarray(t, dtype=np.float64)
    return float(np.sqrt(np.sum(t * t)))


def inner_product(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def _check_mode(n: int, ndim: int, upper: int | None = None) -> None:
    upper = ndim if upper is None else upper
    if not 1 <= n <= upper:
        raise ModeOutOfRange(f"mode {n} outside 1..{upper}")


def unfold_mode(t, n: int) -> np.ndarray:
    """Mode-`n` unfolding, shape ``(I_n, prod_{m != n} I_m)``.

    Rows index mode `n`; columns enumerate the remaining modes in
    column-major order.
    """
    t = np.asarray(t, dtype=np.float64)
    _check_mode(n, t.ndim)
    return np.moveaxis(t, n - 1, 0).reshape(t.shape[n - 1], -1, order="F")


def fold_mode(m, n: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold_mode` for a tensor of the given `shape`."""
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(d) for d in shape)
    _check_mode(n, len(shape))
    rows = shape[n - 1]
    cols = prod(shape) // rows
    if m.shape != (rows, cols):
        raise ShapeMismatch(
            f"matrix {m.shape} does not match mode-{n} unfolding ({rows}, {cols}) of {shape}"
        )
    rest = shape[: n - 1] + shape[n:]
    return np.moveaxis(m.reshape((rows,) + rest, order="F"), 0, n - 1)


def unfold_balanced(t, n: int) -> np.ndarray:
    """Balanced `n`-unfolding: modes ``1..n`` index rows, ``n+1..N`` columns."""
    t = np.asarray(t, dtype=np.float64)
    _check_mode(n, t.ndim, t.ndim - 1)
    return t.reshape(prod(t.shape[:n]), -1, order="F")


def kronecker(x, y) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    i1, i2 = x.shape
    j1, j2 = y.shape
    return (x[:, None, :, None] * y[None, :, None, :]).reshape(i1 * j1, i2 * j2)


def khatri_rao(x, y) -> np.ndarray:
    """Column-wise Kronecker product of two matrices with equal column counts."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[1] != y.shape[1]:
        raise ColumnMismatch(f"column counts differ: {x.shape[1]} vs {y.shape[1]}")
    return (x[:, None, :] * y[None, :, :]).reshape(-1, x.shape[1])
