"""Small dense linear algebra for block inverses.

Blocks are at most a few hundred unknowns, so their matrices are inverted
exactly (LU with partial pivoting, then a solve against the identity) and
kept in a shape-keyed cache.  Matrices are stored column-major.

``matvec`` accumulates strictly in ascending column order, one axpy per
column, so every row sum has a fixed association order.  That is the
reproducibility contract the smoother relies on: the same block applied to
the same data yields bit-identical results no matter which thread runs it
or how many threads exist.
"""

from __future__ import annotations

import threading

import numpy as np

from .grid import _int3
from .stencil import assemble_block_matrix

__all__ = [
    "SingularMatrixError",
    "invert_dense",
    "matvec",
    "multiply_back_error",
    "InverseCache",
]

# A pivot this small relative to ||A||_inf counts as singular.
_PIVOT_RTOL = 1e-14


class SingularMatrixError(ValueError):
    """Raised when a pivot falls below the working-precision threshold."""


def _checked_square(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValueError(f"{name} must have order >= 1")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    return a


def invert_dense(a):
    """Exact inverse via LU with partial pivoting, returned column-major.

    Raises :class:`SingularMatrixError` if any pivot magnitude drops below
    1e-14 times the infinity norm of the input.
    """
    lu = np.array(_checked_square(a, "matrix"), dtype=np.float64, order="F")
    n = lu.shape[0]
    anorm = np.abs(lu).sum(axis=1).max()
    if anorm == 0.0:
        raise SingularMatrixError("matrix is exactly zero")
    piv = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        pivot = lu[p, k]
        if abs(pivot) < _PIVOT_RTOL * anorm:
            raise SingularMatrixError(
                f"pivot {pivot:.3e} at step {k} below {_PIVOT_RTOL:g} * ||A||_inf"
            )
        if p != k:
            lu[[k, p], :] = lu[[p, k], :]
            piv[[k, p]] = piv[[p, k]]
        if k + 1 < n:
            lu[k + 1 :, k] /= pivot
            lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    # Solve A X = I.  P A = L U, so forward- then back-substitute against
    # the row-permuted identity; all columns advance together, each column
    # is the classic solve for one unit vector.
    y = np.zeros((n, n), dtype=np.float64, order="F")
    for i in range(n):
        y[i, piv[i]] = 1.0
    for i in range(1, n):
        y[i, :] -= lu[i, :i] @ y[:i, :]
    x = np.zeros((n, n), dtype=np.float64, order="F")
    x[n - 1, :] = y[n - 1, :] / lu[n - 1, n - 1]
    for i in range(n - 2, -1, -1):
        x[i, :] = (y[i, :] - lu[i, i + 1 :] @ x[i + 1 :, :]) / lu[i, i]
    return x


def matvec(m, x):
    """y = M x with a fixed ascending-column accumulation order.

    Row i receives M[i,0]*x[0] + M[i,1]*x[1] + ... associated left to
    right, exactly as a scalar double loop would compute it.
    """
    m = np.asarray(m, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if x.shape != (m.shape[0],):
        raise ValueError(f"vector shape {x.shape} does not match order {m.shape[0]}")
    y = np.zeros(m.shape[0], dtype=np.float64)
    for j, xj in enumerate(x.tolist()):
        y += m[:, j] * xj
    return y


def multiply_back_error(a, ainv):
    """||A * Ainv - I||_inf, the multiply-back check for an inverse."""
    a = np.asarray(a, dtype=np.float64)
    resid = a @ ainv
    resid[np.diag_indices_from(resid)] -= 1.0
    return float(np.abs(resid).sum(axis=1).max())


class InverseCache:
    """Lazy, shape-keyed store of exact block inverses.

    The first lookup of a shape assembles and inverts its block matrix; all
    later lookups return the stored inverse.  Lookups may run concurrently;
    misses are serialized under a lock so each shape is inverted exactly
    once and no reader ever sees a partially built entry.  One cache serves
    one stencil; mixing stencils is rejected.
    """

    def __init__(self):
        self._entries = {}
        self._lock = threading.Lock()
        self._stencil = None
        self._inversions = 0

    def get(self, stencil, extent):
        """The inverse block matrix for ``extent``, inverting on first use."""
        extent = _int3(extent, "extent")
        entry = self._entries.get(extent)
        if entry is not None:
            if stencil != self._stencil:
                raise ValueError("cache already bound to a different stencil")
            return entry
        with self._lock:
            if self._stencil is None:
                self._stencil = stencil
            elif stencil != self._stencil:
                raise ValueError("cache already bound to a different stencil")
            entry = self._entries.get(extent)
            if entry is None:
                entry = invert_dense(assemble_block_matrix(stencil, extent))
                entry.flags.writeable = False
                self._inversions += 1
                self._entries[extent] = entry
            return entry

    @property
    def inversions(self):
        """How many inversions have actually run (not lookups)."""
        return self._inversions

    @property
    def shapes(self):
        return tuple(self._entries)

    def __len__(self):
        return len(self._entries)
