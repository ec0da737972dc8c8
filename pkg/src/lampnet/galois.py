"""GF(2^8) arithmetic and dense linear algebra.

Field elements are plain ints in [0, 255]; matrices are 2-D ``numpy.uint8``
arrays. The reduction polynomial is x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from ._tables import EXP, INV, LOG, MUL, POLY

__all__ = [
    "POLY",
    "UnderdeterminedError",
    "RowBasis",
    "gf_add",
    "gf_mul",
    "gf_inv",
    "gf_div",
    "matmul",
    "rank",
    "solve",
    "identity",
    "random_matrix",
    "backend",
]


class UnderdeterminedError(ValueError):
    """Raised by :func:`solve` when the coefficient matrix is singular."""

    def __init__(self, rank, needed):
        super().__init__(f"underdetermined system: rank {rank} < {needed}")
        self.rank = rank
        self.needed = needed


def backend():
    return _kernels.BACKEND


def gf_add(a, b):
    return a ^ b


def gf_mul(a, b):
    if a == 0 or b == 0:
        return 0
    return int(EXP[LOG[a] + LOG[b]])


def gf_inv(a):
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(2^8)")
    return int(INV[a])


def gf_div(a, b):
    return gf_mul(a, gf_inv(b))


def _as_matrix(m):
    arr = np.ascontiguousarray(m, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def identity(n):
    return np.eye(n, dtype=np.uint8)


def random_matrix(rows, cols, rng, nonzero=False):
    low = 1 if nonzero else 0
    return rng.integers(low, 256, size=(rows, cols), dtype=np.uint8)


def scale(vec, c):
    """Return c * vec for a uint8 vector or matrix."""
    return MUL[c][np.asarray(vec, dtype=np.uint8)]


def matmul(a, b):
    a = _as_matrix(a)
    b = _as_matrix(b)
    return _kernels.matmul(a, b)


def rank(m):
    """Row rank over GF(2^8) by Gaussian elimination."""
    work = _as_matrix(m).copy()
    if work.size == 0:
        return 0
    r, _ = _kernels.rref(work, work.shape[1])
    return int(r)


def solve(coeffs, rhs):
    """Solve coeffs @ x = rhs for square ``coeffs``.

    ``rhs`` may be a matrix (one column per right-hand side, e.g. payload
    bytes) or a vector. Raises :class:`UnderdeterminedError` when singular.
    """
    a = _as_matrix(coeffs)
    k, k2 = a.shape
    if k != k2:
        raise ValueError(f"coefficient matrix must be square, got {a.shape}")
    b = np.asarray(rhs, dtype=np.uint8)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    if b.shape[0] != k:
        raise ValueError(f"rhs has {b.shape[0]} rows, expected {k}")
    aug = np.ascontiguousarray(np.hstack([a, b]))
    r, _ = _kernels.rref(aug, k)
    if r < k:
        raise UnderdeterminedError(int(r), k)
    x = aug[:, k:].copy()
    return x[:, 0] if vector else x


class RowBasis:
    """Incrementally maintained reduced row-echelon basis.

    Rows are ``width`` bytes wide; pivots are searched in the first
    ``ncols`` columns, so trailing columns can carry payload bytes.
    """

    def __init__(self, ncols, width=None, capacity=None):
        self.ncols = ncols
        self.width = ncols if width is None else width
        cap = ncols if capacity is None else capacity
        self._rows = np.zeros((cap, self.width), dtype=np.uint8)
        self._piv = np.zeros(cap, dtype=np.int64)
        self.rank = 0

    def add(self, row):
        """Insert a row; return True when it raised the rank."""
        work = np.array(row, dtype=np.uint8, copy=True)
        if work.shape != (self.width,):
            raise ValueError(f"row must have shape ({self.width},)")
        before = self.rank
        self.rank = _kernels.insert_row(self._rows, self._piv, self.rank, work, self.ncols)
        return self.rank > before

    @property
    def full(self):
        return self.rank >= self.ncols

    def rows(self):
        return self._rows[: self.rank].copy()

    def pivots(self):
        return self._piv[: self.rank].copy()
