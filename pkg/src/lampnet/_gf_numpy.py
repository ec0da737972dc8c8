"""Vectorised numpy kernels for GF(2^8) linear algebra.

Same surface as the compiled ``_gfcore`` module; used when the extension
is unavailable or ``LAMPNET_PURE_PYTHON=1`` is set.
"""

import numpy as np

from ._tables import INV, MUL


def axpy(dst, src, c):
    """dst ^= c * src, in place."""
    if c:
        np.bitwise_xor(dst, MUL[c][src], out=dst)


def matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    if k != k2:
        raise ValueError(f"shape mismatch {a.shape} x {b.shape}")
    out = np.zeros((m, n), dtype=np.uint8)
    for j in range(k):
        col = a[:, j]
        if col.any():
            out ^= MUL[col[:, None], b[j][None, :]]
    return out


def rref(a, ncols):
    """Reduce ``a`` in place to reduced row echelon form over its first ncols.

    Returns (rank, pivot_columns).
    """
    rows = a.shape[0]
    r = 0
    pivots = []
    for col in range(ncols):
        if r == rows:
            break
        nz = np.flatnonzero(a[r:, col])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        a[r] = MUL[_inv(a[r, col])][a[r]]
        coef = a[:, col].copy()
        coef[r] = 0
        hit = np.flatnonzero(coef)
        if hit.size:
            a[hit] ^= MUL[coef[hit][:, None], a[r][None, :]]
        pivots.append(col)
        r += 1
    return r, np.asarray(pivots, dtype=np.int64)


def insert_row(basis, pivcols, nrows, row, ncols):
    """Fold ``row`` into a fully reduced basis held in basis[:nrows].

    Returns the new row count; ``row`` is clobbered. pivcols[:nrows] holds
    the pivot column of each basis row and is updated in place.
    """
    if nrows >= basis.shape[0]:
        return nrows
    if nrows:
        piv = pivcols[:nrows]
        coef = row[piv]
        hit = np.flatnonzero(coef)
        if hit.size:
            row ^= np.bitwise_xor.reduce(
                MUL[coef[hit][:, None], basis[hit]], axis=0
            )
    nz = np.flatnonzero(row[:ncols])
    if nz.size == 0:
        return nrows
    col = int(nz[0])
    row[:] = MUL[_inv(row[col])][row]
    if nrows:
        coef = basis[:nrows, col].copy()
        hit = np.flatnonzero(coef)
        if hit.size:
            basis[hit] ^= MUL[coef[hit][:, None], row[None, :]]
    basis[nrows] = row
    pivcols[nrows] = col
    return nrows + 1


def _inv(a):
    return int(INV[a])
