# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled GF(2^8) kernels. Mirrors lampnet._gf_numpy exactly."""

import numpy as np
cimport numpy as cnp

from lampnet._tables import EXP as _EXP, LOG as _LOG

cnp.import_array()

cdef unsigned char EXP[512]
cdef int LOG[256]
cdef unsigned char INV[256]

cdef void _load_tables():
    cdef int i
    for i in range(512):
        EXP[i] = _EXP[i]
    for i in range(256):
        LOG[i] = _LOG[i]
    INV[0] = 0
    for i in range(1, 256):
        INV[i] = EXP[(255 - LOG[i]) % 255]

_load_tables()


cdef inline unsigned char gmul(unsigned char a, unsigned char b) nogil:
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


cdef inline void _axpy(unsigned char* dst, const unsigned char* src,
                       unsigned char c, Py_ssize_t n) nogil:
    cdef Py_ssize_t i
    cdef int lc
    cdef unsigned char s
    if c == 0:
        return
    if c == 1:
        for i in range(n):
            dst[i] ^= src[i]
        return
    lc = LOG[c]
    for i in range(n):
        s = src[i]
        if s:
            dst[i] ^= EXP[lc + LOG[s]]


cdef inline void _scale(unsigned char* row, unsigned char c, Py_ssize_t n) nogil:
    cdef Py_ssize_t i
    cdef int lc = LOG[c]
    for i in range(n):
        if row[i]:
            row[i] = EXP[lc + LOG[row[i]]]


def axpy(unsigned char[::1] dst, const unsigned char[::1] src, int c):
    """dst ^= c * src, in place."""
    if dst.shape[0] != src.shape[0]:
        raise ValueError("length mismatch")
    _axpy(&dst[0], &src[0], <unsigned char>c, dst.shape[0])


def matmul(const unsigned char[:, ::1] a, const unsigned char[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef Py_ssize_t i, j
    if b.shape[0] != k:
        raise ValueError(f"shape mismatch ({m}, {k}) x ({b.shape[0]}, {n})")
    out = np.zeros((m, n), dtype=np.uint8)
    cdef unsigned char[:, ::1] o = out
    if n == 0:
        return out
    with nogil:
        for i in range(m):
            for j in range(k):
                _axpy(&o[i, 0], &b[j, 0], a[i, j], n)
    return out


def rref(unsigned char[:, ::1] a, int ncols):
    """Reduce ``a`` in place to reduced row echelon form over its first ncols.

    Returns (rank, pivot_columns).
    """
    cdef Py_ssize_t rows = a.shape[0], width = a.shape[1]
    cdef Py_ssize_t r = 0, col, p, i, t
    cdef unsigned char tmp, c
    pivots = np.zeros(min(rows, ncols), dtype=np.int64)
    cdef long long[::1] piv = pivots
    with nogil:
        for col in range(ncols):
            if r == rows:
                break
            p = -1
            for i in range(r, rows):
                if a[i, col]:
                    p = i
                    break
            if p < 0:
                continue
            if p != r:
                for t in range(width):
                    tmp = a[r, t]
                    a[r, t] = a[p, t]
                    a[p, t] = tmp
            _scale(&a[r, 0], INV[a[r, col]], width)
            for i in range(rows):
                if i != r:
                    c = a[i, col]
                    if c:
                        _axpy(&a[i, 0], &a[r, 0], c, width)
            piv[r] = col
            r += 1
    return int(r), pivots[:r].copy()


def insert_row(unsigned char[:, ::1] basis, long long[::1] pivcols, int nrows,
               unsigned char[::1] row, int ncols):
    """Fold ``row`` into a fully reduced basis held in basis[:nrows].

    Returns the new row count; ``row`` is clobbered.
    """
    cdef Py_ssize_t width = row.shape[0]
    cdef Py_ssize_t i, col = -1
    cdef unsigned char c
    if basis.shape[1] != width:
        raise ValueError("row width mismatch")
    if nrows >= basis.shape[0]:
        # basis is already full rank for its capacity; nothing can be added
        return nrows
    with nogil:
        for i in range(nrows):
            c = row[pivcols[i]]
            if c:
                _axpy(&row[0], &basis[i, 0], c, width)
        for i in range(ncols):
            if row[i]:
                col = i
                break
        if col >= 0:
            _scale(&row[0], INV[row[col]], width)
            for i in range(nrows):
                c = basis[i, col]
                if c:
                    _axpy(&basis[i, 0], &row[0], c, width)
            for i in range(width):
                basis[nrows, i] = row[i]
            pivcols[nrows] = col
    if col < 0:
        return nrows
    return nrows + 1
