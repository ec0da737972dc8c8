"""The compiled and numpy kernels must agree bit for bit."""

import numpy as np
import pytest

from lampnet import _gf_numpy

from conftest import ref_matmul, ref_rank

try:
    from lampnet import _gfcore
except ImportError:
    _gfcore = None


def test_matmul(kernel, rng):
    a = rng.integers(0, 256, (9, 13), dtype=np.uint8)
    b = rng.integers(0, 256, (13, 6), dtype=np.uint8)
    assert np.array_equal(kernel.matmul(a, b), ref_matmul(a, b))


def test_axpy(kernel, rng):
    dst = rng.integers(0, 256, 50, dtype=np.uint8)
    src = rng.integers(0, 256, 50, dtype=np.uint8)
    want = dst ^ ref_matmul(np.array([[29]], dtype=np.uint8), src[None, :])[0]
    kernel.axpy(dst, src, 29)
    assert np.array_equal(dst, want)


def test_rref_rank_and_form(kernel, rng):
    for _ in range(20):
        m = rng.integers(0, 256, (int(rng.integers(1, 10)), 8), dtype=np.uint8)
        m[rng.random(m.shape) < 0.4] = 0
        work = m.copy()
        r, piv = kernel.rref(work, 8)
        assert r == ref_rank(m)
        for i in range(r):
            col = int(piv[i])
            assert work[i, col] == 1
            assert np.count_nonzero(work[:r, col]) == 1
        assert not work[r:].any()


def test_insert_row_builds_basis(kernel, rng):
    cap, ncols = 6, 6
    basis = np.zeros((cap, ncols + 3), dtype=np.uint8)
    piv = np.zeros(cap, dtype=np.int64)
    n = 0
    rows = rng.integers(0, 256, (12, ncols + 3), dtype=np.uint8)
    for i, row in enumerate(rows):
        n = kernel.insert_row(basis, piv, n, row.copy(), ncols)
        assert n == ref_rank(rows[: i + 1, :ncols])
    assert n == cap


@pytest.mark.skipif(_gfcore is None, reason="extension not built")
def test_backends_agree_on_rref(rng):
    for _ in range(50):
        m = rng.integers(0, 256, (int(rng.integers(1, 12)), 16), dtype=np.uint8)
        m[rng.random(m.shape) < 0.5] = 0
        a, b = m.copy(), m.copy()
        ra, pa = _gf_numpy.rref(a, 10)
        rb, pb = _gfcore.rref(b, 10)
        assert ra == rb
        assert np.array_equal(pa[:ra], pb[:rb])
        assert np.array_equal(a, b)
