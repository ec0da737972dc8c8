import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lampnet import galois
from lampnet._tables import EXP, LOG

from conftest import clmul, ref_inv, ref_matmul, ref_rank

byte = st.integers(0, 255)
nonzero = st.integers(1, 255)


def test_mul_table_matches_shift_and_add():
    for a in range(256):
        for b in range(0, 256, 7):
            assert galois.gf_mul(a, b) == clmul(a, b)


def test_generator_two_has_full_order():
    assert len({int(EXP[i]) for i in range(255)}) == 255
    assert int(EXP[255]) == 1
    assert all(int(EXP[LOG[x]]) == x for x in range(1, 256))


def test_known_products():
    assert galois.gf_mul(0x80, 2) == 0x1D
    assert galois.gf_mul(0, 77) == 0
    assert galois.gf_mul(1, 77) == 77


@given(nonzero)
def test_inverse(a):
    assert galois.gf_inv(a) == ref_inv(a)
    assert galois.gf_mul(a, galois.gf_inv(a)) == 1


def test_inverse_of_zero():
    with pytest.raises(ZeroDivisionError):
        galois.gf_inv(0)
    with pytest.raises(ZeroDivisionError):
        galois.gf_div(3, 0)


@given(byte, byte, byte)
def test_field_axioms(a, b, c):
    mul, add = galois.gf_mul, galois.gf_add
    assert mul(a, b) == mul(b, a)
    assert mul(a, mul(b, c)) == mul(mul(a, b), c)
    assert mul(a, add(b, c)) == add(mul(a, b), mul(a, c))
    assert add(a, a) == 0


@given(byte, nonzero)
def test_div_inverts_mul(a, b):
    assert galois.gf_div(galois.gf_mul(a, b), b) == a


def test_matmul_matches_reference(rng):
    for shape in ((1, 1, 1), (3, 5, 2), (7, 4, 9)):
        a = galois.random_matrix(shape[0], shape[1], rng)
        b = galois.random_matrix(shape[1], shape[2], rng)
        assert np.array_equal(galois.matmul(a, b), ref_matmul(a, b))


def test_matmul_identity(rng):
    a = galois.random_matrix(6, 6, rng)
    assert np.array_equal(galois.matmul(galois.identity(6), a), a)


def test_rank_matches_reference(rng):
    for _ in range(30):
        r, c = rng.integers(1, 8, size=2)
        m = galois.random_matrix(int(r), int(c), rng)
        if rng.random() < 0.5 and r > 1:
            m[-1] = m[0]
        assert galois.rank(m) == ref_rank(m)


def test_rank_of_dependent_rows(rng):
    a = galois.random_matrix(3, 6, rng)
    mix = galois.random_matrix(2, 3, rng)
    m = np.vstack([a, galois.matmul(mix, a)])
    assert galois.rank(m) == galois.rank(a) <= 3


def test_rank_empty_and_zero():
    assert galois.rank(np.zeros((0, 4), dtype=np.uint8)) == 0
    assert galois.rank(np.zeros((3, 4), dtype=np.uint8)) == 0


def test_solve_recovers_unknowns(rng):
    for _ in range(20):
        k = int(rng.integers(1, 10))
        a = galois.random_matrix(k, k, rng)
        if ref_rank(a) < k:
            continue
        x = galois.random_matrix(k, 5, rng)
        b = galois.matmul(a, x)
        assert np.array_equal(galois.solve(a, b), x)
        assert np.array_equal(galois.solve(a, b[:, 0]), x[:, 0])


def test_solve_singular_reports_rank():
    a = np.array([[1, 2], [2, 4]], dtype=np.uint8)  # row 2 = 2 * row 1
    assert galois.gf_mul(2, 2) == 4
    with pytest.raises(galois.UnderdeterminedError) as err:
        galois.solve(a, np.zeros(2, dtype=np.uint8))
    assert err.value.rank == 1 and err.value.needed == 2


def test_solve_rejects_non_square():
    with pytest.raises(ValueError):
        galois.solve(np.ones((2, 3), dtype=np.uint8), np.ones(2, dtype=np.uint8))


def test_rowbasis_incremental_rank(rng):
    basis = galois.RowBasis(6)
    rows = galois.random_matrix(10, 6, rng)
    for i, row in enumerate(rows):
        before = basis.rank
        gained = basis.add(row)
        assert basis.rank == ref_rank(rows[: i + 1])
        assert gained == (basis.rank > before)
    assert basis.full


def test_rowbasis_rejects_dependent_row(rng):
    basis = galois.RowBasis(4)
    a = galois.random_matrix(2, 4, rng)
    basis.add(a[0])
    basis.add(a[1])
    combo = galois.matmul(np.array([[7, 9]], dtype=np.uint8), a)[0]
    assert not basis.add(combo)
    assert basis.rank == ref_rank(a)


def test_rowbasis_payload_columns_solve(rng):
    k, L = 5, 8
    src = galois.random_matrix(k, L, rng)
    basis = galois.RowBasis(k, width=k + L)
    while not basis.full:
        c = galois.random_matrix(1, k, rng)
        basis.add(np.concatenate([c[0], galois.matmul(c, src)[0]]))
    out = np.empty_like(src)
    out[basis.pivots()] = basis.rows()[:, k:]
    assert np.array_equal(out, src)


@settings(max_examples=40)
@given(st.lists(st.lists(byte, min_size=4, max_size=4), min_size=1, max_size=6))
def test_rank_bounded_and_matches(rows):
    m = np.array(rows, dtype=np.uint8)
    r = galois.rank(m)
    assert 0 <= r <= min(m.shape)
    assert r == ref_rank(m)
