import math

import pytest
from hypothesis import given, settings, strategies as st

from gerbe_index.intmat import (IntegerMatrix, det_bareiss, in_image,
                                kernel_basis, smith_normal_form, solve_integer)


def test_identity_is_its_own_normal_form():
    snf = smith_normal_form(IntegerMatrix.identity(3))
    assert snf.diagonal == [1, 1, 1]
    assert snf.D.entries == IntegerMatrix.identity(3).entries


def test_two_by_two_example():
    M = IntegerMatrix.from_rows([[2, 4], [6, 8]])
    snf = smith_normal_form(M)
    d = snf.diagonal
    # oracle: d1 = gcd of all entries, d1*d2 = |det|
    assert d[0] == math.gcd(2, math.gcd(4, math.gcd(6, 8))) == 2
    assert d[0] * d[1] == abs(2 * 8 - 4 * 6) == 8
    assert d == [2, 4]


def test_zero_matrix():
    M = IntegerMatrix.zeros(3, 2)
    snf = smith_normal_form(M)
    assert snf.D.is_zero()
    assert snf.U.entries == IntegerMatrix.identity(3).entries
    assert snf.V.entries == IntegerMatrix.identity(2).entries


def _check_decomposition(M):
    snf = smith_normal_form(M)
    assert (snf.U @ snf.D @ snf.V).entries == M.entries
    assert abs(det_bareiss(snf.U)) == 1
    assert abs(det_bareiss(snf.V)) == 1
    assert (snf.U @ snf.U_inv).entries == IntegerMatrix.identity(M.rows).entries
    assert (snf.V_inv @ snf.V).entries == IntegerMatrix.identity(M.cols).entries
    d = snf.diagonal
    for i, x in enumerate(d):
        assert x >= 0
        if i + 1 < len(d) and x != 0 and d[i + 1] != 0:
            assert d[i + 1] % x == 0
        if x == 0 and i + 1 < len(d):
            assert d[i + 1] == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.data())
def test_round_trip_random(r, c, data):
    rows = data.draw(st.lists(
        st.lists(st.integers(-50, 50), min_size=c, max_size=c),
        min_size=r, max_size=r))
    _check_decomposition(IntegerMatrix.from_rows(rows))


def test_round_trip_forty_square():
    import random
    rng = random.Random(11)
    rows = [[rng.randint(-50, 50) for _ in range(40)] for _ in range(40)]
    _check_decomposition(IntegerMatrix.from_rows(rows))


def test_solve_and_kernel():
    M = IntegerMatrix.from_rows([[2, 0, 0], [0, 3, 0]])
    snf = smith_normal_form(M)
    x = solve_integer(snf, [4, 9])
    assert x is not None and M.mul_vec(x) == [4, 9]
    assert solve_integer(snf, [1, 0]) is None        # 1 not a multiple of 2
    ker = kernel_basis(snf)
    assert len(ker) == 1
    assert M.mul_vec(ker[0]) == [0, 0]
    assert in_image(snf, [2, 3]) and not in_image(snf, [0, 1])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_kernel_vectors_annihilate(r, c, data):
    rows = data.draw(st.lists(
        st.lists(st.integers(-9, 9), min_size=c, max_size=c),
        min_size=r, max_size=r))
    M = IntegerMatrix.from_rows(rows)
    snf = smith_normal_form(M)
    for v in kernel_basis(snf):
        assert all(x == 0 for x in M.mul_vec(v))
