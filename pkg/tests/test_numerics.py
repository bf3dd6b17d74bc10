from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crib_bse.errors import DimensionMismatch, SingularBlock, SingularMatrix
from crib_bse.numerics import (
    BlockPartition,
    block_inverse,
    cmatrix,
    hermitian_check,
    rcond,
    schur_complement,
)


def _well_conditioned(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return X + 3.0 * np.sqrt(n) * np.eye(n)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 9), data=st.data())
def test_block_inverse_matches_dense_inverse(seed, n, data):
    m = data.draw(st.integers(1, n - 1))
    M = _well_conditioned(seed, n)
    inv = block_inverse(BlockPartition.split(M, m)).assemble()
    np.testing.assert_allclose(inv, np.linalg.inv(M), atol=1e-10)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8), data=st.data())
def test_schur_determinant_factorisation(seed, n, data):
    m = data.draw(st.integers(1, n - 1))
    M = _well_conditioned(seed, n)
    part = BlockPartition.split(M, m)
    S = schur_complement(part)
    lhs = np.linalg.det(M)
    rhs = np.linalg.det(part.A) * np.linalg.det(S)
    assert abs(lhs - rhs) <= 1e-9 * abs(lhs)


def test_split_assemble_round_trip(rng):
    M = rng.standard_normal((5, 5)) + 0j
    np.testing.assert_array_equal(BlockPartition.split(M, 2).assemble(), M)


def test_singular_leading_block_is_reported():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    part = BlockPartition(A, np.eye(2), np.eye(2), np.eye(2))
    with pytest.raises(SingularBlock):
        schur_complement(part)


def test_singular_matrix_is_reported():
    M = np.ones((4, 4))
    with pytest.raises(SingularMatrix):
        block_inverse(BlockPartition.split(M, 2))


def test_nonconformable_blocks_rejected():
    with pytest.raises(DimensionMismatch):
        BlockPartition(np.eye(2), np.ones((2, 3)), np.ones((2, 2)), np.eye(2))
    with pytest.raises(DimensionMismatch):
        BlockPartition.split(np.eye(3), 3)


def test_rcond_extremes():
    assert rcond(np.eye(4)) == 1.0
    assert rcond(np.zeros((3, 3))) == 0.0
    assert rcond(np.diag([1.0, 1e-3])) == pytest.approx(1e-3)


def test_cmatrix_is_read_only_and_finite():
    M = cmatrix([[1, 2], [3, 4]])
    assert M.dtype == complex and not M.flags.writeable
    with pytest.raises(ValueError):
        cmatrix([[np.nan]])


def test_hermitian_check():
    H = np.array([[2, 1 - 1j], [1 + 1j, 3]])
    assert hermitian_check(H)
    assert not hermitian_check(H + np.array([[0, 1e-3], [0, 0]]))
    assert hermitian_check(H + np.array([[0, 1e-3], [0, 0]]), tol=1e-2)


def test_schur_decoupled_and_scalar_examples():
    I2 = np.eye(2)
    Z = np.zeros((2, 2))
    np.testing.assert_array_equal(schur_complement(BlockPartition(I2, Z, Z, I2)), I2)
    S = schur_complement(BlockPartition([[2.0]], [[1.0]], [[1.0]], [[3.0]]))
    assert S[0, 0] == pytest.approx(2.5)


def _random_hpd(rng, n):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return X @ X.conj().T + 0.1 * np.eye(n)


def test_schur_equals_inverse_of_lower_right_block_of_inverse(rng):
    M = _random_hpd(rng, 4)
    part = BlockPartition.split(M, 2)
    expected = np.linalg.inv(np.linalg.inv(M)[2:, 2:])
    S = schur_complement(part)
    assert np.linalg.norm(S - expected) < 1e-10 * np.linalg.norm(expected)
    eig = np.linalg.eigvalsh(0.5 * (S + S.conj().T))
    assert hermitian_check(S, 1e-12 * np.trace(S).real)
    assert eig.min() > 1e-12 * np.trace(S).real


def test_block_inverse_identity_and_block_diagonal(rng):
    I = np.eye(3)
    inv = block_inverse(BlockPartition.split(I, 1))
    np.testing.assert_allclose(inv.assemble(), I, atol=1e-15)
    A = _random_hpd(rng, 2)
    D = _random_hpd(rng, 3)
    inv = block_inverse(BlockPartition(A, np.zeros((2, 3)), np.zeros((3, 2)), D))
    np.testing.assert_allclose(inv.A, np.linalg.inv(A), atol=1e-12)
    np.testing.assert_allclose(inv.D, np.linalg.inv(D), atol=1e-12)
    assert np.abs(inv.B).max() < 1e-15 and np.abs(inv.C).max() < 1e-15


def test_block_inverse_six_by_six_and_lower_right_block(rng):
    M = _well_conditioned(7, 6)
    part = BlockPartition.split(M, 3)
    inv = block_inverse(part)
    err = np.linalg.norm(inv.assemble() @ M - np.eye(6)) / np.sqrt(6)
    assert err < 1e-10
    np.testing.assert_allclose(inv.D, np.linalg.inv(schur_complement(part)), atol=1e-10)


def test_hermitian_check_examples():
    assert hermitian_check(np.eye(3), 0.0)
    assert not hermitian_check(np.array([[0, 1j], [1j, 0]]), 1e-12)
