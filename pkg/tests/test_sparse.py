from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparse_code.errors import InvalidPartition, InvalidTriplet, ShapeError
from sparse_code.sparse import (BlockGrid, SparseMatrix, block_product, from_triplets, hstack,
                                linear_combination, scaled_accumulate, split_columns)


def dense(M):
    return np.asarray(M.to_dense(), dtype=float)


def check_canonical(M: SparseMatrix):
    assert M.row_ptr[0] == 0 and M.row_ptr[-1] == M.nnz
    assert np.all(np.diff(M.row_ptr) >= 0)
    for r in range(M.rows):
        cols = M.col_idx[M.row_ptr[r]:M.row_ptr[r + 1]]
        assert np.all(np.diff(cols) > 0)
    assert np.all(M.col_idx < max(M.cols, 1))
    assert all(v != 0 for v in M.values)


@st.composite
def int_matrices(draw, max_rows=8, max_cols=8, rows=None):
    r = rows if rows is not None else draw(st.integers(1, max_rows))
    c = draw(st.integers(1, max_cols))
    vals = draw(st.lists(st.integers(-4, 4), min_size=r * c, max_size=r * c))
    return np.array(vals, dtype=float).reshape(r, c)


# from_triplets

def test_from_triplets_empty():
    M = from_triplets(2, 2, [])
    assert M.shape == (2, 2) and M.nnz == 0


def test_from_triplets_sums_duplicates():
    M = from_triplets(2, 2, [(0, 0, 1), (0, 0, 2)])
    assert M.triplets() == [(0, 0, 3.0)]


def test_from_triplets_cancellation_dropped():
    M = from_triplets(2, 2, [(0, 1, 5), (1, 0, -5), (0, 1, -5)])
    assert M.triplets() == [(1, 0, -5.0)]
    check_canonical(M)


@pytest.mark.parametrize("entry", [(2, 0, 1.0), (0, 2, 1.0), (-1, 0, 1.0)])
def test_from_triplets_out_of_range(entry):
    with pytest.raises(InvalidTriplet):
        from_triplets(2, 2, [entry])


@given(int_matrices())
def test_from_dense_round_trip(D):
    M = SparseMatrix.from_dense(D)
    check_canonical(M)
    assert np.array_equal(dense(M), D)


# split_columns

def test_split_identity():
    M = SparseMatrix.from_dense(np.arange(8.0).reshape(2, 4))
    (only,) = split_columns(M, 1)
    assert only.equals(M)


def test_split_even():
    D = np.arange(1.0, 9.0).reshape(2, 4)
    left, right = split_columns(SparseMatrix.from_dense(D), 2)
    assert np.array_equal(dense(left), D[:, :2])
    assert np.array_equal(dense(right), D[:, 2:])


def test_split_padded():
    D = np.arange(1.0, 11.0).reshape(2, 5)
    parts = split_columns(SparseMatrix.from_dense(D), 2)
    assert [p.cols for p in parts] == [3, 3]
    assert np.all(dense(parts[1])[:, 2] == 0)
    glued = np.hstack([dense(p) for p in parts])[:, :5]
    assert np.array_equal(glued, D)


def test_split_too_many_parts():
    with pytest.raises(InvalidPartition):
        split_columns(SparseMatrix.from_dense(np.ones((2, 3))), 4)


@given(int_matrices(max_cols=12), st.integers(1, 12))
def test_split_reassembles(D, parts):
    M = SparseMatrix.from_dense(D)
    if parts > M.cols:
        return
    pieces = split_columns(M, parts)
    assert sum(p.nnz for p in pieces) == M.nnz
    assert hstack(pieces, cols=M.cols).equals(M)


# block_product

def test_block_product_identity():
    I = SparseMatrix.from_dense(np.eye(2))
    out, flops = block_product(I, I)
    assert np.array_equal(dense(out), np.eye(2))
    assert flops == 2


def test_block_product_hand_example():
    A = SparseMatrix.from_dense(np.array([[1.0, 0], [0, 2]]))
    B = SparseMatrix.from_dense(np.array([[0.0, 3], [0, 0]]))
    out, _ = block_product(A, B)
    assert np.array_equal(dense(out), np.array([[0.0, 3], [0, 0]]))


def test_block_product_zero_operand():
    A = SparseMatrix.from_dense(np.arange(1.0, 7.0).reshape(3, 2))
    out, flops = block_product(A, SparseMatrix.empty(3, 4))
    assert out.nnz == 0 and out.shape == (2, 4) and flops == 0


def test_block_product_shape_error():
    with pytest.raises(ShapeError):
        block_product(SparseMatrix.empty(2, 2), SparseMatrix.empty(3, 2))


def counting_reference(A, B):
    """Dense triple loop; counts a multiply-add only when both factors are nonzero."""
    s, r = A.shape
    t = B.shape[1]
    C = np.zeros((r, t))
    count = 0
    for k in range(s):
        for i in range(r):
            if A[k, i] == 0:
                continue
            for j in range(t):
                if B[k, j] != 0:
                    C[i, j] += A[k, i] * B[k, j]
                    count += 1
    return C, count


@settings(max_examples=150)
@given(st.integers(1, 8).flatmap(lambda s: st.tuples(int_matrices(rows=s), int_matrices(rows=s))))
def test_block_product_matches_dense_and_counts(pair):
    A, B = pair
    out, flops = block_product(SparseMatrix.from_dense(A), SparseMatrix.from_dense(B))
    ref, count = counting_reference(A, B)
    assert np.array_equal(dense(out), ref)
    assert flops == count
    check_canonical(out)


# scaled_accumulate

def test_accumulate_zero_coeff():
    acc = SparseMatrix.from_dense(np.array([[1.0, 2.0]]))
    X = SparseMatrix.from_dense(np.array([[5.0, 0.0]]))
    out, cost = scaled_accumulate(acc, 0, X)
    assert out.equals(acc) and cost == 1


def test_accumulate_cancellation():
    X = SparseMatrix.from_dense(np.array([[1.0, -2.0], [0, 3]]))
    out, cost = scaled_accumulate(X, -1, X)
    assert out.nnz == 0 and cost == 3


def test_accumulate_hand_example():
    out, cost = scaled_accumulate(SparseMatrix.from_dense(np.array([[1.0, 0]])), 2,
                                  SparseMatrix.from_dense(np.array([[0.0, 3]])))
    assert np.array_equal(dense(out), np.array([[1.0, 6.0]]))
    assert cost == 1


def test_accumulate_shape_error():
    with pytest.raises(ShapeError):
        scaled_accumulate(SparseMatrix.empty(1, 2), 1, SparseMatrix.empty(2, 1))


@given(st.lists(st.tuples(st.integers(-5, 5), int_matrices(max_rows=3, max_cols=3)),
                min_size=1, max_size=5))
def test_accumulate_exact_for_integers(updates):
    shape = updates[0][1].shape
    updates = [(c, D) for c, D in updates if D.shape == shape]
    acc = SparseMatrix.empty(*shape)
    ref = np.zeros(shape)
    for c, D in updates:
        acc, _ = scaled_accumulate(acc, c, SparseMatrix.from_dense(D))
        ref += c * D
    assert np.array_equal(dense(acc), ref)
    check_canonical(acc)


def test_exact_values_survive_accumulation():
    big = SparseMatrix.from_dense(np.array([[3.0, 1.0]])).to_exact()
    out, _ = scaled_accumulate(big, 10**30, big)
    assert out.is_exact
    assert out.values.tolist() == [3 * (10**30 + 1), 10**30 + 1]


def test_linear_combination_rational_is_exact():
    X = SparseMatrix.from_dense(np.array([[3.0, 5.0]]))
    Y = SparseMatrix.from_dense(np.array([[1.0, 1.0]]))
    out, cost = linear_combination([X, Y], [Fraction(1, 2), Fraction(1, 2)])
    assert dense(out).tolist() == [[2.0, 3.0]]
    assert cost == 4


def test_scale_by_fraction_exact():
    X = SparseMatrix.from_dense(np.array([[6.0, 9.0]])).to_exact()
    assert X.scale(Fraction(1, 3)).values.tolist() == [2, 3]


# BlockGrid

def test_block_grid_assembles_full_product():
    rng = np.random.default_rng(3)
    A = rng.integers(-2, 3, size=(6, 5)).astype(float)
    B = rng.integers(-2, 3, size=(6, 7)).astype(float)
    grid, flops = BlockGrid.from_inputs(SparseMatrix.from_dense(A), SparseMatrix.from_dense(B), 2, 3)
    assert grid.flat_index(1, 2) == 5 and grid.position(5) == (1, 2)
    assert np.array_equal(dense(grid.assemble(5, 7)), A.T @ B)
    _, count = counting_reference(A, B)
    assert flops == count
