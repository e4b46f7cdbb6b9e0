"""CSR matrices, column partitioning, block products and scaled accumulation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import InvalidPartition, InvalidTriplet, ShapeError

_EXACT_FLOAT_LIMIT = 2.0 ** 53


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Canonical CSR matrix: sorted unique columns per row, no stored zeros.

    ``values`` is float64 in normal use.  An object array of Python ints or
    Fractions is accepted for exact evaluation of large-weight codes; such
    matrices run through the numpy kernels only.
    """

    rows: int
    cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def is_exact(self) -> bool:
        return self.values.dtype == object

    @classmethod
    def empty(cls, rows: int, cols: int, dtype=np.float64) -> "SparseMatrix":
        return cls(rows, cols, np.zeros(rows + 1, np.int64), np.zeros(0, np.int64),
                   np.zeros(0, dtype=dtype))

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        arr = np.asarray(dense)
        if arr.ndim != 2:
            raise ShapeError("dense input must be 2-D")
        r, c = np.nonzero(arr)
        vals = arr[r, c]
        if vals.dtype != object:
            vals = vals.astype(np.float64)
        return _from_coo(arr.shape[0], arr.shape[1], r, c, vals)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=self.values.dtype)
        out[self.row_index(), self.col_idx] = self.values
        return out

    def row_index(self) -> np.ndarray:
        """Row number of every stored entry."""
        return np.repeat(np.arange(self.rows), np.diff(self.row_ptr))

    def triplets(self) -> list[tuple[int, int, object]]:
        return list(zip(self.row_index().tolist(), self.col_idx.tolist(), self.values.tolist()))

    def is_integral(self) -> bool:
        """True when every value is an integer exactly representable in float64."""
        if self.is_exact:
            return all(Fraction(v).denominator == 1 for v in self.values)
        v = self.values
        return bool(np.all(v == np.rint(v)) and np.all(np.abs(v) < _EXACT_FLOAT_LIMIT))

    def to_exact(self) -> "SparseMatrix":
        """Object-dtype copy holding Python ints (requires integral values)."""
        if self.is_exact:
            return self
        if not self.is_integral():
            raise ValueError("to_exact needs integer-valued entries")
        vals = np.array([int(v) for v in self.values.tolist()], dtype=object)
        return SparseMatrix(self.rows, self.cols, self.row_ptr, self.col_idx, vals)

    def to_float(self) -> "SparseMatrix":
        if not self.is_exact:
            return self
        vals = np.array([float(v) for v in self.values], dtype=np.float64)
        return SparseMatrix(self.rows, self.cols, self.row_ptr, self.col_idx, vals)

    def scale(self, factor) -> "SparseMatrix":
        """Entrywise ``factor * self``; exact division when ``factor`` is a Fraction."""
        if factor == 0:
            return SparseMatrix.empty(self.rows, self.cols, self.values.dtype)
        if self.is_exact:
            vals = np.array([_normalize(factor * v) for v in self.values], dtype=object)
        else:
            vals = self.values * float(factor)
        keep = vals != 0
        if keep.all():
            return SparseMatrix(self.rows, self.cols, self.row_ptr, self.col_idx, vals)
        return _from_coo(self.rows, self.cols, self.row_index()[keep], self.col_idx[keep], vals[keep])

    def equals(self, other: "SparseMatrix") -> bool:
        """Exact entry-for-entry equality (shape, pattern and values)."""
        return (self.shape == other.shape
                and np.array_equal(self.row_ptr, other.row_ptr)
                and np.array_equal(self.col_idx, other.col_idx)
                and all(a == b for a, b in zip(self.values.tolist(), other.values.tolist())))

    def __repr__(self) -> str:
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz})"


def _normalize(v):
    if isinstance(v, Fraction) and v.denominator == 1:
        return v.numerator
    return v


def _from_coo(rows, cols, r, c, vals) -> SparseMatrix:
    r = np.asarray(r, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    width = max(cols, 1)
    keys, sums = kernels.coalesce(r * width + c, vals)
    ptr = np.zeros(rows + 1, dtype=np.int64)
    if keys.size:
        np.cumsum(np.bincount(keys // width, minlength=rows), out=ptr[1:])
    return SparseMatrix(rows, cols, ptr, keys % width, sums)


def from_triplets(rows: int, cols: int, entries: Iterable[tuple[int, int, float]],
                  exact: bool = False) -> SparseMatrix:
    """Build a canonical CSR matrix; duplicates are summed, resulting zeros dropped."""
    entries = list(entries)
    if rows < 0 or cols < 0:
        raise InvalidTriplet(f"negative shape {rows}x{cols}")
    for (i, j, _) in entries:
        if not (0 <= i < rows and 0 <= j < cols):
            raise InvalidTriplet(f"index ({i}, {j}) outside {rows}x{cols}")
    r = [e[0] for e in entries]
    c = [e[1] for e in entries]
    if exact:
        vals = np.array([_normalize(Fraction(e[2])) for e in entries], dtype=object)
    else:
        vals = np.array([e[2] for e in entries], dtype=np.float64)
    return _from_coo(rows, cols, r, c, vals)


def split_columns(M: SparseMatrix, parts: int) -> list[SparseMatrix]:
    """Cut ``M`` into ``parts`` equal-width column slabs.

    When ``parts`` does not divide ``M.cols`` the width is rounded up and the
    trailing slab(s) carry zero padding columns.
    """
    if parts < 1 or parts > M.cols:
        raise InvalidPartition(f"cannot split {M.cols} columns into {parts} parts")
    width = -(-M.cols // parts)
    rows = M.row_index()
    which = M.col_idx // width
    out = []
    for p in range(parts):
        mask = which == p
        out.append(_from_coo(M.rows, width, rows[mask], M.col_idx[mask] - p * width,
                             M.values[mask]))
    return out


def hstack(parts: Sequence[SparseMatrix], cols: int | None = None) -> SparseMatrix:
    """Concatenate slabs left to right, dropping any columns past ``cols``."""
    if not parts:
        raise InvalidPartition("nothing to stack")
    rows = parts[0].rows
    r, c, v = [], [], []
    offset = 0
    for p in parts:
        if p.rows != rows:
            raise ShapeError("row counts differ")
        r.append(p.row_index())
        c.append(p.col_idx + offset)
        v.append(p.values)
        offset += p.cols
    total = offset if cols is None else cols
    r, c, v = np.concatenate(r), np.concatenate(c), np.concatenate(v)
    keep = c < total
    return _from_coo(rows, total, r[keep], c[keep], v[keep])


def block_product(Ai: SparseMatrix, Bj: SparseMatrix) -> tuple[SparseMatrix, int]:
    """``Ai^T @ Bj`` plus the number of scalar multiply-adds performed."""
    if Ai.rows != Bj.rows:
        raise ShapeError(f"A has {Ai.rows} rows, B has {Bj.rows}")
    a_val, b_val = _common_dtype(Ai.values, Bj.values)
    width = max(Bj.cols, 1)
    keys, vals, flops = kernels.transpose_product_pairs(
        Ai.row_ptr, Ai.col_idx, a_val, Bj.row_ptr, Bj.col_idx, b_val, width)
    keys, sums = kernels.coalesce(keys, vals)
    ptr = np.zeros(Ai.cols + 1, dtype=np.int64)
    if keys.size:
        np.cumsum(np.bincount(keys // width, minlength=Ai.cols), out=ptr[1:])
    return SparseMatrix(Ai.cols, Bj.cols, ptr, keys % width, sums), int(flops)


def scaled_accumulate(acc: SparseMatrix, coeff, X: SparseMatrix) -> tuple[SparseMatrix, int]:
    """``acc + coeff * X`` and its cost, counted as ``nnz(X)``."""
    if acc.shape != X.shape:
        raise ShapeError(f"{acc.shape} vs {X.shape}")
    if coeff == 0:
        return acc, X.nnz
    a_val, x_val = _common_dtype(acc.values, X.values)
    if a_val.dtype == object:
        coeff = _normalize(Fraction(coeff)) if not isinstance(coeff, float) else coeff
    ptr, idx, val = kernels.merge_scaled(acc.row_ptr, acc.col_idx, a_val,
                                         X.row_ptr, X.col_idx, x_val, coeff,
                                         max(acc.cols, 1))
    return SparseMatrix(acc.rows, acc.cols, ptr, idx, val), X.nnz


def linear_combination(mats: Sequence[SparseMatrix], coeffs: Sequence,
                       shape: tuple[int, int] | None = None) -> tuple[SparseMatrix, int]:
    """``sum_k coeffs[k] * mats[k]`` with rational coefficients.

    Integer-valued operands are combined exactly: numerators over a common
    denominator in Python ints, then one exact division.  The result keeps the
    dtype of the inputs (float64 output is exact whenever the true value is an
    integer).  Cost is the total nnz of the operands with nonzero coefficient.
    """
    pairs = [(M, Fraction(u)) for M, u in zip(mats, coeffs) if u != 0]
    if shape is None:
        if not mats:
            raise ShapeError("shape required for an empty combination")
        shape = mats[0].shape
    any_exact = any(M.is_exact for M, _ in pairs)
    if not pairs:
        return SparseMatrix.empty(*shape, dtype=object if any_exact else np.float64), 0
    cost = sum(M.nnz for M, _ in pairs)
    if any(M.shape != shape for M, _ in pairs):
        raise ShapeError("operands differ in shape")

    if all(M.is_exact or M.is_integral() for M, _ in pairs):
        denom = 1
        for _, u in pairs:
            denom = math.lcm(denom, u.denominator)
        rows, cols, vals = [], [], []
        for M, u in pairs:
            num = u.numerator * (denom // u.denominator)
            rows.append(M.row_index())
            cols.append(M.col_idx)
            ints = M.values if M.is_exact else M.to_exact().values
            vals.append(ints * num)
        summed = _from_coo(shape[0], shape[1], np.concatenate(rows), np.concatenate(cols),
                           np.concatenate(vals))
        v = summed.values
        if denom == 1:
            exact_vals = v
        elif all(type(x) is int for x in v) and not np.any(v % denom):
            exact_vals = v // denom
        else:
            exact_vals = np.array([_normalize(Fraction(x, denom)) if isinstance(x, int)
                                   else _normalize(x / denom) for x in v], dtype=object)
        result = SparseMatrix(shape[0], shape[1], summed.row_ptr, summed.col_idx, exact_vals)
        return (result if any_exact else result.to_float()), cost

    acc = SparseMatrix.empty(*shape)
    for M, u in pairs:
        acc, _ = scaled_accumulate(acc, float(u), M)
    return acc, cost


def _common_dtype(a: np.ndarray, b: np.ndarray):
    if a.dtype == object and b.dtype != object:
        return a, _exact_values(b)
    if b.dtype == object and a.dtype != object:
        return _exact_values(a), b
    return a, b


def _exact_values(v: np.ndarray) -> np.ndarray:
    return np.array([int(x) if float(x).is_integer() else Fraction(float(x)) for x in v.tolist()],
                    dtype=object)


@dataclass
class BlockGrid:
    """The ``m x n`` grid of blocks ``C_ij = A_i^T B_j`` in flat order ``i * n + j``."""

    m: int
    n: int
    block_rows: int
    block_cols: int
    blocks: list

    @classmethod
    def empty(cls, m: int, n: int, block_rows: int, block_cols: int) -> "BlockGrid":
        return cls(m, n, block_rows, block_cols, [None] * (m * n))

    @classmethod
    def from_inputs(cls, A: SparseMatrix, B: SparseMatrix, m: int, n: int) -> tuple["BlockGrid", int]:
        """Brute-force grid of every block and the total flop count."""
        A_parts, B_parts = split_columns(A, m), split_columns(B, n)
        grid = cls.empty(m, n, A_parts[0].cols, B_parts[0].cols)
        flops = 0
        for i in range(m):
            for j in range(n):
                blk, f = block_product(A_parts[i], B_parts[j])
                grid.blocks[grid.flat_index(i, j)] = blk
                flops += f
        return grid, flops

    def flat_index(self, i: int, j: int) -> int:
        return i * self.n + j

    def position(self, flat: int) -> tuple[int, int]:
        return divmod(flat, self.n)

    def __getitem__(self, ij) -> SparseMatrix | None:
        return self.blocks[self.flat_index(*ij)]

    @property
    def complete(self) -> bool:
        return all(b is not None for b in self.blocks)

    def assemble(self, rows: int | None = None, cols: int | None = None) -> SparseMatrix:
        """Full ``C`` with padding rows/columns stripped."""
        if not self.complete:
            raise ValueError("grid has missing blocks")
        total_r = self.m * self.block_rows if rows is None else rows
        total_c = self.n * self.block_cols if cols is None else cols
        exact = any(b.is_exact for b in self.blocks)
        r, c, v = [], [], []
        for flat, blk in enumerate(self.blocks):
            i, j = self.position(flat)
            r.append(blk.row_index() + i * self.block_rows)
            c.append(blk.col_idx + j * self.block_cols)
            v.append(_exact_values(blk.values) if exact and not blk.is_exact else blk.values)
        r, c, v = np.concatenate(r), np.concatenate(c), np.concatenate(v)
        keep = (r < total_r) & (c < total_c)
        return _from_coo(total_r, total_c, r[keep], c[keep], v[keep])

    def equals(self, other: "BlockGrid") -> bool:
        return (self.m, self.n) == (other.m, other.n) and all(
            a is not None and b is not None and a.equals(b)
            for a, b in zip(self.blocks, other.blocks))
