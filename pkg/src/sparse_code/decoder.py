"""Exact rank tracking, rooting combinations, hybrid peeling decoder, polynomial decoder.

Coefficient arithmetic is exact (Python ints / Fractions).  Block data stays in
whatever dtype the task results carry; rational combinations of integer-valued
data are evaluated exactly (see :func:`sparse.linear_combination`).
"""
from __future__ import annotations

import heapq
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from math import gcd
from typing import Callable, Sequence

import numpy as np

from .errors import RankDeficient, ShapeError, SingularSystem
from .sparse import BlockGrid, SparseMatrix, linear_combination, scaled_accumulate


def _dense_row(row, width: int) -> list[int]:
    if isinstance(row, dict):
        out = [0] * width
        for c, w in row.items():
            if not 0 <= c < width:
                raise ShapeError(f"column {c} outside width {width}")
            out[c] = int(w)
        return out
    row = [int(v) for v in row]
    if len(row) != width:
        raise ShapeError(f"row has width {len(row)}, expected {width}")
    return row


def _primitive(row: list[int]) -> list[int]:
    g = 0
    for v in row:
        if v:
            g = gcd(g, v)
            if g == 1:
                return row
    return [v // g for v in row] if g > 1 else row


class EchelonState:
    """Incremental row echelon form over the rationals.

    Rows are kept as primitive integer vectors (fraction-free elimination),
    which represents the same rational row space without Fraction overhead.
    """

    def __init__(self, width: int):
        self.width = width
        self.pivots: dict[int, list[int]] = {}
        self.pivot_rows: list[int] = []
        self.inserted_rows = 0

    @property
    def rank(self) -> int:
        return len(self.pivots)

    @property
    def full(self) -> bool:
        return self.rank == self.width

    def reduce(self, row) -> list[int]:
        row = _dense_row(row, self.width)
        for c in range(self.width):
            b = row[c]
            if b == 0:
                continue
            piv = self.pivots.get(c)
            if piv is None:
                break
            a = piv[c]
            row = _primitive([a * r - b * p for r, p in zip(row, piv)])
        return row

    def insert(self, row) -> bool:
        """Add one row; True when it raised the rank."""
        reduced = self.reduce(row)
        index = self.inserted_rows
        self.inserted_rows += 1
        for c, v in enumerate(reduced):
            if v:
                if v < 0:
                    reduced = [-x for x in reduced]
                self.pivots[c] = reduced
                self.pivot_rows.append(index)
                return True
        return False


def rank_insert(state: EchelonState, row) -> tuple[EchelonState, bool]:
    return state, state.insert(row)


def rank_of(rows, width: int) -> int:
    state = EchelonState(width)
    for r in rows:
        state.insert(r)
        if state.full:
            break
    return state.rank


def solve_transposed(rows: Sequence[Sequence], target: Sequence) -> list[Fraction]:
    """Some ``u`` with ``sum_k u_k rows[k] == target`` exactly.

    Gauss-Jordan on ``rows^T``; unknowns are pivoted left to right and free
    ones set to zero, so the solution lives on the earliest independent rows.
    Raises RankDeficient when no solution exists.
    """
    K = len(rows)
    width = len(target)
    # fraction-free Gauss-Jordan on integer rows, divided out only at the end
    aug = [[int(rows[k][c]) for k in range(K)] + [int(target[c])] for c in range(width)]
    pivot_cols = []
    r = 0
    for col in range(K):
        sel = next((i for i in range(r, width) if aug[i][col] != 0), None)
        if sel is None:
            continue
        aug[r], aug[sel] = aug[sel], aug[r]
        prow = aug[r]
        a = prow[col]
        for i in range(width):
            f = aug[i][col]
            if i != r and f != 0:
                aug[i] = _primitive([a * x - f * y for x, y in zip(aug[i], prow)])
        pivot_cols.append(col)
        r += 1
        if r == width:
            break
    if any(aug[i][K] != 0 for i in range(r, width)):
        raise RankDeficient("target is outside the row space")
    u = [Fraction(0)] * K
    for i, col in enumerate(pivot_cols):
        u[col] = Fraction(aug[i][K], aug[i][col])
    return u


def rooting_combination(M_rows, k0: int, width: int | None = None) -> list[Fraction]:
    """Coefficients ``u`` with ``sum_k u_k M_k = e_k0``."""
    if width is None:
        first = M_rows[0]
        width = (max(first) + 1) if isinstance(first, dict) else len(first)
    dense = [_dense_row(r, width) for r in M_rows]
    if not 0 <= k0 < width:
        raise ShapeError(f"k0={k0} outside width {width}")
    target = [0] * width
    target[k0] = 1
    return solve_transposed(dense, target)


# ----------------------------------------------------------- hybrid decoder

@dataclass
class DecodeStats:
    peeled: int = 0
    rooted: int = 0
    block_op_count: int = 0
    rows_used: int = 0
    order: list = field(default_factory=list)
    rootings: list = field(default_factory=list)

    def to_json(self) -> str:
        data = asdict(self)
        data["rootings"] = [{"column": r["column"],
                             "u": {str(w): str(v) for w, v in r["u"].items()}}
                            for r in self.rootings]
        return json.dumps(data, sort_keys=True)


def max_incidence_rule(unresolved, incidence, rng) -> int:
    """Unresolved column touched by the most remaining rows; lowest index on ties."""
    return min(unresolved, key=lambda c: (-len(incidence[c]), c))


def random_rule(unresolved, incidence, rng) -> int:
    cols = sorted(unresolved)
    return cols[int(rng.integers(len(cols)))]


ROOT_RULES: dict[str, Callable] = {"max_incidence": max_incidence_rule, "random": random_rule}


def hybrid_decode(tasks, m: int, n: int, root_rule="max_incidence", rng=None,
                  symbolic: bool = False) -> tuple[BlockGrid | None, DecodeStats]:
    """Peel degree-one rows; when none is left, root one block by a rational combination.

    ``tasks`` need ``worker_id`` and ``weights``; ``result`` too unless
    ``symbolic`` (structure only, no block data, grid returned as None).
    """
    d = m * n
    rows = [dict(t.weights) for t in tasks]
    ids = [t.worker_id for t in tasks]
    if rank_of(rows, d) < d:
        raise RankDeficient(f"{len(rows)} rows do not reach rank {d}")
    rule = ROOT_RULES[root_rule] if isinstance(root_rule, str) else root_rule
    if rng is None:
        rng = np.random.default_rng(0)

    data = None if symbolic else [t.result for t in tasks]
    stats = DecodeStats(rows_used=len(rows))
    incidence = {c: set() for c in range(d)}
    for k, row in enumerate(rows):
        for c in row:
            incidence[c].add(k)
    ripples = [(ids[k], k) for k, row in enumerate(rows) if len(row) == 1]
    heapq.heapify(ripples)
    unresolved = set(range(d))
    blocks: list = [None] * d

    while unresolved:
        source = None
        while ripples:
            _, k = heapq.heappop(ripples)
            if len(rows[k]) == 1:
                source = k
                break
        if source is not None:
            (col, w), = rows[source].items()
            stats.peeled += 1
            stats.order.append(("peel", col, ids[source]))
            if data is not None:
                if w == 1:
                    blocks[col] = data[source]
                    stats.block_op_count += data[source].nnz
                else:
                    blocks[col], ops = linear_combination([data[source]], [Fraction(1, w)])
                    stats.block_op_count += ops
        else:
            col = rule(unresolved, incidence, rng)
            active = sorted({k for c in unresolved for k in incidence[c]})
            cols = sorted(unresolved)
            sub = [[rows[k].get(c, 0) for c in cols] for k in active]
            target = [int(c == col) for c in cols]
            u = solve_transposed(sub, target)
            stats.rooted += 1
            stats.order.append(("root", col, None))
            stats.rootings.append({"column": col,
                                   "u": {ids[k]: uk for k, uk in zip(active, u) if uk != 0}})
            if data is not None:
                blk, ops = linear_combination([data[k] for k in active], u,
                                              shape=data[0].shape)
                blocks[col] = blk
                stats.block_op_count += ops

        unresolved.discard(col)
        for k in sorted(incidence[col]):
            w = rows[k].pop(col)
            if data is not None and k != source:
                data[k], ops = scaled_accumulate(data[k], -w, blocks[col])
                stats.block_op_count += ops
            if len(rows[k]) == 1:
                heapq.heappush(ripples, (ids[k], k))
        incidence[col] = set()

    if data is None:
        return None, stats
    shape = tasks[0].result.shape
    grid = BlockGrid(m, n, shape[0], shape[1], blocks)
    return grid, stats


# ------------------------------------------------------- polynomial decoder

def _inverse(matrix: list[list[int]]) -> list[list[Fraction]]:
    size = len(matrix)
    aug = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(size)]
           for i, row in enumerate(matrix)]
    for col in range(size):
        sel = next((i for i in range(col, size) if aug[i][col] != 0), None)
        if sel is None:
            raise SingularSystem("evaluation matrix is singular")
        aug[col], aug[sel] = aug[sel], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for i in range(size):
            if i != col and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[col])]
    return [row[size:] for row in aug]


def decode_polynomial(tasks, m: int, n: int) -> tuple[BlockGrid, int]:
    """Invert the evaluation system of ``mn`` polynomial-code results exactly.

    Returns the block grid and the number of scalar operations spent.
    """
    d = m * n
    if len(tasks) < d:
        raise RankDeficient(f"need {d} polynomial results, got {len(tasks)}")
    chosen = list(tasks[:d])
    points = [t.point if t.point is not None else t.worker_id for t in chosen]
    if len(set(points)) != d:
        raise SingularSystem("duplicate evaluation points")
    V = [_dense_row(t.weights, d) for t in chosen]
    Vinv = _inverse(V)
    results = [t.result for t in chosen]
    shape = results[0].shape
    blocks, ops = [], 0
    for c in range(d):
        blk, cost = linear_combination(results, Vinv[c], shape=shape)
        blocks.append(blk)
        ops += cost
    return BlockGrid(m, n, shape[0], shape[1], blocks), ops
