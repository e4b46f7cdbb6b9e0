"""Task generation: sparse code, polynomial-code baseline and uncoded assignment.

Workers are numbered from 1.  A task's weights map flat block indices
``(i-1)*n + (j-1)`` to nonzero integers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .degree import DegreeDistribution, sample_support
from .errors import DimensionMismatch, InsufficientWorkers, InvalidParameter
from .sparse import SparseMatrix, block_product, scaled_accumulate


@dataclass(frozen=True)
class WeightSet:
    """The nonzero weight alphabet ``{1, ..., max}``."""

    max: int

    def __post_init__(self):
        if self.max < 1:
            raise InvalidParameter("weight set must be nonempty")

    @classmethod
    def for_grid(cls, m: int, n: int) -> "WeightSet":
        return cls((m * n) ** 2)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.integers(1, self.max + 1, size=size)


@dataclass(frozen=True)
class CodedTask:
    worker_id: int
    weights: dict
    result: SparseMatrix | None = None
    completion_time: float | None = None
    point: int | None = None
    scheme: str = "sparse"

    @property
    def degree(self) -> int:
        return len(self.weights)

    def with_result(self, result: SparseMatrix) -> "CodedTask":
        return replace(self, result=result)

    def to_json(self) -> dict:
        out = {"worker_id": self.worker_id, "scheme": self.scheme,
               "weights": {str(k): int(v) for k, v in sorted(self.weights.items())}}
        if self.point is not None:
            out["point"] = self.point
        return out

    @classmethod
    def from_json(cls, data: dict) -> "CodedTask":
        return cls(worker_id=int(data["worker_id"]),
                   weights={int(k): int(v) for k, v in data["weights"].items()},
                   point=data.get("point"), scheme=data.get("scheme", "sparse"))


@dataclass
class CoefficientMatrix:
    rows: list = field(default_factory=list)
    cols: int = 0

    @classmethod
    def from_tasks(cls, tasks, cols: int) -> "CoefficientMatrix":
        return cls([dict(t.weights) for t in tasks], cols)

    def dense(self) -> list[list[int]]:
        out = []
        for row in self.rows:
            line = [0] * self.cols
            for c, w in row.items():
                line[c] = w
            out.append(line)
        return out

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)


def dump_tasks(tasks, path) -> None:
    with open(path, "w") as fh:
        json.dump([t.to_json() for t in tasks], fh, indent=1, sort_keys=True)


def load_tasks(path) -> list[CodedTask]:
    with open(path) as fh:
        return [CodedTask.from_json(d) for d in json.load(fh)]


def sparse_row(P: DegreeDistribution, weights: WeightSet, rng: np.random.Generator) -> dict:
    support = sample_support(P, P.d, rng)
    values = weights.draw(rng, support.size)
    return {int(c): int(w) for c, w in zip(support, values)}


def sparse_row_stream(m: int, n: int, P: DegreeDistribution,
                      rng: np.random.Generator) -> Iterator[dict]:
    """Endless stream of sparse-code weight rows."""
    if P.d != m * n:
        raise DimensionMismatch(f"distribution has d={P.d}, grid has {m * n} blocks")
    weights = WeightSet.for_grid(m, n)
    while True:
        yield sparse_row(P, weights, rng)


def encode_sparse(m: int, n: int, P: DegreeDistribution, N: int,
                  rng: np.random.Generator) -> list[CodedTask]:
    if N < 1:
        raise InvalidParameter("need at least one worker")
    stream = sparse_row_stream(m, n, P, rng)
    return [CodedTask(k, next(stream)) for k in range(1, N + 1)]


def polynomial_row(m: int, n: int, x: int) -> dict:
    """Weights ``x^(i + j m)`` for 1-based ``(i, j)``."""
    return {(i - 1) * n + (j - 1): x ** (i + j * m)
            for i in range(1, m + 1) for j in range(1, n + 1)}


def encode_polynomial(m: int, n: int, N: int) -> tuple[list[CodedTask], list[int]]:
    """Polynomial-code tasks with evaluation points ``x_k = k``."""
    if N < m * n:
        raise InsufficientWorkers(f"polynomial code needs N >= {m * n}, got {N}")
    points = list(range(1, N + 1))
    tasks = [CodedTask(k, polynomial_row(m, n, x), point=x, scheme="polynomial")
             for k, x in zip(range(1, N + 1), points)]
    return tasks, points


def assign_uncoded(m: int, n: int, N: int) -> list[CodedTask]:
    """One unit-weight block per worker; workers beyond ``mn`` replicate round-robin."""
    mn = m * n
    if N < mn:
        raise InsufficientWorkers(f"uncoded needs N >= {mn}, got {N}")
    return [CodedTask(k, {(k - 1) % mn: 1}, scheme="uncoded") for k in range(1, N + 1)]


# ---------------------------------------------------------------- execution

@dataclass(frozen=True)
class TaskCost:
    nnz_in: int
    flops: int  # multiply-adds inside block products
    combine_ops: int = 0  # entry updates spent forming coded operands or weighted sums

    @property
    def total(self) -> int:
        return self.flops + self.combine_ops


def execute_task(task: CodedTask, A_parts, B_parts, n: int, exact: bool = False
                 ) -> tuple[SparseMatrix, TaskCost]:
    """Run a worker's computation on real operands.

    Sparse and uncoded tasks multiply each referenced block and accumulate the
    weighted products.  Polynomial tasks build the coded operands
    ``sum_i A_i x^i`` and ``sum_j B_j x^(jm)`` first and multiply once.
    ``exact`` switches to Python-int arithmetic (needed for large weights).
    """
    if exact:
        A_parts = [a.to_exact() for a in A_parts]
        B_parts = [b.to_exact() for b in B_parts]
    if task.scheme == "polynomial":
        return _execute_polynomial(task, A_parts, B_parts, exact)
    acc = None
    flops = combine = 0
    used_a, used_b = set(), set()
    for flat, w in sorted(task.weights.items()):
        i, j = divmod(flat, n)
        used_a.add(i)
        used_b.add(j)
        blk, f = block_product(A_parts[i], B_parts[j])
        flops += f
        if acc is None:
            acc = blk.scale(w) if w != 1 else blk
        else:
            acc, ops = scaled_accumulate(acc, w, blk)
            combine += ops
    nnz_in = sum(A_parts[i].nnz for i in used_a) + sum(B_parts[j].nnz for j in used_b)
    return acc, TaskCost(nnz_in, flops, combine)


def _execute_polynomial(task, A_parts, B_parts, exact):
    m, n = len(A_parts), len(B_parts)
    x = task.point if task.point is not None else task.worker_id
    a_coded, ops_a = _weighted_sum(A_parts, [x ** i for i in range(1, m + 1)], exact)
    b_coded, ops_b = _weighted_sum(B_parts, [x ** (j * m) for j in range(1, n + 1)], exact)
    out, flops = block_product(a_coded, b_coded)
    return out, TaskCost(a_coded.nnz + b_coded.nnz, flops, ops_a + ops_b)


def _weighted_sum(parts, coeffs, exact):
    acc = SparseMatrix.empty(parts[0].rows, parts[0].cols, dtype=object if exact else np.float64)
    ops = 0
    for part, c in zip(parts, coeffs):
        acc, k = scaled_accumulate(acc, c if exact else float(c), part)
        ops += k
    return acc, ops
