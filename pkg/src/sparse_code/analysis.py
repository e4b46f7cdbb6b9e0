"""Degree evolution, matching probability, decodability check, recovery-threshold Monte Carlo."""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from math import comb

import numpy as np

from .decoder import EchelonState, hybrid_decode
from .degree import DegreeDistribution, exact_sum, omega_prime
from .encoder import CodedTask, polynomial_row, sparse_row_stream
from .errors import InvalidParameter
from .parallel import pmap, trial_rng


@dataclass(frozen=True)
class DegreeEvolution:
    """``table[s][k]``: chance a task has exactly ``k`` neighbours in a fixed ``s``-subset of blocks."""

    d: int
    table: dict

    def row(self, s: int) -> tuple:
        return self.table[s]


def degree_evolution(P: DegreeDistribution) -> DegreeEvolution:
    d = P.d
    current = (Fraction(0),) + P.probs
    table = {d: current}
    for s in range(d - 1, 0, -1):
        nxt = tuple(current[k] * (1 - Fraction(k, s + 1)) + current[k + 1] * Fraction(k + 1, s + 1)
                    for k in range(s + 1))
        table[s] = nxt
        current = nxt
    return DegreeEvolution(d, table)


def perfect_matching_probability(P: DegreeDistribution) -> Fraction:
    """Product over s of (1 - p0^(s)) from the degree-evolution table.

    This is the chance that matching tasks to blocks one at a time, each task
    taking any still-free neighbour, never gets stuck.  It is exact for a greedy
    matching and a lower bound on the chance that a perfect matching exists.
    """
    evo = degree_evolution(P)
    prob = Fraction(1)
    for s in range(1, P.d + 1):
        prob *= 1 - evo.table[s][0]
    return prob


def hit_probabilities(d: int, degree_cap: int | None = None) -> list[list[Fraction]]:
    """``q[s-1][k-1]`` = chance a uniform k-subset of d meets a fixed s-subset.

    Closed form ``1 - C(d-s, k)/C(d, k)``; ``1 - p0^(s) = sum_k p_k q[s-1][k-1]``.
    """
    cap = d if degree_cap is None else degree_cap
    return [[1 - Fraction(comb(d - s, k), comb(d, k)) for k in range(1, cap + 1)]
            for s in range(1, d + 1)]


# ------------------------------------------------------------ decodability

@dataclass
class DecodabilityReport:
    K: int
    grid: np.ndarray
    margins: np.ndarray
    feasible: bool
    form: str = "plain"
    b: int = 2
    c0: float = 0.0

    @property
    def min_margin(self) -> float:
        return float(self.margins.min())

    def to_json(self) -> dict:
        return {"K": self.K, "form": self.form, "b": self.b, "c0": self.c0,
                "feasible": self.feasible, "min_margin": self.min_margin,
                "grid_points": int(self.grid.size)}


def decodability_check(P: DegreeDistribution, K: int, b: int = 2, grid_points: int = 200,
                       form: str = "plain", c0: float = 0.0) -> DecodabilityReport:
    """Evaluate the peeling condition on a uniform grid.

    ``plain``: ``x - [1 - Omega'(1-x)/d]^(K-1) >= 0`` for x in [b/d, 1].
    ``strengthened``: ``1 - x - c0 sqrt((1-x)/d) - [1 - Omega'(x)/d]^(K-1) >= 0``
    for x in [0, 1 - b/d]; the optimizer uses ``K = d + c + 1``.
    """
    d = P.d
    if K < 1 or not 1 <= b < d or grid_points < 2:
        raise InvalidParameter(f"need K >= 1, 1 <= b < d, grid_points >= 2 (K={K}, b={b})")
    if form == "plain":
        grid = np.linspace(b / d, 1.0, grid_points)
        base = 1.0 - omega_prime(P, 1.0 - grid) / d
        margins = grid - np.clip(base, 0.0, 1.0) ** (K - 1)
    elif form == "strengthened":
        grid = np.linspace(0.0, 1.0 - b / d, grid_points)
        rhs = 1.0 - grid - c0 * np.sqrt((1.0 - grid) / d)
        base = 1.0 - omega_prime(P, grid) / d
        margins = rhs - np.clip(base, 0.0, 1.0) ** (K - 1)
    else:
        raise InvalidParameter(f"unknown form {form!r}")
    return DecodabilityReport(K, grid, margins, bool(np.all(margins >= 0)), form, b, c0)


def minimal_feasible_K(P: DegreeDistribution, b: int = 2, grid_points: int = 200,
                       k_max: int | None = None) -> int | None:
    """Smallest K passing the plain check (feasibility is upward closed in K)."""
    k_max = k_max or 50 * P.d
    for K in range(1, k_max + 1):
        if decodability_check(P, K, b, grid_points).feasible:
            return K
    return None


# ------------------------------------------------------ recovery threshold

@dataclass
class ThresholdSummary:
    d: int
    trials: int
    thresholds: list
    rooted: list
    full_rank_at_d: float
    label: str = ""
    histogram: dict = field(init=False)

    def __post_init__(self):
        self.histogram = dict(sorted(Counter(self.thresholds).items()))

    @property
    def mean(self) -> float:
        return float(np.mean(self.thresholds))

    @property
    def std(self) -> float:
        return float(np.std(self.thresholds))

    @property
    def mean_rooted(self) -> float:
        return float(np.mean(self.rooted))

    def to_json(self) -> dict:
        return {"d": self.d, "trials": self.trials, "label": self.label,
                "mean": self.mean, "std": self.std, "overhead": self.mean / self.d - 1,
                "full_rank_at_d": self.full_rank_at_d, "mean_rooted": self.mean_rooted,
                "histogram": {str(k): v for k, v in self.histogram.items()},
                "rooted_histogram": {str(k): v for k, v in
                                     sorted(Counter(self.rooted).items())}}

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["K", "count"])
        for k, v in self.histogram.items():
            w.writerow([k, v])
        return buf.getvalue()


def _one_threshold_trial(index, P, m, n, seed, scheme, max_rows):
    d = m * n
    rng = trial_rng(seed, index)
    if scheme == "polynomial":
        stream = (polynomial_row(m, n, x) for x in range(1, max_rows + 1))
    else:
        stream = sparse_row_stream(m, n, P, rng)
    state = EchelonState(d)
    rows = []
    full_at_d = False
    for row in stream:
        rows.append(row)
        state.insert(row)
        if len(rows) == d:
            full_at_d = state.full
        if state.full:
            break
        if len(rows) >= max_rows:
            raise RuntimeError(f"rank stuck at {state.rank} after {max_rows} rows")
    tasks = [CodedTask(k + 1, r) for k, r in enumerate(rows)]
    _, stats = hybrid_decode(tasks, m, n, symbolic=True)
    return len(rows), stats.rooted, full_at_d


def estimate_recovery_threshold(P: DegreeDistribution | None, m: int, n: int, trials: int,
                                seed: int = 0, scheme: str = "sparse", jobs: int | None = None,
                                max_rows: int | None = None, label: str = "") -> ThresholdSummary:
    """Monte Carlo of the minimal number of results whose weight rows reach rank ``mn``.

    Each trial streams fresh rows until full rank, then decodes the structure
    to count rooting steps.  ``scheme="polynomial"`` streams Vandermonde rows.
    """
    if trials < 1:
        raise InvalidParameter("trials must be >= 1")
    d = m * n
    if scheme == "sparse" and (P is None or P.d != d):
        raise InvalidParameter("sparse scheme needs a distribution with d = m*n")
    max_rows = max_rows or max(50 * d, 200)
    fn = partial(_one_threshold_trial, P=P, m=m, n=n, seed=seed, scheme=scheme,
                 max_rows=max_rows)
    out = pmap(fn, range(trials), jobs)
    ks = [o[0] for o in out]
    rooted = [o[1] for o in out]
    full = sum(o[2] for o in out) / trials
    return ThresholdSummary(d, trials, ks, rooted, full, label)


def coupon_collector_mean(d: int) -> float:
    """Expected draws to see all ``d`` coupons: d * H_d."""
    return d * sum(1.0 / k for k in range(1, d + 1))


def harmonic(n: int) -> Fraction:
    return exact_sum(Fraction(1, k) for k in range(1, n + 1))


def wave_mean_closed_form(d: int) -> Fraction:
    """tau (1/d + 1/35 + H_{d-1} - 1) for the Wave Soliton law."""
    tau = Fraction(35, 18)
    return tau * (Fraction(1, d) + Fraction(1, 35) + harmonic(d - 1) - 1)


def log_mean_growth(d_small: int, d_large: int) -> float:
    return math.log(d_large) / math.log(d_small)
