"""Degree distributions over {1..d}: Wave/ideal/robust Soliton, sampling, moments.

Probabilities are exact Fractions; they are turned into floats only to drive
the sampler.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidParameter, UnsupportedSupport

WAVE_TAU = Fraction(35, 18)


def exact_sum(values) -> Fraction:
    """Sum of rationals over one common denominator (much faster than chained adds)."""
    fr = [v if isinstance(v, Fraction) else Fraction(v) for v in values]
    if not fr:
        return Fraction(0)
    den = math.lcm(*(f.denominator for f in fr))
    return Fraction(sum(f.numerator * (den // f.denominator) for f in fr), den)


@dataclass(frozen=True)
class DegreeDistribution:
    """``probs[k-1]`` is the probability that a task touches exactly ``k`` blocks."""

    probs: tuple

    def __post_init__(self):
        probs = tuple(p if isinstance(p, Fraction) else Fraction(p) for p in self.probs)
        if not probs:
            raise InvalidParameter("empty support")
        if any(p < 0 for p in probs):
            raise InvalidParameter("negative probability")
        total = exact_sum(probs)
        if total != 1:
            raise InvalidParameter(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "probs", probs)

    @property
    def d(self) -> int:
        return len(self.probs)

    def __getitem__(self, k: int) -> Fraction:
        """``P[k]`` = probability of degree ``k`` (1-based; 0 outside the support)."""
        if 1 <= k <= self.d:
            return self.probs[k - 1]
        return Fraction(0)

    def as_floats(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    def cdf(self) -> np.ndarray:
        """Cumulative probabilities, accumulated exactly then rounded."""
        acc, out = Fraction(0), []
        for p in self.probs:
            acc += p
            out.append(float(acc))
        return np.array(out)

    def to_json(self) -> dict:
        return {"d": self.d, "probs": [f"{p.numerator}/{p.denominator}" for p in self.probs]}

    @classmethod
    def from_json(cls, data) -> "DegreeDistribution":
        if isinstance(data, str):
            data = json.loads(data)
        probs = [Fraction(p) for p in data["probs"]]
        if int(data["d"]) != len(probs):
            raise InvalidParameter(f"d={data['d']} but {len(probs)} probabilities given")
        return cls(tuple(probs))

    @classmethod
    def from_floats(cls, values: Sequence[float], max_denominator: int = 10**9) -> "DegreeDistribution":
        """Rationalize a float vector; the rounding residue goes to the largest entry."""
        fr = [Fraction(max(float(v), 0.0)).limit_denominator(max_denominator) for v in values]
        total = sum(fr)
        if total == 0:
            raise InvalidParameter("all-zero vector")
        if abs(total - 1) < Fraction(1, 10**6):
            top = max(range(len(fr)), key=fr.__getitem__)
            fr[top] += 1 - total
            return cls(tuple(fr))
        return cls(tuple(f / total for f in fr))


def point_mass(d: int, k: int) -> DegreeDistribution:
    """Every task has degree exactly ``k``."""
    if not 1 <= k <= d:
        raise InvalidParameter(f"degree {k} outside 1..{d}")
    return DegreeDistribution(tuple(Fraction(int(i == k)) for i in range(1, d + 1)))


def wave_soliton(d: int) -> DegreeDistribution:
    """Capped Soliton with p1 = tau/d, p2 = tau/70, pk = tau/(k(k-1)), tau = 35/18."""
    if d < 3:
        raise UnsupportedSupport(f"wave soliton needs d >= 3, got {d}")
    tau = WAVE_TAU
    num, den = tau.numerator, tau.denominator
    probs = [tau / d, tau / 70] + [Fraction(num, den * k * (k - 1)) for k in range(3, d + 1)]
    return DegreeDistribution(tuple(probs))


def ideal_soliton(d: int) -> DegreeDistribution:
    if d < 1:
        raise InvalidParameter("d must be positive")
    return DegreeDistribution(tuple([Fraction(1, d)] + [Fraction(1, k * (k - 1)) for k in range(2, d + 1)]))


def robust_soliton(d: int, c: float, delta: float) -> DegreeDistribution:
    """Luby's robust Soliton: ideal Soliton plus the spike term, renormalized.

    ``R = c ln(d/delta) sqrt(d)``; the extra mass is ``R/(k d)`` below the
    spike at ``round(d/R)`` (clamped into ``1..d``) and ``R ln(R/delta)/d`` on
    it.  A negative spike (``R < delta``) is clipped to zero.
    """
    if d < 1:
        raise InvalidParameter("d must be positive")
    if not c > 0 or not 0 < delta < 1:
        raise InvalidParameter(f"need c > 0 and 0 < delta < 1, got c={c}, delta={delta}")
    R = c * math.log(d / delta) * math.sqrt(d)
    spike = min(max(int(round(d / R)), 1), d)
    extra = [0.0] * (d + 1)
    for k in range(1, spike):
        extra[k] = R / (k * d)
    extra[spike] = max(R * math.log(R / delta) / d, 0.0)
    ideal = ideal_soliton(d).probs
    raw = [ideal[k - 1] + Fraction(extra[k]) for k in range(1, d + 1)]
    total = sum(raw)
    return DegreeDistribution(tuple(p / total for p in raw))


def robust_soliton_spike(d: int, c: float, delta: float) -> int:
    R = c * math.log(d / delta) * math.sqrt(d)
    return min(max(int(round(d / R)), 1), d)


def sample_degree(P: DegreeDistribution, rng: np.random.Generator, size=None):
    """Inverse-CDF draw of one degree (or an array of ``size`` degrees)."""
    cdf = P.cdf()
    u = rng.random(size)
    return np.minimum(np.searchsorted(cdf, u, side="right"), P.d - 1) + 1


def sample_support(P: DegreeDistribution, positions: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a degree from ``P`` then a uniform subset of that size, sorted."""
    if positions != P.d:
        raise InvalidParameter(f"positions={positions} but distribution has d={P.d}")
    deg = int(sample_degree(P, rng))
    return np.sort(rng.choice(positions, size=deg, replace=False))


@dataclass(frozen=True)
class GeneratingEvaluation:
    omega: object
    omega_prime: object
    at: object


def omega_eval(P: DegreeDistribution, x) -> GeneratingEvaluation:
    """Omega(x) = sum p_k x^k and Omega'(x) = sum k p_k x^(k-1).

    Exact when ``x`` is a Fraction or int, float otherwise.
    """
    exact = isinstance(x, (int, Fraction))
    probs = P.probs if exact else [float(p) for p in P.probs]
    omega = 0
    prime = 0
    power = 1  # x^(k-1)
    for k, p in enumerate(probs, start=1):
        prime += k * p * power
        power *= x
        omega += p * power
    return GeneratingEvaluation(omega, prime, x)


def omega_prime(P: DegreeDistribution, x: np.ndarray) -> np.ndarray:
    """Vectorized Omega'(x) in floats."""
    x = np.asarray(x, dtype=float)
    k = np.arange(1, P.d + 1)
    return (k * P.as_floats() * x[..., None] ** (k - 1)).sum(axis=-1)


def right_edge_degree(P: DegreeDistribution, x):
    """rho(x) = Omega'(x) / Omega'(1): edge-perspective law on the task side."""
    return omega_eval(P, x).omega_prime / omega_eval(P, 1).omega_prime


def left_edge_degree(P: DegreeDistribution, K: int, x):
    """lambda(x) = [1 - Omega'(1)(1 - x)/d]^(K-1): edge-perspective law on the block side."""
    mean = omega_eval(P, 1).omega_prime
    if not isinstance(x, (int, Fraction)):
        mean = float(mean)
    return (1 - mean * (1 - x) / P.d) ** (K - 1)


def moment(P: DegreeDistribution, s: int) -> Fraction:
    if s < 1:
        raise InvalidParameter("moment order must be >= 1")
    return exact_sum(k ** s * p for k, p in enumerate(P.probs, start=1))


def mean_degree(P: DegreeDistribution) -> Fraction:
    return moment(P, 1)
