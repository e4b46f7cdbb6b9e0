"""Minimum-mean-degree distribution under matching and peeling constraints.

The peeling constraints become linear after taking a root.  The matching
probability is a product of functions affine in ``p``, so its logarithm is
concave and the constraint set is convex; it is handled with Kelley cutting
planes on top of scipy's HiGHS LP solver.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from .analysis import hit_probabilities, perfect_matching_probability
from .degree import DegreeDistribution, mean_degree, omega_prime
from .errors import ConfigError, Infeasible

LP_SLACK = 1e-7  # keeps rationalized solutions strictly inside the linear constraints
MATCH_SLACK = 1e-7  # head-room on the log matching floor at acceptance
CUT_SLACK = 1e-5  # cuts aim higher than acceptance so the loop terminates


@dataclass(frozen=True)
class OptimizerConfig:
    d: int
    p_m: float = 0.15
    c: float = 2.0
    c0: float = 0.1
    b: int = 2
    grid_points: int = 200
    degree_cap: int = 40
    max_iter: int = 500

    def __post_init__(self):
        if self.d < 2:
            raise ConfigError("d must be >= 2")
        if not 0 < self.p_m < 1:
            raise ConfigError(f"p_m must lie in (0, 1), got {self.p_m}")
        if self.c < 0 or self.c0 < 0:
            raise ConfigError("c and c0 must be nonnegative")
        if not 1 <= self.b < self.d:
            raise ConfigError(f"b must satisfy 1 <= b < d, got b={self.b}")
        if self.grid_points < 2 or self.degree_cap < 1:
            raise ConfigError("grid_points >= 2 and degree_cap >= 1 required")

    @property
    def support(self) -> int:
        return min(self.d, self.degree_cap)

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0 - self.b / self.d, self.grid_points)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data) -> "OptimizerConfig":
        if isinstance(data, str):
            data = json.loads(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown optimizer fields: {sorted(unknown)}")
        return cls(**data)


def _peeling_rows(cfg: OptimizerConfig):
    """``G @ p >= h``: Omega'(x)/d >= 1 - rhs(x)^(1/(d+c)) on every grid point."""
    x = cfg.grid()
    rhs = 1.0 - x - cfg.c0 * np.sqrt((1.0 - x) / cfg.d)
    if np.any(rhs <= 0):
        raise Infeasible("decodability", "right-hand side is nonpositive on the grid; lower c0 or raise b")
    k = np.arange(1, cfg.support + 1)
    G = k * x[:, None] ** (k - 1) / cfg.d
    h = 1.0 - rhs ** (1.0 / (cfg.d + cfg.c))
    return G, h


def _peeling_margins(P: DegreeDistribution, cfg: OptimizerConfig) -> np.ndarray:
    x = cfg.grid()
    rhs = 1.0 - x - cfg.c0 * np.sqrt((1.0 - x) / cfg.d)
    base = np.clip(1.0 - omega_prime(P, x) / cfg.d, 0.0, 1.0)
    return rhs - base ** (cfg.d + cfg.c)


def _hit_matrix(cfg: OptimizerConfig) -> np.ndarray:
    q = hit_probabilities(cfg.d, cfg.support)
    return np.array([[float(v) for v in row] for row in q])


def _log_matching(H: np.ndarray, p: np.ndarray) -> tuple[float, np.ndarray]:
    terms = H @ p
    if np.any(terms <= 0):
        return -math.inf, np.zeros_like(p)
    return float(np.log(terms).sum()), (H / terms[:, None]).sum(axis=0)


def _to_distribution(p: np.ndarray, d: int) -> DegreeDistribution:
    full = np.zeros(d)
    full[: p.size] = np.clip(p, 0.0, None)
    return DegreeDistribution.from_floats(full)


def feasibility_report(P: DegreeDistribution, cfg: OptimizerConfig) -> dict:
    """Evaluate both constraint families for ``P`` without any solver."""
    if P.d != cfg.d:
        raise ConfigError(f"distribution has d={P.d}, config has d={cfg.d}")
    match = perfect_matching_probability(P)
    margins = _peeling_margins(P, cfg)
    return {
        "matching_probability": str(match),
        "matching_probability_float": float(match),
        "matching_margin": float(match) - cfg.p_m,
        "matching_feasible": match >= Fraction(cfg.p_m),
        "decodability_min_margin": float(margins.min()),
        "decodability_argmin_x": float(cfg.grid()[int(margins.argmin())]),
        "decodability_feasible": bool(np.all(margins >= 0)),
        "feasible": match >= Fraction(cfg.p_m) and bool(np.all(margins >= 0)),
        "mean_degree": float(mean_degree(P)),
    }


def optimize_distribution(cfg: OptimizerConfig) -> tuple[DegreeDistribution, dict]:
    D = cfg.support
    cost = np.arange(1, D + 1, dtype=float)
    G, h = _peeling_rows(cfg)
    H = _hit_matrix(cfg)
    target = math.log(cfg.p_m) + MATCH_SLACK

    A_ub = [-G]
    b_ub = [-(h + LP_SLACK)]
    A_eq = np.ones((1, D))
    cuts = 0
    p = None
    for it in range(1, cfg.max_iter + 1):
        res = linprog(cost, A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub), A_eq=A_eq,
                      b_eq=[1.0], bounds=[(0, None)] * D, method="highs")
        if res.status == 2:
            family = "decodability" if cuts == 0 else "matching"
            raise Infeasible(family, f"no distribution on degrees 1..{D} satisfies the {family} constraints")
        if res.status != 0:
            raise Infeasible("solver", res.message)
        p = res.x
        g, grad = _log_matching(H, p)
        if g >= target:
            break
        # tangent of a concave function over-estimates it, so this cut is valid
        A_ub.append(-grad[None, :])
        b_ub.append(np.array([-(target + CUT_SLACK - g + grad @ p)]))
        cuts += 1
    else:
        raise Infeasible("matching", f"cutting planes did not converge in {cfg.max_iter} rounds")

    P = _to_distribution(p, cfg.d)
    check = feasibility_report(P, cfg)
    if not check["feasible"]:
        raise Infeasible("matching" if not check["matching_feasible"] else "decodability",
                         "rationalized optimum failed the independent re-check")
    x = cfg.grid()
    slack = G @ p - h
    report = {
        "config": cfg.to_json(),
        "objective": str(mean_degree(P)),
        "objective_float": float(mean_degree(P)),
        "iterations": it,
        "cuts": cuts,
        "matching_active": bool(check["matching_margin"] < 1e-4),
        "active_grid_x": [float(v) for v in x[slack < 1e-6]],
        "check": check,
    }
    return P, report
