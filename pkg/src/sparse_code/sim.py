"""Virtual-clock master/worker simulation with stragglers.

Every worker really executes its task, so flop and nnz tallies are measured.
Only time is modelled: ``(flops + combine_ops) / rate + bytes / bandwidth``, multiplied by the
slowdown for the stragglers of the trial.  The master consumes results in
completion-time order (ties broken by worker id).
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from functools import partial
from itertools import combinations

import numpy as np

from .decoder import EchelonState, decode_polynomial, hybrid_decode
from .degree import DegreeDistribution, point_mass, robust_soliton, wave_soliton
from .encoder import CodedTask, assign_uncoded, encode_polynomial, encode_sparse, execute_task
from .errors import ConfigError, DecodeMismatch, InvalidParameter, RankDeficient
from .parallel import pmap, trial_rng
from .sparse import BlockGrid, SparseMatrix, _from_coo, split_columns

log = logging.getLogger(__name__)

ENTRY_BYTES = 12  # float64 value + int32 column index
SCHEMES = ("uncoded", "sparse", "polynomial")
_PRIME = 2_147_483_647


@dataclass(frozen=True)
class WorkerModel:
    N: int
    stragglers: int = 0
    slowdown: float = 8.0
    time_model: str = "deterministic"
    rate: float = 1e9  # flops per simulated second
    bandwidth: float = 1e8  # bytes per simulated second
    shift: float = 1.0
    exp_rate: float = 1.0

    def __post_init__(self):
        if self.N < 1 or not 0 <= self.stragglers <= self.N:
            raise InvalidParameter(f"need N >= 1 and 0 <= s <= N (N={self.N}, s={self.stragglers})")
        if self.slowdown < 1:
            raise InvalidParameter("slowdown must be >= 1")
        if self.time_model not in ("deterministic", "shifted_exponential"):
            raise InvalidParameter(f"unknown time model {self.time_model!r}")

    def completion_times(self, flops, nbytes, rng):
        """Times for every worker plus the sorted straggler worker ids."""
        base = np.asarray(flops, float) / self.rate + np.asarray(nbytes, float) / self.bandwidth
        if self.time_model == "shifted_exponential":
            base = base * (self.shift + rng.exponential(1.0 / self.exp_rate, size=base.size))
        slow = np.sort(rng.choice(self.N, size=self.stragglers, replace=False))
        base[slow] *= self.slowdown
        return base, [int(k) + 1 for k in slow]


@dataclass
class TrialResult:
    scheme: str
    K_used: int
    rooting_steps: int
    peeled: int
    encode_nnz_in: int
    compute_flops: int
    per_worker_flops: float
    combine_ops: int
    bytes_out: int
    decode_ops: int
    wall_model_time: float
    correct: bool | None
    stragglers: list = field(default_factory=list)
    consumed: list = field(default_factory=list)

    def row(self) -> dict:
        out = asdict(self)
        out["stragglers"] = " ".join(map(str, self.stragglers))
        out["consumed"] = " ".join(map(str, self.consumed))
        return out


METRICS = ("K_used", "rooting_steps", "peeled", "encode_nnz_in", "compute_flops",
           "per_worker_flops", "combine_ops", "bytes_out", "decode_ops", "wall_model_time")


def generate_random_sparse(rows: int, cols: int, nnz_target: int, value_law: str = "integer",
                           rng: np.random.Generator | None = None, high: int = 9) -> SparseMatrix:
    """Uniformly placed distinct positions; values all 1 (``bernoulli``) or uniform on 1..high."""
    if not 0 <= nnz_target <= rows * cols:
        raise InvalidParameter(f"nnz_target={nnz_target} outside 0..{rows * cols}")
    if rng is None:
        rng = np.random.default_rng()
    flat = np.sort(rng.choice(rows * cols, size=nnz_target, replace=False))
    if value_law == "bernoulli":
        vals = np.ones(nnz_target)
    elif value_law == "integer":
        vals = rng.integers(1, high + 1, size=nnz_target).astype(float)
    else:
        raise InvalidParameter(f"unknown value law {value_law!r}")
    return _from_coo(rows, cols, flat // cols, flat % cols, vals)


# --------------------------------------------------------------- code checks

def rank_mod_p(rows, width: int, prime: int = _PRIME) -> int:
    """Rank over GF(prime); never exceeds the rank over the rationals."""
    M = np.zeros((len(rows), width), dtype=np.int64)
    for k, row in enumerate(rows):
        items = row.items() if isinstance(row, dict) else enumerate(row)
        for c, w in items:
            M[k, c] = int(w) % prime
    rank = 0
    for c in range(width):
        nz = np.nonzero(M[rank:, c])[0]
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        M[[rank, piv]] = M[[piv, rank]]
        inv = pow(int(M[rank, c]), prime - 2, prime)
        M[rank] = (M[rank] * inv) % prime
        below = np.nonzero(M[rank + 1:, c])[0] + rank + 1
        if below.size:
            M[below] = (M[below] - np.outer(M[below, c], M[rank]) % prime) % prime
        rank += 1
        if rank == len(rows):
            break
    return rank


def resists(rows, width: int, lost: int) -> bool:
    """True when every subset missing ``lost`` rows still has full column rank.

    Checked modulo a large prime, which can only under-report rank, so a True
    answer is a certificate.
    """
    if lost >= len(rows):
        return False
    for gone in combinations(range(len(rows)), lost):
        keep = [r for k, r in enumerate(rows) if k not in gone]
        if rank_mod_p(keep, width) < width:
            return False
    return True


def draw_resistant_code(m, n, P, N, lost, rng, max_draws: int = 1000) -> list[CodedTask]:
    """Resample sparse-code rows until they survive any ``lost`` missing workers."""
    for _ in range(max_draws):
        tasks = encode_sparse(m, n, P, N, rng)
        if resists([t.weights for t in tasks], m * n, lost):
            return tasks
    raise RankDeficient(f"no code in {max_draws} draws survives {lost} lost workers")


# ------------------------------------------------------------------- trials

def _consume(scheme, order, tasks, m, n, margin):
    d = m * n
    if scheme == "polynomial":
        if len(order) < d:
            raise RankDeficient("fewer than mn polynomial results")
        return order[:d]
    if scheme == "uncoded":
        seen, taken = set(), []
        for k in order:
            (blk,) = tasks[k].weights
            if blk not in seen:
                seen.add(blk)
                taken.append(k)
            if len(seen) == d:
                return taken
        raise RankDeficient("some block is held by no worker")
    state = EchelonState(d)
    for pos, k in enumerate(order):
        state.insert(tasks[k].weights)
        if state.full:
            return order[:min(pos + 1 + margin, len(order))]
    raise RankDeficient(f"all {len(order)} results reach rank {state.rank} < {d}")


def run_trial(scheme: str, A: SparseMatrix, B: SparseMatrix, m: int, n: int, model: WorkerModel,
              rng: np.random.Generator, P: DegreeDistribution | None = None, tasks=None,
              margin: int = 0, resist: int | None = None, verify: bool = True,
              root_rule: str = "max_incidence") -> TrialResult:
    """One simulated job: encode, execute, collect in completion order, decode, check.

    ``tasks`` replays a fixed sparse code; otherwise a fresh one is drawn that
    survives ``resist`` lost workers (defaults to the straggler count).
    """
    if scheme not in SCHEMES:
        raise InvalidParameter(f"unknown scheme {scheme!r}")
    if A.rows != B.rows:
        raise InvalidParameter(f"A has {A.rows} rows, B has {B.rows}")
    N = model.N
    if scheme == "sparse" and tasks is None:
        if P is None:
            raise InvalidParameter("sparse scheme needs a degree distribution")
        lost = model.stragglers if resist is None else resist
        tasks = draw_resistant_code(m, n, P, N, lost, rng)
    elif scheme == "polynomial":
        tasks, _ = encode_polynomial(m, n, N)
    elif scheme == "uncoded":
        tasks = assign_uncoded(m, n, N)
    if len(tasks) != N:
        raise InvalidParameter(f"{len(tasks)} tasks for {N} workers")

    A_parts, B_parts = split_columns(A, m), split_columns(B, n)
    exact = scheme == "polynomial" and A.is_integral() and B.is_integral()
    done, flops, combine, nbytes, nnz_in = [], [], [], [], []
    for t in tasks:
        res, cost = execute_task(t, A_parts, B_parts, n, exact=exact)
        done.append(t.with_result(res))
        flops.append(cost.flops)
        combine.append(cost.combine_ops)
        nnz_in.append(cost.nnz_in)
        nbytes.append((cost.nnz_in + res.nnz) * ENTRY_BYTES)

    work = np.add(flops, combine)
    times, slow = model.completion_times(work, nbytes, rng)
    order = sorted(range(N), key=lambda k: (times[k], k))
    taken = _consume(scheme, order, done, m, n, margin)
    got = [done[k] for k in taken]

    rooted = peeled = 0
    if scheme == "sparse":
        grid, stats = hybrid_decode(got, m, n, root_rule=root_rule, rng=rng)
        rooted, peeled, ops = stats.rooted, stats.peeled, stats.block_op_count
    elif scheme == "polynomial":
        grid, ops = decode_polynomial(got, m, n)
    else:
        grid = BlockGrid.empty(m, n, A_parts[0].cols, B_parts[0].cols)
        for t in got:
            (blk,) = t.weights
            grid.blocks[blk] = t.result
        ops = 0

    correct = None
    if verify:
        truth, _ = BlockGrid.from_inputs(A, B, m, n)
        correct = grid.assemble(A.cols, B.cols).equals(truth.assemble(A.cols, B.cols))
        if not correct:
            raise DecodeMismatch(f"{scheme} decode differs from A^T B")

    return TrialResult(
        scheme=scheme, K_used=len(got), rooting_steps=rooted, peeled=peeled,
        encode_nnz_in=int(sum(nnz_in)), compute_flops=int(sum(flops)),
        per_worker_flops=float(np.mean(flops)), combine_ops=int(sum(combine)),
        bytes_out=int(sum(t.result.nnz for t in got) * ENTRY_BYTES),
        decode_ops=int(ops), wall_model_time=float(times[taken[-1]]),
        correct=correct, stragglers=slow, consumed=[tasks[k].worker_id for k in taken])


def aggregate(trials) -> dict:
    """Per-scheme mean and population std of every metric."""
    if not trials:
        raise InvalidParameter("nothing to aggregate")
    out = {}
    for scheme in sorted({t.scheme for t in trials}):
        group = [t for t in trials if t.scheme == scheme]
        summary = {"trials": len(group),
                   "all_correct": all(t.correct is not False for t in group)}
        for name in METRICS:
            vals = np.array([getattr(t, name) for t in group], dtype=float)
            summary[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
        out[scheme] = summary
    return out


def trials_csv(trials) -> str:
    buf = io.StringIO()
    cols = [f.name for f in fields(TrialResult)]
    w = csv.DictWriter(buf, fieldnames=["trial"] + cols, lineterminator="\n")
    w.writeheader()
    for i, t in enumerate(trials):
        w.writerow({"trial": i, **t.row()})
    return buf.getvalue()


def summary_csv(summary: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "metric", "mean", "std"])
    for scheme, s in summary.items():
        for name in METRICS:
            w.writerow([scheme, name, repr(s[name]["mean"]), repr(s[name]["std"])])
    return buf.getvalue()


# --------------------------------------------------------------- experiments

@dataclass(frozen=True)
class ExperimentConfig:
    schemes: tuple = ("sparse",)
    m: int = 4
    n: int = 4
    N: int = 20
    stragglers: int = 2
    slowdown: float = 8.0
    time_model: str = "deterministic"
    trials: int = 20
    seed: int = 0
    rows: int = 400
    a_cols: int = 400
    b_cols: int = 400
    nnz: int = 4000
    value_law: str = "integer"
    a_path: str | None = None
    b_path: str | None = None
    dist: str = "wave"
    dist_file: str | None = None
    robust_c: float = 0.1
    robust_delta: float = 0.5
    code_mode: str = "fresh"
    resist: int | None = None
    margin: int = 0
    verify: bool = True

    def __post_init__(self):
        schemes = (self.schemes,) if isinstance(self.schemes, str) else tuple(self.schemes)
        object.__setattr__(self, "schemes", schemes)
        bad = [s for s in schemes if s not in SCHEMES]
        if bad or not schemes:
            raise ConfigError(f"schemes must be drawn from {SCHEMES}, got {list(schemes)}")
        if self.code_mode not in ("fresh", "fixed"):
            raise ConfigError(f"code_mode must be 'fresh' or 'fixed', got {self.code_mode!r}")
        if self.dist not in ("wave", "robust", "ideal", "file") and not self.dist.startswith("point:"):
            raise ConfigError(f"unknown dist {self.dist!r}")
        if self.dist == "file" and not self.dist_file:
            raise ConfigError("dist 'file' needs dist_file")
        if (self.a_path is None) != (self.b_path is None):
            raise ConfigError("give both a_path and b_path or neither")
        for name in ("m", "n", "N", "trials"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 <= self.stragglers <= self.N:
            raise ConfigError("stragglers must lie in 0..N")
        if self.slowdown < 1 or self.margin < 0:
            raise ConfigError("slowdown >= 1 and margin >= 0 required")

    @classmethod
    def from_json(cls, data) -> "ExperimentConfig":
        if isinstance(data, str):
            data = json.loads(data)
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for key, val in data.items():
            if key == "schemes":
                if not isinstance(val, (list, str)):
                    raise ConfigError("schemes must be a list of names")
                continue
            default = getattr(cls, key, None)
            if val is None or default is None:
                continue
            expect = type(default)
            ok = isinstance(val, (int, float)) and not isinstance(val, bool) if expect is float \
                else isinstance(val, expect) and (expect is bool or not isinstance(val, bool))
            if not ok:
                raise ConfigError(f"field {key!r} should be {expect.__name__}, got {val!r}")
        return cls(**data)

    def to_json(self) -> dict:
        out = asdict(self)
        out["schemes"] = list(self.schemes)
        return out

    def model(self) -> WorkerModel:
        return WorkerModel(self.N, self.stragglers, self.slowdown, self.time_model)

    def distribution(self) -> DegreeDistribution:
        d = self.m * self.n
        if self.dist == "wave":
            return wave_soliton(d)
        if self.dist == "robust":
            return robust_soliton(d, self.robust_c, self.robust_delta)
        if self.dist == "ideal":
            from .degree import ideal_soliton
            return ideal_soliton(d)
        if self.dist == "file":
            with open(self.dist_file) as fh:
                return DegreeDistribution.from_json(fh.read())
        return point_mass(d, int(self.dist.split(":", 1)[1]))


def _inputs(cfg: ExperimentConfig, rng):
    if cfg.a_path is not None:
        from .mmio import load_matrix_market
        return load_matrix_market(cfg.a_path), load_matrix_market(cfg.b_path)
    A = generate_random_sparse(cfg.rows, cfg.a_cols, cfg.nnz, cfg.value_law, rng)
    B = generate_random_sparse(cfg.rows, cfg.b_cols, cfg.nnz, cfg.value_law, rng)
    return A, B


def _one_experiment_trial(index, cfg: ExperimentConfig, fixed_tasks):
    rng = trial_rng(cfg.seed, index + 1)
    A, B = _inputs(cfg, rng)
    P = cfg.distribution() if "sparse" in cfg.schemes else None
    out = []
    for scheme in cfg.schemes:
        out.append(run_trial(scheme, A, B, cfg.m, cfg.n, cfg.model(), rng, P=P,
                             tasks=fixed_tasks if scheme == "sparse" else None,
                             margin=cfg.margin, resist=cfg.resist, verify=cfg.verify))
    return out


def run_experiment(cfg: ExperimentConfig, jobs: int | None = None):
    """All trials of ``cfg``; returns (trial results, per-scheme summary).

    In ``fixed`` code mode one resistant sparse code is drawn from the master
    seed and replayed in every trial; in ``fresh`` mode each trial draws its own.
    """
    fixed = None
    if "sparse" in cfg.schemes and cfg.code_mode == "fixed":
        lost = cfg.stragglers if cfg.resist is None else cfg.resist
        fixed = draw_resistant_code(cfg.m, cfg.n, cfg.distribution(), cfg.N, lost,
                                    trial_rng(cfg.seed, 0))
    fn = partial(_one_experiment_trial, cfg=cfg, fixed_tasks=fixed)
    trials = [t for group in pmap(fn, range(cfg.trials), jobs) for t in group]
    log.info("ran %d trials over %s", cfg.trials, ",".join(cfg.schemes))
    return trials, aggregate(trials)
