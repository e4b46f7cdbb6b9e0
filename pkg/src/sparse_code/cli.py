"""``sparse-code`` command line: simulate, threshold, analyze, optimize, gen."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .degree import (DegreeDistribution, ideal_soliton, mean_degree, moment, point_mass,
                     robust_soliton, wave_soliton)
from .errors import ConfigError, SparseCodeError
from .mmio import load_matrix_market, write_matrix_market
from .optimizer import OptimizerConfig, feasibility_report, optimize_distribution
from .sim import ExperimentConfig, generate_random_sparse, run_experiment, summary_csv, trials_csv

SCHEMA = "sparse-code/{}/1"
log = logging.getLogger("sparse_code")


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def dump_json(obj, kind: str) -> str:
    return json.dumps({"schema": SCHEMA.format(kind), **obj}, sort_keys=True, indent=2) + "\n"


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def resolve_distribution(name: str | None, d: int, dist_file: str | None = None,
                         c: float = 0.1, delta: float = 0.5) -> DegreeDistribution:
    if dist_file:
        P = DegreeDistribution.from_json(Path(dist_file).read_text())
        if P.d != d and d:
            raise ConfigError(f"distribution file has d={P.d}, expected {d}")
        return P
    if name == "wave":
        return wave_soliton(d)
    if name == "robust":
        return robust_soliton(d, c, delta)
    if name == "ideal":
        return ideal_soliton(d)
    if name and name.startswith("point:"):
        return point_mass(d, int(name.split(":", 1)[1]))
    raise ConfigError(f"unknown distribution {name!r}")


# ------------------------------------------------------------------ commands

def cmd_simulate(args) -> int:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    flags = {"schemes": args.scheme, "m": args.m, "n": args.n, "N": args.N,
             "stragglers": args.stragglers, "slowdown": args.slowdown, "trials": args.trials,
             "seed": args.seed, "rows": args.rows, "a_cols": args.cols, "b_cols": args.cols,
             "nnz": args.nnz, "value_law": args.value_law, "a_path": args.A, "b_path": args.B,
             "dist": args.dist, "dist_file": args.dist_file, "robust_c": args.robust_c,
             "robust_delta": args.robust_delta, "code_mode": args.code_mode,
             "resist": args.resist, "margin": args.margin, "time_model": args.time_model}
    data.update({k: v for k, v in flags.items() if v is not None})
    if args.dist_file and "dist" not in data:
        data["dist"] = "file"
    if args.no_verify:
        data["verify"] = False
    cfg = ExperimentConfig.from_json(data)
    trials, summary = run_experiment(cfg, jobs=args.jobs)
    if args.trials_csv:
        Path(args.trials_csv).write_text(trials_csv(trials))
    if args.json:
        Path(args.json).write_text(dump_json({"config": cfg.to_json(), "summary": summary},
                                             "simulate"))
    _emit(summary_csv(summary), args.csv)
    return 0


def cmd_threshold(args) -> int:
    if args.mn is not None:
        m, n = args.mn, 1
    elif args.m is not None and args.n is not None:
        m, n = args.m, args.n
    else:
        raise UsageError("give --mn or both --m and --n")
    d = m * n
    if args.dist == "polynomial":
        P, scheme = None, "polynomial"
    else:
        P, scheme = resolve_distribution(args.dist, d, args.dist_file, args.robust_c,
                                         args.robust_delta), "sparse"
    summary = analysis.estimate_recovery_threshold(P, m, n, args.trials, seed=args.seed,
                                                   scheme=scheme, jobs=args.jobs,
                                                   label=args.dist or "file")
    body = summary.to_json()
    body.update(seed=args.seed, scheme=scheme)
    if args.dist == "robust":
        body.update(robust_c=args.robust_c, robust_delta=args.robust_delta)
    if P is not None:
        body["mean_degree"] = float(mean_degree(P))
    if args.csv or args.json:
        if args.csv:
            Path(args.csv).write_text(summary.histogram_csv())
        if args.json:
            Path(args.json).write_text(dump_json(body, "threshold"))
    else:
        sys.stdout.write(summary.histogram_csv())
        sys.stdout.write(dump_json(body, "threshold"))
    return 0


def cmd_analyze(args) -> int:
    d = args.d or 0
    if not args.dist_file and not d:
        raise UsageError("give --dist-file or --d with --dist")
    P = resolve_distribution(args.dist, d, args.dist_file, args.robust_c, args.robust_delta)
    out = {"d": P.d, "distribution": P.to_json(), "mean_degree": str(mean_degree(P)),
           "mean_degree_float": float(mean_degree(P))}
    if args.matching:
        pm = analysis.perfect_matching_probability(P)
        out["matching_probability"] = str(pm)
        out["matching_probability_float"] = float(pm)
        print(f"matching probability: {pm} = {float(pm):.12g}")
    if args.K is not None:
        rep = analysis.decodability_check(P, args.K, b=args.b, grid_points=args.grid_points,
                                          form=args.form, c0=args.c0)
        out["decodability"] = rep.to_json()
        print(f"decodability (K={args.K}, b={args.b}, {args.form}): "
              f"{'feasible' if rep.feasible else 'infeasible'}, min margin {rep.min_margin:.6g}")
    if args.evolution:
        evo = analysis.degree_evolution(P)
        out["evolution"] = {str(s): [str(v) for v in evo.table[s]] for s in sorted(evo.table)}
    if args.moments:
        out["moments"] = {str(s): str(moment(P, s)) for s in range(1, args.moments + 1)}
    if args.json:
        Path(args.json).write_text(dump_json(out, "analyze"))
    elif not (args.matching or args.K is not None):
        sys.stdout.write(dump_json(out, "analyze"))
    return 0


def cmd_optimize(args) -> int:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    for name in ("d", "p_m", "c", "c0", "b", "grid_points", "degree_cap"):
        val = getattr(args, name)
        if val is not None:
            data[name] = val
    if "d" not in data:
        raise UsageError("--d is required (or a config file with 'd')")
    cfg = OptimizerConfig.from_json(data)
    P, report = optimize_distribution(cfg)
    body = {"distribution": P.to_json(), "probs_float": [float(p) for p in P.probs],
            "report": report}
    if args.mc_trials:
        s = analysis.estimate_recovery_threshold(P, cfg.d, 1, args.mc_trials, seed=args.seed,
                                                 jobs=args.jobs)
        body["recovery_threshold"] = s.mean
        body["rooting_steps"] = s.mean_rooted
        body["mc_trials"] = args.mc_trials
        body["seed"] = args.seed
    if args.dist_out:
        Path(args.dist_out).write_text(json.dumps(P.to_json(), indent=2) + "\n")
    _emit(dump_json(body, "optimize"), args.json)
    return 0


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    M = generate_random_sparse(args.rows, args.cols, args.nnz, args.law, rng)
    write_matrix_market(M, args.out)
    log.info("wrote %s (%dx%d, nnz=%d)", args.out, M.rows, M.cols, M.nnz)
    return 0


def cmd_check(args) -> int:
    """Load a Matrix Market file and print its shape; handy for validating inputs."""
    M = load_matrix_market(args.path)
    print(f"{M.rows} {M.cols} {M.nnz}")
    return 0


# -------------------------------------------------------------------- parser

def _dist_args(p, default="wave"):
    p.add_argument("--dist", default=default,
                   help="wave | robust | ideal | point:K (threshold also takes polynomial)")
    p.add_argument("--dist-file", help="JSON distribution {'d', 'probs'}")
    p.add_argument("--robust-c", type=float, default=0.1)
    p.add_argument("--robust-delta", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sparse-code", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="straggler simulation with uncoded/sparse/polynomial")
    p.add_argument("--config", help="experiment config JSON; flags override it")
    p.add_argument("--scheme", action="append", choices=["uncoded", "sparse", "polynomial"])
    for name in ("m", "n", "N", "stragglers", "trials", "seed", "rows", "cols", "nnz",
                 "resist", "margin"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--slowdown", type=float)
    p.add_argument("--value-law", choices=["integer", "bernoulli"])
    p.add_argument("--A", help="Matrix Market file for A")
    p.add_argument("--B", help="Matrix Market file for B")
    p.add_argument("--dist")
    p.add_argument("--dist-file")
    p.add_argument("--robust-c", type=float)
    p.add_argument("--robust-delta", type=float)
    p.add_argument("--code-mode", choices=["fresh", "fixed"])
    p.add_argument("--time-model", choices=["deterministic", "shifted_exponential"])
    p.add_argument("--no-verify", action="store_true")
    p.add_argument("--csv", help="summary CSV path (default stdout)")
    p.add_argument("--trials-csv", help="one row per trial")
    p.add_argument("--json", help="JSON summary path")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("threshold", help="Monte Carlo recovery threshold")
    p.add_argument("--mn", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    _dist_args(p)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="histogram CSV path")
    p.add_argument("--json", help="summary JSON path")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("analyze", help="matching probability and decodability check")
    p.add_argument("--d", type=int)
    _dist_args(p)
    p.add_argument("--matching", action="store_true")
    p.add_argument("--K", type=int, help="run the decodability check with K results")
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--grid-points", type=int, default=200)
    p.add_argument("--form", choices=["plain", "strengthened"], default="plain")
    p.add_argument("--c0", type=float, default=0.0)
    p.add_argument("--evolution", action="store_true")
    p.add_argument("--moments", type=int, default=0, metavar="S")
    p.add_argument("--json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("optimize", help="minimum-mean-degree distribution")
    p.add_argument("--config")
    p.add_argument("--d", type=int)
    p.add_argument("--p-m", dest="p_m", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--c0", type=float)
    p.add_argument("--b", type=int)
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--degree-cap", dest="degree_cap", type=int)
    p.add_argument("--mc-trials", type=int, default=0,
                   help="also estimate the recovery threshold by Monte Carlo")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json")
    p.add_argument("--dist-out", help="write the distribution JSON here")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("gen", help="random sparse matrix to Matrix Market")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--nnz", type=int, required=True)
    p.add_argument("--law", choices=["integer", "bernoulli"], default="integer")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("check", help="parse a Matrix Market file")
    p.add_argument("path")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except (UsageError, ConfigError, ValueError) as exc:
        print(f"sparse-code: error: {exc}", file=sys.stderr)
        return 2
    except (SparseCodeError, OSError) as exc:
        print(f"sparse-code: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
