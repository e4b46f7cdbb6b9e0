import copy
import json

import numpy as np
import pytest

from sparse_code.degree import wave_soliton
from sparse_code.encoder import encode_sparse, execute_task
from sparse_code.errors import ConfigError, InvalidParameter
from sparse_code.sim import (ENTRY_BYTES, METRICS, ExperimentConfig, WorkerModel, aggregate,
                             draw_resistant_code, generate_random_sparse, rank_mod_p, resists,
                             run_experiment, run_trial, summary_csv, trials_csv)
from sparse_code.sparse import split_columns


@pytest.fixture(scope="module")
def inputs():
    rng = np.random.default_rng(21)
    return (generate_random_sparse(120, 120, 900, "integer", rng),
            generate_random_sparse(120, 120, 900, "integer", rng))


# input generation

def test_generate_empty_and_full():
    rng = np.random.default_rng(0)
    assert generate_random_sparse(5, 7, 0, rng=rng).nnz == 0
    full = generate_random_sparse(5, 7, 35, "bernoulli", rng)
    assert full.nnz == 35 and np.all(full.to_dense() == 1)


def test_generate_density():
    M = generate_random_sparse(1000, 1000, 4000, "integer", np.random.default_rng(1))
    assert M.nnz == 4000 and M.nnz / (M.rows * M.cols) == 4e-3
    assert set(np.unique(M.values)) <= set(range(1, 10))


def test_generate_bad_args():
    with pytest.raises(InvalidParameter):
        generate_random_sparse(2, 2, 5)
    with pytest.raises(InvalidParameter):
        generate_random_sparse(2, 2, 1, "gauss")


# code resistance

def test_rank_mod_p():
    assert rank_mod_p([{0: 1, 1: 1}, {0: 2, 1: 2}], 2) == 1
    assert rank_mod_p([[1, 2], [3, 4]], 2) == 2
    assert rank_mod_p([[1, 0], [0, 7]], 2, prime=7) == 1


def test_resistant_code_survives_every_loss():
    rng = np.random.default_rng(3)
    tasks = draw_resistant_code(2, 2, wave_soliton(4), 7, 2, rng)
    assert resists([t.weights for t in tasks], 4, 2)
    assert not resists([{0: 1}, {1: 1}, {2: 1}, {3: 1}], 4, 1)


# single trials

def test_uncoded_no_stragglers(inputs):
    A, B = inputs
    r = run_trial("uncoded", A, B, 2, 2, WorkerModel(4), np.random.default_rng(0))
    assert r.K_used == 4 and r.correct and r.decode_ops == 0
    # every worker is needed, so the job ends with the slowest one
    Ap, Bp = split_columns(A, 2), split_columns(B, 2)
    times = []
    for blk in range(4):
        from sparse_code.encoder import CodedTask
        res, cost = execute_task(CodedTask(blk + 1, {blk: 1}), Ap, Bp, 2)
        times.append(cost.total / 1e9 + (cost.nnz_in + res.nnz) * ENTRY_BYTES / 1e8)
    assert r.wall_model_time == pytest.approx(max(times), rel=1e-12)


def test_uncoded_straggler_inflates_wall_time(inputs):
    A, B = inputs
    base = run_trial("uncoded", A, B, 2, 2, WorkerModel(4), np.random.default_rng(0))
    slow = run_trial("uncoded", A, B, 2, 2, WorkerModel(4, stragglers=1, slowdown=8.0),
                     np.random.default_rng(0))
    assert slow.wall_model_time > 3 * base.wall_model_time


def test_polynomial_ignores_stragglers(inputs):
    A, B = inputs
    m = n = 2
    N = 7
    base = run_trial("polynomial", A, B, m, n, WorkerModel(N), np.random.default_rng(1))
    slow = run_trial("polynomial", A, B, m, n, WorkerModel(N, stragglers=N - m * n, slowdown=100.0),
                     np.random.default_rng(1))
    assert base.correct and slow.correct and slow.K_used == m * n
    assert slow.wall_model_time == pytest.approx(base.wall_model_time, rel=1e-12)
    assert not set(slow.consumed) & set(slow.stragglers)


def test_sparse_wall_time_bounded_by_non_stragglers(inputs):
    A, B = inputs
    m = n = 2
    N, s = 8, 2
    tasks = draw_resistant_code(m, n, wave_soliton(4), N, s, np.random.default_rng(4))
    model = WorkerModel(N, stragglers=s)
    rng = np.random.default_rng(9)
    twin = copy.deepcopy(rng)
    r = run_trial("sparse", A, B, m, n, model, rng, tasks=tasks)
    Ap, Bp = split_columns(A, m), split_columns(B, n)
    flops, nbytes = [], []
    for t in tasks:
        res, cost = execute_task(t, Ap, Bp, n)
        flops.append(cost.total)
        nbytes.append((cost.nnz_in + res.nnz) * ENTRY_BYTES)
    times, slow = model.completion_times(flops, nbytes, twin)
    assert slow == r.stragglers
    fast = [times[k] for k in range(N) if k + 1 not in slow]
    assert r.wall_model_time <= max(fast)
    assert r.correct and r.K_used >= m * n


@pytest.mark.parametrize("seed", range(3))
def test_sparse_m4n4_decodes(seed):
    rng = np.random.default_rng(seed)
    A = generate_random_sparse(400, 400, 4000, "integer", rng)
    B = generate_random_sparse(400, 400, 4000, "integer", rng)
    r = run_trial("sparse", A, B, 4, 4, WorkerModel(20, stragglers=2), rng, P=wave_soliton(16))
    assert r.correct and r.K_used >= 16
    assert r.peeled + r.rooting_steps == 16


def test_margin_takes_extra_results(inputs):
    A, B = inputs
    tasks = draw_resistant_code(2, 2, wave_soliton(4), 8, 1, np.random.default_rng(2))
    a = run_trial("sparse", A, B, 2, 2, WorkerModel(8), np.random.default_rng(0), tasks=tasks)
    b = run_trial("sparse", A, B, 2, 2, WorkerModel(8), np.random.default_rng(0), tasks=tasks, margin=2)
    assert b.K_used == min(a.K_used + 2, 8) and b.correct


def test_run_trial_bad_args(inputs):
    A, B = inputs
    with pytest.raises(InvalidParameter):
        run_trial("lt", A, B, 2, 2, WorkerModel(4), np.random.default_rng(0))
    with pytest.raises(InvalidParameter):
        run_trial("sparse", A, B, 2, 2, WorkerModel(4), np.random.default_rng(0))
    with pytest.raises(InvalidParameter):
        WorkerModel(4, stragglers=5)
    with pytest.raises(InvalidParameter):
        WorkerModel(4, slowdown=0.5)


def test_shifted_exponential_model():
    model = WorkerModel(50, time_model="shifted_exponential", shift=1.0)
    times, _ = model.completion_times(np.full(50, 1e9), np.zeros(50), np.random.default_rng(0))
    assert np.all(times >= 1.0) and times.std() > 0


# aggregation

def fake(scheme="sparse", **kw):
    from sparse_code.sim import TrialResult
    base = dict(scheme=scheme, K_used=17, rooting_steps=1, peeled=15, encode_nnz_in=100,
                compute_flops=500, per_worker_flops=25.0, combine_ops=30, bytes_out=1200, decode_ops=40,
                wall_model_time=0.5, correct=True)
    return TrialResult(**(base | kw))


def test_aggregate_single():
    s = aggregate([fake()])["sparse"]
    assert s["trials"] == 1 and s["all_correct"]
    assert all(s[k]["mean"] == getattr(fake(), k) and s[k]["std"] == 0 for k in METRICS)


def test_aggregate_identical_and_grouped():
    s = aggregate([fake(), fake(), fake("uncoded", K_used=16)])
    assert s["sparse"]["trials"] == 2 and s["sparse"]["K_used"]["std"] == 0
    assert s["uncoded"]["K_used"]["mean"] == 16
    with pytest.raises(InvalidParameter):
        aggregate([])


def test_csv_shapes():
    trials = [fake(), fake(K_used=18)]
    assert trials_csv(trials).splitlines()[0].startswith("trial,scheme,K_used")
    assert len(trials_csv(trials).splitlines()) == 3
    assert len(summary_csv(aggregate(trials)).splitlines()) == 1 + len(METRICS)


# experiments

SMALL = dict(m=2, n=2, N=6, stragglers=1, rows=60, a_cols=60, b_cols=60, nnz=300)


def test_experiment_reproducible():
    cfg = ExperimentConfig(schemes=("sparse", "uncoded", "polynomial"), trials=20, seed=5, **SMALL)
    t1, s1 = run_experiment(cfg, jobs=1)
    t2, s2 = run_experiment(cfg, jobs=2)
    assert trials_csv(t1) == trials_csv(t2)
    assert json.dumps(s1, sort_keys=True) == json.dumps(s2, sort_keys=True)
    assert all(s1[k]["all_correct"] for k in s1)


def test_fixed_code_mode_replays_rows():
    cfg = ExperimentConfig(trials=4, seed=2, code_mode="fixed", **SMALL)
    trials, _ = run_experiment(cfg, jobs=1)
    assert all(t.correct for t in trials)


def test_config_round_trip():
    cfg = ExperimentConfig(schemes=("sparse", "polynomial"), trials=3, dist="point:2", **SMALL)
    assert ExperimentConfig.from_json(json.dumps(cfg.to_json())) == cfg
    assert cfg.distribution().probs[1] == 1


@pytest.mark.parametrize("bad", [
    {"schemes": ["lt"]}, {"m": 0}, {"stragglers": 30}, {"slowdown": 0.5}, {"code_mode": "x"},
    {"dist": "zipf"}, {"dist": "file"}, {"a_path": "a.mtx"}, {"trials": "5"}, {"seed": 1.5},
    {"verify": 1}, {"mystery": 3},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(bad)
