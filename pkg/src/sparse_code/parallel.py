"""Ordered process-pool map, capped by ``SPARSE_CODE_THREADS``."""
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

THREADS_ENV = "SPARSE_CODE_THREADS"


def effective_jobs(jobs: int | None = None) -> int:
    jobs = 1 if jobs is None else int(jobs)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        jobs = min(jobs, max(int(cap), 1))
    return max(jobs, 1)


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for trial ``index`` of an experiment seeded by ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def pmap(fn, items, jobs: int | None = None) -> list:
    """``[fn(x) for x in items]``, optionally across processes; order preserved."""
    items = list(items)
    n = effective_jobs(jobs)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
