"""Process-pool plumbing with schedule-independent results.

Work is always cut into the same tasks regardless of ``workers``; the pool
only decides who runs them.  Each process keeps one engine, installed from a
picklable spec by the pool initializer (or in-process when ``workers == 1``).
"""

from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from threadpoolctl import threadpool_limits

_STATE: dict = {}


def default_workers() -> int:
    env = os.environ.get("PERIODICA_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def resolve_workers(workers) -> int:
    if workers is None:
        return default_workers()
    return max(1, int(workers))


def engine_spec(kind: str, times, sigmas, periods, params=None) -> tuple:
    return (kind, np.asarray(times, float), np.asarray(sigmas, float),
            np.asarray(periods, float), None if params is None else tuple(params))


def build_engine(spec):
    from .periodogram import OracleEngine, PeriodogramEngine

    kind, times, sigmas, periods, params = spec
    if kind == "profiled":
        return PeriodogramEngine(times, sigmas, periods)
    if kind == "oracle":
        return OracleEngine(times, sigmas, periods, params)
    raise ValueError(f"unknown engine kind {kind!r}")


def _install(spec):
    threadpool_limits(1)
    _STATE["engine"] = build_engine(spec) if spec is not None else None


def current_engine():
    return _STATE["engine"]


def run_tasks(fn, tasks, workers=1, spec=None, engine=None):
    """Apply ``fn`` to every task and return results in task order.

    With one worker the tasks run in-process against ``engine`` (built from
    ``spec`` if not supplied); otherwise a process pool is used.
    """
    tasks = list(tasks)
    workers = min(resolve_workers(workers), max(1, len(tasks)))
    if workers == 1:
        saved = _STATE.get("engine")
        with threadpool_limits(1):
            _STATE["engine"] = engine if engine is not None else (
                build_engine(spec) if spec is not None else None)
            try:
                return [fn(t) for t in tasks]
            finally:
                _STATE["engine"] = saved
    ctx = multiprocessing.get_context("fork" if os.name == "posix" else "spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                             initializer=_install, initargs=(spec,)) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _block_powers_task(task):
    from .periodogram import PeriodogramEngine

    times, sigmas, values, periods = task
    eng = PeriodogramEngine(times, sigmas, periods)
    return eng.powers(values)[0], eng.singular


def grid_powers(ts, grid, workers=1):
    """Observed-data profiled powers, evaluated block by block."""
    from .periodogram import GRID_BLOCK

    p = grid.periods
    tasks = [(ts.times, ts.sigmas, ts.values, p[lo:lo + GRID_BLOCK])
             for lo in range(0, len(p), GRID_BLOCK)]
    parts = run_tasks(_block_powers_task, tasks, workers)
    return np.concatenate([a for a, _ in parts]), np.concatenate([b for _, b in parts])


def replicate_chunks(total: int, chunk: int):
    return [(lo, min(chunk, total - lo)) for lo in range(0, total, chunk)]
