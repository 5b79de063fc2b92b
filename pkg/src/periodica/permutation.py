"""Nonparametric periodicity test by permuting values within mod-θ phase classes.

Times are mapped to an integer lattice of spacing ``quantum`` and grouped by
their residue modulo the lattice period, which makes "equal phase" an exact
equivalence relation.  Under the null the values inside a class are
exchangeable, so uniformly permuting them generates the null distribution of
the usual ``max_θ Â(θ) - Â(θ₀)`` statistic.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import harmonic
from .errors import BadTolerance, DegenerateBaseline, NonPositivePeriod, TooLarge
from .inference import TIE_TOL, TestOutcome, _theta_slot
from .parallel import current_engine, engine_spec, replicate_chunks, resolve_workers, run_tasks
from .periodogram import PeriodGrid, PeriodogramEngine
from .rng import RngKey, uniform_matrix
from .timeseries import InferenceConfig, TimeSeries

DEFAULT_QUANTUM = 1e-6  # days
MAX_GROUP_ORDER = 200_000


@dataclass(frozen=True)
class ModThetaPartition:
    theta: float
    quantum: float
    classes: tuple  # tuples of 0-based indices, ordered by smallest member

    @property
    def n(self) -> int:
        return sum(len(c) for c in self.classes)

    @property
    def labels(self) -> np.ndarray:
        out = np.empty(self.n, dtype=int)
        for k, c in enumerate(self.classes):
            out[list(c)] = k
        return out

    @property
    def nontrivial(self) -> list:
        return [c for c in self.classes if len(c) > 1]

    def size_histogram(self) -> dict:
        return dict(sorted(Counter(len(c) for c in self.classes).items()))

    def group_order(self) -> int:
        return math.prod(math.factorial(len(c)) for c in self.classes)

    def summary(self) -> dict:
        return {
            "theta": self.theta,
            "quantum": self.quantum,
            "classes": len(self.classes),
            "class_size_histogram": {str(k): v for k, v in self.size_histogram().items()},
            "group_order": self.group_order(),
        }


def equivalence_classes(times, theta: float, quantum: float = DEFAULT_QUANTUM) -> ModThetaPartition:
    """Partition indices by phase modulo ``theta`` on a lattice of spacing ``quantum``.

    Times and the period are rounded to integer multiples of ``quantum`` and
    compared by integer residue, so the relation is transitive by
    construction.  ``quantum=0`` compares the floating-point phases exactly.
    """
    if not theta > 0:
        raise NonPositivePeriod(f"period must be > 0, got {theta}")
    if not (0 <= quantum < theta / 2):
        raise BadTolerance(f"quantum must satisfy 0 <= quantum < theta/2, got {quantum}")
    t = np.asarray(times, dtype=float)
    if quantum == 0:
        keys = [float(v) for v in np.mod(t, theta)]
    else:
        ticks = np.rint(t / quantum)
        period = round(theta / quantum)
        if np.max(np.abs(ticks), initial=0) > 2**62:
            raise BadTolerance("quantum too small for the time range")
        keys = [int(k) % period for k in ticks.astype(np.int64)]
    groups: dict = {}
    for i, k in enumerate(keys):
        groups.setdefault(k, []).append(i)
    classes = tuple(sorted((tuple(g) for g in groups.values()), key=lambda c: c[0]))
    return ModThetaPartition(theta=float(theta), quantum=float(quantum), classes=classes)


def class_permutations(part: ModThetaPartition, key: RngKey, start: int, count: int) -> np.ndarray:
    """Rows ``start .. start+count-1`` of uniform class-preserving permutations.

    Row ``π`` acts on values as ``y'[i] = y[π[i]]``.  Each class is shuffled
    by ranking independent uniforms drawn for its members.
    """
    n = part.n
    perms = np.tile(np.arange(n), (count, 1))
    if not part.nontrivial:
        return perms
    u = uniform_matrix(n, key, start, count)
    for c in part.nontrivial:
        idx = np.asarray(c)
        order = np.argsort(u[:, idx], axis=1, kind="stable")
        perms[:, idx] = idx[order]
    return perms


def sample_class_permutation(part: ModThetaPartition, key: RngKey) -> np.ndarray:
    return class_permutations(part, key, key.replicate_index, 1)[0]


def _perm_task(task):
    theta_index, extra, values, classes, s_obs, key, start, count = task
    part = ModThetaPartition(0.0, 0.0, classes)
    perms = class_permutations(part, key, start, count)
    s = current_engine().statistic(values[perms], theta_index, extra)
    return int(np.count_nonzero(s >= s_obs - TIE_TOL))


def _check_sigmas(ts: TimeSeries, part: ModThetaPartition):
    for c in part.nontrivial:
        if np.ptp(ts.sigmas[list(c)]) > 0:
            warnings.warn("sigmas differ within a phase class; exchangeability is doubtful",
                          stacklevel=3)
            return


def np_test(ts: TimeSeries, grid: PeriodGrid, theta0: float, quantum: float,
            cfg: InferenceConfig, key: RngKey, workers: int = 1) -> TestOutcome:
    """Monte Carlo p-value of the within-class permutation test of period ``θ₀``."""
    if harmonic.baseline_loss(ts) <= 0:
        raise DegenerateBaseline("all values are equal; statistic undefined")
    part = equivalence_classes(ts.times, theta0, quantum)
    _check_sigmas(ts, part)
    engine = PeriodogramEngine.for_series(ts, grid)
    idx, extra = _theta_slot(engine, grid, theta0)
    s_obs = float(engine.statistic(ts.values, idx, extra)[0])
    if not part.nontrivial:
        # only the identity permutation exists: every replicate reproduces s_obs
        exceed = cfg.replicates
    else:
        spec = engine_spec("profiled", ts.times, ts.sigmas, grid.periods)
        workers = resolve_workers(workers)
        tasks = [(idx, extra, np.asarray(ts.values), part.classes, s_obs, key, start, count)
                 for start, count in replicate_chunks(cfg.replicates, engine.chunk_rows)]
        exceed = sum(run_tasks(_perm_task, tasks, workers, spec=spec,
                               engine=engine if workers == 1 else None))
    return TestOutcome(float(theta0), s_obs, cfg.pvalue(exceed), exceed, cfg.replicates,
                       cfg.pvalue_estimator, mode="nonparametric",
                       details={"partition": part.summary()})


def exact_np_pvalue(ts: TimeSeries, grid: PeriodGrid, theta0: float,
                    quantum: float = DEFAULT_QUANTUM) -> Fraction:
    """Exact p-value by enumerating every class-preserving permutation."""
    part = equivalence_classes(ts.times, theta0, quantum)
    order = part.group_order()
    if order > MAX_GROUP_ORDER:
        raise TooLarge(f"permutation group has {order} elements (limit {MAX_GROUP_ORDER})")
    engine = PeriodogramEngine.for_series(ts, grid)
    idx, extra = _theta_slot(engine, grid, theta0)
    s_obs = engine.statistic(ts.values, idx, extra)[0]
    perms = []
    base = np.arange(ts.n)
    for combo in itertools.product(*(itertools.permutations(c) for c in part.nontrivial)):
        p = base.copy()
        for c, img in zip(part.nontrivial, combo):
            p[list(c)] = img
        perms.append(p)
    if not perms:
        perms = [base]
    s = engine.statistic(ts.values[np.array(perms)], idx, extra)
    return Fraction(int(np.count_nonzero(s >= s_obs - TIE_TOL)), len(perms))
