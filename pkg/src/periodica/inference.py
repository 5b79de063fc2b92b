"""Sign-flip randomization tests for a hypothesised period and their inversion
into confidence sets.

For a candidate period ``θ₀`` the harmonic model is fitted at ``θ₀``, the
residual signs are flipped at random, and the statistic
``max_θ A(θ) - A(θ₀)`` of each synthetic series is compared with the
observed one.  ``θ₀`` is always part of the max scan, so the statistic is
non-negative and equals zero exactly at the observed periodogram maximum.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import harmonic
from .errors import DegenerateBaseline, LengthMismatch, SingularDesign, TooLarge
from .harmonic import FitResult, HarmonicParams
from .parallel import build_engine, current_engine, engine_spec, replicate_chunks, resolve_workers, run_tasks
from .periodogram import PeriodGrid, PeriodogramEngine, compute_periodogram, peak_indices
from .rng import RngKey, SignPattern, sign_matrix
from .timeseries import InferenceConfig, TimeSeries

# absolute slack on the power scale when counting s(Y_i) >= s_obs; absorbs
# round-off so that exact ties (e.g. zero residuals) count as exceedances
TIE_TOL = 1e-12
MAX_ENUMERATION_N = 16


@dataclass
class TestOutcome:
    theta0: float
    s_obs: float
    p_value: float
    exceedances: int
    replicates: int
    estimator: str
    status: str = "ok"  # ok | untestable | not-tested
    mode: str = "parametric"
    message: str = ""
    details: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    @property
    def testable(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("s_obs", "p_value"):
            if d[k] is not None and not np.isfinite(d[k]):
                d[k] = None
        return d


@dataclass
class ConfidenceSet:
    alpha: float
    entries: list
    candidates: str = "all"
    grid_size: int = 0
    argmax_theta: float | None = None

    def accepted_at(self, alpha: float) -> list[float]:
        """Tested periods with p-value strictly above ``alpha``."""
        return [e.theta0 for e in self.entries if e.testable and e.p_value > alpha]

    @property
    def accepted(self) -> list[float]:
        return self.accepted_at(self.alpha)

    @property
    def untestable(self) -> list[float]:
        return [e.theta0 for e in self.entries if e.status == "untestable"]

    def to_csv(self) -> str:
        rows = ["theta0,pvalue,in_95,in_99"]
        for e in self.entries:
            if not e.testable:
                rows.append(f"{e.theta0!r},,no,no")
                continue
            in95 = "yes" if e.p_value > 0.05 else "no"
            in99 = "yes" if e.p_value > 0.01 else "no"
            rows.append(f"{e.theta0!r},{e.p_value!r},{in95},{in99}")
        return "\n".join(rows) + "\n"

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "candidates": self.candidates,
            "grid_size": self.grid_size,
            "argmax_theta": self.argmax_theta,
            "not_tested": self.grid_size - len(self.entries),
            "accepted": self.accepted,
            "untestable": self.untestable,
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# -- building blocks ---------------------------------------------------------

def _engine_for(ts: TimeSeries, grid: PeriodGrid) -> PeriodogramEngine:
    return PeriodogramEngine.for_series(ts, grid)


def _theta_slot(engine, grid: PeriodGrid, theta0: float):
    """``(theta_index, extra)`` locating ``θ₀`` for ``engine.statistic``."""
    idx = grid.index_of(theta0)
    if idx is not None:
        return idx, None
    if hasattr(engine, "extra_basis"):
        return None, engine.extra_basis(theta0)
    return None, engine.extra_block(theta0)


def test_statistic(ts: TimeSeries, grid: PeriodGrid, theta0: float, engine=None) -> float:
    """``max_θ Â(θ) - Â(θ₀)`` over the grid (with ``θ₀`` added to the scan)."""
    if harmonic.baseline_loss(ts) <= 0:
        raise DegenerateBaseline("all values are equal; statistic undefined")
    engine = engine or _engine_for(ts, grid)
    idx, extra = _theta_slot(engine, grid, theta0)
    return float(engine.statistic(ts.values, idx, extra)[0])


test_statistic.__test__ = False


def synthesize_null_sample(ts: TimeSeries, theta0: float, fit: FitResult,
                           pattern: SignPattern) -> TimeSeries:
    """``Ŷ₀ + g·(Y - Ŷ₀)`` with ``Ŷ₀`` the fitted curve at ``θ₀``."""
    if len(pattern) != ts.n:
        raise LengthMismatch(f"pattern length {len(pattern)} != series length {ts.n}")
    fitted = harmonic.predict(fit.params, theta0, ts.times)
    return ts.with_values(fitted + pattern.signs * (ts.values - fitted))


def _count_task(task):
    theta_index, extra, fitted, resid, s_obs, key, start, count = task
    engine = current_engine()
    signs = sign_matrix(len(resid), key, start, count)
    s = engine.statistic(fitted + signs * resid, theta_index, extra)
    return int(np.count_nonzero(s >= s_obs - TIE_TOL))


def _monte_carlo(engine, spec, jobs, replicates, workers):
    """Exceedance counts for several candidates, split into fixed chunks."""
    chunk = engine.chunk_rows
    tasks, owner = [], []
    for j, (theta_index, extra, fitted, resid, s_obs, key) in enumerate(jobs):
        for start, count in replicate_chunks(replicates, chunk):
            tasks.append((theta_index, extra, fitted, resid, s_obs, key, start, count))
            owner.append(j)
    counts = run_tasks(_count_task, tasks, workers, spec=spec, engine=engine if workers == 1 else None)
    totals = [0] * len(jobs)
    for j, c in zip(owner, counts):
        totals[j] += c
    return totals


# -- tests -------------------------------------------------------------------

def full_null_pvalue(ts: TimeSeries, grid: PeriodGrid, theta0: float, psi0,
                     cfg: InferenceConfig, key: RngKey, workers: int = 1) -> TestOutcome:
    """Test ``θ* = θ₀, ψ* = ψ₀`` with oracle powers at the fixed ``ψ₀``."""
    if harmonic.baseline_loss(ts) <= 0:
        raise DegenerateBaseline("all values are equal; statistic undefined")
    psi0 = HarmonicParams(*psi0)
    workers = resolve_workers(workers)
    spec = engine_spec("oracle", ts.times, ts.sigmas, grid.periods, psi0)
    engine = build_engine(spec)
    idx, extra = _theta_slot(engine, grid, theta0)
    s_obs = float(engine.statistic(ts.values, idx, extra)[0])
    fitted = harmonic.predict(psi0, theta0, ts.times)
    resid = ts.values - fitted
    job = (idx, extra, fitted, resid, s_obs, key)
    (exceed,) = _monte_carlo(engine, spec, [job], cfg.replicates, workers)
    return TestOutcome(float(theta0), s_obs, cfg.pvalue(exceed), exceed, cfg.replicates,
                       cfg.pvalue_estimator, mode="full-null")


def _fit_job(ts, grid, engine, theta0, key, s_obs=None):
    fit = harmonic.fit_harmonic(ts, theta0)
    idx, extra = _theta_slot(engine, grid, theta0)
    if s_obs is None:
        s_obs = float(engine.statistic(ts.values, idx, extra)[0])
    fitted = harmonic.predict(fit.params, theta0, ts.times)
    resid = ts.values - fitted
    return (idx, extra, fitted, resid, s_obs, key), fit


def _untestable(theta0, cfg, err) -> TestOutcome:
    return TestOutcome(float(theta0), float("nan"), float("nan"), 0, 0, cfg.pvalue_estimator,
                       status="untestable", message=str(err))


def randomization_pvalue(ts: TimeSeries, grid: PeriodGrid, theta0: float,
                         cfg: InferenceConfig, key: RngKey, workers: int = 1,
                         engine: PeriodogramEngine | None = None) -> TestOutcome:
    """Plug-in randomization p-value for ``θ* = θ₀``.

    Raises :class:`SingularDesign` if the model cannot be fitted at ``θ₀``.
    """
    if harmonic.baseline_loss(ts) <= 0:
        raise DegenerateBaseline("all values are equal; statistic undefined")
    workers = resolve_workers(workers)
    engine = engine or _engine_for(ts, grid)
    spec = engine_spec("profiled", ts.times, ts.sigmas, grid.periods)
    job, fit = _fit_job(ts, grid, engine, theta0, key)
    (exceed,) = _monte_carlo(engine, spec, [job], cfg.replicates, workers)
    return TestOutcome(float(theta0), job[4], cfg.pvalue(exceed), exceed, cfg.replicates,
                       cfg.pvalue_estimator, details={"params": list(fit.params)})


def _all_sign_patterns(n: int) -> np.ndarray:
    codes = np.arange(2**n, dtype=np.uint32)[:, None]
    bits = (codes >> np.arange(n, dtype=np.uint32)) & 1
    return 1.0 - 2.0 * bits


def exact_pvalue_enumeration(ts: TimeSeries, grid: PeriodGrid, theta0: float,
                             psi0=None) -> Fraction:
    """Exact randomization p-value over all ``2ⁿ`` sign patterns (identity included).

    With ``psi0`` the full-null statistic at fixed nuisance parameters is used,
    otherwise the plug-in fit at ``θ₀``.
    """
    if ts.n > MAX_ENUMERATION_N:
        raise TooLarge(f"exact enumeration limited to n <= {MAX_ENUMERATION_N}, got {ts.n}")
    if harmonic.baseline_loss(ts) <= 0:
        raise DegenerateBaseline("all values are equal; statistic undefined")
    if psi0 is None:
        engine = _engine_for(ts, grid)
        params = harmonic.fit_harmonic(ts, theta0).params
    else:
        from .periodogram import OracleEngine

        params = HarmonicParams(*psi0)
        engine = OracleEngine(ts.times, ts.sigmas, grid.periods, params)
    idx, extra = _theta_slot(engine, grid, theta0)
    s_obs = engine.statistic(ts.values, idx, extra)[0]
    fitted = harmonic.predict(params, theta0, ts.times)
    resid = ts.values - fitted
    patterns = _all_sign_patterns(ts.n)
    s = engine.statistic(fitted + patterns * resid, idx, extra)
    return Fraction(int(np.count_nonzero(s >= s_obs - TIE_TOL)), len(patterns))


def confidence_set(ts: TimeSeries, grid: PeriodGrid, cfg: InferenceConfig, key: RngKey,
                   candidates: str = "peaks", workers: int = 1,
                   periodogram=None) -> ConfidenceSet:
    """Invert the randomization test over candidate periods.

    ``candidates="peaks"`` only tests periodogram peaks at least
    ``cfg.peak_filter_gamma`` times the highest one; other grid points are
    reported as not tested and excluded.  Each candidate uses the RNG stream
    ``key.stream(theta_index=grid index)``.
    """
    if harmonic.baseline_loss(ts) <= 0:
        raise DegenerateBaseline("all values are equal; confidence set undefined")
    if candidates not in ("peaks", "all"):
        raise ValueError(f"candidates must be 'peaks' or 'all', got {candidates!r}")
    workers = resolve_workers(workers)
    engine = _engine_for(ts, grid)
    pg = periodogram if periodogram is not None else compute_periodogram(ts, grid)
    power = np.asarray(pg.power)
    if candidates == "peaks":
        idxs = peak_indices(power, cfg.peak_filter_gamma)
    else:
        idxs = list(range(len(grid)))
    top = float(power.max())
    spec = engine_spec("profiled", ts.times, ts.sigmas, grid.periods)

    jobs, slots, entries = [], [], [None] * len(idxs)
    for k, i in enumerate(idxs):
        theta0 = float(grid.periods[i])
        if pg.singular[i]:
            entries[k] = _untestable(theta0, cfg, "harmonic design singular at this period")
            continue
        try:
            job, fit = _fit_job(ts, grid, engine, theta0, key.stream(theta_index=i),
                                s_obs=top - float(power[i]))
        except SingularDesign as err:
            entries[k] = _untestable(theta0, cfg, err)
            continue
        jobs.append(job)
        slots.append((k, fit))
    counts = _monte_carlo(engine, spec, jobs, cfg.replicates, workers) if jobs else []
    for (k, fit), job, exceed in zip(slots, jobs, counts):
        entries[k] = TestOutcome(float(grid.periods[idxs[k]]), job[4], cfg.pvalue(exceed), exceed,
                                 cfg.replicates, cfg.pvalue_estimator,
                                 details={"params": list(fit.params)})
    for e in entries:
        if e.status == "untestable":
            warnings.warn(f"theta0={e.theta0}: untestable ({e.message}); excluded from the set",
                          stacklevel=2)
    return ConfidenceSet(alpha=cfg.alpha, entries=entries, candidates=candidates,
                         grid_size=len(grid), argmax_theta=float(grid.periods[int(np.argmax(power))]))
