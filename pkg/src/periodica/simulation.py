"""Synthetic studies: the irregular-times harmonic example, nightly observation
designs, sampling distribution of the periodogram peak, and coverage runs."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .inference import randomization_pvalue
from .parallel import run_tasks
from .periodogram import PeriodGrid, PeriodogramEngine, compute_periodogram, peak_indices
from .rng import RngKey
from .timeseries import InferenceConfig, TimeSeries

SQRT2 = math.sqrt(2.0)
DESIGNS = ("example1", "i", "ii", "iii")
MIDNIGHT_HALF_WIDTH = 0.0208  # one hour around midnight, in days
COVERAGE_SPAN = 180


@dataclass(frozen=True)
class SimulationSpec:
    design: str = "i"
    n: int = 100
    theta_star: float = SQRT2
    theta_obs: float = 1.0
    sigma: float = 1.5
    span_days: int | None = None  # None: n days, as in the density over [0, n]

    def __post_init__(self):
        design = {"night-uniform": "i", "night-sinusoid": "ii", "midnight-window": "iii"}.get(
            self.design, self.design)
        if design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}; choose from {DESIGNS}")
        object.__setattr__(self, "design", design)
        if self.n < 1 or self.theta_star <= 0 or self.sigma < 0 or self.theta_obs <= 0:
            raise ValueError("need n >= 1, theta_star > 0, theta_obs > 0, sigma >= 0")
        if self.span_days is not None and self.span_days < 1:
            raise ValueError("span_days must be >= 1")

    @property
    def span(self) -> int:
        return self.n if self.span_days is None else int(self.span_days)


def simulate_example1(n: int, key: RngKey, sigma: float = 1.0) -> TimeSeries:
    """``tᵢ = i + 0.05Uᵢ``, ``yᵢ = 1.5 cos(2πtᵢ/√2) + N(0, σ²)`` with unit sigmas.

    ``sigma`` is exposed only to allow noiseless checks; reported sigmas stay 1.
    """
    rng = key.generator()
    i = np.arange(1, n + 1)
    t = i + 0.05 * rng.uniform(-1.0, 1.0, n)
    y = 1.5 * np.cos(2 * np.pi * t / SQRT2) + sigma * rng.normal(size=n)
    return TimeSeries(t, y, np.ones(n))


def night_phase(design: str, u: np.ndarray) -> np.ndarray:
    """Map uniforms on [0, 1) to within-day phases drawn from the design density."""
    if design == "i":
        return 0.5 + 0.5 * u
    if design == "ii":
        # density -π sin(2πt) on [0.5, 1] has CDF (1 + cos 2πt) / 2
        return 1.0 - np.arccos(2.0 * u - 1.0) / (2.0 * np.pi)
    if design == "iii":
        return 0.75 - MIDNIGHT_HALF_WIDTH + 2 * MIDNIGHT_HALF_WIDTH * u
    raise ValueError(f"design {design!r} has no nightly phase density")


def sample_observation_times(spec: SimulationSpec, key: RngKey) -> np.ndarray:
    """Day index uniform over the span, phase within the day from the design density."""
    if spec.design == "example1":
        return np.arange(1, spec.n + 1) + 0.05 * key.generator().uniform(-1.0, 1.0, spec.n)
    for attempt in range(100):
        rng = key.child(f"redraw{attempt}").generator() if attempt else key.generator()
        day = rng.integers(0, spec.span, size=spec.n)
        t = np.sort((day + night_phase(spec.design, rng.random(spec.n))) * spec.theta_obs)
        if spec.n == 1 or np.min(np.diff(t)) > 0:
            return t
    raise RuntimeError("could not draw distinct observation times")


def simulate_harmonic_data(times, theta_star: float, sigma: float, key: RngKey) -> TimeSeries:
    """``yᵢ = 1 - cos(2πtᵢ/θ*) + N(0, σ²)``; sigmas are ``σ`` (1 when ``σ = 0``)."""
    t = np.asarray(times, dtype=float)
    y = 1.0 - np.cos(2 * np.pi * t / theta_star)
    if sigma > 0:
        y = y + sigma * key.generator().normal(size=len(t))
    return TimeSeries(t, y, np.full(len(t), sigma if sigma > 0 else 1.0))


def simulate(spec: SimulationSpec, key: RngKey) -> TimeSeries:
    if spec.design == "example1":
        return simulate_example1(spec.n, key, sigma=spec.sigma)
    times = sample_observation_times(spec, key.child("times"))
    return simulate_harmonic_data(times, spec.theta_star, spec.sigma, key.child("values"))


def log_grid_through(theta: float, theta_min: float, theta_max: float, count: int) -> PeriodGrid:
    """Log-uniform grid of about ``count`` points on ``[theta_min, theta_max]`` that
    contains ``theta`` exactly."""
    step = math.log(theta_max / theta_min) / (count - 1)
    lo = math.ceil(math.log(theta_min / theta) / step - 1e-9)
    hi = math.floor(math.log(theta_max / theta) / step + 1e-9)
    p = theta * np.exp(step * np.arange(lo, hi + 1))
    p[-lo] = theta
    return PeriodGrid(p, "log-uniform")


def default_grid(spec: SimulationSpec, resolution: float = 0.2,
                 theta_min: float = 0.25, theta_max: float = 20.0) -> PeriodGrid:
    """Grid through ``θ*`` with log spacing ``resolution / span``.

    A peak at period θ is about ``θ / span`` wide in log period, so the
    default resolves peaks down to θ ≈ 0.3 with a few points each.
    """
    span = spec.n if spec.design == "example1" else spec.span * spec.theta_obs
    count = int(math.log(theta_max / theta_min) * span / resolution) + 1
    return log_grid_through(spec.theta_star, theta_min, theta_max, max(count, 50))


def _peak_task(task):
    spec, grid, key = task
    ts = simulate(spec, key)
    power = PeriodogramEngine.for_series(ts, grid).powers(ts.values)[0]
    return float(grid.periods[int(np.argmax(power))])


def peak_sampling_distribution(spec: SimulationSpec, reps: int, grid: PeriodGrid | None,
                               key: RngKey, workers: int = 1) -> np.ndarray:
    """Periodogram argmax of ``reps`` independent datasets (replicate ``r`` uses
    ``key.stream(replicate_index=r)``)."""
    grid = grid or default_grid(spec)
    tasks = [(spec, grid, key.stream(replicate_index=r)) for r in range(reps)]
    return np.array(run_tasks(_peak_task, tasks, workers))


def histogram(peaks, decimals: int = 2) -> dict:
    """Relative frequency of argmax periods rounded to ``decimals``."""
    c = Counter(np.round(np.asarray(peaks), decimals).tolist())
    total = sum(c.values())
    return {k: v / total for k, v in sorted(c.items())}


def modes(peaks, width: float = 0.05, min_mass: float = 0.05) -> list[tuple[float, float]]:
    """Clusters of argmax values (gaps > ``width`` separate clusters) holding at
    least ``min_mass`` of the draws, as ``(centre, mass)`` pairs."""
    v = np.sort(np.asarray(peaks, dtype=float))
    if len(v) == 0:
        return []
    cuts = np.flatnonzero(np.diff(v) > width) + 1
    out = []
    for part in np.split(v, cuts):
        mass = len(part) / len(v)
        if mass >= min_mass:
            out.append((float(np.median(part)), mass))
    return out


@dataclass
class CoverageResult:
    covered: int
    reps: int
    alpha: float
    ci: tuple = field(default=(0.0, 1.0))
    not_candidate: int = 0

    @property
    def fraction(self) -> float:
        return self.covered / self.reps

    def to_dict(self) -> dict:
        return {"covered": self.covered, "reps": self.reps, "coverage": self.fraction,
                "alpha": self.alpha, "ci95": list(self.ci), "not_candidate": self.not_candidate}


def _coverage_task(task):
    spec, grid, cfg, key, candidates = task
    ts = simulate(spec, key.child("data"))
    i = grid.nearest_index(spec.theta_star)
    if candidates == "peaks":
        pg = compute_periodogram(ts, grid)
        if i not in peak_indices(pg.power, cfg.peak_filter_gamma):
            return False, True
    out = randomization_pvalue(ts, grid, float(grid.periods[i]), cfg,
                               key.child("signs").stream(theta_index=i))
    return out.p_value > cfg.alpha, False


def coverage_experiment(spec: SimulationSpec, reps: int, cfg: InferenceConfig, key: RngKey,
                        grid: PeriodGrid | None = None, candidates: str = "all",
                        workers: int = 1) -> CoverageResult:
    """Fraction of datasets whose confidence set contains the grid point nearest ``θ*``.

    Membership of one period depends only on its own test (and, with
    ``candidates="peaks"``, on being a qualifying peak), so only that period
    is tested.  The peak filter makes coverage hinge on whether the local
    maximum lands exactly on that grid point; ``not_candidate`` counts those
    misses.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if spec.span_days is None and spec.design != "example1":
        spec = SimulationSpec(spec.design, spec.n, spec.theta_star, spec.theta_obs,
                              spec.sigma, COVERAGE_SPAN)
    grid = grid or default_grid(spec)
    tasks = [(spec, grid, cfg, key.stream(replicate_index=r), candidates) for r in range(reps)]
    res = run_tasks(_coverage_task, tasks, workers)
    covered = sum(1 for ok, _ in res if ok)
    ci = stats.binomtest(covered, reps).proportion_ci(0.95, method="exact")
    return CoverageResult(covered, reps, cfg.alpha, (float(ci.low), float(ci.high)),
                          sum(1 for _, miss in res if miss))
