"""Choosing observation schedules that identify a suspected period.

Assuming the periodogram peak ``θ̂`` is the true period, synthetic data are
generated under alternative schedules, a confidence set is computed for
each synthetic dataset, and the schedule of least complexity whose sets
never contain periods farther than ``ε`` from ``θ̂`` is selected.

Two schedule families are supported: ``jitter`` perturbs every existing time
by ``δ·U[-1, 1]`` (complexity ``δ``), ``augment`` appends ``extra_n`` nightly
observations after the last time (complexity ``extra_n``).
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import harmonic
from .errors import BadTolerance, InputError, PeriodicaError
from .inference import ConfidenceSet, confidence_set
from .parallel import run_tasks
from .periodogram import PeriodGrid
from .rng import RngKey
from .timeseries import InferenceConfig, TimeSeries

COLLISION_TOL = 1e-9
MAX_REDRAWS = 100

DEFAULT_DELTAS = tuple(round(0.02 * k, 2) for k in range(16))
DEFAULT_EXTRA_N = tuple(range(0, 151, 5))
DEFAULT_EPS = 0.1
DEFAULT_R_DESIGN = 100


@dataclass(frozen=True)
class ObservationDesign:
    kind: str  # "jitter" | "augment"
    delta: float = 0.0
    extra_n: int = 0
    window_days: int = 90
    micro_jitter: float = 0.01

    def __post_init__(self):
        if self.kind not in ("jitter", "augment"):
            raise InputError(f"design kind must be 'jitter' or 'augment', got {self.kind!r}")
        if self.delta < 0 or self.extra_n < 0 or self.micro_jitter < 0 or self.window_days < 1:
            raise InputError("design parameters must be non-negative")
        if self.kind == "jitter" and self.extra_n:
            raise InputError("a jitter design cannot add observations")
        if self.kind == "augment" and self.delta:
            raise InputError("an augment design cannot jitter existing times")

    @property
    def complexity(self) -> float:
        return self.delta if self.kind == "jitter" else self.extra_n

    @property
    def parameter(self) -> str:
        return f"delta={self.delta:g}" if self.kind == "jitter" else f"extra_n={self.extra_n}"

    @classmethod
    def jitter(cls, delta: float) -> ObservationDesign:
        return cls("jitter", delta=float(delta))

    @classmethod
    def augment(cls, extra_n: int, window_days: int = 90, micro_jitter: float = 0.01) -> ObservationDesign:
        return cls("augment", extra_n=int(extra_n), window_days=window_days, micro_jitter=micro_jitter)


def default_design_space(kind: str) -> list[ObservationDesign]:
    if kind == "jitter":
        return [ObservationDesign.jitter(d) for d in DEFAULT_DELTAS]
    if kind == "augment":
        return [ObservationDesign.augment(k) for k in DEFAULT_EXTRA_N]
    raise InputError(f"unknown design kind {kind!r}")


def _has_collision(t) -> bool:
    return len(t) > 1 and np.min(np.diff(np.sort(t))) <= COLLISION_TOL


def _regenerate(times, sigmas, theta_star, psi_hat, rng, noise):
    order = np.argsort(times, kind="stable")
    t, s = times[order], sigmas[order]
    y = harmonic.predict(psi_hat, theta_star, t)
    if noise:
        y = y + noise * rng.normal(0.0, s)
    return TimeSeries(t, y, s)


def synth_jitter(ts: TimeSeries, delta: float, theta_star: float, psi_hat, key: RngKey,
                 noise: float = 1.0) -> TimeSeries:
    """Times ``t + δU`` with fresh values from the fitted curve plus ``N(0, σᵢ²)``.

    ``noise`` scales the Gaussian errors (0 gives the noiseless curve).
    A draw whose jittered times collide is discarded and redrawn.
    """
    if delta < 0:
        raise InputError("delta must be >= 0")
    for attempt in range(MAX_REDRAWS):
        rng = key.child(f"redraw{attempt}").generator() if attempt else key.generator()
        t = ts.times + delta * rng.uniform(-1.0, 1.0, ts.n)
        if not _has_collision(t):
            return _regenerate(t, np.asarray(ts.sigmas), theta_star, psi_hat, rng, noise)
    raise PeriodicaError("could not draw collision-free jittered times")


def synth_augment(ts: TimeSeries, extra_n: int, theta_star: float, psi_hat, key: RngKey,
                  window_days: int = 90, micro_jitter: float = 0.01,
                  noise: float = 1.0) -> TimeSeries:
    """Original times plus ``extra_n`` new ones at ``max(t) + Unif{1..window} + micro·U[-1,1]``.

    New points get the median of the existing sigmas; all values are
    regenerated from the fitted curve.
    """
    if extra_n < 0:
        raise InputError("extra_n must be >= 0")
    sig_new = float(np.median(ts.sigmas))
    for attempt in range(MAX_REDRAWS):
        rng = key.child(f"redraw{attempt}").generator() if attempt else key.generator()
        days = rng.integers(1, window_days + 1, size=extra_n)
        new = ts.times[-1] + days + micro_jitter * rng.uniform(-1.0, 1.0, extra_n)
        t = np.concatenate([ts.times, new])
        if not _has_collision(t):
            s = np.concatenate([ts.sigmas, np.full(extra_n, sig_new)])
            return _regenerate(t, s, theta_star, psi_hat, rng, noise)
    raise PeriodicaError("could not draw collision-free augmented times")


def identification_count(cs, theta_star: float, tol_eps: float,
                         theta_nuisance: float | None = None) -> int:
    """Number of accepted periods farther than ``tol_eps`` from ``theta_star``."""
    if not tol_eps > 0:
        raise BadTolerance(f"tolerance must be > 0, got {tol_eps}")
    if theta_nuisance is not None and tol_eps >= abs(theta_star - theta_nuisance):
        raise BadTolerance("tolerance must be smaller than the distance to the nuisance period")
    accepted = cs.accepted if isinstance(cs, ConfidenceSet) else cs
    return sum(1 for th in accepted if abs(th - theta_star) > tol_eps)


@dataclass
class DesignRow:
    design: ObservationDesign
    failures: list
    errors: list = field(default_factory=list)

    @property
    def complexity(self) -> float:
        return self.design.complexity

    @property
    def total(self) -> int:
        return int(sum(self.failures))

    @property
    def identified(self) -> bool:
        return self.total == 0 and not self.errors

    def mean_failures(self) -> float:
        return float(np.mean(self.failures)) if self.failures else float("nan")

    def to_dict(self) -> dict:
        return {
            **asdict(self.design),
            "parameter": self.design.parameter,
            "complexity": self.complexity,
            "failures": [int(f) for f in self.failures],
            "total": self.total,
            "errors": self.errors,
        }


@dataclass
class DesignReport:
    theta_hat: float
    tol_eps: float
    alpha: float
    r_design: int
    rows: list
    params: tuple = ()

    def _best(self, rows):
        ok = [r for r in rows if r.identified]
        return min(ok, key=lambda r: r.complexity).design if ok else None

    @property
    def chosen(self) -> ObservationDesign | None:
        """Least-complex design with zero failures over all replicates (first on ties)."""
        return self._best(self.rows)

    def chosen_by_kind(self) -> dict:
        return {k: self._best([r for r in self.rows if r.design.kind == k])
                for k in ("jitter", "augment") if any(r.design.kind == k for r in self.rows)}

    def to_dict(self) -> dict:
        chosen = self.chosen
        return {
            "theta_hat": self.theta_hat,
            "params": list(self.params),
            "tol_eps": self.tol_eps,
            "alpha": self.alpha,
            "r_design": self.r_design,
            "note": "zero failures is a sample statement over r_design synthetic datasets",
            "rows": [r.to_dict() for r in self.rows],
            "chosen": None if chosen is None else asdict(chosen),
            "chosen_by_kind": {k: (None if d is None else asdict(d))
                               for k, d in self.chosen_by_kind().items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "parameter", "complexity", "total_failures", "identified", "chosen"])
        chosen = self.chosen_by_kind()
        for r in self.rows:
            w.writerow([r.design.kind, r.design.parameter, repr(r.complexity), r.total,
                        "yes" if r.identified else "no",
                        "yes" if chosen.get(r.design.kind) == r.design else "no"])
        return buf.getvalue()


def replicate_key(key: RngKey, design_index: int, replicate: int) -> RngKey:
    """Stream for synthetic dataset ``replicate`` under design ``design_index``."""
    return key.stream(theta_index=design_index, replicate_index=replicate)


def synthesize(ts, design: ObservationDesign, theta_star, psi_hat, key: RngKey) -> TimeSeries:
    if design.kind == "jitter":
        return synth_jitter(ts, design.delta, theta_star, psi_hat, key)
    return synth_augment(ts, design.extra_n, theta_star, psi_hat, key,
                         window_days=design.window_days, micro_jitter=design.micro_jitter)


def _replicate_task(task):
    ts, design, theta_hat, psi_hat, grid, cfg, tol_eps, key, candidates = task
    try:
        syn = synthesize(ts, design, theta_hat, psi_hat, key.child("data"))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cs = confidence_set(syn, grid, cfg, key.child("signs"), candidates=candidates, workers=1)
        return identification_count(cs, theta_hat, tol_eps), None
    except PeriodicaError as err:
        return None, f"{type(err).__name__}: {err}"


def optimal_design(ts: TimeSeries, theta_hat: float, design_space, cfg: InferenceConfig,
                   r_design: int, tol_eps: float, key: RngKey, grid: PeriodGrid,
                   candidates: str = "peaks", workers: int = 1,
                   theta_nuisance: float | None = None) -> DesignReport:
    """Evaluate every design on ``r_design`` synthetic datasets and pick the simplest
    one with zero identification failures.

    Replicate ``r`` of design ``d`` uses ``replicate_key(key, d, r)``; a
    failing replicate is recorded in the row's ``errors`` and disqualifies
    the design without stopping the sweep.
    """
    design_space = list(design_space)
    if not design_space:
        raise InputError("design space is empty")
    if r_design < 1:
        raise InputError("r_design must be >= 1")
    identification_count([], theta_hat, tol_eps, theta_nuisance)  # validates the tolerance
    psi_hat = harmonic.fit_harmonic(ts, theta_hat).params
    tasks = [(ts, d, theta_hat, psi_hat, grid, cfg, tol_eps, replicate_key(key, i, r), candidates)
             for i, d in enumerate(design_space) for r in range(r_design)]
    results = run_tasks(_replicate_task, tasks, workers)
    rows = []
    for i, d in enumerate(design_space):
        chunk = results[i * r_design:(i + 1) * r_design]
        rows.append(DesignRow(d, [c for c, _ in chunk if c is not None],
                              [e for _, e in chunk if e is not None]))
    return DesignReport(float(theta_hat), float(tol_eps), cfg.alpha, int(r_design), rows,
                        params=tuple(psi_hat))
