"""Generalized (weighted least-squares) periodograms over a grid of trial periods.

The hot path is :class:`PeriodogramEngine`, which precomputes an orthonormal
basis of the weighted harmonic design at every trial period.  The profiled
loss of any value vector ``y`` is then ``|y_w|² - |Qᵀ y_w|²``, so a batch of
synthetic series costs one matrix product per grid block.

All evaluation is tiled into grid blocks and replicate chunks whose shapes
depend only on the grid size, never on the number of workers; this keeps
results bitwise reproducible under any parallel schedule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import harmonic
from .errors import BadRange, DegenerateBaseline, InputError, ZeroMeanPower
from .harmonic import COND_LIMIT, TWO_PI, HarmonicParams, normal_condition
from .timeseries import TimeSeries

GRID_BLOCK = 1024
CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True, eq=False)
class PeriodGrid:
    periods: np.ndarray
    spacing: str = "explicit"

    def __post_init__(self):
        p = np.array(self.periods, dtype=float).ravel()
        if len(p) == 0:
            raise BadRange("period grid is empty")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise BadRange("periods must be finite and > 0")
        if np.any(np.diff(p) <= 0):
            raise BadRange("periods must be strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "periods", p)

    def __len__(self):
        return len(self.periods)

    def __eq__(self, other):
        if not isinstance(other, PeriodGrid):
            return NotImplemented
        return np.array_equal(self.periods, other.periods)

    __hash__ = None

    def index_of(self, theta: float) -> int | None:
        i = int(np.searchsorted(self.periods, theta))
        if i < len(self.periods) and self.periods[i] == theta:
            return i
        return None

    def nearest_index(self, theta: float) -> int:
        return int(np.argmin(np.abs(self.periods - theta)))

    def with_period(self, theta: float) -> tuple[PeriodGrid, int]:
        """Grid with ``theta`` inserted (if absent) and its index."""
        i = self.index_of(theta)
        if i is not None:
            return self, i
        if not theta > 0:
            raise BadRange(f"period must be > 0, got {theta}")
        i = int(np.searchsorted(self.periods, theta))
        return PeriodGrid(np.insert(self.periods, i, theta), "explicit"), i


def build_log_grid(theta_min: float, theta_max: float, count: int) -> PeriodGrid:
    if not (0 < theta_min < theta_max) or not np.isfinite(theta_max):
        raise BadRange(f"need 0 < theta_min < theta_max, got ({theta_min}, {theta_max})")
    if int(count) != count or count < 2:
        raise BadRange(f"grid count must be an integer >= 2, got {count}")
    p = np.geomspace(theta_min, theta_max, int(count))
    p[0], p[-1] = theta_min, theta_max
    return PeriodGrid(p, "log-uniform")


@dataclass(frozen=True, eq=False)
class Periodogram:
    grid: PeriodGrid
    power: np.ndarray
    singular: np.ndarray = None
    profile_params: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.power) != len(self.grid):
            raise InputError("power vector and grid differ in length")
        if self.singular is None:
            object.__setattr__(self, "singular", np.zeros(len(self.grid), dtype=bool))

    @property
    def periods(self) -> np.ndarray:
        return self.grid.periods

    def argmax(self) -> int:
        return int(np.argmax(self.power))

    def to_csv(self) -> str:
        rows = ["theta,power"]
        rows += [f"{float(t)!r},{float(p)!r}" for t, p in zip(self.grid.periods, self.power)]
        return "\n".join(rows) + "\n"

    def to_dict(self) -> dict:
        d = {
            "theta": self.grid.periods.tolist(),
            "power": np.asarray(self.power, dtype=float).tolist(),
            "singular": np.flatnonzero(self.singular).tolist(),
        }
        if self.profile_params is not None:
            d["params"] = np.asarray(self.profile_params).tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _weighted_design(times, sqrt_w, periods):
    phase = TWO_PI * times[None, :] / periods[:, None]
    Xw = np.empty((len(periods), len(times), 3))
    Xw[:, :, 0] = sqrt_w
    Xw[:, :, 1] = np.cos(phase) * sqrt_w
    Xw[:, :, 2] = np.sin(phase) * sqrt_w
    return Xw


class PeriodogramEngine:
    """Profiled-power evaluator for a fixed set of times, sigmas and trial periods."""

    def __init__(self, times, sigmas, periods, block: int = GRID_BLOCK):
        self.times = np.asarray(times, dtype=float)
        self.sqrt_w = 1.0 / np.asarray(sigmas, dtype=float)
        self.w = self.sqrt_w**2
        self.periods = np.asarray(periods, dtype=float)
        self.n = len(self.times)
        self.block = int(block)
        self.bases = []
        flags = []
        for lo in range(0, len(self.periods), self.block):
            basis, singular = self._basis(self.periods[lo:lo + self.block])
            self.bases.append(basis)
            flags.append(singular)
        self.singular = np.concatenate(flags) if flags else np.zeros(0, dtype=bool)
        self.chunk_rows = max(1, CHUNK_ELEMENTS // (3 * self.block))

    @classmethod
    def for_series(cls, ts: TimeSeries, grid: PeriodGrid, **kw) -> PeriodogramEngine:
        return cls(ts.times, ts.sigmas, grid.periods, **kw)

    def _basis(self, periods):
        Xw = _weighted_design(self.times, self.sqrt_w, periods)
        normal = np.einsum("gni,gnj->gij", Xw, Xw)
        singular = (normal_condition(normal) > COND_LIMIT) | (self.n < 3)
        if self.n >= 3:
            Q, _ = np.linalg.qr(Xw)
        else:
            Q = np.zeros_like(Xw)
        Q[singular] = 0.0
        # (n, 3 * block) so that one matmul projects onto every period in the block
        return np.ascontiguousarray(Q.transpose(1, 0, 2).reshape(self.n, -1)), singular

    def extra_basis(self, theta: float):
        """Basis for a single off-grid period (shape ``(n, 3)``) and its singular flag."""
        basis, singular = self._basis(np.array([float(theta)]))
        return basis, bool(singular[0])

    # -- evaluation -------------------------------------------------------

    def _prepare(self, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        dev = (Y - Y.mean(axis=1, keepdims=True)) * self.sqrt_w
        base = np.einsum("rn,rn->r", dev, dev)
        # shifting y by a constant leaves the profiled loss unchanged; the
        # weighted mean minimises cancellation in |y_w|² - |Qᵀy_w|²
        wmean = (Y @ self.w) / self.w.sum()
        yw = (Y - wmean[:, None]) * self.sqrt_w
        total = np.einsum("rn,rn->r", yw, yw)
        return yw, total, base

    @staticmethod
    def _power_from(yw, total, base, basis):
        proj = yw @ basis
        proj = proj.reshape(len(yw), -1, 3)
        explained = np.einsum("rgk,rgk->rg", proj, proj)
        resid = np.maximum(total[:, None] - explained, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            power = 1.0 - resid / base[:, None]
        power[base <= 0] = 0.0
        return np.clip(power, 0.0, 1.0)

    def block_powers(self, prepared, b: int) -> np.ndarray:
        yw, total, base = prepared
        p = self._power_from(yw, total, base, self.bases[b])
        lo = b * self.block
        p[:, self.singular[lo:lo + p.shape[1]]] = 0.0
        return p

    def powers(self, Y) -> np.ndarray:
        """Profiled powers, shape ``(rows, len(periods))``."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = np.empty((len(Y), len(self.periods)))
        for lo in range(0, len(Y), self.chunk_rows):
            prep = self._prepare(Y[lo:lo + self.chunk_rows])
            for b in range(len(self.bases)):
                g0 = b * self.block
                out[lo:lo + self.chunk_rows, g0:g0 + self.block] = self.block_powers(prep, b)
        return out

    def extra_powers(self, prepared, basis, singular: bool) -> np.ndarray:
        if singular:
            return np.zeros(len(prepared[0]))
        return self._power_from(*prepared, basis)[:, 0]

    def statistic(self, Y, theta_index: int | None = None, extra=None) -> np.ndarray:
        """``max_θ A(θ) - A(θ₀)`` for each row of ``Y``.

        ``θ₀`` is either grid point ``theta_index`` or an off-grid period
        given as ``extra = (basis, singular)`` and included in the max scan.
        Rows are processed in chunks fixed by the grid size alone.
        """
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = np.empty(len(Y))
        for lo in range(0, len(Y), self.chunk_rows):
            prep = self._prepare(Y[lo:lo + self.chunk_rows])
            best = np.full(len(prep[0]), -np.inf)
            at0 = None
            for b in range(len(self.bases)):
                p = self.block_powers(prep, b)
                np.maximum(best, p.max(axis=1), out=best)
                if theta_index is not None and b == theta_index // self.block:
                    at0 = p[:, theta_index - b * self.block].copy()
            if extra is not None:
                at0 = self.extra_powers(prep, *extra)
                np.maximum(best, at0, out=best)
            out[lo:lo + len(best)] = best - at0
        return out


class OracleEngine:
    """Oracle powers ``A(θ | ψ₀)`` at a fixed nuisance vector for many series."""

    def __init__(self, times, sigmas, periods, params, block: int = GRID_BLOCK):
        self.times = np.asarray(times, dtype=float)
        self.sqrt_w = 1.0 / np.asarray(sigmas, dtype=float)
        self.w = self.sqrt_w**2
        self.periods = np.asarray(periods, dtype=float)
        self.block = int(block)
        self.params = tuple(float(p) for p in params)
        self.chunk_rows = max(1, CHUNK_ELEMENTS // self.block)
        self.blocks = [self._block(self.periods[lo:lo + self.block])
                       for lo in range(0, len(self.periods), self.block)]

    def _block(self, periods):
        _, p2, p3 = self.params
        phase = TWO_PI * self.times[None, :] / periods[:, None]
        m = p2 * np.cos(phase) + p3 * np.sin(phase)  # model minus its intercept
        wm = m * self.w
        return np.ascontiguousarray(wm.T), np.einsum("gn,gn->g", wm, m)

    def extra_block(self, theta: float):
        return self._block(np.array([float(theta)]))

    def _prepare(self, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        dev = (Y - Y.mean(axis=1, keepdims=True)) * self.sqrt_w
        base = np.einsum("rn,rn->r", dev, dev)
        yc = Y - self.params[0]
        total = np.einsum("rn,rn,n->r", yc, yc, self.w)
        return yc, total, base

    @staticmethod
    def _power_from(prep, blk):
        yc, total, base = prep
        wm_t, mm = blk
        L = total[:, None] - 2.0 * (yc @ wm_t) + mm[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            power = (base[:, None] - L) / base[:, None]
        power[base <= 0] = 0.0
        return power

    def powers(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        prep = self._prepare(Y)
        return np.concatenate([self._power_from(prep, blk) for blk in self.blocks], axis=1)

    def statistic(self, Y, theta_index: int | None = None, extra=None) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = np.empty(len(Y))
        for lo in range(0, len(Y), self.chunk_rows):
            prep = self._prepare(Y[lo:lo + self.chunk_rows])
            best = np.full(len(prep[0]), -np.inf)
            at0 = None
            for b, blk in enumerate(self.blocks):
                p = self._power_from(prep, blk)
                np.maximum(best, p.max(axis=1), out=best)
                if theta_index is not None and b == theta_index // self.block:
                    at0 = p[:, theta_index - b * self.block].copy()
            if extra is not None:
                at0 = self._power_from(prep, extra)[:, 0]
                np.maximum(best, at0, out=best)
            out[lo:lo + len(best)] = best - at0
        return out


# -- single-period API ------------------------------------------------------

def _require_baseline(ts: TimeSeries) -> float:
    L0 = harmonic.baseline_loss(ts)
    if L0 <= 0:
        raise DegenerateBaseline("all values are equal; periodogram undefined")
    return L0


def oracle_power(ts: TimeSeries, theta: float, params) -> float:
    """``(L₀ - L(θ, ψ)) / L₀``; negative when ``ψ`` fits worse than the mean."""
    L0 = _require_baseline(ts)
    return (L0 - harmonic.loss(ts, theta, params)) / L0


def profiled_power(ts: TimeSeries, theta: float) -> float:
    L0 = _require_baseline(ts)
    fit = harmonic.fit_harmonic(ts, theta)
    return min(1.0, max(0.0, (L0 - fit.loss) / L0))


def compute_periodogram(ts: TimeSeries, grid: PeriodGrid, workers: int = 1,
                        keep_params: bool = False) -> Periodogram:
    """Profiled power at every grid period.

    Periods where the harmonic design is singular get power 0 and are
    flagged in ``Periodogram.singular``.
    """
    _require_baseline(ts)
    from .parallel import grid_powers

    power, singular = grid_powers(ts, grid, workers=workers)
    params = None
    if keep_params:
        params = np.full((len(grid), 3), np.nan)
        for i, theta in enumerate(grid.periods):
            if not singular[i]:
                params[i] = harmonic.fit_harmonic(ts, theta).params
    return Periodogram(grid=grid, power=power, singular=singular, profile_params=params)


def find_peaks(pg, gamma: float = 0.2) -> list[float]:
    """Periods of local maxima whose power is at least ``gamma`` times the global max.

    A peak is a maximal run of equal values strictly above both neighbouring
    values (one-sided at the boundaries); the run is represented by its
    smallest period.  The global argmax always qualifies.
    """
    idx = peak_indices(pg.power if isinstance(pg, Periodogram) else pg, gamma)
    periods = pg.grid.periods if isinstance(pg, Periodogram) else None
    if periods is None:
        return idx
    return [float(periods[i]) for i in idx]


def peak_indices(power, gamma: float = 0.2) -> list[int]:
    if not 0 < gamma <= 1:
        raise InputError(f"gamma must lie in (0, 1], got {gamma}")
    p = np.asarray(power, dtype=float)
    n = len(p)
    if n == 0:
        return []
    # run-length encode equal values so plateaus are handled as one point
    starts = np.flatnonzero(np.r_[True, p[1:] != p[:-1]])
    vals = p[starts]
    left = np.r_[-np.inf, vals[:-1]]
    right = np.r_[vals[1:], -np.inf]
    is_peak = (vals > left) & (vals > right)
    top = p.max()
    keep = is_peak & (vals >= gamma * top)
    keep |= vals == top
    return [int(i) for i in starts[keep]]


def fisher_statistic(pg) -> float:
    """Max power over mean power."""
    p = np.asarray(pg.power if isinstance(pg, Periodogram) else pg, dtype=float)
    mean = p.mean()
    if not mean > 0:
        raise ZeroMeanPower("mean periodogram power is zero")
    return float(p.max() / mean)


__all__ = [
    "HarmonicParams",
    "OracleEngine",
    "PeriodGrid",
    "Periodogram",
    "PeriodogramEngine",
    "build_log_grid",
    "compute_periodogram",
    "find_peaks",
    "fisher_statistic",
    "oracle_power",
    "peak_indices",
    "profiled_power",
]
