"""Weighted least-squares fit of the intercept + cosine + sine model at a fixed period."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NonPositivePeriod, SingularDesign
from .timeseries import TimeSeries

TWO_PI = 2.0 * np.pi
COND_LIMIT = 1e12


class HarmonicParams(NamedTuple):
    psi1: float  # intercept
    psi2: float  # cosine amplitude
    psi3: float  # sine amplitude

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


@dataclass(frozen=True)
class FitResult:
    params: HarmonicParams
    loss: float
    theta: float


def _check_period(theta):
    if not np.all(np.asarray(theta) > 0):
        raise NonPositivePeriod(f"period must be > 0, got {theta}")


def design_matrix(times, theta: float) -> np.ndarray:
    """Columns ``(1, cos(2πt/θ), sin(2πt/θ))``."""
    _check_period(theta)
    phase = TWO_PI * np.asarray(times, dtype=float) / theta
    return np.column_stack([np.ones_like(phase), np.cos(phase), np.sin(phase)])


def predict(params, theta: float, t):
    _check_period(theta)
    p1, p2, p3 = params
    phase = TWO_PI * np.asarray(t, dtype=float) / theta
    out = p1 + p2 * np.cos(phase) + p3 * np.sin(phase)
    return float(out) if np.ndim(out) == 0 else out


def loss(ts: TimeSeries, theta: float, params) -> float:
    """Weighted residual sum of squares ``Σ (y - ŷ)² / σ²``."""
    resid = (ts.values - predict(params, theta, ts.times)) / ts.sigmas
    return float(np.sum(resid * resid))


def baseline_loss(ts: TimeSeries) -> float:
    """``Σ (y - ȳ)² / σ²`` around the unweighted mean."""
    dev = (ts.values - ts.values.mean()) / ts.sigmas
    return float(np.sum(dev * dev))


def normal_condition(normal: np.ndarray) -> np.ndarray:
    """2-norm condition numbers of (a stack of) symmetric PSD 3x3 matrices."""
    ev = np.linalg.eigvalsh(normal)
    lo = ev[..., 0]
    hi = ev[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lo > 0, hi / np.where(lo > 0, lo, 1.0), np.inf)
    return cond


def fit_harmonic(ts: TimeSeries, theta: float) -> FitResult:
    """Closed-form weighted least squares at period ``theta``.

    The condition guard is applied to the 3x3 normal matrix; the solve itself
    uses a Householder QR of the weighted design, which keeps full accuracy
    when the period is much longer than the time span.
    """
    _check_period(theta)
    if ts.n < 3:
        raise SingularDesign(f"need at least 3 observations for a harmonic fit, got {ts.n}")
    sw = 1.0 / ts.sigmas
    Xw = design_matrix(ts.times, theta) * sw[:, None]
    if normal_condition(Xw.T @ Xw) > COND_LIMIT:
        raise SingularDesign(f"harmonic design is singular at theta={theta!r}")
    Q, R = np.linalg.qr(Xw)
    beta = scipy.linalg.solve_triangular(R, Q.T @ (ts.values * sw))
    params = HarmonicParams(*(float(b) for b in beta))
    return FitResult(params=params, loss=loss(ts, theta, params), theta=float(theta))
