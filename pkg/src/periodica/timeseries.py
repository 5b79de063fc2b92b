"""Time series container, CSV ingestion and inference configuration."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicateTime,
    EmptyInput,
    InputError,
    LengthMismatch,
    MalformedRow,
    NonPositiveSigma,
)

HEADER = ("t", "y", "sigma")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Observation times (days), measured values and per-point standard deviations.

    Arrays are copied and made read-only, so instances can be shared freely
    between threads and processes.
    """

    times: np.ndarray
    values: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        t, y, s = (np.asarray(a, dtype=float).ravel() for a in (self.times, self.values, self.sigmas))
        if not (len(t) == len(y) == len(s)):
            raise LengthMismatch(f"times/values/sigmas lengths differ: {len(t)}, {len(y)}, {len(s)}")
        if len(t) == 0:
            raise EmptyInput("time series has no observations")
        for name, a in (("times", t), ("values", y), ("sigmas", s)):
            if not np.all(np.isfinite(a)):
                raise MalformedRow(f"non-finite entry in {name}")
        if np.any(s <= 0):
            raise NonPositiveSigma(f"sigma must be > 0 (got {s[s <= 0][0]!r})")
        if np.any(np.diff(t) <= 0):
            raise InputError("times must be strictly increasing; use TimeSeries.from_unsorted")
        object.__setattr__(self, "times", _frozen(t))
        object.__setattr__(self, "values", _frozen(y))
        object.__setattr__(self, "sigmas", _frozen(s))

    @classmethod
    def from_unsorted(cls, times, values, sigmas) -> TimeSeries:
        """Stable-sort by time, rejecting duplicate times."""
        t = np.asarray(times, dtype=float)
        order = np.argsort(t, kind="stable")
        ts = t[order]
        dup = np.nonzero(np.diff(ts) == 0)[0]
        if len(dup):
            raise DuplicateTime(f"duplicate observation time {ts[dup[0]]!r}")
        return cls(ts, np.asarray(values, dtype=float)[order], np.asarray(sigmas, dtype=float)[order])

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self.sigmas**2

    def with_values(self, values) -> TimeSeries:
        return TimeSeries(self.times, values, self.sigmas)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.sigmas, other.sigmas)
        )

    __hash__ = None


def parse_timeseries(text: str) -> TimeSeries:
    """Parse a ``t,y,sigma`` CSV document.

    Rows are validated one by one so that error messages carry the line
    number.  Unsorted input is stable-sorted; duplicate times are rejected.
    """
    if not text.strip():
        raise EmptyInput("empty document")
    reader = csv.reader(io.StringIO(text))
    header = None
    rows = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if header is None:
            header = tuple(c.strip().lower() for c in row)
            if header != HEADER:
                raise MalformedRow(f"expected header 't,y,sigma', got {','.join(row)!r}", line)
            continue
        if len(row) != 3:
            raise MalformedRow(f"expected 3 columns, got {len(row)}", line)
        try:
            t, y, s = (float(c) for c in row)
        except ValueError:
            raise MalformedRow(f"non-numeric cell in {','.join(row)!r}", line) from None
        if not all(math.isfinite(v) for v in (t, y, s)):
            raise MalformedRow("non-finite value", line)
        if s <= 0:
            raise NonPositiveSigma(f"sigma must be > 0, got {s!r}", line)
        rows.append((t, y, s, line))
    if not rows:
        raise EmptyInput("no data rows")
    seen = {}
    for t, _, _, line in rows:
        if t in seen:
            raise DuplicateTime(f"time {t!r} already given on line {seen[t]}", line)
        seen[t] = line
    arr = np.array([r[:3] for r in rows])
    return TimeSeries.from_unsorted(arr[:, 0], arr[:, 1], arr[:, 2])


def read_timeseries(path) -> TimeSeries:
    with open(path, encoding="utf-8") as fh:
        return parse_timeseries(fh.read())


def serialize_timeseries(ts: TimeSeries) -> str:
    """CSV text whose floats round-trip exactly through :func:`parse_timeseries`."""
    lines = [",".join(HEADER)]
    for t, y, s in zip(ts.times, ts.values, ts.sigmas):
        lines.append(f"{float(t)!r},{float(y)!r},{float(s)!r}")
    return "\n".join(lines) + "\n"


PVALUE_ESTIMATORS = ("add-one", "plug-in-mean")


@dataclass(frozen=True)
class InferenceConfig:
    alpha: float = 0.05
    replicates: int = 10_000
    peak_filter_gamma: float = 0.2
    pvalue_estimator: str = "add-one"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise InputError(f"replicates must be a positive integer, got {self.replicates}")
        if not 0 < self.peak_filter_gamma <= 1:
            raise InputError(f"gamma must lie in (0, 1], got {self.peak_filter_gamma}")
        est = {"mean": "plug-in-mean"}.get(self.pvalue_estimator, self.pvalue_estimator)
        if est not in PVALUE_ESTIMATORS:
            raise InputError(f"unknown p-value estimator {self.pvalue_estimator!r}")
        object.__setattr__(self, "pvalue_estimator", est)
        object.__setattr__(self, "replicates", int(self.replicates))

    def pvalue(self, exceedances: int, replicates: int | None = None) -> float:
        r = self.replicates if replicates is None else replicates
        return estimate_pvalue(exceedances, r, self.pvalue_estimator)


def estimate_pvalue(exceedances: int, replicates: int, estimator: str) -> float:
    if estimator == "add-one":
        return (1 + exceedances) / (replicates + 1)
    return exceedances / replicates
