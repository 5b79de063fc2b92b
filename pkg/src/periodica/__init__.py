"""Randomization inference for hidden periodicity in unequally spaced time series."""

from .errors import (
    BadRange,
    BadTolerance,
    DegenerateBaseline,
    DuplicateTime,
    EmptyInput,
    InputError,
    LengthMismatch,
    MalformedRow,
    NonPositivePeriod,
    NonPositiveSigma,
    PeriodicaError,
    SingularDesign,
    TooLarge,
    ZeroMeanPower,
)
from .harmonic import FitResult, HarmonicParams, baseline_loss, fit_harmonic, loss, predict
from .inference import (
    ConfidenceSet,
    TestOutcome,
    confidence_set,
    exact_pvalue_enumeration,
    full_null_pvalue,
    randomization_pvalue,
    synthesize_null_sample,
    test_statistic,
)
from .periodogram import (
    PeriodGrid,
    Periodogram,
    build_log_grid,
    compute_periodogram,
    find_peaks,
    fisher_statistic,
    oracle_power,
    profiled_power,
)
from .rng import RngKey, SignPattern, sample_sign_pattern
from .timeseries import InferenceConfig, TimeSeries, parse_timeseries, serialize_timeseries

__version__ = "0.1.0"
