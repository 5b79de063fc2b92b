from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from periodica.periodogram import PeriodGrid, profiled_power
from periodica.rng import RngKey
from periodica.simulation import (
    SQRT2, SimulationSpec, coverage_experiment, default_grid, histogram, log_grid_through, modes,
    night_phase, peak_sampling_distribution, sample_observation_times, simulate,
    simulate_example1, simulate_harmonic_data,
)
from periodica.timeseries import InferenceConfig


class TestSpec:
    def test_aliases(self):
        assert SimulationSpec("midnight-window").design == "iii"

    @pytest.mark.parametrize("kw", [dict(design="iv"), dict(n=0), dict(sigma=-1), dict(theta_star=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SimulationSpec(**kw)


class TestExample1:
    def test_support(self):
        ts = simulate_example1(100, RngKey(0))
        i = np.arange(1, 101)
        assert np.all(np.abs(ts.times - i) <= 0.05)

    def test_noiseless_recovery(self):
        ts = simulate_example1(100, RngKey(0), sigma=0.0)
        assert profiled_power(ts, SQRT2) == pytest.approx(1.0, abs=1e-6)


class TestTimes:
    @pytest.mark.parametrize("design,lo,hi", [("i", 0.5, 1.0), ("iii", 0.75 - 0.0208, 0.75 + 0.0208)])
    def test_support(self, design, lo, hi):
        t = sample_observation_times(SimulationSpec(design, n=500), RngKey(1))
        frac = t - np.floor(t)
        frac[frac == 0] = 1.0
        assert np.all((frac >= lo - 1e-12) & (frac <= hi + 1e-12))
        assert np.all(np.diff(t) > 0)

    def test_inverse_cdf_density(self):
        u = RngKey(2).generator().random(100_000)
        x = night_phase("ii", u)
        cdf = lambda v: (1 + np.cos(2 * np.pi * np.clip(v, 0.5, 1.0))) / 2
        assert stats.kstest(x, cdf).pvalue > 0.01

    def test_inverse_cdf_vs_rejection(self):
        rng = np.random.default_rng(3)
        x = night_phase("ii", rng.random(100_000))
        cand = rng.uniform(0.5, 1.0, 400_000)
        keep = rng.uniform(0, math.pi, cand.size) < -math.pi * np.sin(2 * math.pi * cand)
        assert stats.ks_2samp(x, cand[keep][:100_000]).pvalue > 0.01


class TestHarmonicData:
    def test_noiseless_power(self):
        t = sample_observation_times(SimulationSpec("i", n=60), RngKey(4))
        ts = simulate_harmonic_data(t, SQRT2, 0.0, RngKey(5))
        assert profiled_power(ts, SQRT2) == pytest.approx(1.0, abs=1e-9)

    def test_mean(self):
        t = np.array([0.3])
        reps = 4000
        ys = [simulate_harmonic_data(t, SQRT2, 1.5, RngKey(6, replicate_index=r)).values[0]
              for r in range(reps)]
        assert abs(np.mean(ys) - (1 - np.cos(2 * np.pi * 0.3 / SQRT2))) < 3 * 1.5 / math.sqrt(reps)

    def test_sigmas(self):
        ts = simulate(SimulationSpec("ii", n=30), RngKey(7))
        assert np.all(ts.sigmas == 1.5)


class TestGrids:
    def test_contains_theta(self):
        g = log_grid_through(SQRT2, 0.25, 20, 500)
        assert SQRT2 in g.periods and g.periods[0] >= 0.25 and g.periods[-1] <= 20

    def test_default_grid_resolution(self):
        g = default_grid(SimulationSpec("example1", n=100))
        assert abs(math.log(g.periods[1] / g.periods[0]) - 0.2 / 100) < 1e-6


class TestPeaks:
    def test_noiseless_point_mass(self):
        spec = SimulationSpec("i", n=80, sigma=0.0)
        peaks = peak_sampling_distribution(spec, 5, None, RngKey(8))
        assert np.all(peaks == SQRT2)

    def test_modes_and_histogram(self):
        peaks = np.r_[np.full(60, 1.41), np.full(30, 3.41), np.full(10, 0.59)]
        assert [round(c, 2) for c, _ in modes(peaks)] == [0.59, 1.41, 3.41]
        assert histogram(peaks)[1.41] == pytest.approx(0.6)

    def test_worker_invariance(self):
        spec = SimulationSpec("example1", n=40, sigma=1.0)
        g = PeriodGrid(np.geomspace(0.3, 10, 300))
        a = peak_sampling_distribution(spec, 6, g, RngKey(9), workers=1)
        b = peak_sampling_distribution(spec, 6, g, RngKey(9), workers=3)
        assert a.tobytes() == b.tobytes()


class TestCoverage:
    def test_noiseless_full_coverage(self):
        spec = SimulationSpec("i", n=30, sigma=0.0)
        res = coverage_experiment(spec, 5, InferenceConfig(replicates=50), RngKey(10))
        assert res.fraction == 1.0

    def test_result_fields(self):
        spec = SimulationSpec("i", n=30)
        res = coverage_experiment(spec, 4, InferenceConfig(replicates=50), RngKey(11),
                                  grid=log_grid_through(SQRT2, 0.5, 5, 300))
        d = res.to_dict()
        assert d["reps"] == 4 and 0 <= d["ci95"][0] <= d["coverage"] <= d["ci95"][1] <= 1
