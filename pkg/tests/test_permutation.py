from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from periodica import TimeSeries
from periodica.errors import BadTolerance, DegenerateBaseline, TooLarge
from periodica.periodogram import build_log_grid
from periodica.permutation import (
    class_permutations, equivalence_classes, exact_np_pvalue, np_test, sample_class_permutation,
)
from periodica.rng import RngKey
from periodica.timeseries import InferenceConfig


class TestPartition:
    def test_integer_times(self):
        part = equivalence_classes([0, 1, 2, 3], 1.0, 1e-9)
        assert part.classes == ((0, 1, 2, 3),)

    def test_two_phases(self):
        part = equivalence_classes([0, 0.5, 1, 1.5], 1.0)
        assert part.classes == ((0, 2), (1, 3))
        assert part.size_histogram() == {2: 2}
        assert part.group_order() == 4

    def test_generic_singletons(self):
        t = np.sqrt(np.arange(2, 12))
        assert all(len(c) == 1 for c in equivalence_classes(t, math.pi).classes)

    def test_quantum_absorbs_noise(self):
        part = equivalence_classes([0.0, 1.0 + 3e-7, 2.0 - 2e-7], 1.0, 1e-6)
        assert len(part.classes) == 1

    def test_exact_mode(self):
        assert equivalence_classes([0.0, 0.25, 1.0], 0.5, 0.0).classes == ((0, 2), (1,))

    @pytest.mark.parametrize("q", [-1e-6, 0.5, 2.0])
    def test_bad_tolerance(self, q):
        with pytest.raises(BadTolerance):
            equivalence_classes([0, 1], 1.0, q)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 400), min_size=1, max_size=30, unique=True), st.integers(1, 40))
    def test_partition_property(self, ticks, per):
        t = np.sort(np.array(ticks, dtype=float) * 0.25)
        part = equivalence_classes(t, per * 0.25, 0.25 / 8)
        flat = sorted(i for c in part.classes for i in c)
        assert flat == list(range(len(t)))
        for c in part.classes:
            assert len({int(round(t[i] / 0.25)) % per for i in c}) == 1


class TestPermutations:
    def test_singletons_identity(self):
        part = equivalence_classes(np.sqrt(np.arange(2, 8)), 1.3)
        np.testing.assert_array_equal(sample_class_permutation(part, RngKey(0)), np.arange(6))

    def test_size_two(self):
        part = equivalence_classes([0.0, 0.3, 1.0], 1.0)
        perms = class_permutations(part, RngKey(1), 0, 4000)
        swapped = np.mean(perms[:, 0] == 2)
        assert 0.45 < swapped < 0.55
        assert np.all(perms[:, 1] == 1)

    def test_size_three_uniform(self):
        part = equivalence_classes([0.0, 1.0, 2.0, 2.5], 1.0)
        perms = class_permutations(part, RngKey(2), 0, 100_000)
        counts = Counter(map(tuple, perms[:, :3]))
        assert set(counts) == set(itertools.permutations(range(3)))
        assert all(abs(c / 100_000 - 1 / 6) < 0.02 for c in counts.values())

    def test_closure_and_inverse(self):
        t = [0.0, 0.5, 1.0, 1.5, 2.0, 2.7, 3.0]
        part = equivalence_classes(t, 1.0)
        labels = part.labels
        a, b = class_permutations(part, RngKey(3), 0, 2)
        for p in (a[b], np.argsort(a)):
            assert np.array_equal(labels[p], labels)

    def test_values_preserved(self):
        part = equivalence_classes([0.0, 0.5, 1.0, 1.5], 1.0)
        y = np.array([3.0, 1.0, 4.0, 1.5])
        for p in class_permutations(part, RngKey(4), 0, 20):
            assert sorted(y[p]) == sorted(y)

    def test_deterministic(self):
        part = equivalence_classes([0.0, 0.5, 1.0, 1.5, 2.0], 1.0)
        k = RngKey(9, replicate_index=17)
        assert np.array_equal(sample_class_permutation(part, k), sample_class_permutation(part, k))


def six_point_series(seed=0):
    rng = np.random.default_rng(seed)
    t = np.array([0.0, 1.0, 2.0, 0.3, 1.71, 2.46])  # indices 0,1,2 share phase mod 1
    order = np.argsort(t)
    y = np.cos(2 * np.pi * t / 1.0) + rng.normal(size=6)
    return TimeSeries(t[order], y[order], np.ones(6))


class TestNpTest:
    grid = build_log_grid(0.3, 5, 200)

    def test_singletons_give_one(self):
        rng = np.random.default_rng(0)
        t = np.sort(rng.uniform(0, 30, 20))
        ts = TimeSeries(t, rng.normal(size=20), np.ones(20))
        out = np_test(ts, self.grid, 1.7, 1e-6, InferenceConfig(replicates=50), RngKey(0))
        assert out.p_value == 1.0 and out.mode == "nonparametric"
        assert out.details["partition"]["group_order"] == 1

    def test_periodic_noiseless_is_one(self):
        t = np.array([0.0, 0.4, 1.0, 1.4, 2.0, 2.4, 3.0, 3.7])
        ts = TimeSeries(t, np.cos(2 * np.pi * t), np.ones(8))
        out = np_test(ts, self.grid, 1.0, 1e-6, InferenceConfig(replicates=200), RngKey(0))
        assert out.p_value == 1.0

    def test_matches_group_enumeration(self):
        ts = six_point_series(3)
        exact = float(exact_np_pvalue(ts, self.grid, 1.0))
        cfg = InferenceConfig(replicates=20_000, pvalue_estimator="plug-in-mean")
        p = np_test(ts, self.grid, 1.0, 1e-6, cfg, RngKey(1)).p_value
        assert abs(p - exact) <= 3 * math.sqrt(exact * (1 - exact) / cfg.replicates) + 1e-12

    def test_sigma_warning(self):
        t = np.array([0.0, 0.3, 1.0, 1.8])
        ts = TimeSeries(t, [1.0, 2.0, 0.5, 0.0], [1.0, 1.0, 2.0, 1.0])
        with pytest.warns(UserWarning, match="sigmas differ"):
            np_test(ts, self.grid, 1.0, 1e-6, InferenceConfig(replicates=10), RngKey(0))

    def test_degenerate(self):
        ts = TimeSeries([0, 1, 2.5], [1, 1, 1], [1, 1, 1])
        with pytest.raises(DegenerateBaseline):
            np_test(ts, self.grid, 1.0, 1e-6, InferenceConfig(replicates=10), RngKey(0))

    def test_group_too_large(self):
        t = np.arange(12.0)
        ts = TimeSeries(t, np.random.default_rng(0).normal(size=12), np.ones(12))
        with pytest.raises(TooLarge):
            exact_np_pvalue(ts, self.grid, 1.0)

    def test_worker_invariance(self):
        ts = six_point_series(5)
        cfg = InferenceConfig(replicates=300)
        a = np_test(ts, self.grid, 1.0, 1e-6, cfg, RngKey(4), workers=1)
        b = np_test(ts, self.grid, 1.0, 1e-6, cfg, RngKey(4), workers=2)
        assert a == b
