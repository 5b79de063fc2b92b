from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from periodica.errors import (
    DuplicateTime, EmptyInput, InputError, LengthMismatch, MalformedRow, NonPositiveSigma,
)
from periodica.timeseries import (
    InferenceConfig, TimeSeries, estimate_pvalue, parse_timeseries, serialize_timeseries,
)


class TestParse:
    def test_minimal(self):
        ts = parse_timeseries("t,y,sigma\n0,1,1\n1,2,1")
        assert ts.n == 2
        np.testing.assert_array_equal(ts.values, [1, 2])

    def test_sorts(self):
        ts = parse_timeseries("t,y,sigma\n1,2,1\n0,1,1")
        np.testing.assert_array_equal(ts.times, [0, 1])
        np.testing.assert_array_equal(ts.values, [1, 2])

    def test_zero_sigma(self):
        with pytest.raises(NonPositiveSigma):
            parse_timeseries("t,y,sigma\n0,1,0")

    def test_line_numbers(self):
        with pytest.raises(MalformedRow, match="line 3"):
            parse_timeseries("t,y,sigma\n0,1,1\n1,abc,1\n")

    def test_duplicate_time(self):
        with pytest.raises(DuplicateTime, match="line 3"):
            parse_timeseries("t,y,sigma\n0,1,1\n0,2,1\n")

    def test_missing_column(self):
        with pytest.raises(MalformedRow, match="header"):
            parse_timeseries("t,y\n0,1\n")

    def test_wrong_width(self):
        with pytest.raises(MalformedRow, match="line 2"):
            parse_timeseries("t,y,sigma\n0,1\n")

    @pytest.mark.parametrize("doc", ["", "t,y,sigma\n", "   \n"])
    def test_empty(self, doc):
        with pytest.raises(EmptyInput):
            parse_timeseries(doc)

    def test_nonfinite(self):
        with pytest.raises(MalformedRow):
            parse_timeseries("t,y,sigma\n0,nan,1\n")

    def test_errors_are_value_errors(self):
        with pytest.raises(ValueError):
            parse_timeseries("t,y,sigma\n0,1,-1\n")


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestRoundTrip:
    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(finite, finite, st.floats(1e-6, 1e6)), min_size=1, max_size=30,
                    unique_by=lambda r: r[0]))
    def test_serialize_parse(self, rows):
        t, y, s = (np.array(c) for c in zip(*rows))
        ts = TimeSeries.from_unsorted(t, y, s)
        assert parse_timeseries(serialize_timeseries(ts)) == ts


class TestTimeSeries:
    def test_invariants(self):
        with pytest.raises(LengthMismatch):
            TimeSeries([0, 1], [1], [1, 1])
        with pytest.raises(EmptyInput):
            TimeSeries([], [], [])
        with pytest.raises(InputError):
            TimeSeries([1, 0], [1, 1], [1, 1])
        with pytest.raises(NonPositiveSigma):
            TimeSeries([0, 1], [1, 1], [1, 0])

    def test_immutable(self, series):
        with pytest.raises(ValueError):
            series.values[0] = 3.0

    def test_from_unsorted_duplicate(self):
        with pytest.raises(DuplicateTime):
            TimeSeries.from_unsorted([1, 0, 1], [0, 0, 0], [1, 1, 1])


class TestInferenceConfig:
    @pytest.mark.parametrize("kw", [{"alpha": 0}, {"alpha": 1}, {"replicates": 0},
                                    {"peak_filter_gamma": 0}, {"peak_filter_gamma": 1.5},
                                    {"pvalue_estimator": "median"}])
    def test_rejects(self, kw):
        with pytest.raises(InputError):
            InferenceConfig(**kw)

    def test_estimators(self):
        assert InferenceConfig(replicates=9).pvalue(4) == pytest.approx(0.5)
        cfg = InferenceConfig(replicates=10, pvalue_estimator="mean")
        assert cfg.pvalue_estimator == "plug-in-mean"
        assert cfg.pvalue(4) == pytest.approx(0.4)
        assert estimate_pvalue(0, 99, "add-one") == pytest.approx(0.01)
