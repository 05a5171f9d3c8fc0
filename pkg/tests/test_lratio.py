import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from nlrtest.lratio import (
    INDETERMINATE,
    LrKind,
    LrValue,
    lr_at_theta,
    lr_benchmark,
    lr_plugin,
    support_violated,
)
from nlrtest.model import Sample, as_covariate_model, get_model


def halfnormal_log_lr(y, theta_num, theta_den):
    # independent oracle: scipy's halfnorm log-density, shifted
    return float(np.sum(stats.halfnorm.logpdf(y - theta_num) - stats.halfnorm.logpdf(y - theta_den)))


class TestLrValue:
    def test_value_and_zero(self):
        v = LrValue.value(math.log(3.0))
        assert v.kind is LrKind.VALUE and v.z == pytest.approx(3.0)
        z = LrValue.value(-math.inf)
        assert z.is_zero and z.z == 0.0

    def test_indeterminate_is_nan(self):
        assert INDETERMINATE.is_indeterminate and math.isnan(INDETERMINATE.z)

    def test_overflow_reports_inf(self):
        assert LrValue.value(1000.0).z == math.inf

    def test_as_dict(self):
        assert LrValue.value(0.5).as_dict() == {"kind": "value", "log_z": 0.5}
        assert INDETERMINATE.as_dict() == {"kind": "indeterminate"}


class TestBenchmarkRatio:
    def test_matches_scipy_oracle(self, halfnormal, rng):
        n, hbar = 200, 3.0
        s = Sample(halfnormal.sampler(0.0, rng, n))
        lr = lr_benchmark(halfnormal, s, 0.0, 0.0, hbar)
        if s.min_y >= hbar / n:
            assert lr.kind is LrKind.VALUE
            assert lr.log_z == pytest.approx(halfnormal_log_lr(s.values, hbar / n, 0.0), rel=1e-12, abs=1e-12)
        else:
            assert lr.is_zero

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        h=st.floats(-5, 5),
        hbar=st.floats(-8, 8),
        n=st.integers(1, 300),
    )
    def test_support_semantics(self, seed, h, hbar, n):
        m = get_model("halfnormal")
        s = Sample(m.sampler(h / n, np.random.default_rng(seed), n))
        lr = lr_benchmark(m, s, 0.0, h, hbar)
        if s.min_y < h / n:
            assert lr.is_indeterminate
        elif s.min_y < hbar / n:
            assert lr.is_zero
        else:
            assert lr.kind is LrKind.VALUE
            assert lr.log_z == pytest.approx(halfnormal_log_lr(s.values, hbar / n, h / n), rel=1e-9, abs=1e-9)

    def test_denominator_off_support(self, halfnormal):
        s = Sample(np.array([-0.1, 1.0]))
        assert lr_benchmark(halfnormal, s, 0.0, 0.0, 1.0).is_indeterminate

    def test_numerator_off_support(self, halfnormal):
        s = Sample(np.array([0.001, 1.0]))
        assert lr_benchmark(halfnormal, s, 0.0, 0.0, 1.0).is_zero

    def test_equal_parameters_give_one(self, halfnormal):
        s = Sample(np.array([0.5, 1.0]))
        lr = lr_benchmark(halfnormal, s, 0.0, 0.3, 0.3)
        assert lr.kind is LrKind.VALUE and lr.log_z == 0.0

    def test_large_n_stays_finite_in_log_space(self, halfnormal, rng):
        n = 200_000
        s = Sample(halfnormal.sampler(0.0, rng, n))
        lr = lr_benchmark(halfnormal, s, 0.0, 0.0, -20.0)
        assert lr.kind is LrKind.VALUE and math.isfinite(lr.log_z)

    def test_uniform_upper_edge_makes_denominator_vanish(self):
        m = get_model("uniform")
        s = Sample(np.array([0.2, 1.5]))
        # 1.5 lies past the upper edge of [0, 1], so the denominator vanishes
        assert lr_benchmark(m, s, 0.0, 0.0, 0.1).is_indeterminate
        s2 = Sample(np.array([0.7, 1.5]))
        assert lr_benchmark(m, s2, 0.6, 0.0, -0.1).kind is LrKind.VALUE

    def test_lr_at_theta(self, halfnormal):
        s = Sample(np.array([0.5, 1.0, 2.0]))
        a = lr_at_theta(halfnormal, s, 0.2, 0.3)
        b = lr_benchmark(halfnormal, s, 0.2, 0.0, 0.3)
        assert a == b

    def test_empty_sample(self, halfnormal):
        with pytest.raises(ValueError):
            lr_benchmark(halfnormal, Sample(np.array([])), 0.0, 0.0, 1.0)


class TestPluginRatio:
    def test_single_level_reduces_to_benchmark(self, halfnormal, rng):
        cm = as_covariate_model(halfnormal)
        y = halfnormal.sampler(0.0, rng, 100)
        s_cov = Sample(y, np.zeros(100, dtype=int))
        for hbar in (0.5, 3.0, -2.0):
            a = lr_plugin(cm, s_cov, 0.0, 0.0, hbar, ())
            b = lr_benchmark(halfnormal, Sample(y), 0.0, 0.0, hbar)
            assert a.kind is b.kind
            if a.kind is LrKind.VALUE:
                assert a.log_z == pytest.approx(b.log_z, rel=1e-13, abs=1e-13)

    def test_toy_model_closed_form(self, toy, rng):
        y, x = toy.sampler(0.0, toy.gamma_true, rng, 50)
        s = Sample(y, x)
        hbar, n = -1.0, 50
        lr = lr_plugin(toy, s, 0.0, 0.0, hbar, (0.1, -0.2))
        expected = float(np.sum(toy.log_density(y, x, hbar / n, (0.1, -0.2)) - toy.log_density(y, x, 0.0, (0.1, -0.2))))
        assert lr.log_z == pytest.approx(expected, rel=1e-12)

    def test_per_observation_indicator(self, toy):
        s = Sample(np.array([0.05, 3.0]), np.array([0, 1]))
        # level 0 observation sits below g(theta0 + hbar/n) = 2/2 = 1
        assert lr_plugin(toy, s, 0.0, 0.0, 2.0, (0.0, 0.0)).is_zero
        assert support_violated(toy, Sample(np.array([-0.1, 1.0]), np.array([0, 1])), 0.0)

    def test_rejects_bad_inputs(self, toy):
        s = Sample(np.array([1.0]), np.array([5]))
        with pytest.raises(ValueError):
            lr_plugin(toy, s, 0.0, 0.0, 1.0, (0.0, 0.0))
        ok = Sample(np.array([1.0]), np.array([0]))
        with pytest.raises(ValueError):
            lr_plugin(toy, ok, 0.0, 0.0, math.nan, (0.0, 0.0))
        with pytest.raises(ValueError):
            lr_plugin(toy, Sample(np.array([1.0])), 0.0, 0.0, 1.0, (0.0, 0.0))
