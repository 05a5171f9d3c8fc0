import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlrtest.limit import (
    LimitError,
    LimitParams,
    envelope,
    envelope_csv,
    envelope_minus,
    envelope_plus,
    envelope_twosided,
    lambda_benchmark,
    lambda_from_levels,
    lambda_general,
    limit_indicator,
    limit_lr,
    lower_bound_minus,
    lower_bound_minus_benchmark,
    lower_bound_minus_general,
    lower_bound_plus,
    lower_bound_plus_benchmark,
    lower_bound_plus_general,
    np_limit_reject_probability,
    np_limit_test,
    prob_D0,
    sample_W,
)

LAM_HALFNORMAL = math.sqrt(math.pi / 2)  # 1 / (2 phi(0))


class TestScales:
    def test_halfnormal_lambda(self, halfnormal):
        lam = lambda_benchmark(halfnormal, 0.0).lam
        assert lam == pytest.approx(1.2533141, abs=1e-7)
        assert lam == pytest.approx(LAM_HALFNORMAL, rel=1e-14)

    def test_offset_lambda(self, offset_model):
        assert lambda_benchmark(offset_model, 0.0).lam == pytest.approx(4.896549, abs=1e-6)

    def test_toy_levels(self, toy):
        lim = lambda_general(toy, 0.0, toy.gamma_true)
        assert lim.lam_j == pytest.approx((4.0, 8.0))
        assert lim.lam == pytest.approx(8.0 / 3.0)

    def test_from_levels_errors(self):
        with pytest.raises(LimitError):
            lambda_from_levels((1.0,), (0.0,), (1.0,))
        with pytest.raises(LimitError):
            LimitParams.from_levels((1.0, -1.0), (2.0, 2.0))

    def test_single(self):
        p = LimitParams.single(2.0)
        assert p.L == 1 and p.lam_j == (2.0,)


class TestLimitExperiment:
    def test_w_is_shifted_exponential(self, rng):
        p = LimitParams.single(LAM_HALFNORMAL)
        w = sample_W(p, 1.5, rng, size=200_000)[:, 0]
        assert w.min() >= 1.5
        assert np.mean(w - 1.5) == pytest.approx(LAM_HALFNORMAL, rel=0.01)

    def test_prob_D0_matches_simulation(self, rng):
        p = LimitParams.from_levels((1.0, 1.0), (4.0, 8.0), (0.5, 0.5))
        w = sample_W(p, 0.0, rng, size=200_000)
        d = limit_indicator(p, 2.0, w)
        se = math.sqrt(prob_D0(p, 2.0) * (1 - prob_D0(p, 2.0)) / w.shape[0])
        assert abs(d.mean() - math.exp(-0.75)) < 4 * se
        assert prob_D0(p, 2.0) == pytest.approx(math.exp(-0.75), rel=1e-14)

    def test_prob_D0_nonpositive_hbar(self):
        p = LimitParams.from_levels((1.0, 1.0), (4.0, 8.0))
        assert prob_D0(p, -3.0) == 1.0

    def test_limit_lr(self):
        p = LimitParams.single(2.0)
        assert limit_lr(p, 0.0, 1.0, [1.5]) == pytest.approx(math.exp(0.5))
        assert limit_lr(p, 0.0, 1.0, [0.5]) == 0.0
        with pytest.raises(LimitError):
            limit_indicator(p, 1.0, [1.0, 2.0])


class TestEnvelopes:
    def test_plus_values(self):
        p = LimitParams.single(LAM_HALFNORMAL)
        assert envelope_plus(p, 0.05, 0.0) == 0.05
        assert envelope_plus(p, 0.05, 3.7545744) == pytest.approx(1.0, abs=1e-4)
        assert envelope_plus(p, 0.05, 1e6) == 1.0
        assert envelope_plus(p, 0.05, 1.0) == pytest.approx(0.05 * math.exp(1 / LAM_HALFNORMAL), rel=1e-14)

    def test_minus_values(self):
        p = LimitParams.single(LAM_HALFNORMAL)
        assert envelope_minus(p, 0.05, 0.0) == pytest.approx(0.05)
        assert envelope_minus(p, 0.05, -2.0) == pytest.approx(1 - 0.95 * math.exp(-2 / LAM_HALFNORMAL))

    def test_domain_errors(self):
        p = LimitParams.single(1.0)
        with pytest.raises(LimitError):
            envelope_plus(p, 0.05, -0.1)
        with pytest.raises(LimitError):
            envelope_minus(p, 0.05, 0.1)
        with pytest.raises(LimitError):
            envelope(p, 0.05, 0.0, "sideways")

    def test_twosided_pieces(self):
        p = LimitParams.single(1.0)
        hs = np.array([-2.0, 0.0, 2.0])
        out = envelope_twosided(p, 0.05, hs)
        assert out[0] == pytest.approx(envelope_minus(p, 0.05, -2.0))
        assert out[2] == pytest.approx(envelope_plus(p, 0.05, 2.0))

    def test_monotone(self):
        p = LimitParams.single(LAM_HALFNORMAL)
        hs = np.linspace(0, 8, 200)
        assert np.all(np.diff(envelope_plus(p, 0.05, hs)) >= 0)
        assert np.all(np.diff(envelope_minus(p, 0.05, -hs)) >= 0)


class TestLowerBounds:
    @settings(max_examples=200, deadline=None)
    @given(
        lam=st.floats(0.2, 10),
        alpha=st.floats(0.001, 0.5),
        h=st.floats(0, 20),
        hbar=st.floats(0.01, 20),
    )
    def test_plus_general_reduces_at_one_level(self, lam, alpha, h, hbar):
        p = LimitParams.single(lam)
        a = lower_bound_plus_general(p, alpha, h, hbar)
        b = lower_bound_plus_benchmark(lam, alpha, h, hbar)
        assert a == pytest.approx(b, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(
        lam=st.floats(0.2, 10),
        alpha=st.floats(0.001, 0.5),
        h=st.floats(-20, 0),
        hbar=st.floats(-20, -0.01),
    )
    def test_minus_general_reduces_at_one_level(self, lam, alpha, h, hbar):
        p = LimitParams.single(lam)
        a = lower_bound_minus_general(p, alpha, h, hbar)
        b = lower_bound_minus_benchmark(lam, alpha, h, hbar)
        assert a == pytest.approx(b, abs=1e-12)

    def test_bound_touches_envelope_at_hbar(self):
        p = LimitParams.single(LAM_HALFNORMAL)
        for hbar in (0.5, 2.0, 3.0):
            assert lower_bound_plus(p, 0.05, hbar, hbar) == pytest.approx(envelope_plus(p, 0.05, hbar), rel=1e-12)
        for hbar in (-0.5, -2.0):
            assert lower_bound_minus(p, 0.05, hbar, hbar) == pytest.approx(envelope_minus(p, 0.05, hbar), rel=1e-12)

    def test_optimal_hbar_bound_is_envelope(self):
        p = LimitParams.single(LAM_HALFNORMAL)
        hplus = -LAM_HALFNORMAL * math.log(0.05)
        for h in np.linspace(0, 6, 13):
            assert lower_bound_plus(p, 0.05, h, hplus) == pytest.approx(envelope_plus(p, 0.05, h), abs=1e-12)
        for h in np.linspace(-6, 0, 13):
            assert lower_bound_minus(p, 0.05, h, -math.inf) == pytest.approx(envelope_minus(p, 0.05, h), abs=1e-12)

    def test_general_bound_below_envelope(self):
        p = LimitParams.from_levels((1.0, 1.0), (4.0, 8.0))
        for h in np.linspace(0, 10, 11):
            for hbar in (1.0, 5.0, 9.0):
                assert lower_bound_plus(p, 0.05, h, hbar) <= envelope_plus(p, 0.05, h) + 1e-12

    def test_domain(self):
        p = LimitParams.single(1.0)
        with pytest.raises(LimitError):
            lower_bound_plus(p, 0.05, -1.0, 1.0)
        with pytest.raises(LimitError):
            lower_bound_minus(p, 0.05, -1.0, 1.0)


class TestNeymanPearsonLimitTest:
    def test_branches(self):
        p = LimitParams.single(1.0)
        assert np_limit_reject_probability(p, 0.05, 1.0, [-0.1]) == 1.0
        assert np_limit_reject_probability(p, 0.05, 1.0, [2.0]) == pytest.approx(0.05 * math.e)
        assert np_limit_reject_probability(p, 0.05, 1.0, [0.5]) == 0.0
        # alpha above exp(-hbar/lam): reject on D = 1, randomize otherwise
        pr = math.exp(-5.0)
        assert np_limit_reject_probability(p, 0.05, 5.0, [6.0]) == 1.0
        assert np_limit_reject_probability(p, 0.05, 5.0, [1.0]) == pytest.approx((0.05 - pr) / (1 - pr))
        assert np_limit_reject_probability(p, 0.05, -1.0, [1.0]) == 0.05

    def test_consumes_one_uniform(self):
        p = LimitParams.single(1.0)
        a, b = np.random.default_rng(3), np.random.default_rng(3)
        for w in ([-1.0], [0.5], [3.0]):
            np_limit_test(p, 0.05, 1.0, w, a)
            b.random()
        assert a.random() == b.random()

    def test_size_is_alpha(self, rng):
        p = LimitParams.single(LAM_HALFNORMAL)
        w = sample_W(p, 0.0, rng, size=40_000)
        for hbar in (1.0, 6.0, -2.0):
            rate = np.mean([np_limit_reject_probability(p, 0.05, hbar, wi) for wi in w])
            assert rate == pytest.approx(0.05, abs=4 * math.sqrt(0.05 * 0.95 / 40_000))


class TestEnvelopeCsv:
    def test_plus_table(self):
        p = LimitParams.single(LAM_HALFNORMAL)
        text = envelope_csv(p, 0.05, [0.0, 1.0, 5.0], "plus", hbar=3.0)
        lines = text.strip().split("\n")
        assert lines[0] == "h,envelope,lower_bound,branch"
        assert len(lines) == 4
        assert lines[3].endswith("saturated")
        assert all(len(line.split(",")) == 4 for line in lines)

    def test_no_bound_without_hbar(self):
        p = LimitParams.single(1.0)
        row = envelope_csv(p, 0.05, [-1.0], "minus").strip().split("\n")[1]
        assert row.split(",")[2] == ""
