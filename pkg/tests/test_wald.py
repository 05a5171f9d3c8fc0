import math

import numpy as np
import pytest
from scipy import stats

from nlrtest.model import Sample
from nlrtest.nlr import Branch, ConfigError
from nlrtest.simulation import Scenario, run_comparison
from nlrtest.wald import WaldConfig, boundary_rate, wald_quantile, wald_test


class TestQuantile:
    def test_halfnormal(self, halfnormal):
        assert boundary_rate(halfnormal, 0.0) == pytest.approx(2 * stats.norm.pdf(0))
        assert wald_quantile(halfnormal, 0.0, 0.05) == pytest.approx(-math.log(0.05) * math.sqrt(math.pi / 2))

    def test_offset_model(self, offset_model):
        q = wald_quantile(offset_model, 0.0, 0.05)
        assert q == pytest.approx(-math.log(0.05) * stats.norm.sf(-1.25) / stats.norm.pdf(-1.25), rel=1e-12)

    def test_bad_alpha(self, halfnormal):
        with pytest.raises(ConfigError):
            wald_quantile(halfnormal, 0.0, 0.0)
        with pytest.raises(ConfigError):
            WaldConfig(alpha=1.5)


class TestWaldTest:
    def test_decision(self, halfnormal):
        q = wald_quantile(halfnormal, 0.0, 0.05)
        n = 10
        above = wald_test(halfnormal, Sample(np.full(n, (q + 0.5) / n)), WaldConfig())
        below = wald_test(halfnormal, Sample(np.full(n, (q - 0.5) / n)), WaldConfig())
        assert above.branch is Branch.REJECT and above.reject_probability == 1.0
        assert below.branch is Branch.ACCEPT and below.theta_hat == pytest.approx((q - 0.5) / n)

    def test_exact_finite_n_size(self, halfnormal):
        # for the half-normal the MLE is Y_(1): P{n Y_(1) > q} = (2 sf(q/n))^n
        n, R = 50, 20_000
        rng = np.random.default_rng(2)
        q = wald_quantile(halfnormal, 0.0, 0.05)
        exact = (2 * stats.norm.sf(q / n)) ** n
        rate = np.mean([wald_test(halfnormal, Sample(halfnormal.sampler(0.0, rng, n)), WaldConfig()).reject_probability
                        for _ in range(R)])
        assert abs(rate - exact) < 3 * math.sqrt(exact * (1 - exact) / R)

    def test_quantile_at_mle(self, offset_model):
        s = Sample(offset_model.sampler(0.0, np.random.default_rng(1), 20))
        a = wald_test(offset_model, s, WaldConfig(quantile_at_mle=True))
        assert a.quantile == pytest.approx(wald_quantile(offset_model, a.theta_hat, 0.05))


class TestComparison:
    def test_common_random_numbers_and_envelope(self):
        sc = Scenario(model_id="offset-truncnormal:1.25", epsilon=0.9999, n=20, h_grid=(0.0, 2.0, 5.0),
                      replications=500, master_seed=3)
        nlr, wald = run_comparison(sc)
        assert nlr.values.shape == wald.values.shape == (3, 500)
        for st in (nlr, wald):
            for row in st.rows:
                assert row.reject_rate <= row.envelope + 3 * math.sqrt(row.envelope * (1 - row.envelope) / 500)
        assert all(r.lower_bound is None for r in wald.rows)

    def test_needs_plus_side(self):
        with pytest.raises(ConfigError):
            run_comparison(Scenario(side="minus", h_grid=(0.0,), replications=5))
