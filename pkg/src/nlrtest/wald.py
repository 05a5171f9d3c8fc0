"""Wald test on the MLE, whose nonstandard limit is an exponential.

``n (theta_hat - theta) -> Exp(1) / (f(g(theta)|theta) g'(theta))``, so the
``1 - alpha`` quantile is ``-log(alpha) / (f(g(theta)|theta) g'(theta))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .estimate import mle_theta
from .model import ModelSpec, Sample
from .nlr import Branch, ConfigError, TestOutcome


@dataclass(frozen=True)
class WaldConfig:
    alpha: float = 0.05
    theta0: float = 0.0
    quantile_at_mle: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")


def boundary_rate(model: ModelSpec, theta: float) -> float:
    dens = float(model.density(model.boundary(theta), theta))
    slope = float(model.boundary_slope(theta))
    if not (dens > 0 and slope > 0):
        raise ConfigError(f"degenerate boundary at theta={theta}: density {dens}, slope {slope}")
    return dens * slope


def wald_quantile(model: ModelSpec, theta: float, alpha: float) -> float:
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"alpha must lie in (0, 1], got {alpha}")
    return -math.log(alpha) / boundary_rate(model, theta)


@dataclass(frozen=True)
class WaldOutcome(TestOutcome):
    theta_hat: float = math.nan
    wald_statistic: float = math.nan
    quantile: float = math.nan


def wald_test(model: ModelSpec, sample: Sample, config: WaldConfig) -> WaldOutcome:
    """Reject when ``n (theta_hat - theta0)`` exceeds the limit quantile (one-sided, plus)."""
    theta_hat = mle_theta(model, sample)
    stat = sample.n * (theta_hat - config.theta0)
    q = wald_quantile(model, theta_hat if config.quantile_at_mle else config.theta0, config.alpha)
    reject = stat > q
    return WaldOutcome(
        statistic=None,
        branch=Branch.REJECT if reject else Branch.ACCEPT,
        reject_probability=1.0 if reject else 0.0,
        hbar_used=math.nan,
        lambda_used=1.0 / boundary_rate(model, config.theta0),
        theta_hat=theta_hat,
        wald_statistic=stat,
        quantile=q,
    )
