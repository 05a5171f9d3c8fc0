"""Nonregular likelihood-ratio (NLR) tests and their inversion into confidence sets.

Each test returns a :class:`TestOutcome` carrying the rejection probability.
A coin is flipped only under ``randomization="coin"``; in that case exactly
one uniform is drawn from the caller's generator per invocation, whatever the
branch, so streams stay aligned across configurations.

Cutoffs are compared on the log scale: ``log Z`` against
``hbar/lam + log(1 +/- eps)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .limit import LimitParams, lambda_benchmark, prob_D0
from .lratio import INDETERMINATE, LrValue, lr_benchmark, lr_plugin, support_violated
from .model import CovariateModelSpec, ModelSpec, Sample

# slack for alpha vs exp(-hbar/lam) when hbar is the envelope-inverting choice
_BRANCH_TOL = 1e-12


class ConfigError(ValueError):
    """A test configuration outside the legal range."""


class Branch(enum.Enum):
    REJECT = "reject"
    RANDOMIZE = "randomize"
    ACCEPT = "accept"
    SUPPORT_VIOLATION = "support-violation"


@dataclass(frozen=True)
class TestConfig:
    """Level, tuning constants and the rule that fixes the alternative ``hbar``.

    ``hbar`` set explicitly wins; otherwise ``pi`` inverts the envelope; with
    neither, the optimal choice (``pi = 1``) is used. On the minus side the
    optimal ``hbar`` is ``-inf``: ``minus_mode="sentinel"`` applies its closed
    form and ``"truncated"`` uses ``-M`` instead.

    ``epsilon=None`` picks the branch default: 0.9999 for the band test,
    ``0.01 * exp(-hbar/lam)`` for the high-alpha branch, and 0.5 for the minus
    and two-sided tests.
    """

    __test__ = False

    alpha: float = 0.05
    epsilon: float | None = None
    epsilon2: float | None = None
    epsilon3: float | None = None
    hbar: float | None = None
    pi: float | None = None
    M: float = 50.0
    minus_mode: str = "sentinel"
    randomization: str = "probability"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        for name in ("epsilon", "epsilon2", "epsilon3"):
            eps = getattr(self, name)
            if eps is not None and not 0.0 <= eps < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {eps}")
        if not self.M > 0:
            raise ConfigError("M must be positive")
        if self.minus_mode not in ("sentinel", "truncated"):
            raise ConfigError(f"unknown minus_mode {self.minus_mode!r}")
        if self.randomization not in ("probability", "coin"):
            raise ConfigError(f"unknown randomization {self.randomization!r}")
        if self.pi is not None and self.hbar is None:
            if not self.alpha <= self.pi <= 1.0:
                raise ConfigError(f"pi must lie in [alpha, 1], got {self.pi}")


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    statistic: LrValue | None
    branch: Branch
    reject_probability: float
    hbar_used: float
    lambda_used: float
    coin: int | None = None
    statistic_minus: LrValue | None = None
    hbar_minus_used: float | None = None

    @property
    def rejected(self) -> bool | None:
        """Realized decision under a coin flip; ``None`` if only the probability is known."""
        if self.coin is not None:
            return bool(self.coin)
        if self.reject_probability in (0.0, 1.0):
            return self.reject_probability == 1.0
        return None

    def as_dict(self) -> dict:
        d = {
            "statistic": None if self.statistic is None else self.statistic.as_dict(),
            "branch": self.branch.value,
            "reject_probability": self.reject_probability,
            "coin": self.coin,
            "hbar_used": self.hbar_used,
            "lambda_used": self.lambda_used,
        }
        if self.statistic_minus is not None:
            d["statistic_minus"] = self.statistic_minus.as_dict()
            d["hbar_minus_used"] = self.hbar_minus_used
        return d


# ---------------------------------------------------------------------------
# choice of the alternative


def hbar_plus(params: LimitParams, alpha: float, pi: float = 1.0) -> float:
    """``lam * log(pi / alpha)``: the alternative where the envelope reaches ``pi``."""
    if not alpha < pi <= 1.0:
        raise ConfigError(f"pi must lie in (alpha, 1], got pi={pi}, alpha={alpha}")
    return params.lam * math.log(pi / alpha)


def hbar_minus(params: LimitParams, alpha: float, pi: float = 1.0) -> float:
    """``lam * log((1 - pi)/(1 - alpha))``; ``pi = 1`` gives ``-inf``."""
    if not alpha <= pi <= 1.0:
        raise ConfigError(f"pi must lie in [alpha, 1], got pi={pi}, alpha={alpha}")
    if pi == 1.0:
        return -math.inf
    return params.lam * math.log((1.0 - pi) / (1.0 - alpha))


def resolve_hbar(params: LimitParams, config: TestConfig, side: str) -> float:
    if side == "plus":
        if config.hbar is not None:
            hbar = float(config.hbar)
        else:
            hbar = hbar_plus(params, config.alpha, 1.0 if config.pi is None else config.pi)
        if not hbar > 0:
            raise ConfigError(f"plus-side test needs hbar > 0, got {hbar}")
        return hbar
    if side == "minus":
        if config.hbar is not None:
            hbar = float(config.hbar)
        elif config.pi is not None:
            hbar = hbar_minus(params, config.alpha, config.pi)
        else:
            hbar = -math.inf
        if hbar == -math.inf and config.minus_mode == "truncated":
            hbar = -config.M
        if not hbar < 0:
            raise ConfigError(f"minus-side test needs hbar < 0, got {hbar}")
        return hbar
    raise ConfigError(f"unknown side {side!r}")


# ---------------------------------------------------------------------------
# decision helpers


def _alpha_le(alpha: float, p: float) -> bool:
    return math.log(alpha) <= math.log(p) + _BRANCH_TOL if p > 0 else False


def _clip(prob: float) -> float:
    # alpha * exp(hbar/lam) at the optimal hbar is 1 up to rounding
    if abs(prob - 1.0) <= _BRANCH_TOL:
        return 1.0
    return min(max(prob, 0.0), 1.0)


def _band(log_t: float, eps: float, prob: float) -> tuple[Branch, float]:
    """Reject above ``1 + eps``, randomize on ``[1 - eps, 1 + eps]``, accept below (log scale)."""
    if log_t > math.log1p(eps):
        return Branch.REJECT, 1.0
    if log_t >= math.log1p(-eps):
        return Branch.RANDOMIZE, _clip(prob)
    return Branch.ACCEPT, 0.0


def _near_zero(log_t: float, eps: float, prob: float) -> tuple[Branch, float]:
    """Reject above ``eps``; randomize on ``[-eps, eps]`` (the statistic is nonnegative)."""
    cut = math.log(eps) if eps > 0 else -math.inf
    if log_t > cut:
        return Branch.REJECT, 1.0
    return Branch.RANDOMIZE, _clip(prob)


def _log_stat(lr: LrValue) -> float:
    return lr.log_z if not lr.is_zero else -math.inf


def _finish(config: TestConfig, rng, **kw) -> TestOutcome:
    out = TestOutcome(**kw)
    if config.randomization == "coin":
        if rng is None:
            raise ConfigError("coin-flip randomization needs a random generator")
        u = rng.random()
        out = replace(out, coin=int(u < out.reject_probability))
    return out


def _violation(config, rng, lam, hbar, **kw) -> TestOutcome:
    return _finish(
        config,
        rng,
        statistic=INDETERMINATE,
        branch=Branch.SUPPORT_VIOLATION,
        reject_probability=1.0,
        hbar_used=hbar,
        lambda_used=lam,
        **kw,
    )


# ---------------------------------------------------------------------------
# benchmark tests


def test_plus(model: ModelSpec, sample: Sample, theta0: float, config: TestConfig, rng=None) -> TestOutcome:
    """Test ``h = 0`` against ``h > 0`` at the alternative ``hbar > 0``."""
    params = lambda_benchmark(model, theta0)
    lam = params.lam
    hbar = resolve_hbar(params, config, "plus")
    a = hbar / lam
    p = math.exp(-a)
    low_alpha = _alpha_le(config.alpha, p)
    eps = _plus_epsilon(config.epsilon, a, low_alpha)
    if support_violated(model, sample, theta0):
        return _violation(config, rng, lam, hbar)
    lr = lr_benchmark(model, sample, theta0, 0.0, hbar)
    log_t = _log_stat(lr) - a
    if low_alpha:
        branch, prob = _band(log_t, eps, config.alpha / p)
    else:
        branch, prob = _near_zero(log_t, eps, (config.alpha - p) / (1.0 - p))
    return _finish(config, rng, statistic=lr, branch=branch, reject_probability=prob, hbar_used=hbar, lambda_used=lam)


def _plus_epsilon(eps: float | None, a: float, low_alpha: bool) -> float:
    if low_alpha:
        return 0.9999 if eps is None else eps
    cap = math.exp(-a)
    if eps is None:
        return 0.01 * cap
    if not 0.0 <= eps < cap:
        raise ConfigError(f"with alpha > exp(-hbar/lam) epsilon must lie in [0, {cap:.6g}), got {eps}")
    return eps


def test_minus(model: ModelSpec, sample: Sample, theta0: float, config: TestConfig, rng=None) -> TestOutcome:
    """Test ``h = 0`` against ``h < 0``.

    With ``hbar = -inf`` the statistic degenerates: reject on a support
    violation, otherwise reject with probability ``alpha``.
    """
    params = lambda_benchmark(model, theta0)
    lam = params.lam
    hbar = resolve_hbar(params, config, "minus")
    if support_violated(model, sample, theta0):
        return _violation(config, rng, lam, hbar)
    if hbar == -math.inf:
        return _finish(
            config, rng, statistic=None, branch=Branch.RANDOMIZE,
            reject_probability=config.alpha, hbar_used=hbar, lambda_used=lam,
        )
    eps = 0.5 if config.epsilon is None else config.epsilon
    lr = lr_benchmark(model, sample, theta0, 0.0, hbar)
    branch, prob = _band(_log_stat(lr) - hbar / lam, eps, config.alpha)
    return _finish(config, rng, statistic=lr, branch=branch, reject_probability=prob, hbar_used=hbar, lambda_used=lam)


def test_twosided(model: ModelSpec, sample: Sample, theta0: float, config: TestConfig, rng=None) -> TestOutcome:
    """Two-sided test combining the optimal plus side at level alpha and the ``-M`` side at level 0.

    Never randomizes.
    """
    params = lambda_benchmark(model, theta0)
    lam = params.lam
    h_plus = hbar_plus(params, config.alpha)
    h_minus = -config.M
    eps = 0.5 if config.epsilon is None else config.epsilon
    if support_violated(model, sample, theta0):
        return _violation(config, rng, lam, h_plus, hbar_minus_used=h_minus, statistic_minus=INDETERMINATE)
    z_plus = lr_benchmark(model, sample, theta0, 0.0, h_plus)
    z_minus = lr_benchmark(model, sample, theta0, 0.0, h_minus)
    reject = (
        _log_stat(z_plus) - h_plus / lam >= math.log1p(-eps)
        or _log_stat(z_minus) - h_minus / lam > math.log1p(eps)
    )
    return _finish(
        config, rng,
        statistic=z_plus,
        statistic_minus=z_minus,
        branch=Branch.REJECT if reject else Branch.ACCEPT,
        reject_probability=1.0 if reject else 0.0,
        hbar_used=h_plus,
        hbar_minus_used=h_minus,
        lambda_used=lam,
    )


def confidence_set(model: ModelSpec, sample: Sample, theta_grid, config: TestConfig) -> list[float]:
    """Grid points not rejected by the two-sided test (``lam`` and ``hbar`` recomputed per point)."""
    grid = [float(t) for t in theta_grid]
    if not grid:
        raise ValueError("empty theta grid")
    cfg = replace(config, randomization="probability")
    return [t for t in grid if test_twosided(model, sample, t, cfg).reject_probability == 0.0]


def run_test(side: str, model, sample, theta0, config, rng=None, estimates=None) -> TestOutcome:
    """Dispatch on ``side`` and on the model kind."""
    if isinstance(model, CovariateModelSpec):
        fn = {"plus": test_plus_general, "minus": test_minus_general, "two": test_twosided_general}
        if side not in fn:
            raise ConfigError(f"unknown side {side!r}")
        return fn[side](model, sample, theta0, estimates, config, rng)
    fn = {"plus": test_plus, "minus": test_minus, "two": test_twosided}
    if side not in fn:
        raise ConfigError(f"unknown side {side!r}")
    return fn[side](model, sample, theta0, config, rng)


# ---------------------------------------------------------------------------
# general model with covariates and estimated nuisance parameters


def p_check(limit: LimitParams, hbar: float) -> float:
    """Plug-in estimate of ``Pr{D_{0,hbar} = 1}``."""
    return prob_D0(limit, hbar)


def _check_independent(sample: Sample, estimates) -> None:
    src = getattr(estimates, "source_indices", None)
    if src is None or sample.indices is None:
        return
    if np.intersect1d(np.asarray(src), sample.indices).size:
        raise ValueError("nuisance estimates were built from observations in the main sample")


def _plus_general(model, sample, theta0, estimates, config, alpha, h, eps1, eps2):
    """Returns ``(statistic, branch, probability)`` for the plus-side general test at level ``alpha``."""
    lim = estimates.limit
    a = h / lim.lam
    p = p_check(lim, h)
    lr = lr_plugin(model, sample, theta0, 0.0, h, estimates.gamma_check)
    log_t = _log_stat(lr) - a
    if alpha > 0 and _alpha_le(alpha, p):
        return (lr,) + _band(log_t, eps1, alpha / p)
    return (lr,) + _near_zero(log_t, eps2, (alpha - p) / (1.0 - p))


def _general_eps2(eps2, cap):
    if eps2 is None:
        return 0.01 * cap
    if not 0.0 <= eps2 < cap:
        raise ConfigError(f"epsilon2 must lie in [0, {cap:.6g}), got {eps2}")
    return eps2


def test_plus_general(model: CovariateModelSpec, sample: Sample, theta0: float, estimates, config: TestConfig, rng=None) -> TestOutcome:
    """Plus-side test for the covariate model, using estimates from an independent sample."""
    _check_independent(sample, estimates)
    lim = estimates.limit
    h = float(config.hbar) if config.hbar is not None else float(estimates.h_check_plus)
    if not h > 0:
        raise ConfigError(f"plus-side test needs hbar > 0, got {h}")
    eps1 = 0.9999 if config.epsilon is None else config.epsilon
    eps2 = _general_eps2(config.epsilon2, math.exp(-h / lim.lam))
    if support_violated(model, sample, theta0):
        return _violation(config, rng, lim.lam, h)
    lr, branch, prob = _plus_general(model, sample, theta0, estimates, config, config.alpha, h, eps1, eps2)
    return _finish(config, rng, statistic=lr, branch=branch, reject_probability=prob, hbar_used=h, lambda_used=lim.lam)


def _minus_general(model, sample, theta0, estimates, alpha, h, eps):
    lim = estimates.limit
    lr = lr_plugin(model, sample, theta0, 0.0, h, estimates.gamma_check)
    prob = alpha / p_check(lim, h)
    return (lr,) + _band(_log_stat(lr) - h / lim.lam, eps, prob)


def test_minus_general(model: CovariateModelSpec, sample: Sample, theta0: float, estimates, config: TestConfig, rng=None) -> TestOutcome:
    """Minus-side test for the covariate model at ``h_check = -M`` unless ``hbar`` is given."""
    _check_independent(sample, estimates)
    lim = estimates.limit
    h = float(config.hbar) if config.hbar is not None else float(estimates.h_check_minus)
    if not (h < 0 and math.isfinite(h)):
        raise ConfigError(f"minus-side general test needs a finite hbar < 0, got {h}")
    eps = 0.5 if config.epsilon is None else config.epsilon
    if support_violated(model, sample, theta0):
        return _violation(config, rng, lim.lam, h)
    lr, branch, prob = _minus_general(model, sample, theta0, estimates, config.alpha, h, eps)
    return _finish(config, rng, statistic=lr, branch=branch, reject_probability=prob, hbar_used=h, lambda_used=lim.lam)


def test_twosided_general(model: CovariateModelSpec, sample: Sample, theta0: float, estimates, config: TestConfig, rng=None) -> TestOutcome:
    """``min(1, plus test at level alpha + minus test at level 0)``."""
    _check_independent(sample, estimates)
    lim = estimates.limit
    alpha = config.alpha
    h_plus = -lim.lam * math.log(alpha)
    h_minus = float(estimates.h_check_minus)
    eps1 = 0.9999 if config.epsilon is None else config.epsilon
    eps3 = 0.5 if config.epsilon3 is None else config.epsilon3
    # both constraints on epsilon2 coincide at the optimal hbar; enforce the tighter
    eps2 = _general_eps2(config.epsilon2, min(alpha, math.exp(-h_plus / lim.lam)))
    if support_violated(model, sample, theta0):
        return _violation(config, rng, lim.lam, h_plus, hbar_minus_used=h_minus, statistic_minus=INDETERMINATE)
    lr_p, _, prob_p = _plus_general(model, sample, theta0, estimates, config, alpha, h_plus, eps1, eps2)
    lr_m, _, prob_m = _minus_general(model, sample, theta0, estimates, 0.0, h_minus, eps3)
    prob = min(1.0, prob_p + prob_m)
    branch = Branch.REJECT if prob == 1.0 else (Branch.ACCEPT if prob == 0.0 else Branch.RANDOMIZE)
    return _finish(
        config, rng,
        statistic=lr_p, statistic_minus=lr_m, branch=branch, reject_probability=prob,
        hbar_used=h_plus, hbar_minus_used=h_minus, lambda_used=lim.lam,
    )


# keep pytest from collecting the public test functions when they are imported
for _fn in (test_plus, test_minus, test_twosided, test_plus_general, test_minus_general, test_twosided_general):
    _fn.__test__ = False
