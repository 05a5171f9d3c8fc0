"""Auxiliary-sample estimation: splitting, nuisance MLE, plug-in scales, MLE of theta."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .limit import LimitParams
from .model import CovariateModelSpec, ModelSpec, Sample
from .nlr import hbar_minus, hbar_plus


class EstimationError(RuntimeError):
    """An estimator is undefined on the data or failed to converge."""


@dataclass(frozen=True)
class NuisanceEstimates:
    """Plug-in quantities for the general tests, all computed from one auxiliary sample."""

    gamma_check: tuple[float, ...]
    limit: LimitParams
    h_check_plus: float
    h_check_minus: float
    source_size: int
    source_seed: int | None = None
    source_indices: np.ndarray | None = None

    @property
    def lambda_check_j(self) -> tuple[float, ...]:
        return self.limit.lam_j

    @property
    def lambda_check(self) -> float:
        return self.limit.lam

    def as_dict(self) -> dict:
        return {
            "gamma_check": list(self.gamma_check),
            "lambda_check_j": list(self.lambda_check_j),
            "lambda_check": self.lambda_check,
            "h_check_plus": self.h_check_plus,
            "h_check_minus": self.h_check_minus,
            "source_size": self.source_size,
            "source_seed": self.source_seed,
        }


def split_sample(full: Sample, rule="first-half") -> tuple[Sample, Sample]:
    """Split into ``(main, aux)`` of sizes ``(floor(n/2), ceil(n/2))``.

    ``rule`` is ``"first-half"`` or an integer seed for a random permutation.
    """
    n = full.n
    if n < 2:
        raise ValueError("need at least two observations to split")
    if rule == "first-half":
        order = np.arange(n)
    elif isinstance(rule, (int, np.integer)) and not isinstance(rule, bool):
        order = np.random.default_rng(int(rule)).permutation(n)
    else:
        raise ValueError(f"unknown split rule {rule!r}")
    k = n // 2
    return full.subset(order[:k]), full.subset(order[k:])


def _gamma_loglik(model: CovariateModelSpec, aux: Sample, theta0: float):
    y, x = aux.values, aux.x

    def ll(gamma):
        return float(np.sum(model.log_density(y, x, theta0, gamma)))

    return ll


def estimate_gamma(
    model: CovariateModelSpec,
    aux: Sample,
    theta0: float,
    start=None,
    tol: float = 1e-8,
    max_sweeps: int = 50,
) -> tuple[float, ...]:
    """Maximum likelihood for ``gamma`` at ``theta0`` by cyclic coordinate search."""
    if aux.n < 1:
        raise ValueError("empty auxiliary sample")
    d = model.gamma_dim
    if d == 0:
        return ()
    if aux.x is None:
        raise ValueError("auxiliary sample carries no covariates")
    ll = _gamma_loglik(model, aux, theta0)
    gamma = np.zeros(d) if start is None else np.array(start, dtype=float)
    best = ll(gamma)
    for _ in range(max_sweeps):
        moved = 0.0
        for k in range(d):

            def obj(v, k=k):
                g = gamma.copy()
                g[k] = v
                val = ll(g)
                return -val if math.isfinite(val) else 1e300

            res = minimize_scalar(obj, bracket=(gamma[k] - 1.0, gamma[k] + 1.0), tol=tol)
            if not np.isfinite(res.x):
                raise EstimationError(f"coordinate {k} of gamma diverged")
            if -res.fun >= ll(gamma):
                moved = max(moved, abs(res.x - gamma[k]))
                gamma[k] = res.x
        current = ll(gamma)
        # near the optimum the likelihood is flat to rounding; stop on either criterion
        if moved < tol or current - best <= 1e-13 * (1.0 + abs(current)):
            return tuple(float(g) for g in gamma)
        best = current
    raise EstimationError(f"gamma search did not converge in {max_sweeps} sweeps")


def estimate_lambda_levels(model: CovariateModelSpec, aux: Sample, theta0: float, gamma_check) -> LimitParams:
    """``lam_j = 1 / (freq_j * f(g(a_j, theta0) | a_j, theta0, gamma))`` and the combined scale."""
    if aux.x is None:
        raise ValueError("auxiliary sample carries no covariates")
    L = model.n_levels
    counts = np.bincount(aux.x, minlength=L)
    if np.any(counts == 0):
        missing = [model.levels[j] for j in np.flatnonzero(counts == 0)]
        raise EstimationError(f"covariate levels {missing} absent from the auxiliary sample")
    freq = counts / aux.n
    gamma_check = np.asarray(gamma_check, dtype=float)
    dens = np.array([float(model.density(model.boundary(j, theta0), j, theta0, gamma_check)) for j in range(L)])
    if np.any(dens <= 0):
        raise EstimationError("estimated boundary density vanishes")
    G = [model.boundary_slope(j, theta0) for j in range(L)]
    return LimitParams.from_levels(G, 1.0 / (freq * dens), freq)


def select_h_check(limit_est: LimitParams, alpha: float, side: str = "plus", pi: float = 1.0, M: float = 50.0) -> float:
    """Plug-in alternative: ``lam * log(pi/alpha)`` on the plus side, ``-M`` on the minus side."""
    if side == "plus":
        return hbar_plus(limit_est, alpha, pi)
    if side == "minus":
        if pi == 1.0:
            return -float(M)
        return hbar_minus(limit_est, alpha, pi)
    raise ValueError(f"unknown side {side!r}")


def estimate_nuisance(
    model: CovariateModelSpec,
    aux: Sample,
    theta0: float,
    alpha: float,
    pi: float = 1.0,
    M: float = 50.0,
    seed: int | None = None,
) -> NuisanceEstimates:
    gamma = estimate_gamma(model, aux, theta0)
    limit = estimate_lambda_levels(model, aux, theta0, gamma)
    return NuisanceEstimates(
        gamma_check=gamma,
        limit=limit,
        h_check_plus=select_h_check(limit, alpha, "plus", pi),
        h_check_minus=-float(M),
        source_size=aux.n,
        source_seed=seed,
        source_indices=aux.indices,
    )


def known_nuisance(model: CovariateModelSpec, theta0: float, alpha: float, M: float = 50.0) -> NuisanceEstimates:
    """Estimates replaced by population values (true ``gamma`` and masses)."""
    from .limit import lambda_general

    gamma = tuple(model.gamma_true)
    limit = lambda_general(model, theta0, gamma)
    return NuisanceEstimates(
        gamma_check=gamma,
        limit=limit,
        h_check_plus=hbar_plus(limit, alpha),
        h_check_minus=-float(M),
        source_size=0,
    )


# ---------------------------------------------------------------------------
# maximum likelihood for theta in the benchmark model


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    """Golden-section maximization on ``[lo, hi]`` to absolute tolerance ``tol``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def mle_theta(model: ModelSpec, sample: Sample, tol: float = 1e-10, max_widen: int = 20) -> float:
    """Maximize the log likelihood over ``{theta : g(theta) <= Y_(1)}``.

    Golden-section search on ``[top - 10, top]`` with ``top`` the support
    edge, widened downward while the optimum sits at the lower end. The edge
    itself wins ties, which gives ``Y_(1)`` for flat likelihoods such as the
    uniform.
    """
    y = sample.values
    top = model.support_max_theta(sample.min_y)

    def ll(theta):
        v = float(np.sum(model.log_density(y, theta)))
        return -math.inf if math.isnan(v) else v

    width = 10.0
    for _ in range(max_widen):
        lo = top - width
        theta = _golden_max(ll, lo, top, tol)
        if ll(theta) == math.inf:
            raise EstimationError("likelihood is unbounded on the feasible region")
        if theta - lo > 10 * tol or ll(lo) == -math.inf:
            break
        width *= 4.0
    else:
        raise EstimationError("likelihood increases without bound as theta decreases")
    if ll(top) == math.inf:
        raise EstimationError("likelihood is unbounded at the support edge")
    if ll(top) >= ll(theta):
        return float(top)
    return _polish(ll, theta, lo, top)


def _polish(ll, theta: float, lo: float, hi: float, step: float = 1e-5) -> float:
    # the log likelihood is flat to rounding within ~1e-8 of its maximum; a
    # parabola through +/- step recovers the vertex below that floor
    if theta - step < lo or theta + step > hi:
        return theta
    f0, fm, fp = ll(theta), ll(theta - step), ll(theta + step)
    curv = fp - 2.0 * f0 + fm
    if not (math.isfinite(curv) and curv < 0):
        return theta
    shift = -0.5 * step * (fp - fm) / curv
    return theta + shift if abs(shift) <= step else theta
