"""Parametric families whose support boundary moves with the parameter.

A :class:`ModelSpec` describes ``Y ~ f(y | theta) * 1{y >= g(theta)}`` for a
scalar ``theta``. A :class:`CovariateModelSpec` adds a discrete covariate
with finitely many levels and a vector of regular nuisance parameters.

Densities are only contracted on the support ``y >= g(theta)``; the
indicator itself is handled by :mod:`nlrtest.lratio`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

SQRT2 = math.sqrt(2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ModelError(ValueError):
    """Invalid model construction or an unknown model id."""


def norm_pdf(x):
    """Standard normal density; works on scalars and arrays."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x - LOG_SQRT_2PI)
    return float(out) if out.ndim == 0 else out


def norm_logpdf(x):
    x = np.asarray(x, dtype=float)
    out = -0.5 * x * x - LOG_SQRT_2PI
    return float(out) if out.ndim == 0 else out


def norm_cdf(x: float) -> float:
    """Standard normal CDF via ``erfc``; keeps full relative accuracy in the lower tail."""
    return 0.5 * math.erfc(-x / SQRT2)


def norm_sf(x: float) -> float:
    return 0.5 * math.erfc(x / SQRT2)


@dataclass(frozen=True)
class ModelSpec:
    """A nonregular family with parameter-dependent lower support boundary.

    All callables accept numpy arrays for ``y``. ``sampler(theta, rng, size)``
    returns ``size`` iid draws from the truncated density.
    """

    name: str
    density: Callable
    log_density: Callable
    boundary: Callable[[float], float]
    boundary_slope: Callable[[float], float]
    sampler: Callable
    theta_domain: tuple[float, float] = (-math.inf, math.inf)
    boundary_inverse: Callable[[float], float] | None = None

    def in_domain(self, theta: float) -> bool:
        lo, hi = self.theta_domain
        return lo <= theta <= hi

    def support_max_theta(self, y_min: float) -> float:
        """Largest theta with ``g(theta) <= y_min``."""
        if self.boundary_inverse is not None:
            return self.boundary_inverse(y_min)
        from scipy.optimize import brentq

        lo, hi = y_min - 1.0, y_min + 1.0
        while self.boundary(lo) > y_min:
            lo -= 2 * (hi - lo)
        while self.boundary(hi) < y_min:
            hi += 2 * (hi - lo)
        return brentq(lambda t: self.boundary(t) - y_min, lo, hi, xtol=1e-14)


@dataclass(frozen=True)
class CovariateModelSpec:
    """Conditional family ``Y | X = a_j`` with discrete covariate and nuisance ``gamma``.

    Covariate values are carried as level indices ``0..L-1``; ``levels`` holds
    the labels ``a_j`` for display. ``density``/``log_density`` take
    ``(y, j, theta, gamma)`` with ``j`` a level index (scalar or array
    aligned with ``y``).
    """

    name: str
    levels: tuple
    masses: tuple[float, ...]
    density: Callable
    log_density: Callable
    boundary: Callable[[int, float], float]
    boundary_slope: Callable[[int, float], float]
    level_sampler: Callable  # (j, theta, gamma, rng, size) -> draws for level j
    gamma_dim: int = 0
    gamma_true: tuple[float, ...] = ()

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if len(self.levels) != len(m) or len(m) == 0:
            raise ModelError("levels and masses must have the same nonzero length")
        if np.any(m <= 0):
            raise ModelError("covariate masses must be strictly positive")
        if abs(m.sum() - 1.0) > 1e-12:
            raise ModelError(f"covariate masses sum to {m.sum()!r}, not 1")
        if len(self.gamma_true) not in (0, self.gamma_dim):
            raise ModelError("gamma_true has the wrong dimension")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def sampler(self, theta: float, gamma, rng: np.random.Generator, size: int = 1):
        """Draw ``size`` pairs ``(y, x)``; ``x`` holds level indices."""
        x = rng.choice(self.n_levels, size=size, p=np.asarray(self.masses))
        y = np.empty(size)
        for j in range(self.n_levels):
            idx = np.flatnonzero(x == j)
            if idx.size:
                y[idx] = self.level_sampler(j, theta, gamma, rng, idx.size)
        return y, x

    def boundary_array(self, x: np.ndarray, theta: float) -> np.ndarray:
        g = np.array([self.boundary(j, theta) for j in range(self.n_levels)])
        return g[x]


@dataclass(frozen=True)
class Sample:
    """An iid sample; ``x`` holds covariate level indices when present.

    ``indices`` records positions in the sample this one was split from, so
    that estimates built on one half can be checked for independence.
    """

    values: np.ndarray
    x: np.ndarray | None = None
    indices: np.ndarray | None = None
    min_y: float = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("a sample needs at least one observation")
        object.__setattr__(self, "values", values)
        if self.x is not None:
            x = np.asarray(self.x, dtype=int)
            if x.shape != values.shape:
                raise ValueError("covariates must align with values")
            object.__setattr__(self, "x", x)
        if self.indices is not None:
            object.__setattr__(self, "indices", np.asarray(self.indices, dtype=int))
        object.__setattr__(self, "min_y", float(values.min()))

    @property
    def n(self) -> int:
        return int(self.values.size)

    def level_minima(self, n_levels: int) -> np.ndarray:
        """Per-level minima (``inf`` where a level is absent)."""
        if self.x is None:
            raise ValueError("sample carries no covariates")
        out = np.full(n_levels, np.inf)
        np.minimum.at(out, self.x, self.values)
        return out

    def subset(self, idx) -> "Sample":
        idx = np.asarray(idx, dtype=int)
        base = self.indices if self.indices is not None else np.arange(self.n)
        return Sample(
            self.values[idx],
            None if self.x is None else self.x[idx],
            indices=base[idx],
        )


# ---------------------------------------------------------------------------
# builtin families


def builtin_halfnormal_shift() -> ModelSpec:
    """``f(y|theta) = 2 phi(y - theta)`` on ``y >= theta``."""
    log2 = math.log(2.0)

    def density(y, theta):
        return 2.0 * norm_pdf(np.asarray(y) - theta)

    def log_density(y, theta):
        return log2 + norm_logpdf(np.asarray(y) - theta)

    def sampler(theta, rng, size=1):
        return theta + np.abs(rng.standard_normal(size))

    return ModelSpec(
        name="halfnormal",
        density=density,
        log_density=log_density,
        boundary=lambda theta: theta,
        boundary_slope=lambda theta: 1.0,
        sampler=sampler,
        boundary_inverse=lambda y: y,
    )


def builtin_offset_truncnormal(offset: float) -> ModelSpec:
    """``N(theta, 1)`` restricted to ``[theta - offset, inf)``."""
    if not offset > 0:
        raise ModelError(f"offset must be positive, got {offset!r}")
    offset = float(offset)
    log_norm = math.log(norm_cdf(offset))

    def density(y, theta):
        return norm_pdf(np.asarray(y) - theta) / norm_cdf(offset)

    def log_density(y, theta):
        return norm_logpdf(np.asarray(y) - theta) - log_norm

    def sampler(theta, rng, size=1):
        # rejection from N(theta, 1); acceptance rate Phi(offset)
        out = np.empty(size)
        filled = 0
        while filled < size:
            need = size - filled
            z = rng.standard_normal(int(need / norm_cdf(offset)) + 8)
            z = z[z >= -offset][:need]
            out[filled : filled + z.size] = z
            filled += z.size
        return theta + out

    return ModelSpec(
        name=f"offset-truncnormal:{offset:g}",
        density=density,
        log_density=log_density,
        boundary=lambda theta: theta - offset,
        boundary_slope=lambda theta: 1.0,
        sampler=sampler,
        boundary_inverse=lambda y: y + offset,
    )


def builtin_uniform_shift() -> ModelSpec:
    """``U(theta, theta + 1)``.

    The density vanishes above ``theta + 1``; ``log_density`` returns ``-inf``
    there so likelihood ratios pick up the upper edge as well.
    """

    def density(y, theta):
        y = np.asarray(y, dtype=float)
        out = np.where((y >= theta) & (y <= theta + 1.0), 1.0, 0.0)
        return float(out) if out.ndim == 0 else out

    def log_density(y, theta):
        y = np.asarray(y, dtype=float)
        out = np.where(y <= theta + 1.0, 0.0, -np.inf)
        return float(out) if out.ndim == 0 else out

    def sampler(theta, rng, size=1):
        return theta + rng.random(size)

    return ModelSpec(
        name="uniform",
        density=density,
        log_density=log_density,
        boundary=lambda theta: theta,
        boundary_slope=lambda theta: 1.0,
        sampler=sampler,
        boundary_inverse=lambda y: y,
    )


def toy_covariate_model(
    boundary_densities=(0.5, 0.25),
    masses=(0.5, 0.5),
    slopes=(1.0, 1.0),
) -> CovariateModelSpec:
    """Level ``j``: ``N(G_j theta + c_j + gamma_j, 1)`` truncated to ``[G_j theta, inf)``.

    The offsets ``c_j`` solve ``phi(c)/Phi(c) = boundary_densities[j]`` so the
    boundary density at ``gamma = 0`` takes the requested value. ``gamma``
    (per-level location) is the nuisance parameter; its true value is zero.
    """
    from scipy.optimize import brentq
    from scipy.special import log_ndtr

    dens = tuple(float(d) for d in boundary_densities)
    L = len(dens)
    if not (len(masses) == len(slopes) == L):
        raise ModelError("boundary_densities, masses and slopes must align")
    if any(d <= 0 for d in dens):
        raise ModelError("boundary densities must be positive")
    # phi(c)/Phi(c) falls monotonically from +inf to 0
    offsets = np.array(
        [brentq(lambda c, d=d: norm_logpdf(c) - log_ndtr(c) - math.log(d), -30.0, 30.0, xtol=1e-14) for d in dens]
    )
    G = np.array([float(s) for s in slopes])

    def log_density(y, j, theta, gamma):
        j = np.asarray(j)
        shift = offsets[j] + np.asarray(gamma, dtype=float)[j]
        z = np.asarray(y) - G[j] * theta - shift
        # normalizer P{N(shift, 1) >= 0} does not involve theta
        out = norm_logpdf(z) - log_ndtr(shift)
        return float(out) if np.ndim(out) == 0 else out

    def density(y, j, theta, gamma):
        return np.exp(log_density(y, j, theta, gamma))

    def level_sampler(j, theta, gamma, rng, size):
        shift = float(offsets[j] + np.asarray(gamma, dtype=float)[j])
        cut = -shift
        if cut <= 0.0:
            out = np.empty(size)
            filled = 0
            while filled < size:
                z = rng.standard_normal(2 * (size - filled) + 8)
                z = z[z >= cut][: size - filled]
                out[filled : filled + z.size] = z
                filled += z.size
        else:
            from scipy.stats import truncnorm

            out = truncnorm.rvs(cut, np.inf, size=size, random_state=rng)
        return G[j] * theta + shift + out

    return CovariateModelSpec(
        name="toy-covariate",
        levels=tuple(range(1, L + 1)),
        masses=tuple(float(m) for m in masses),
        density=density,
        log_density=log_density,
        boundary=lambda j, theta: float(G[j] * theta),
        boundary_slope=lambda j, theta: float(G[j]),
        level_sampler=level_sampler,
        gamma_dim=L,
        gamma_true=(0.0,) * L,
    )


def as_covariate_model(model: ModelSpec) -> CovariateModelSpec:
    """Single-level, nuisance-free view of a benchmark model."""

    def log_density(y, j, theta, gamma):
        return model.log_density(y, theta)

    def density(y, j, theta, gamma):
        return model.density(y, theta)

    return CovariateModelSpec(
        name=model.name,
        levels=(0,),
        masses=(1.0,),
        density=density,
        log_density=log_density,
        boundary=lambda j, theta: model.boundary(theta),
        boundary_slope=lambda j, theta: model.boundary_slope(theta),
        level_sampler=lambda j, theta, gamma, rng, size: model.sampler(theta, rng, size),
    )


_BUILTINS = {
    "halfnormal": builtin_halfnormal_shift,
    "uniform": builtin_uniform_shift,
    "toy-covariate": toy_covariate_model,
}


def get_model(model_id: str):
    """Resolve ids like ``"halfnormal"``, ``"offset-truncnormal:1.25"``, ``"uniform"``."""
    key, _, arg = model_id.partition(":")
    if key == "offset-truncnormal":
        try:
            offset = float(arg) if arg else 1.25
        except ValueError:
            raise ModelError(f"bad offset in model id {model_id!r}") from None
        return builtin_offset_truncnormal(offset)
    if key in _BUILTINS and not arg:
        return _BUILTINS[key]()
    raise ModelError(f"unknown model id {model_id!r}")


def draw_sample(model, theta: float, n: int, rng: np.random.Generator, gamma=None) -> Sample:
    """Draw ``n`` iid observations at ``theta`` (and ``gamma`` for covariate models)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if isinstance(model, CovariateModelSpec):
        if gamma is None:
            gamma = model.gamma_true
        y, x = model.sampler(theta, gamma, rng, n)
        return Sample(y, x)
    if not model.in_domain(theta):
        raise ValueError(f"theta={theta} outside the parameter space")
    return Sample(model.sampler(theta, rng, n))
