"""Limit experiment: shifted exponentials, envelopes and power lower bounds.

Under ``theta0 + h/n`` the likelihood ratio converges to
``exp((hbar - h)/lam) * prod_j 1{W_{h,j} > G_j hbar}`` with independent
``W_{h,j} = G_j h + lam_j * Exp(1)``. Everything here is closed form except
the samplers, and serves as the analytic oracle for :mod:`nlrtest.nlr`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .model import CovariateModelSpec, ModelSpec


class LimitError(ValueError):
    pass


@dataclass(frozen=True)
class LimitParams:
    """Scale ``lam`` of the limiting exponential and per-level ``(G_j, lam_j, mass_j)``."""

    lam: float
    G: tuple[float, ...]
    lam_j: tuple[float, ...]
    mass: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.G) == len(self.lam_j) == len(self.mass) >= 1):
            raise LimitError("per-level arrays must align")
        if not self.lam > 0 or any(l <= 0 for l in self.lam_j):
            raise LimitError("scales must be positive")

    @property
    def L(self) -> int:
        return len(self.G)

    @classmethod
    def single(cls, lam: float, slope: float = 1.0) -> "LimitParams":
        """Benchmark (one-level) parameters with scale ``lam``."""
        return cls(float(lam), (float(slope),), (float(lam) * slope,), (1.0,))

    @classmethod
    def from_levels(cls, G, lam_j, mass=None) -> "LimitParams":
        G = tuple(float(g) for g in G)
        lam_j = tuple(float(l) for l in lam_j)
        mass = tuple(float(m) for m in mass) if mass is not None else (1.0 / len(G),) * len(G)
        total = sum(g / l for g, l in zip(G, lam_j))
        if not total > 0:
            raise LimitError("sum of G_j / lam_j must be positive")
        return cls(1.0 / total, G, lam_j, mass)


def lambda_benchmark(model: ModelSpec, theta0: float) -> LimitParams:
    """``lam = 1 / (f(g(theta0) | theta0) * g'(theta0))``."""
    if not model.in_domain(theta0):
        raise LimitError(f"theta0={theta0} outside the parameter space")
    dens = float(model.density(model.boundary(theta0), theta0))
    slope = float(model.boundary_slope(theta0))
    if not dens > 0 or not slope > 0:
        raise LimitError(f"boundary density {dens} and slope {slope} must be positive")
    lam = 1.0 / (dens * slope)
    return LimitParams(lam, (slope,), (1.0 / dens,), (1.0,))


def lambda_from_levels(G, boundary_density, mass) -> LimitParams:
    """``lam_j = 1/(mass_j * f_j)`` and ``lam = (sum_j G_j / lam_j)^-1``."""
    dens = np.asarray(boundary_density, dtype=float)
    mass = np.asarray(mass, dtype=float)
    if np.any(mass <= 0):
        raise LimitError("covariate masses must be positive")
    if np.any(dens <= 0):
        raise LimitError("boundary density vanishes at some level")
    lam_j = 1.0 / (mass * dens)
    return LimitParams.from_levels(G, lam_j, mass)


def lambda_general(model: CovariateModelSpec, theta0: float, gamma) -> LimitParams:
    gamma = np.asarray(gamma, dtype=float)
    L = model.n_levels
    G = [model.boundary_slope(j, theta0) for j in range(L)]
    dens = [float(model.density(model.boundary(j, theta0), j, theta0, gamma)) for j in range(L)]
    return lambda_from_levels(G, dens, model.masses)


# ---------------------------------------------------------------------------
# limit experiment draws and likelihood ratio


def sample_W(params: LimitParams, h: float, rng: np.random.Generator, size: int | None = None):
    """Draw ``W_{h,j} = G_j h + lam_j Exp(1)``; shape ``(L,)`` or ``(size, L)``."""
    G = np.asarray(params.G)
    lam_j = np.asarray(params.lam_j)
    shape = (params.L,) if size is None else (size, params.L)
    return G * h + lam_j * rng.standard_exponential(shape)


def limit_indicator(params: LimitParams, hbar: float, w) -> np.ndarray:
    """``D = prod_j 1{w_j > G_j hbar}``, vectorized over leading axes of ``w``."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != params.L:
        raise LimitError(f"w has {w.shape[-1]} components, expected {params.L}")
    return np.all(w > np.asarray(params.G) * hbar, axis=-1)


def limit_lr(params: LimitParams, h: float, hbar: float, w):
    """``exp((hbar - h)/lam) * D_{h,hbar}``."""
    d = limit_indicator(params, hbar, w)
    out = math.exp((hbar - h) / params.lam) * d
    return float(out) if np.ndim(out) == 0 else out


def prob_D0(params: LimitParams, hbar: float) -> float:
    """``Pr{D_{0,hbar} = 1} = exp(sum_j min(-G_j hbar, 0) / lam_j)``."""
    return math.exp(_expsum(params, lambda g: min(-g * hbar, 0.0)))


def _expsum(params: LimitParams, term) -> float:
    return sum(term(g) / l for g, l in zip(params.G, params.lam_j))


# ---------------------------------------------------------------------------
# envelopes


def envelope_plus(params: LimitParams, alpha: float, h):
    """``min(alpha e^{h/lam}, 1)`` for ``h >= 0``."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise LimitError("envelope_plus is defined for h >= 0")
    # saturate in log space so large h does not overflow
    out = np.where(np.log(alpha) + h / params.lam >= 0.0, 1.0, alpha * np.exp(np.minimum(h / params.lam, 700.0)))
    return float(out) if out.ndim == 0 else out


def envelope_minus(params: LimitParams, alpha: float, h):
    """``1 - (1 - alpha) e^{h/lam}`` for ``h <= 0``."""
    h = np.asarray(h, dtype=float)
    if np.any(h > 0):
        raise LimitError("envelope_minus is defined for h <= 0")
    out = 1.0 - (1.0 - alpha) * np.exp(h / params.lam)
    return float(out) if out.ndim == 0 else out


def envelope_twosided(params: LimitParams, alpha: float, h):
    h = np.asarray(h, dtype=float)
    pos = envelope_plus(params, alpha, np.maximum(h, 0.0))
    neg = envelope_minus(params, alpha, np.minimum(h, 0.0))
    out = np.where(h >= 0, pos, neg)
    return float(out) if out.ndim == 0 else out


def envelope(params: LimitParams, alpha: float, h, side: str):
    if side == "plus":
        return envelope_plus(params, alpha, h)
    if side == "minus":
        return envelope_minus(params, alpha, h)
    if side == "two":
        return envelope_twosided(params, alpha, h)
    raise LimitError(f"unknown side {side!r}")


# ---------------------------------------------------------------------------
# power lower bounds of the NLR test built at hbar when the truth is h


def lower_bound_plus_benchmark(lam: float, alpha: float, h: float, hbar: float) -> float:
    p = math.exp(-hbar / lam)
    if alpha <= p:
        return alpha * math.exp(min(h, hbar) / lam)
    return (alpha - p) / (1.0 - p) + min(math.exp((h - hbar) / lam), 1.0) * (1.0 - alpha) / (1.0 - p)


def lower_bound_plus_general(params: LimitParams, alpha: float, h: float, hbar: float) -> float:
    """Exp-sum form, valid for any sign of ``G_j``."""
    e = lambda f: math.exp(_expsum(params, f))
    a = e(lambda g: min(g * (h - hbar), 0.0))
    b = e(lambda g: min(g * (h - hbar), g * h, 0.0))
    p = prob_D0(params, hbar)
    if alpha <= p:
        c = e(lambda g: min(g * h, max(g, 0.0) * hbar))
        return a - b + alpha * c
    c = e(lambda g: min(g * h, 0.0))
    return a + (alpha - p) / (1.0 - p) * (c - b)


def lower_bound_plus(params: LimitParams, alpha: float, h: float, hbar: float) -> float:
    if h < 0 or hbar <= 0:
        raise LimitError("lower_bound_plus needs h >= 0 and hbar > 0")
    if params.L == 1:
        return lower_bound_plus_benchmark(params.lam, alpha, h, hbar)
    return lower_bound_plus_general(params, alpha, h, hbar)


def lower_bound_minus_benchmark(lam: float, alpha: float, h: float, hbar: float) -> float:
    if hbar == -math.inf:
        return 1.0 - (1.0 - alpha) * math.exp(h / lam)
    return min(math.exp((h - hbar) / lam), 1.0) - (1.0 - alpha) * math.exp(h / lam)


def lower_bound_minus_general(params: LimitParams, alpha: float, h: float, hbar: float) -> float:
    e = lambda f: math.exp(_expsum(params, f))
    a = e(lambda g: min(g * (h - hbar), 0.0))
    b = e(lambda g: min(g * (h - hbar), g * h, 0.0))
    c = e(lambda g: min(g * h, min(g, 0.0) * hbar))
    return a - b + alpha * c


def lower_bound_minus(params: LimitParams, alpha: float, h: float, hbar: float) -> float:
    if h > 0 or hbar >= 0:
        raise LimitError("lower_bound_minus needs h <= 0 and hbar < 0")
    if params.L == 1 or hbar == -math.inf:
        return lower_bound_minus_benchmark(params.lam, alpha, h, hbar)
    return lower_bound_minus_general(params, alpha, h, hbar)


# ---------------------------------------------------------------------------
# Neyman-Pearson test of the limit experiment


def np_limit_test(params: LimitParams, alpha: float, hbar: float, w, rng: np.random.Generator) -> int:
    """Randomized most powerful test of ``h = 0`` against ``h = hbar`` given one draw ``w``.

    Consumes exactly one uniform from ``rng``. Equality branches are read off
    the indicator structure, never from float comparison of likelihood ratios.
    """
    p_reject = np_limit_reject_probability(params, alpha, hbar, w)
    u = rng.random()
    return int(u < p_reject)


def np_limit_reject_probability(params: LimitParams, alpha: float, hbar: float, w) -> float:
    w = np.asarray(w, dtype=float)
    G = np.asarray(params.G)
    if w.shape != (params.L,):
        raise LimitError(f"w must have shape ({params.L},)")
    if np.any(w <= 0.0):
        # outside the null support: likelihood ratio is infinite
        return 1.0
    d = bool(np.all(w > G * hbar))
    if hbar > 0:
        p = prob_D0(params, hbar)
        if alpha <= p:
            return alpha / p if d else 0.0
        return 1.0 if d else (alpha - p) / (1.0 - p)
    if hbar < 0:
        return alpha
    raise LimitError("hbar must be nonzero")


def envelope_csv(params: LimitParams, alpha: float, hs, side: str, hbar: float | None = None) -> str:
    """Envelope table with columns ``h, envelope, lower_bound, branch``."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["h", "envelope", "lower_bound", "branch"])
    for h in hs:
        h = float(h)
        env = float(envelope(params, alpha, h, side))
        lb = ""
        if side == "plus":
            branch = "randomized" if alpha <= math.exp(-h / params.lam) else "saturated"
            if hbar is not None and hbar > 0:
                lb = f"{lower_bound_plus(params, alpha, h, hbar):.10g}"
        elif side == "minus":
            branch = "minus"
            if hbar is not None and hbar < 0:
                lb = f"{lower_bound_minus(params, alpha, h, hbar):.10g}"
        else:
            branch = "plus" if h > 0 else ("minus" if h < 0 else "null")
        wr.writerow([f"{h:.10g}", f"{env:.10g}", lb, branch])
    return buf.getvalue()
