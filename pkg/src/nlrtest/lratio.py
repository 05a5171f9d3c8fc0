"""Finite-sample likelihood ratios with support-indicator semantics.

``Z_n(h, hbar)`` compares the joint density at ``theta0 + hbar/n`` against the
one at ``theta0 + h/n``. Because the support moves with the parameter, the
ratio can be exactly zero (numerator off-support) or undefined (denominator
off-support); both cases are reported explicitly rather than as floats.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import CovariateModelSpec, ModelSpec, Sample


class LrKind(enum.Enum):
    VALUE = "value"
    NUMERATOR_ZERO = "numerator-zero"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class LrValue:
    kind: LrKind
    log_z: float = -math.inf

    @classmethod
    def value(cls, log_z: float) -> "LrValue":
        if log_z == -math.inf:
            return cls(LrKind.NUMERATOR_ZERO)
        return cls(LrKind.VALUE, float(log_z))

    @property
    def z(self) -> float:
        """The ratio itself; ``nan`` when indeterminate. May overflow to ``inf``."""
        if self.kind is LrKind.INDETERMINATE:
            return math.nan
        if self.kind is LrKind.NUMERATOR_ZERO:
            return 0.0
        return math.exp(self.log_z) if self.log_z < 709.0 else math.inf

    @property
    def is_indeterminate(self) -> bool:
        return self.kind is LrKind.INDETERMINATE

    @property
    def is_zero(self) -> bool:
        return self.kind is LrKind.NUMERATOR_ZERO

    def as_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.kind is LrKind.VALUE:
            d["log_z"] = self.log_z
        return d


INDETERMINATE = LrValue(LrKind.INDETERMINATE, math.nan)
NUMERATOR_ZERO = LrValue(LrKind.NUMERATOR_ZERO)


def _ratio(log_num: float, log_den: float, num_ok: bool, den_ok: bool) -> LrValue:
    if not den_ok or log_den == -math.inf:
        return INDETERMINATE
    if not num_ok or log_num == -math.inf:
        return NUMERATOR_ZERO
    return LrValue.value(log_num - log_den)


def _ratio_at(model: ModelSpec, sample: Sample, theta_num: float, theta_den: float) -> LrValue:
    if sample.min_y < model.boundary(theta_den):
        return INDETERMINATE
    # the denominator product can still vanish off a second edge (uniform upper end)
    log_den = float(np.sum(model.log_density(sample.values, theta_den)))
    if theta_num == theta_den:
        return _ratio(log_den, log_den, True, True) if log_den > -math.inf else INDETERMINATE
    if sample.min_y < model.boundary(theta_num):
        return _ratio(0.0, log_den, False, True)
    log_num = float(np.sum(model.log_density(sample.values, theta_num)))
    return _ratio(log_num, log_den, True, True)


def lr_benchmark(model: ModelSpec, sample: Sample, theta0: float, h: float, hbar: float) -> LrValue:
    """``Z_n(h, hbar)`` for the benchmark model, accumulated in log space."""
    if sample.n < 1:
        raise ValueError("empty sample")
    n = sample.n
    theta_h = theta0 + h / n
    theta_bar = theta0 + hbar / n
    if not (model.in_domain(theta_h) and model.in_domain(theta_bar)):
        raise ValueError("local parameters map outside the parameter space")
    return _ratio_at(model, sample, theta_bar, theta_h)


def lr_at_theta(model: ModelSpec, sample: Sample, theta: float, hbar: float) -> LrValue:
    """``Z_n^theta(0, hbar)``, the statistic inverted into a confidence set."""
    return lr_benchmark(model, sample, theta, 0.0, hbar)


def lr_plugin(
    model: CovariateModelSpec,
    sample: Sample,
    theta0: float,
    h: float,
    h_check: float,
    gamma_check,
) -> LrValue:
    """Plug-in ratio ``Z_n(h, h_check, gamma_check)`` with per-observation indicators."""
    if sample.x is None:
        raise ValueError("covariate model needs a sample with covariates")
    x = sample.x
    if x.size and (x.min() < 0 or x.max() >= model.n_levels):
        raise ValueError("sample contains a covariate level the model does not know")
    gamma_check = np.asarray(gamma_check, dtype=float)
    if not (np.all(np.isfinite(gamma_check)) and math.isfinite(h) and math.isfinite(h_check)):
        raise ValueError("plugged-in values must be finite")
    n = sample.n
    y = sample.values
    theta_h = theta0 + h / n
    theta_c = theta0 + h_check / n
    den_ok = bool(np.all(y >= model.boundary_array(x, theta_h)))
    if not den_ok:
        return INDETERMINATE
    log_den = float(np.sum(model.log_density(y, x, theta_h, gamma_check)))
    if h_check == h:
        return LrValue.value(0.0) if log_den > -math.inf else INDETERMINATE
    num_ok = bool(np.all(y >= model.boundary_array(x, theta_c)))
    if not num_ok:
        return _ratio(0.0, log_den, False, True)
    log_num = float(np.sum(model.log_density(y, x, theta_c, gamma_check)))
    return _ratio(log_num, log_den, True, True)


def support_violated(model, sample: Sample, theta0: float) -> bool:
    """True when some observation lies below the boundary at ``theta0``."""
    if isinstance(model, CovariateModelSpec):
        return bool(np.any(sample.values < model.boundary_array(sample.x, theta0)))
    return sample.min_y < model.boundary(theta0)
