"""Optimal likelihood-ratio tests for models with parameter-dependent support."""

__version__ = "0.1.0"

from .estimate import NuisanceEstimates, estimate_nuisance, known_nuisance, mle_theta, split_sample
from .limit import (
    LimitParams,
    envelope,
    envelope_minus,
    envelope_plus,
    envelope_twosided,
    lambda_benchmark,
    lambda_general,
    lower_bound_minus,
    lower_bound_plus,
    np_limit_test,
    sample_W,
)
from .lratio import LrKind, LrValue, lr_at_theta, lr_benchmark, lr_plugin
from .model import (
    CovariateModelSpec,
    ModelSpec,
    Sample,
    builtin_halfnormal_shift,
    builtin_offset_truncnormal,
    builtin_uniform_shift,
    draw_sample,
    get_model,
    toy_covariate_model,
)
from .nlr import (
    Branch,
    ConfigError,
    TestConfig,
    TestOutcome,
    confidence_set,
    hbar_minus,
    hbar_plus,
    run_test,
    test_minus,
    test_minus_general,
    test_plus,
    test_plus_general,
    test_twosided,
    test_twosided_general,
)
from .simulation import PowerStudy, Scenario, emit_csv, preset, run_comparison, run_power_study
from .wald import WaldConfig, wald_test

__all__ = [
    "Branch", "ConfigError", "CovariateModelSpec", "LimitParams", "LrKind", "LrValue", "ModelSpec",
    "NuisanceEstimates", "PowerStudy", "Sample", "Scenario", "TestConfig", "TestOutcome", "WaldConfig",
    "builtin_halfnormal_shift", "builtin_offset_truncnormal", "builtin_uniform_shift", "confidence_set",
    "draw_sample", "emit_csv", "envelope", "envelope_minus", "envelope_plus", "envelope_twosided",
    "estimate_nuisance", "get_model", "hbar_minus", "hbar_plus", "known_nuisance", "lambda_benchmark",
    "lambda_general", "lower_bound_minus", "lower_bound_plus", "lr_at_theta", "lr_benchmark", "lr_plugin",
    "mle_theta", "np_limit_test", "preset", "run_comparison", "run_power_study", "run_test", "sample_W",
    "split_sample", "test_minus", "test_minus_general", "test_plus", "test_plus_general", "test_twosided",
    "test_twosided_general", "toy_covariate_model", "wald_test",
]
