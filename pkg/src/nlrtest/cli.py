"""Command-line front end: ``nlrtest {test,power,envelope,cs,compare-wald}``.

Exit status is 0 on success, 2 on a configuration error (including argparse
usage errors) and 1 on any runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .estimate import estimate_nuisance, split_sample
from .limit import LimitError, envelope_csv
from .model import CovariateModelSpec, ModelError, Sample, get_model
from .nlr import ConfigError, TestConfig, confidence_set, run_test
from .simulation import (
    PRESET_NAMES,
    Scenario,
    _population_limit,
    coerce_field,
    emit_csv,
    emit_paired_csv,
    expand_sweeps,
    parse_grid,
    parse_hbar_policy,
    preset,
    read_config,
    run_comparison,
    run_power_study,
)

CONFIG_ERRORS = (ConfigError, ModelError, LimitError)


# ---------------------------------------------------------------------------
# data input


def read_data(path, model) -> Sample:
    """Observations from a CSV with a ``y`` column (and ``x`` for covariate models).

    A single unlabeled numeric column is also accepted for benchmark models.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"{path}: no data")
    try:
        float(rows[0][0])
        header, body = None, rows
    except ValueError:
        header, body = [c.strip() for c in rows[0]], rows[1:]
    if header is None:
        y = np.array([float(r[0]) for r in body])
        x = None
    else:
        if "y" not in header:
            raise ValueError(f"{path}: missing column 'y'")
        y = np.array([float(r[header.index("y")]) for r in body])
        x = [r[header.index("x")] for r in body] if "x" in header else None
    if isinstance(model, CovariateModelSpec):
        if x is None:
            raise ValueError(f"{path}: covariate model needs an 'x' column")
        lookup = {str(level): j for j, level in enumerate(model.levels)}
        try:
            x = np.array([lookup[v.strip()] for v in x], dtype=int)
        except KeyError as exc:
            raise ValueError(f"{path}: unknown covariate level {exc.args[0]!r}") from None
        return Sample(y, x)
    return Sample(y)


def _json(obj) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        if isinstance(v, dict):
            return {k: clean(u) for k, u in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(u) for u in v]
        return v

    return json.dumps(clean(obj), sort_keys=False)


# ---------------------------------------------------------------------------
# subcommands


def _test_config(args) -> TestConfig:
    kind, value = parse_hbar_policy(args.hbar)
    return TestConfig(
        alpha=args.alpha,
        epsilon=args.epsilon,
        epsilon2=args.epsilon2,
        epsilon3=args.epsilon3,
        hbar=value if kind == "value" else None,
        pi=value if kind == "pi" else None,
        M=args.M,
        minus_mode="truncated" if kind == "truncated" else "sentinel",
        randomization="coin" if args.coin else "probability",
    )


def cmd_test(args) -> int:
    model = get_model(args.model)
    config = _test_config(args)
    rng = np.random.default_rng(args.seed)
    sample = read_data(args.data, model)
    record = {}
    estimates = None
    if isinstance(model, CovariateModelSpec):
        rule = "first-half" if args.split == "first-half" else args.seed
        main, aux = split_sample(sample, rule)
        kind, value = parse_hbar_policy(args.hbar)
        estimates = estimate_nuisance(
            model, aux, args.theta0, args.alpha, pi=value if kind == "pi" else 1.0, M=args.M, seed=args.seed
        )
        sample = main
        record["estimates"] = estimates.as_dict()
    outcome = run_test(args.side, model, sample, args.theta0, config, rng, estimates=estimates)
    print(_json({**outcome.as_dict(), **record}))
    return 0


def _h_range(side: str, h_max: float, step: float) -> tuple[float, ...]:
    if not (h_max > 0 and step > 0):
        raise ConfigError("--h-max and --step must be positive")
    pos = parse_grid(f"0:{h_max}:{step}")
    if side == "plus":
        return pos
    if side == "minus":
        return tuple(-h for h in pos)
    return tuple(-h for h in reversed(pos[1:])) + pos


def cmd_envelope(args) -> int:
    model = get_model(args.model)
    if args.side not in ("plus", "minus", "two"):
        raise ConfigError(f"unknown side {args.side!r}")
    if not 0 < args.alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    limit = _population_limit(model, Scenario(model_id=args.model, theta0=args.theta0))
    hs = _h_range(args.side, args.h_max, args.step)
    text = envelope_csv(limit, args.alpha, hs, args.side, args.hbar)
    _write_text(text, args.out)
    if args.plot is not None:
        from .plotting import plot_envelope

        rows = list(csv.DictReader(text.splitlines()))
        lower = [float(r["lower_bound"]) for r in rows] if rows[0]["lower_bound"] else None
        plot_envelope(hs, [float(r["envelope"]) for r in rows], lower, _figure_path(args), args.side)
    return 0


def cmd_cs(args) -> int:
    model = get_model(args.model)
    if isinstance(model, CovariateModelSpec):
        raise ConfigError("confidence sets are implemented for benchmark models")
    sample = read_data(args.data, model)
    grid = parse_grid(args.grid)
    config = TestConfig(alpha=args.alpha, epsilon=args.epsilon, M=args.M)
    kept = confidence_set(model, sample, grid, config)
    record = {
        "alpha": args.alpha,
        "grid_size": len(grid),
        "accepted": len(kept),
        "lower": min(kept) if kept else None,
        "upper": max(kept) if kept else None,
    }
    if args.list:
        record["points"] = kept
    print(_json(record))
    return 0


def _scenarios(args) -> list[Scenario]:
    bases = preset(args.preset) if args.preset else [Scenario()]
    overrides = read_config(args.config) if args.config else {}
    for key, attr in _SCENARIO_FLAGS.items():
        v = getattr(args, attr)
        if v is not None:
            overrides[key] = coerce_field(key, str(v))
    if args.coin:
        overrides["aggregation"] = "coin"
    overrides["master_seed"] = args.seed
    sweeps = {}
    for item in args.sweep or []:
        key, sep, values = item.partition("=")
        key = key.strip()
        if not sep or not values:
            raise ConfigError(f"--sweep expects KEY=V1,V2,..., got {item!r}")
        sweeps[key] = tuple(coerce_field(key, v) for v in values.split(";" if key == "h_grid" else ","))
    out = []
    for base in bases:
        out.extend(expand_sweeps(base.replace(**overrides), sweeps))
    return out


_SCENARIO_FLAGS = {
    "model_id": "model",
    "theta0": "theta0",
    "side": "side",
    "alpha": "alpha",
    "epsilon": "epsilon",
    "epsilon2": "epsilon2",
    "epsilon3": "epsilon3",
    "hbar_policy": "hbar",
    "M": "M",
    "n": "n",
    "h_grid": "h_grid",
    "replications": "replications",
    "estimator_policy": "estimator",
}


def cmd_power(args) -> int:
    studies = [run_power_study(sc, threads=args.threads) for sc in _scenarios(args)]
    if args.out:
        emit_csv(studies, args.out)
    else:
        from .simulation import power_csv

        sys.stdout.write(power_csv(studies))
    _figures(args, lambda path: _plot_power(studies, path, args.preset))
    return 0


def cmd_compare(args) -> int:
    scenarios = _scenarios(args)
    if len(scenarios) != 1:
        raise ConfigError("compare-wald runs exactly one scenario")
    nlr, wald = run_comparison(scenarios[0], threads=args.threads)
    if args.out:
        emit_paired_csv(nlr, wald, args.out)
    else:
        from .simulation import paired_csv

        sys.stdout.write(paired_csv(nlr, wald))

    def draw(path):
        from .plotting import plot_comparison

        plot_comparison(nlr, wald, path, title=args.preset)

    _figures(args, draw)
    return 0


def _plot_power(studies, path, title):
    from .plotting import plot_power

    plot_power(studies, path, title=title)


def _figure_path(args) -> str:
    if args.plot:
        return args.plot
    if args.out:
        return os.path.splitext(args.out)[0] + ".png"
    raise ConfigError("--plot without a path needs --out")


def _figures(args, draw) -> None:
    if args.plot is not None:
        draw(_figure_path(args))
    if args.gnuplot:
        if not args.out:
            raise ConfigError("--gnuplot needs --out")
        from .plotting import gnuplot_script

        cols = ("nlr_reject_rate", "wald_reject_rate") if args.command == "compare-wald" else ("reject_rate",)
        _write_text(gnuplot_script(args.out, cols), os.path.splitext(args.out)[0] + ".gp")


def _write_text(text: str, path) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# argument parsing


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _add_test_args(p, sides=True):
    p.add_argument("--model", default="halfnormal", help="model id, e.g. halfnormal, offset-truncnormal:1.25")
    p.add_argument("--theta0", type=float, default=0.0)
    if sides:
        p.add_argument("--side", default="plus", choices=("plus", "minus", "two"))
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--M", type=float, default=50.0, help="truncation for the minus-side alternative")


def _add_study_args(p):
    p.add_argument("--preset", choices=PRESET_NAMES)
    p.add_argument("--config", help="key = value scenario file")
    p.add_argument("--model", dest="model")
    p.add_argument("--theta0", type=float)
    p.add_argument("--side", choices=("plus", "minus", "two"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--epsilon2", type=float)
    p.add_argument("--epsilon3", type=float)
    p.add_argument("--hbar", help="auto, pi:<v>, truncated or a number")
    p.add_argument("--M", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--h-grid", dest="h_grid", help="start:stop:step or comma list")
    p.add_argument("--replications", type=int)
    p.add_argument("--estimator", choices=("known", "split"))
    p.add_argument("--sweep", action="append", metavar="KEY=V1,V2", help="repeat a scenario over values")
    p.add_argument("--coin", action="store_true", help="aggregate coin flips instead of probabilities")
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--threads", type=int, default=None, help="defaults to NLR_THREADS or 1")
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.add_argument("--plot", nargs="?", const="", default=None, help="write a PNG (next to --out by default)")
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script next to --out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlrtest", description="Optimal tests for models with moving support.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run one test on a data file")
    _add_test_args(p)
    p.add_argument("--epsilon2", type=float, default=None)
    p.add_argument("--epsilon3", type=float, default=None)
    p.add_argument("--hbar", default="auto", help="auto, pi:<v>, truncated, -inf or a number")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--coin", action="store_true", help="flip the randomization coin")
    p.add_argument("--split", default="first-half", choices=("first-half", "random"))
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("power", help="Monte Carlo power curves")
    _add_study_args(p)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("compare-wald", help="NLR against Wald on common random numbers")
    _add_study_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("envelope", help="power envelope table (no randomness)")
    p.add_argument("--model", default="halfnormal")
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--side", default="plus", choices=("plus", "minus", "two"))
    p.add_argument("--h-max", dest="h_max", type=float, default=5.0)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--hbar", type=float, default=None, help="alternative for the lower-bound column")
    p.add_argument("--out")
    p.add_argument("--plot", nargs="?", const="", default=None)
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("cs", help="confidence set by inverting the two-sided test")
    _add_test_args(p, sides=False)
    p.add_argument("--data", required=True)
    p.add_argument("--grid", required=True, help="theta grid, start:stop:step or comma list")
    p.add_argument("--list", action="store_true", help="print every accepted grid point")
    p.set_defaults(func=cmd_cs)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"nlrtest: configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the exit code is the contract
        print(f"nlrtest: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
