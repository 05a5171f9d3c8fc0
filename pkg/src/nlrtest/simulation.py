"""Reproducible Monte Carlo power studies.

Every replication owns its generator, seeded from
``SeedSequence([master_seed, h_index, replication])``. Results are written
into per-replication slots and reduced in index order, so the output does not
depend on how many threads ran the work.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .estimate import estimate_nuisance, known_nuisance, split_sample
from .limit import (
    LimitParams,
    envelope,
    lambda_benchmark,
    lambda_general,
    lower_bound_minus,
    lower_bound_plus,
)
from .model import CovariateModelSpec, ModelError, draw_sample, get_model
from .nlr import ConfigError, TestConfig, hbar_minus, hbar_plus, run_test
from .wald import WaldConfig, wald_test

SIDES = ("plus", "minus", "two")
AGGREGATIONS = ("probability", "coin")
ESTIMATOR_POLICIES = ("known", "split")


class ScenarioError(ConfigError):
    """A scenario that cannot be run as configured."""


@dataclass(frozen=True)
class Scenario:
    """One power curve: a model, a test configuration and a grid of true local parameters.

    ``hbar_policy`` is ``"auto"`` (the optimal alternative), ``"pi:<v>"``
    (envelope inversion), ``"truncated"`` (``-M`` on the minus side) or a
    number. ``n`` is the size of the sample the test sees; under
    ``estimator_policy="split"`` a further auxiliary sample of the same size
    is drawn for the nuisance estimates.
    """

    model_id: str = "halfnormal"
    theta0: float = 0.0
    side: str = "plus"
    alpha: float = 0.05
    epsilon: float | None = None
    epsilon2: float | None = None
    epsilon3: float | None = None
    hbar_policy: str = "auto"
    M: float = 50.0
    n: int = 200
    h_grid: tuple[float, ...] = (0.0,)
    replications: int = 2000
    master_seed: int = 0
    estimator_policy: str = "split"
    aggregation: str = "probability"

    def __post_init__(self):
        object.__setattr__(self, "h_grid", tuple(float(h) for h in self.h_grid))
        if self.side not in SIDES:
            raise ScenarioError(f"side must be one of {SIDES}, got {self.side!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ScenarioError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        if self.estimator_policy not in ESTIMATOR_POLICIES:
            raise ScenarioError(f"estimator_policy must be one of {ESTIMATOR_POLICIES}")
        if not 0.0 < self.alpha < 1.0:
            raise ScenarioError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.replications < 1:
            raise ScenarioError("replications must be at least 1")
        if self.n < 1:
            raise ScenarioError("n must be at least 1")
        if not self.h_grid:
            raise ScenarioError("h_grid is empty")
        if self.side == "plus" and min(self.h_grid) < 0:
            raise ScenarioError("plus-side scenario needs h >= 0 on the whole grid")
        if self.side == "minus" and max(self.h_grid) > 0:
            raise ScenarioError("minus-side scenario needs h <= 0 on the whole grid")
        if not 0 <= self.master_seed < 2**64:
            raise ScenarioError("master_seed must be an unsigned 64-bit integer")
        parse_hbar_policy(self.hbar_policy)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def test_config(self) -> TestConfig:
        kind, value = parse_hbar_policy(self.hbar_policy)
        return TestConfig(
            alpha=self.alpha,
            epsilon=self.epsilon,
            epsilon2=self.epsilon2,
            epsilon3=self.epsilon3,
            hbar=value if kind == "value" else None,
            pi=value if kind == "pi" else None,
            M=self.M,
            minus_mode="truncated" if kind == "truncated" else "sentinel",
            randomization="coin" if self.aggregation == "coin" else "probability",
        )


def parse_hbar_policy(policy) -> tuple[str, float | None]:
    """Split a policy string into ``(kind, value)``."""
    text = str(policy).strip().lower()
    if text in ("auto", "optimal"):
        return "auto", None
    if text == "truncated":
        return "truncated", None
    if text.startswith("pi:"):
        try:
            return "pi", float(text[3:])
        except ValueError:
            raise ScenarioError(f"bad hbar policy {policy!r}") from None
    try:
        return "value", float(text)
    except ValueError:
        raise ScenarioError(f"bad hbar policy {policy!r}") from None


@dataclass(frozen=True)
class PowerRow:
    h: float
    reject_rate: float
    mc_se: float
    envelope: float
    lower_bound: float | None


@dataclass
class PowerStudy:
    scenario: Scenario
    rows: list[PowerRow]
    hbar: float
    epsilon: float | None
    limit: LimitParams
    label: str = "nlr"
    values: np.ndarray | None = field(default=None, repr=False)

    def metadata(self) -> dict:
        sc = self.scenario
        meta = {"library": f"nlrtest {__version__}", "test": self.label}
        for f in dataclasses.fields(sc):
            v = getattr(sc, f.name)
            if f.name == "h_grid":
                v = ",".join(_fmt(h) for h in v)
            meta[f.name] = _fmt(v) if isinstance(v, float) else ("" if v is None else str(v))
        meta["aggregation"] = (
            "mean of reject probabilities" if sc.aggregation == "probability" else "coin flips"
        )
        meta["lambda"] = _fmt(self.limit.lam)
        meta["hbar_resolved"] = _fmt(self.hbar)
        if _is_general(sc) and sc.estimator_policy == "split":
            meta["note"] = "hbar column is the population value; each replication used its own estimate"
        return meta

    @property
    def h(self) -> np.ndarray:
        return np.array([r.h for r in self.rows])

    @property
    def reject_rate(self) -> np.ndarray:
        return np.array([r.reject_rate for r in self.rows])

    @property
    def envelope(self) -> np.ndarray:
        return np.array([r.envelope for r in self.rows])


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".10g")
    return str(x)


def _is_general(sc: Scenario) -> bool:
    return sc.model_id.partition(":")[0] == "toy-covariate"


# ---------------------------------------------------------------------------
# seeding and thread pool


def replication_rng(master_seed: int, h_index: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, h_index, rep]))


class SeedLedger:
    """Records every ``(h_index, replication)`` key and refuses repeats (debug aid)."""

    def __init__(self):
        self._seen = set()
        self._lock = threading.Lock()

    def claim(self, key) -> None:
        with self._lock:
            if key in self._seen:
                raise RuntimeError(f"random stream {key} reused")
            self._seen.add(key)

    def __len__(self):
        return len(self._seen)


def thread_count(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("NLR_THREADS", "").strip()
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"NLR_THREADS must be an integer, got {env!r}") from None
    return max(1, int(threads))


def _debug_ledger() -> SeedLedger | None:
    return SeedLedger() if os.environ.get("NLR_DEBUG_SEEDS", "") not in ("", "0") else None


def _run_grid(sc: Scenario, replicate, n_out: int, threads: int | None, ledger: SeedLedger | None):
    """Fill ``out[k, i, r]`` with ``replicate(h_index, h, rng)[k]``."""
    H, R = len(sc.h_grid), sc.replications
    out = np.empty((n_out, H, R))

    def work(i, lo, hi):
        h = sc.h_grid[i]
        for r in range(lo, hi):
            if ledger is not None:
                ledger.claim((i, r))
            out[:, i, r] = replicate(i, h, replication_rng(sc.master_seed, i, r))

    nthreads = thread_count(threads)
    chunk = max(1, math.ceil(R / (4 * nthreads)))
    tasks = [(i, lo, min(lo + chunk, R)) for i in range(H) for lo in range(0, R, chunk)]
    if nthreads == 1:
        for t in tasks:
            work(*t)
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            for fut in [pool.submit(work, *t) for t in tasks]:
                fut.result()
    return out


# ---------------------------------------------------------------------------
# resolution of the alternative and the overlays


def _population_limit(model, sc: Scenario) -> LimitParams:
    if isinstance(model, CovariateModelSpec):
        return lambda_general(model, sc.theta0, model.gamma_true)
    return lambda_benchmark(model, sc.theta0)


def resolve_study_hbar(sc: Scenario, limit: LimitParams) -> float:
    """Alternative used on the side of the scenario, at population values."""
    kind, value = parse_hbar_policy(sc.hbar_policy)
    if sc.side == "two":
        return hbar_plus(limit, sc.alpha)
    if kind == "value":
        return value
    if sc.side == "plus":
        if kind == "truncated":
            raise ScenarioError("hbar_policy 'truncated' applies to the minus side only")
        return hbar_plus(limit, sc.alpha, 1.0 if value is None else value)
    if kind == "pi":
        return hbar_minus(limit, sc.alpha, value)
    if kind == "truncated" or _is_general(sc):
        return -sc.M
    return -math.inf


def effective_epsilon(sc: Scenario, limit: LimitParams, hbar: float) -> float | None:
    """The tuning constant the test actually applies (branch defaults filled in)."""
    if sc.epsilon is not None:
        return sc.epsilon
    if sc.side == "plus":
        p = math.exp(-hbar / limit.lam)
        return 0.9999 if sc.alpha <= p * (1 + 1e-12) else 0.01 * p
    if sc.side == "two" and _is_general(sc):
        return 0.9999
    return 0.5


def _lower_bound(sc: Scenario, limit: LimitParams, h: float, hbar: float) -> float | None:
    if sc.side == "plus":
        return lower_bound_plus(limit, sc.alpha, h, hbar)
    if sc.side == "minus":
        return lower_bound_minus(limit, sc.alpha, h, hbar)
    return None


# ---------------------------------------------------------------------------
# replication kernels


def _make_nlr_replicate(model, sc: Scenario, config: TestConfig):
    """Return ``replicate(h_index, h, rng) -> (reject value,)`` for the NLR test."""
    general = isinstance(model, CovariateModelSpec)
    fixed = known_nuisance(model, sc.theta0, sc.alpha, sc.M) if general and sc.estimator_policy == "known" else None
    kind, value = parse_hbar_policy(sc.hbar_policy)
    pi = value if kind == "pi" else 1.0

    def replicate(i, h, rng):
        theta = sc.theta0 + h / sc.n
        if general and fixed is None:
            full = draw_sample(model, theta, 2 * sc.n, rng)
            main, aux = split_sample(full, "first-half")
            est = estimate_nuisance(model, aux, sc.theta0, sc.alpha, pi=pi, M=sc.M)
        else:
            main = draw_sample(model, theta, sc.n, rng)
            est = fixed
        out = run_test(sc.side, model, main, sc.theta0, config, rng, estimates=est)
        return (_aggregate_value(out, sc),)

    return replicate


def _aggregate_value(outcome, sc: Scenario) -> float:
    if sc.aggregation == "coin":
        return float(outcome.coin)
    return float(outcome.reject_probability)


def _summarize(sc: Scenario, values: np.ndarray, limit: LimitParams, hbar: float) -> list[PowerRow]:
    rows = []
    R = sc.replications
    for i, h in enumerate(sc.h_grid):
        v = values[i]
        # fixed-order reduction: identical regardless of how the slots were filled
        rate = float(math.fsum(v) / R)
        second = float(math.fsum(v * v) / R)
        se = math.sqrt(max(second - rate * rate, 0.0) / R)
        rows.append(
            PowerRow(
                h=h,
                reject_rate=rate,
                mc_se=se,
                envelope=float(envelope(limit, sc.alpha, h, sc.side)),
                lower_bound=_lower_bound(sc, limit, h, hbar),
            )
        )
    return rows


def _prepare(sc: Scenario):
    try:
        model = get_model(sc.model_id)
    except ModelError as exc:
        raise ScenarioError(str(exc)) from None
    limit = _population_limit(model, sc)
    hbar = resolve_study_hbar(sc, limit)
    config = sc.test_config()
    if sc.side == "plus" and not hbar > 0:
        raise ScenarioError(f"plus-side scenario needs hbar > 0, got {hbar}")
    if sc.side == "minus" and not hbar < 0:
        raise ScenarioError(f"minus-side scenario needs hbar < 0, got {hbar}")
    if isinstance(model, CovariateModelSpec) and sc.side == "minus" and hbar == -math.inf:
        raise ScenarioError("the general minus-side test needs a finite hbar")
    return model, limit, hbar, config


def run_power_study(sc: Scenario, threads: int | None = None) -> PowerStudy:
    """Rejection rate of the configured NLR test at every grid point."""
    model, limit, hbar, config = _prepare(sc)
    replicate = _make_nlr_replicate(model, sc, config)
    values = _run_grid(sc, replicate, 1, threads, _debug_ledger())[0]
    return PowerStudy(
        scenario=sc,
        rows=_summarize(sc, values, limit, hbar),
        hbar=hbar,
        epsilon=effective_epsilon(sc, limit, hbar),
        limit=limit,
        values=values,
    )


def run_comparison(sc: Scenario, threads: int | None = None) -> tuple[PowerStudy, PowerStudy]:
    """NLR and Wald tests on identical samples (common random numbers)."""
    if sc.side != "plus":
        raise ScenarioError("the Wald comparison is one-sided (side=plus)")
    model, limit, hbar, config = _prepare(sc)
    if isinstance(model, CovariateModelSpec):
        raise ScenarioError("the Wald comparison needs a benchmark model")
    wcfg = WaldConfig(alpha=sc.alpha, theta0=sc.theta0)

    def replicate(i, h, rng):
        sample = draw_sample(model, sc.theta0 + h / sc.n, sc.n, rng)
        nlr = run_test("plus", model, sample, sc.theta0, config, rng)
        wald = wald_test(model, sample, wcfg)
        return _aggregate_value(nlr, sc), wald.reject_probability

    values = _run_grid(sc, replicate, 2, threads, _debug_ledger())
    eps = effective_epsilon(sc, limit, hbar)
    nlr = PowerStudy(sc, _summarize(sc, values[0], limit, hbar), hbar, eps, limit, "nlr", values[0])
    # the NLR lower bound says nothing about the Wald test
    wald_rows = [dataclasses.replace(r, lower_bound=None) for r in _summarize(sc, values[1], limit, hbar)]
    wald = PowerStudy(sc, wald_rows, hbar, eps, limit, "wald", values[1])
    return nlr, wald


# ---------------------------------------------------------------------------
# CSV output

CSV_HEADER = ("h", "reject_rate", "mc_se", "envelope", "lower_bound", "side", "epsilon", "hbar", "n", "alpha", "seed")
PAIRED_HEADER = ("h", "nlr_reject_rate", "nlr_mc_se", "wald_reject_rate", "wald_mc_se", "envelope", "n", "alpha", "seed")


def _meta_lines(study: PowerStudy, prefix: str = "") -> list[str]:
    return [f"# {prefix}{k} = {v}" for k, v in study.metadata().items()]


def power_csv(studies) -> str:
    """Render one or more studies as a single table with ``#`` metadata lines on top."""
    if isinstance(studies, PowerStudy):
        studies = [studies]
    lines = []
    for k, st in enumerate(studies):
        lines.extend(_meta_lines(st, f"[{k}] " if len(studies) > 1 else ""))
    lines.append(",".join(CSV_HEADER))
    for st in studies:
        sc = st.scenario
        for r in st.rows:
            cells = (
                _fmt(r.h), _fmt(r.reject_rate), _fmt(r.mc_se), _fmt(r.envelope),
                _fmt(r.lower_bound), sc.side, _fmt(st.epsilon), _fmt(st.hbar),
                str(sc.n), _fmt(sc.alpha), str(sc.master_seed),
            )
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def paired_csv(nlr: PowerStudy, wald: PowerStudy) -> str:
    lines = _meta_lines(nlr)
    lines.append(",".join(PAIRED_HEADER))
    sc = nlr.scenario
    for a, b in zip(nlr.rows, wald.rows):
        cells = (
            _fmt(a.h), _fmt(a.reject_rate), _fmt(a.mc_se), _fmt(b.reject_rate),
            _fmt(b.mc_se), _fmt(a.envelope), str(sc.n), _fmt(sc.alpha), str(sc.master_seed),
        )
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def emit_csv(studies, path) -> None:
    """Write :func:`power_csv` output to ``path``; I/O errors propagate."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(power_csv(studies))


def emit_paired_csv(nlr: PowerStudy, wald: PowerStudy, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(paired_csv(nlr, wald))


# ---------------------------------------------------------------------------
# config files, grids and presets


def parse_grid(text: str) -> tuple[float, ...]:
    """``"0:5:0.5"`` (inclusive) or ``"0,1,2.5"``."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ScenarioError(f"grid {text!r} must read start:stop:step")
        try:
            a, b, step = (float(p) for p in parts)
        except ValueError:
            raise ScenarioError(f"bad grid {text!r}") from None
        if step == 0 or (b - a) * step < 0:
            raise ScenarioError(f"grid step {step} does not lead from {a} to {b}")
        count = int(round((b - a) / step)) + 1
        return tuple(round(a + k * step, 12) for k in range(count))
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ScenarioError(f"bad grid {text!r}") from None


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(Scenario)}


def coerce_field(key: str, raw: str):
    """Convert a textual value to the type of Scenario field ``key``."""
    if key not in _FIELD_TYPES:
        raise ScenarioError(f"unknown scenario key {key!r}")
    raw = raw.strip()
    kind = _FIELD_TYPES[key]
    try:
        if key == "h_grid":
            return parse_grid(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "float | None":
            return None if raw.lower() in ("", "none", "default") else float(raw)
    except ValueError:
        raise ScenarioError(f"bad value {raw!r} for {key}") from None
    return raw


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ScenarioError(f"{path}:{lineno}: expected key = value")
            key = key.strip()
            out[key] = coerce_field(key, value)
    return out


EPS_GRID = (0.0, 0.2, 0.5, 0.9, 0.9999)
N_GRID = (100, 200, 500, 1000)
PLUS_GRID = parse_grid("0:5:0.5")
MINUS_GRID = parse_grid("0:-5:-0.5")


def _halfnormal(**kw) -> Scenario:
    base = dict(model_id="halfnormal", n=200, replications=2000, master_seed=20240601)
    base.update(kw)
    return Scenario(**base)


def _legal_plus_eps(hbar: float, eps: float, alpha: float = 0.05) -> float:
    """Past the optimal alternative the legal range is ``[0, exp(-hbar/lam))``; scale ``eps`` into it."""
    cap = math.exp(-hbar / lambda_benchmark(get_model("halfnormal"), 0.0).lam)
    return eps if alpha <= cap else round(eps * cap, 10)


def _eps_plus_panel(hbar: float) -> list[Scenario]:
    return [
        _halfnormal(side="plus", hbar_policy=str(hbar), epsilon=_legal_plus_eps(hbar, e), h_grid=PLUS_GRID)
        for e in EPS_GRID
    ]


def _presets() -> dict[str, list[Scenario]]:
    return {
        "fig1-upper": [_halfnormal(side="plus", epsilon=e, h_grid=PLUS_GRID) for e in EPS_GRID],
        "fig1-lower": [_halfnormal(side="minus", epsilon=e, h_grid=MINUS_GRID) for e in EPS_GRID],
        "fig-ch": [
            Scenario(
                model_id="offset-truncnormal:1.25", side="plus", epsilon=0.9999, n=20,
                h_grid=PLUS_GRID, replications=2000, master_seed=20240602,
            )
        ],
        "appendix-hbar": [
            _halfnormal(side="plus", hbar_policy=str(hb), epsilon=_legal_plus_eps(hb, 0.5), h_grid=PLUS_GRID)
            for hb in (1.0, 5.0, 7.0)
        ],
        "appendix-hbar-minus": [
            _halfnormal(side="minus", hbar_policy=str(hb), epsilon=0.5, h_grid=MINUS_GRID) for hb in (-1.0, -5.0, -7.0)
        ],
        "appendix-eps-plus": _eps_plus_panel(3.7) + _eps_plus_panel(3.8),
        "appendix-n-plus": [
            _halfnormal(side="plus", epsilon=e, n=n, h_grid=PLUS_GRID) for e in (0.1, 0.0) for n in N_GRID
        ],
        "appendix-n-minus": [
            _halfnormal(side="minus", hbar_policy="pi:0.5", epsilon=e, n=n, h_grid=MINUS_GRID)
            for e in (0.01, 0.0)
            for n in N_GRID
        ],
        "general-plus": [
            Scenario(
                model_id="toy-covariate", side="plus", epsilon=0.9999, n=200,
                h_grid=(0.0, 2.0, 4.0, 6.0, 8.0, 10.0), replications=2000, master_seed=20240603,
                estimator_policy="split",
            )
        ],
    }


PRESET_NAMES = tuple(_presets())


def preset(name: str) -> list[Scenario]:
    table = _presets()
    if name not in table:
        raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(table)}")
    return table[name]


def expand_sweeps(base: Scenario, sweeps: dict[str, tuple]) -> list[Scenario]:
    """Cartesian product of the sweep values over ``base``, in key order."""
    if not sweeps:
        return [base]
    keys = list(sweeps)
    return [base.replace(**dict(zip(keys, combo))) for combo in itertools.product(*(sweeps[k] for k in keys))]
