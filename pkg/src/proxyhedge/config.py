"""Config-file ingestion and canonical emission.

The config is a YAML document with four sections: ``market``, ``solver``,
``fd``, and ``run``. Parsing validates every model invariant and reports the
offending key path; emission produces a canonical form whose parse
round-trips losslessly, and whose SHA-256 hash stamps every report.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dc_field

import numpy as np
import yaml

from .errors import ConfigError, ModelError, NumericsError
from .fdref import FDConfig
from .market import MarketModel, PiecewiseConstant
from .solver import SolverConfig


@dataclass
class BenchmarkSpec:
    dims: tuple[int, ...] = (1, 2)
    nodes: tuple[int, ...] = (128, 256, 512)
    orders: tuple[int, ...] = (4, 8)
    time_steps: tuple[int, ...] = (8,)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.nodes = tuple(int(m) for m in self.nodes)
        self.orders = tuple(int(p) for p in self.orders)
        self.time_steps = tuple(int(j) for j in self.time_steps)
        if any(d < 1 for d in self.dims):
            raise ConfigError("run.benchmark.dims: entries must be >= 1")


@dataclass
class RunOptions:
    alpha: tuple[float, ...] = ()
    optimize: bool = False
    alpha_bounds: tuple[float, float] = (-5.0, 5.0)
    max_evals: int = 200
    observed_price: float | None = None
    gamma_bracket: tuple[float, float] = (1e-3, 20.0)
    threads: int = 1
    verbose: bool = False
    benchmark: BenchmarkSpec = dc_field(default_factory=BenchmarkSpec)


@dataclass
class RunConfig:
    model: MarketModel
    solver: SolverConfig
    fd: FDConfig
    run: RunOptions
    unknown_keys: tuple[str, ...] = ()

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        return emit_config(self) == emit_config(other)


_MARKET_REQUIRED = (
    "n_proxies", "spots", "strikes", "drifts", "vols", "corr_yy", "corr_xy",
    "index_drift", "index_vol", "rate", "maturity", "risk_aversion",
)
_MARKET_OPTIONAL = ("proxy_prices",)
_SOLVER_KEYS = (
    "nodes", "time_steps", "ifgt_order", "domain_sds", "ch_guard",
    "gauss_method", "r_cluster", "pad_bandwidths", "threads", "bounds_slack",
)
_FD_KEYS = ("nodes", "time_steps", "domain_sds", "theta")
_RUN_KEYS = (
    "alpha", "optimize", "alpha_bounds", "max_evals", "observed_price",
    "gamma_bracket", "threads", "verbose", "benchmark",
)
_BENCH_KEYS = ("dims", "nodes", "orders", "time_steps")


def _section(doc: dict, name: str) -> dict:
    if name not in doc:
        raise ConfigError(f"missing section '{name}'")
    sec = doc[name]
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    return sec


def _require(sec: dict, section: str, key: str):
    if key not in sec:
        raise ConfigError(f"{section}.{key}: required field is missing")
    return sec[key]


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML config document.

    Raises :class:`ConfigError` naming the offending key and invariant;
    unknown keys are collected (not fatal) on ``RunConfig.unknown_keys``.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping with sections market/solver/fd/run")

    unknown: list[str] = []
    for sec_name in doc:
        if sec_name not in ("market", "solver", "fd", "run"):
            unknown.append(str(sec_name))

    market_sec = _section(doc, "market")
    for key in market_sec:
        if key not in _MARKET_REQUIRED + _MARKET_OPTIONAL:
            unknown.append(f"market.{key}")
    kwargs = {key: _require(market_sec, "market", key) for key in _MARKET_REQUIRED}
    if "proxy_prices" in market_sec:
        kwargs["proxy_prices"] = market_sec["proxy_prices"]
    else:
        kwargs["proxy_prices"] = [0.0] * int(kwargs["n_proxies"])
    try:
        n1 = int(kwargs["n_proxies"]) + 1
        drifts = kwargs["drifts"]
        if np.isscalar(drifts):
            drifts = [drifts] * n1
        kwargs["drifts"] = tuple(
            PiecewiseConstant.from_spec(d, float(kwargs["maturity"])) for d in drifts
        )
        model = MarketModel(**kwargs)
    except ModelError as exc:
        raise ConfigError(f"market: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"market: malformed field ({exc})") from exc

    def build(cls, sec_name: str, keys) -> object:
        sec = doc.get(sec_name, {}) or {}
        if not isinstance(sec, dict):
            raise ConfigError(f"section '{sec_name}' must be a mapping")
        for key in sec:
            if key not in keys:
                unknown.append(f"{sec_name}.{key}")
        picked = {k: sec[k] for k in keys if k in sec}
        if "nodes" in picked and isinstance(picked["nodes"], list):
            picked["nodes"] = tuple(int(m) for m in picked["nodes"])
        try:
            return cls(**picked)
        except (NumericsError, TypeError, ValueError) as exc:
            raise ConfigError(f"{sec_name}: {exc}") from exc

    solver = build(SolverConfig, "solver", _SOLVER_KEYS)
    fd = build(FDConfig, "fd", _FD_KEYS)

    run_sec = doc.get("run", {}) or {}
    if not isinstance(run_sec, dict):
        raise ConfigError("section 'run' must be a mapping")
    for key in run_sec:
        if key not in _RUN_KEYS:
            unknown.append(f"run.{key}")
    run_kwargs = {}
    for key in _RUN_KEYS:
        if key not in run_sec or run_sec[key] is None:
            continue
        value = run_sec[key]
        if key == "alpha":
            value = tuple(float(v) for v in np.atleast_1d(value))
        elif key in ("alpha_bounds", "gamma_bracket"):
            pair = tuple(float(v) for v in value)
            if len(pair) != 2 or pair[0] >= pair[1]:
                raise ConfigError(f"run.{key}: must be an increasing [lo, hi] pair")
            value = pair
        elif key == "benchmark":
            if not isinstance(value, dict):
                raise ConfigError("run.benchmark: must be a mapping")
            for bkey in value:
                if bkey not in _BENCH_KEYS:
                    unknown.append(f"run.benchmark.{bkey}")
            value = BenchmarkSpec(**{k: tuple(v) for k, v in value.items() if k in _BENCH_KEYS})
        run_kwargs[key] = value
    try:
        run = RunOptions(**run_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"run: {exc}") from exc

    if len(run.alpha) not in (0, model.n_proxies):
        raise ConfigError(
            f"run.alpha: expected {model.n_proxies} entries, got {len(run.alpha)}"
        )
    if run.alpha == () and model.n_proxies:
        run.alpha = (0.0,) * model.n_proxies

    return RunConfig(model=model, solver=solver, fd=fd, run=run, unknown_keys=tuple(unknown))


def _curve_spec(curve: PiecewiseConstant):
    if len(curve.values) == 1:
        return float(curve.values[0])
    return [[float(t), float(v)] for t, v in zip(curve.times, curve.values)]


def emit_config(cfg: RunConfig) -> str:
    """Canonical YAML emission; ``parse_config(emit_config(c)) == c``."""
    m = cfg.model
    doc = {
        "market": {
            "n_proxies": int(m.n_proxies),
            "spots": [float(v) for v in m.spots],
            "strikes": [float(v) for v in m.strikes],
            "drifts": [_curve_spec(c) for c in m.drifts],
            "vols": [float(v) for v in m.vols],
            "corr_yy": [[float(v) for v in row] for row in m.corr_yy],
            "corr_xy": [float(v) for v in m.corr_xy],
            "index_drift": float(m.index_drift),
            "index_vol": float(m.index_vol),
            "rate": float(m.rate),
            "maturity": float(m.maturity),
            "risk_aversion": float(m.risk_aversion),
            "proxy_prices": [float(v) for v in m.proxy_prices],
        },
        "solver": {
            "nodes": (
                int(cfg.solver.nodes)
                if isinstance(cfg.solver.nodes, int)
                else [int(v) for v in cfg.solver.nodes]
            ),
            "time_steps": int(cfg.solver.time_steps),
            "ifgt_order": int(cfg.solver.ifgt_order),
            "domain_sds": float(cfg.solver.domain_sds),
            "ch_guard": float(cfg.solver.ch_guard),
            "gauss_method": str(cfg.solver.gauss_method),
            "r_cluster": float(cfg.solver.r_cluster),
            "pad_bandwidths": float(cfg.solver.pad_bandwidths),
            "threads": int(cfg.solver.threads),
            "bounds_slack": float(cfg.solver.bounds_slack),
        },
        "fd": {
            "nodes": int(cfg.fd.nodes),
            "time_steps": int(cfg.fd.time_steps),
            "domain_sds": float(cfg.fd.domain_sds),
            "theta": float(cfg.fd.theta),
        },
        "run": {
            "alpha": [float(v) for v in cfg.run.alpha],
            "optimize": bool(cfg.run.optimize),
            "alpha_bounds": [float(v) for v in cfg.run.alpha_bounds],
            "max_evals": int(cfg.run.max_evals),
            "observed_price": (
                None if cfg.run.observed_price is None else float(cfg.run.observed_price)
            ),
            "gamma_bracket": [float(v) for v in cfg.run.gamma_bracket],
            "threads": int(cfg.run.threads),
            "verbose": bool(cfg.run.verbose),
            "benchmark": {
                "dims": [int(v) for v in cfg.run.benchmark.dims],
                "nodes": [int(v) for v in cfg.run.benchmark.nodes],
                "orders": [int(v) for v in cfg.run.benchmark.orders],
                "time_steps": [int(v) for v in cfg.run.benchmark.time_steps],
            },
        },
    }
    return yaml.safe_dump(doc, sort_keys=True, default_flow_style=None)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(emit_config(cfg).encode()).hexdigest()[:16]
