"""Command-line front end.

Subcommands: ``price``, ``factorize``, ``benchmark``, ``implied-gamma``.
Exit codes: 0 success, 1 config error, 2 numerical failure. Reports embed
the config hash; with --threads 1 two runs of the same config produce
byte-identical reports.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .benchmark import rows_to_csv, run_benchmark
from .config import RunConfig, config_hash, parse_config
from .errors import ConfigError, ProxyHedgeError
from .factorize import build_transform, verify_factorization
from .market import build_quadratic_data
from .pricing import dynamic_hedge, implied_gamma, optimize_static_hedge, solve_pipeline


def _fmt_vector(v) -> str:
    return "[" + ", ".join(f"{x:.10g}" for x in np.atleast_1d(v)) + "]"


def _fmt_matrix(m) -> str:
    return "\n".join("    " + _fmt_vector(row) for row in np.atleast_2d(m))


def _load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _header(cfg: RunConfig, command: str) -> list[str]:
    lines = [
        f"# proxyhedge {command} report",
        f"config_hash: {config_hash(cfg)}",
    ]
    if cfg.unknown_keys:
        lines.append("warnings: unknown config keys " + ", ".join(cfg.unknown_keys))
    return lines


def _factorize_lines(cfg: RunConfig) -> tuple[list[str], object]:
    A, a = build_quadratic_data(cfg.model)
    fs = build_transform(A, a)
    report = verify_factorization(fs, A, a)
    lines = [
        "[factorization]",
        f"D: {_fmt_vector(fs.D)}",
        "R:",
        _fmt_matrix(fs.R),
        f"eigenvalues: {_fmt_vector(fs.eigenvalues)}",
        f"p: {_fmt_vector(fs.p)}",
        f"b: {_fmt_vector(fs.b)}",
        f"b0: {fs.b0:.10g}",
        f"beta: {fs.beta:.10g}",
        f"residual: {fs.residual:.6e}",
        f"iterations: {fs.iterations}",
        f"max_offdiag: {report.max_offdiag:.6e}",
        f"verification: {'pass' if report.passed else 'FAIL'}",
    ]
    return lines, fs


def cmd_factorize(cfg: RunConfig, args) -> str:
    lines = _header(cfg, "factorize")
    flines, _ = _factorize_lines(cfg)
    return "\n".join(lines + flines) + "\n"


def cmd_price(cfg: RunConfig, args) -> str:
    lines = _header(cfg, "price")
    flines, fs = _factorize_lines(cfg)
    lines += flines

    solver_cfg = replace(cfg.solver, threads=args.threads)
    model = cfg.model
    if cfg.run.optimize and model.n_proxies:
        result = optimize_static_hedge(
            model,
            solver_cfg,
            alpha_init=np.asarray(cfg.run.alpha, dtype=float),
            bounds=cfg.run.alpha_bounds,
            max_evals=cfg.run.max_evals,
        )
        alpha = result.alpha
        price = result.price
        phi = result.phi_at_spot
        pi_star = result.pi_star
        extra = [f"optimizer_evaluations: {result.diagnostics.get('evaluations', 0)}"]
        if result.warning:
            extra.append(f"warning: {result.warning}")
    else:
        alpha = np.asarray(cfg.run.alpha, dtype=float)
        res = solve_pipeline(model, alpha, solver_cfg, fs=fs, verbose=args.verbose)
        price = res.price
        phi = res.phi_at_spot
        pi_star = dynamic_hedge(model, res.field, fs)
        extra = []

    lines += [
        "[pricing]",
        f"alpha: {_fmt_vector(alpha)}",
        f"price: {price:.10g}",
        f"phi_at_spot: {phi:.10g}",
        f"pi_star: {pi_star:.10g}",
        "[grid]",
        f"nodes: {solver_cfg.nodes_for(model.n_assets)}",
        f"time_steps: {solver_cfg.time_steps}",
        f"ifgt_order: {solver_cfg.ifgt_order}",
        f"gauss_method: {solver_cfg.gauss_method}",
        f"domain_sds: {solver_cfg.domain_sds}",
    ]
    lines += extra
    return "\n".join(lines) + "\n"


def cmd_implied_gamma(cfg: RunConfig, args) -> str:
    if cfg.run.observed_price is None:
        raise ConfigError("implied-gamma requires run.observed_price")
    lines = _header(cfg, "implied-gamma")
    solver_cfg = replace(cfg.solver, threads=args.threads)
    gamma = implied_gamma(
        cfg.model,
        cfg.run.observed_price,
        solver_cfg,
        alpha=np.asarray(cfg.run.alpha, dtype=float),
        bracket=cfg.run.gamma_bracket,
    )
    lines += [
        "[implied_gamma]",
        f"observed_price: {cfg.run.observed_price:.10g}",
        f"gamma: {gamma:.10g}",
        f"bracket: {list(cfg.run.gamma_bracket)}",
    ]
    return "\n".join(lines) + "\n"


def cmd_benchmark(cfg: RunConfig, args) -> str:
    rows = run_benchmark(cfg)
    return rows_to_csv(rows, config_hash(cfg))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="proxyhedge",
        description="Indifference pricing of claims on illiquid assets with "
        "static option hedges and a dynamic index hedge.",
    )
    parser.add_argument("--version", action="version", version=f"proxyhedge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("price", "price the claim (optionally optimizing the static hedge)"),
        ("factorize", "inspect the diagonalizing transform"),
        ("benchmark", "reproduce the complexity/accuracy comparison as CSV"),
        ("implied-gamma", "invert the pricing equation for risk aversion"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="YAML config path")
        sp.add_argument("--out", default=None, help="write the report here instead of stdout")
        sp.add_argument("--verbose", action="store_true")
        sp.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    handlers = {
        "price": cmd_price,
        "factorize": cmd_factorize,
        "benchmark": cmd_benchmark,
        "implied-gamma": cmd_implied_gamma,
    }
    try:
        cfg = _load_config(args.config)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    try:
        text = handlers[args.command](cfg, args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except ProxyHedgeError as exc:
        stage = type(exc).__name__
        sys.stderr.write(f"numerical failure [{stage}]: {exc}\n")
        return 2
    _emit(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
