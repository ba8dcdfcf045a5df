"""Financial outputs: indifference price, static and dynamic hedges, implied
risk aversion, the Merton baseline, and a quadrature oracle for the
single-asset case."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import roots_hermite

from .errors import ModelError, NumericsError
from .factorize import FactorizedSystem, build_transform
from .field import GridField
from .market import MarketModel, build_quadratic_data, effective_drifts, sharpe_ratio
from .solver import EvolveResult, SolverConfig, evolve, readout
from .transform import CoordinateMap, from_factorized, terminal_condition, to_factorized


@dataclass
class PricingResult:
    """Top-level pricing output."""

    price: float
    alpha: np.ndarray
    pi_star: float
    phi_at_spot: float
    diagnostics: dict = dc_field(default_factory=dict)
    optimizer_trace: list = dc_field(default_factory=list)
    warning: str | None = None


@dataclass
class PipelineResult:
    """Everything one PDE solve produces; inputs to hedging and reporting."""

    price: float
    phi_at_spot: float
    field: GridField
    system: FactorizedSystem
    coord_map: CoordinateMap
    u_star: np.ndarray
    evolve_result: EvolveResult


def merton_value(x: float, tau: float, model: MarketModel) -> float:
    """Optimal-investment value function with no claim:
    ``-exp(-gamma x e^{r tau} - eta_x^2 tau / 2)``."""
    eta = sharpe_ratio(model)
    return -math.exp(-model.risk_aversion * x * math.exp(model.rate * tau) - 0.5 * eta**2 * tau)


def initial_field(
    model: MarketModel,
    fs: FactorizedSystem,
    cm: CoordinateMap,
    alpha: np.ndarray,
    cfg: SolverConfig,
) -> tuple[GridField, np.ndarray]:
    """Tensor grid around the readout point with the terminal data sampled on it.

    The grid lives in factorized coordinates; per-axis extent is
    ``u_star_k +- domain_sds * sqrt(p_k T)``. Returns the field at tau = 0
    and the readout point ``u_star = to_factorized(z_spot, T)``.
    """
    T = model.maturity
    z_spot = model.log_moneyness()
    u_star = to_factorized(z_spot, T, cm)
    nodes = cfg.nodes_for(model.n_assets)
    axes = []
    for k in range(model.n_assets):
        half = cfg.domain_sds * math.sqrt(fs.p[k] * T)
        axes.append(np.linspace(u_star[k] - half, u_star[k] + half, nodes[k]))
    grid = GridField(tuple(axes), np.ones(tuple(nodes)), tau=0.0)
    z_nodes = from_factorized(grid.node_points(), 0.0, cm)
    values = terminal_condition(z_nodes, alpha, model)
    return grid.with_values(values), u_star


def solve_pipeline(
    model: MarketModel,
    alpha: np.ndarray,
    cfg: SolverConfig,
    fs: FactorizedSystem | None = None,
    verbose: bool = False,
) -> PipelineResult:
    """factorize -> terminal condition -> evolve -> readout -> price."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.shape != (model.n_proxies,):
        raise NumericsError(f"alpha must have length {model.n_proxies}")
    if fs is None:
        A, a = build_quadratic_data(model)
        fs = build_transform(A, a)
    cm = CoordinateMap.from_model(model, fs)
    field0, u_star = initial_field(model, fs, cm, alpha, cfg)
    result = evolve(field0, fs, cfg, horizon=model.maturity, verbose=verbose)
    phi_star = readout(result.field, u_star)
    gamma = model.risk_aversion
    disc = math.exp(-model.rate * model.maturity)
    price = -disc / gamma * math.log(phi_star) + float(alpha @ model.proxy_prices)
    return PipelineResult(
        price=price,
        phi_at_spot=phi_star,
        field=result.field,
        system=fs,
        coord_map=cm,
        u_star=u_star,
        evolve_result=result,
    )


def price_given_alpha(
    model: MarketModel, alpha: np.ndarray, cfg: SolverConfig
) -> tuple[float, float]:
    """Indifference price for a fixed static hedge.

    ``g = -(1/gamma) e^{-rT} log Phi(spot) + sum_i alpha_i p_{Y,i}``.
    """
    res = solve_pipeline(model, alpha, cfg)
    return res.price, res.phi_at_spot


def dynamic_hedge(
    model: MarketModel,
    field: GridField,
    fs: FactorizedSystem,
    x: float = 0.0,
) -> float:
    """Optimal index position at t = 0 (currency invested in the index).

    ``pi* = (e^{-r tau} / gamma) [eta_x / sigma_x
           + (1/sigma_x) sum_i rho_xy_i sigma_i d(log Phi)/dz_i]``
    with the log-field gradient taken by central differences on the grid and
    rotated back through R. Exponential utility makes pi* independent of the
    cash argument x.
    """
    del x  # wealth-independent under exponential utility
    cm = CoordinateMap.from_model(model, fs)
    tau = field.tau
    z_spot = model.log_moneyness()
    u_star = to_factorized(z_spot, tau, cm)

    log_vals = np.log(field.values)
    grad_u = np.empty(field.ndim)
    for k in range(field.ndim):
        gk = np.gradient(log_vals, field.spacings[k], axis=k, edge_order=2)
        grad_u[k] = readout(field.with_values(gk), u_star)
    grad_z = fs.R @ grad_u

    eta = sharpe_ratio(model)
    gamma = model.risk_aversion
    disc = math.exp(-model.rate * tau)
    tilt = float(np.sum(model.corr_xy * model.vols * grad_z))
    return disc / gamma * (eta + tilt) / model.index_vol


def optimize_static_hedge(
    model: MarketModel,
    cfg: SolverConfig,
    alpha_init: np.ndarray | None = None,
    bounds: tuple[float, float] = (-5.0, 5.0),
    max_evals: int = 200,
    search_cfg: SolverConfig | None = None,
) -> PricingResult:
    """Maximize the price over the static hedge by derivative-free search.

    Nelder-Mead from ``alpha_init`` (default 0) inside the box ``bounds``,
    with one restart from the incumbent; every evaluation is a full PDE
    solve, so evaluations are cached on rounded alpha and the search may run
    on a coarser configuration (``search_cfg``) before the final solve is
    done at full resolution.
    """
    if model.n_proxies < 1:
        raise ModelError("static-hedge optimization needs at least one proxy")
    N = model.n_proxies
    if alpha_init is None:
        alpha_init = np.zeros(N)
    alpha_init = np.asarray(alpha_init, dtype=float)
    lo, hi = bounds
    A, a = build_quadratic_data(model)
    fs = build_transform(A, a)
    coarse = search_cfg or cfg

    cache: dict[tuple, float] = {}
    trace: list[tuple[np.ndarray, float]] = []
    evals = 0

    def objective(alpha_raw: np.ndarray) -> float:
        nonlocal evals
        alpha = np.clip(alpha_raw, lo, hi)
        penalty = 1e3 * float(np.sum((alpha_raw - alpha) ** 2))
        key = tuple(np.round(alpha, 9))
        if key not in cache:
            if evals >= max_evals:
                return np.inf
            evals += 1
            res = solve_pipeline(model, alpha, coarse, fs=fs)
            cache[key] = res.price
            trace.append((alpha.copy(), res.price))
        return -(cache[key]) + penalty

    warning = None
    best_x = alpha_init
    try:
        opt = minimize(
            objective,
            alpha_init,
            method="Nelder-Mead",
            options={"maxfev": max_evals, "xatol": 1e-4, "fatol": 1e-8},
        )
        best_x = opt.x
        restart = minimize(
            objective,
            np.clip(best_x, lo, hi),
            method="Nelder-Mead",
            options={"maxfev": max(10, max_evals - evals), "xatol": 1e-5, "fatol": 1e-9},
        )
        if restart.fun < opt.fun:
            best_x = restart.x
        if not (opt.success or restart.success):
            warning = "optimizer did not report convergence; returning best point found"
    except Exception as exc:  # pragma: no cover - scipy internals
        warning = f"optimizer aborted ({exc}); returning best cached point"

    if trace:
        cached_best = max(trace, key=lambda ag: ag[1])
        if not np.all(np.isfinite(best_x)):
            best_x = cached_best[0]
        best_cand = np.clip(best_x, lo, hi)
        if objective(best_cand) > -cached_best[1]:
            best_cand = cached_best[0]
    else:
        best_cand = np.clip(alpha_init, lo, hi)

    final = solve_pipeline(model, best_cand, cfg, fs=fs)
    pi_star = dynamic_hedge(model, final.field, fs)
    return PricingResult(
        price=final.price,
        alpha=best_cand,
        pi_star=pi_star,
        phi_at_spot=final.phi_at_spot,
        diagnostics={
            "evaluations": evals,
            "residual": fs.residual,
            "iterations": fs.iterations,
        },
        optimizer_trace=trace,
        warning=warning,
    )


def implied_gamma(
    model: MarketModel,
    observed_price: float,
    cfg: SolverConfig,
    alpha: np.ndarray | None = None,
    bracket: tuple[float, float] = (1e-3, 20.0),
    rel_tol: float = 1e-4,
) -> float:
    """Risk aversion implied by an observed price, by bracketing bisection.

    The indifference price of a bounded claim is non-increasing in gamma
    (checked empirically in tests), so a sign change over the bracket pins
    the root; prices outside the attainable range raise.
    """
    if alpha is None:
        alpha = np.zeros(model.n_proxies)
    lo, hi = bracket
    if not (0.0 < lo < hi):
        raise ModelError("gamma bracket must satisfy 0 < lo < hi")

    def g_of(gamma: float) -> float:
        m = replace(model, risk_aversion=gamma)
        return solve_pipeline(m, alpha, cfg).price

    g_lo = g_of(lo)
    g_hi = g_of(hi)
    f_lo = g_lo - observed_price
    f_hi = g_hi - observed_price
    if f_lo * f_hi > 0.0:
        raise NumericsError(
            f"observed price {observed_price} outside attainable range "
            f"[{min(g_lo, g_hi):.6f}, {max(g_lo, g_hi):.6f}] over gamma in {bracket}"
        )
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        f_mid = g_of(mid) - observed_price
        if f_lo * f_mid <= 0.0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


def single_claim_oracle(model: MarketModel, n_nodes: int = 2001) -> float:
    """Quadrature price for the N = 0 claim; independent of the PDE path.

    For a single nontraded asset with index correlation rho, the buyer's
    indifference price is
    ``-e^{-rT} / (gamma (1-rho^2)) log E[exp(-gamma (1-rho^2) min(Y_T, K))]``
    with log Y_T drifting at the effective rate muhat_0. The expectation is
    a 1-D Gauss-Hermite sum; the payoff kink caps the quadrature's
    convergence rate, so the default node count is large (error near 5e-5;
    validated against Monte-Carlo in the test suite).
    """
    if model.n_proxies != 0:
        raise ModelError("single_claim_oracle requires N = 0")
    rho = float(model.corr_xy[0])
    if abs(abs(rho) - 1.0) < 1e-12:
        raise ModelError("single_claim_oracle requires |rho| < 1")
    gamma = model.risk_aversion
    T = model.maturity
    sig = float(model.vols[0])
    _, Mbar = effective_drifts(model, T)
    z0 = float(model.log_moneyness()[0])
    K = float(model.strikes[0])

    nodes, weights = roots_hermite(max(n_nodes, 64))
    zT = z0 + Mbar[0] * T + sig * math.sqrt(T) * math.sqrt(2.0) * nodes
    payoff = K * np.exp(np.minimum(zT, 0.0))
    gg = gamma * (1.0 - rho**2)
    expectation = float(np.sum(weights / math.sqrt(math.pi) * np.exp(-gg * payoff)))
    return -math.exp(-model.rate * T) / gg * math.log(expectation)
