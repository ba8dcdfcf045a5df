import math
from dataclasses import replace

import numpy as np
import pytest

from proxyhedge import (
    MarketModel,
    ModelError,
    NumericsError,
    SolverConfig,
    build_quadratic_data,
    build_transform,
    dynamic_hedge,
    implied_gamma,
    merton_value,
    optimize_static_hedge,
    price_given_alpha,
    sharpe_ratio,
    single_claim_oracle,
    solve_pipeline,
)
from proxyhedge.factorize import FactorizedSystem
from proxyhedge.market import effective_drifts

from conftest import single_asset_model, two_asset_model

FAST = SolverConfig(nodes=193, time_steps=12, gauss_method="ifgt")


def fair_proxy_price(model_1d: MarketModel) -> float:
    """Discounted drift-adjusted expectation of the capped payoff, computed
    by exact kink-split quadrature; the no-incentive proxy price."""
    from scipy.integrate import quad
    from scipy.stats import norm

    _, Mbar = effective_drifts(model_1d, model_1d.maturity)
    T = model_1d.maturity
    mu = float(model_1d.log_moneyness()[0]) + Mbar[0] * T
    s = float(model_1d.vols[0]) * math.sqrt(T)
    K = float(model_1d.strikes[0])
    flat = K * (1.0 - norm.cdf(-mu / s))
    tail, _ = quad(
        lambda z: norm.pdf(z, mu, s) * K * math.exp(z), mu - 14 * s, 0.0, limit=200
    )
    return math.exp(-model_1d.rate * T) * (flat + tail)


class TestMerton:
    def test_zero_cash_zero_sharpe(self):
        m = single_asset_model()
        m = replace(m, index_drift=m.rate)
        assert merton_value(0.0, 1.0, m) == pytest.approx(-1.0, abs=1e-15)

    def test_unit_exponent(self):
        m = single_asset_model(gamma=0.5, rate=0.0)
        m = replace(m, index_drift=m.rate)
        # gamma * x * e^{r tau} = 1
        assert merton_value(2.0, 1.0, m) == pytest.approx(-math.exp(-1.0), rel=1e-14)

    def test_monotone_in_wealth(self):
        m = single_asset_model()
        values = [merton_value(x, 0.7, m) for x in np.linspace(-1, 3, 9)]
        assert np.all(np.diff(values) > 0)


class TestPriceGivenAlpha:
    def test_vanishing_payoff_prices_to_zero(self):
        m = single_asset_model(strike=1e-12)
        # the direct kernel preserves constants exactly
        g, phi = price_given_alpha(m, np.zeros(0), replace(FAST, gauss_method="direct"))
        assert abs(g) < 1e-10
        assert phi == pytest.approx(1.0, abs=1e-10)
        # the fast transform adds only its truncation error
        g_fast, _ = price_given_alpha(m, np.zeros(0), FAST)
        assert abs(g_fast) < 1e-6

    def test_uncorrelated_single_claim_matches_oracle(self):
        m = single_asset_model(gamma=0.5, rho=0.0)
        g, _ = price_given_alpha(m, np.zeros(0), FAST)
        oracle = single_claim_oracle(m)
        assert g == pytest.approx(oracle, rel=1e-2)

    def test_near_perfect_hedge_price(self):
        proxy = single_asset_model(gamma=0.5, rho=0.3, mu=0.06, rate=0.0)
        proxy = replace(proxy, index_drift=0.05)
        p_y = single_claim_oracle(proxy)
        m = MarketModel(
            n_proxies=1,
            spots=[1.0, 1.0],
            strikes=[1.0, 1.0],
            drifts=(0.06, 0.06),
            vols=[0.3, 0.3],
            corr_yy=[[1.0, 0.999], [0.999, 1.0]],
            corr_xy=[0.3, 0.3],
            index_drift=0.05,
            index_vol=0.25,
            rate=0.0,
            maturity=1.0,
            risk_aversion=0.5,
            proxy_prices=[p_y],
        )
        cfg = SolverConfig(nodes=81, time_steps=8, gauss_method="ifgt")
        g, _ = price_given_alpha(m, np.array([1.0]), cfg)
        assert abs(g - p_y) / p_y < 0.05


class TestDynamicHedge:
    def test_constant_field_gives_merton_demand(self):
        m = single_asset_model(strike=1e-12)  # payoff ~ 0 so the field is flat
        res = solve_pipeline(m, np.zeros(0), FAST)
        pi = dynamic_hedge(m, res.field, res.system)
        eta = sharpe_ratio(m)
        merton = math.exp(-m.rate * m.maturity) * eta / (m.risk_aversion * m.index_vol)
        assert pi == pytest.approx(merton, rel=1e-6)

    def test_zero_sharpe_zero_correlation(self):
        m = single_asset_model(rho=0.0)
        m = replace(m, index_drift=m.rate)
        res = solve_pipeline(m, np.zeros(0), FAST)
        assert dynamic_hedge(m, res.field, res.system) == pytest.approx(0.0, abs=1e-12)

    def test_inverse_proportional_to_risk_aversion(self):
        # pi* scales as 1/gamma when the field (hence log-gradient) is fixed
        m1 = single_asset_model(gamma=0.5)
        res = solve_pipeline(m1, np.zeros(0), FAST)
        pi1 = dynamic_hedge(m1, res.field, res.system)
        m2 = replace(m1, risk_aversion=1.0)
        pi2 = dynamic_hedge(m2, res.field, res.system)
        assert pi2 == pytest.approx(0.5 * pi1, rel=1e-12)


class TestSingleClaimOracle:
    def test_rho_zero_is_certainty_equivalent(self):
        # formula specialization: at rho = 0 the price is the plain
        # exponential certainty equivalent; reference by kink-split quadrature
        from scipy.integrate import quad
        from scipy.stats import norm

        m = single_asset_model(gamma=0.8, rho=0.0)
        _, Mbar = effective_drifts(m, m.maturity)
        mu, s = Mbar[0], 0.3
        flat = math.exp(-0.8) * (1.0 - norm.cdf(-mu / s))
        tail, _ = quad(
            lambda z: norm.pdf(z, mu, s) * math.exp(-0.8 * math.exp(z)),
            mu - 14 * s,
            0.0,
            limit=200,
        )
        ce = -math.exp(-m.rate) / 0.8 * math.log(flat + tail)
        assert single_claim_oracle(m) == pytest.approx(ce, rel=1e-4)

    def test_small_gamma_limit_is_discounted_expectation(self):
        # tolerance reflects the oracle's kink-limited quadrature accuracy
        m = single_asset_model(gamma=1e-9, rho=0.5)
        expect = fair_proxy_price(m)
        assert single_claim_oracle(m) == pytest.approx(expect, rel=2e-4)

    def test_monte_carlo_validation(self, rng):
        # the quadrature oracle must agree with a 10^6-path simulation of the
        # same expectation within 3 standard errors
        for gamma, rho in ((0.5, 0.5), (2.0, 0.9)):
            m = single_asset_model(gamma=gamma, rho=rho)
            _, Mbar = effective_drifts(m, m.maturity)
            sig, T = float(m.vols[0]), m.maturity
            z0 = float(m.log_moneyness()[0])
            n_paths = 1_000_000
            zT = z0 + Mbar[0] * T + sig * math.sqrt(T) * rng.standard_normal(n_paths)
            payoff = m.strikes[0] * np.exp(np.minimum(zT, 0.0))
            gg = gamma * (1.0 - rho**2)
            samples = np.exp(-gg * payoff)
            est = samples.mean()
            se = samples.std(ddof=1) / math.sqrt(n_paths)
            # map the 3-sigma band through the log transform
            disc = math.exp(-m.rate * T)
            lo = -disc / gg * math.log(est + 3 * se)
            hi = -disc / gg * math.log(est - 3 * se)
            assert lo <= single_claim_oracle(m) <= hi

    def test_requires_single_asset(self):
        with pytest.raises(ModelError):
            single_claim_oracle(two_asset_model())

    def test_perfect_correlation_rejected(self):
        m = single_asset_model(rho=1.0)
        with pytest.raises(ModelError):
            single_claim_oracle(m)


class TestOracleAgreementAcrossParameters:
    @pytest.mark.parametrize("gamma", [0.1, 0.5, 2.0])
    @pytest.mark.parametrize("rho", [0.0, 0.5, 0.9])
    def test_pipeline_matches_oracle(self, gamma, rho):
        m = single_asset_model(gamma=gamma, rho=rho)
        cfg = SolverConfig(nodes=257, time_steps=16, gauss_method="ifgt")
        res = solve_pipeline(m, np.zeros(0), cfg)
        oracle = single_claim_oracle(m)
        assert abs(res.price - oracle) / abs(oracle) < 1e-2


class TestOptimizer:
    def test_near_identical_proxy_hedges_fully(self):
        m = MarketModel(
            n_proxies=1,
            spots=[1.0, 1.0],
            strikes=[1.0, 1.0],
            drifts=(0.05, 0.05),
            vols=[0.3, 0.3],
            corr_yy=[[1.0, 0.999], [0.999, 1.0]],
            corr_xy=[0.3, 0.3],
            index_drift=0.04,
            index_vol=0.25,
            rate=0.0,
            maturity=1.0,
            risk_aversion=2.0,
            proxy_prices=[0.0],
        )
        proxy = single_asset_model(gamma=1.0, rho=0.3, mu=0.05, rate=0.0)
        proxy = replace(proxy, index_drift=0.04)
        p_fair = fair_proxy_price(proxy)
        m = replace(m, proxy_prices=np.array([p_fair]))
        cfg = SolverConfig(nodes=81, time_steps=8, gauss_method="ifgt")
        res = optimize_static_hedge(m, cfg, max_evals=80)
        assert 0.95 <= res.alpha[0] <= 1.05
        assert res.price == pytest.approx(p_fair, rel=0.05)

    def test_useless_fairly_priced_proxy_is_ignored(self):
        m = MarketModel(
            n_proxies=1,
            spots=[1.0, 1.0],
            strikes=[1.0, 1.0],
            drifts=(0.05, 0.05),
            vols=[0.3, 0.25],
            corr_yy=np.eye(2),
            corr_xy=[0.3, 0.0],
            index_drift=0.04,
            index_vol=0.25,
            rate=0.0,
            maturity=1.0,
            risk_aversion=0.5,
            proxy_prices=[0.0],
        )
        proxy = single_asset_model(gamma=1.0, rho=0.0, mu=0.05, sigma=0.25, rate=0.0)
        p_fair = fair_proxy_price(proxy)
        m = replace(m, proxy_prices=np.array([p_fair]))
        cfg = SolverConfig(nodes=61, time_steps=8, gauss_method="ifgt")
        res = optimize_static_hedge(m, cfg, max_evals=60)
        assert -0.05 <= res.alpha[0] <= 0.05

    def test_beats_grid_search(self):
        m = two_asset_model(gamma=0.5, proxy_price=0.85)
        cfg = SolverConfig(nodes=49, time_steps=6, gauss_method="ifgt")
        res = optimize_static_hedge(m, cfg, max_evals=80)
        A, a = build_quadratic_data(m)
        fs = build_transform(A, a)
        grid_best = max(
            solve_pipeline(m, np.array([x]), cfg, fs=fs).price
            for x in np.linspace(-1.0, 1.0, 11)
        )
        assert grid_best <= res.price + 1e-4

    def test_requires_proxies(self):
        with pytest.raises(ModelError):
            optimize_static_hedge(single_asset_model(), FAST)


class TestImpliedGamma:
    CFG = SolverConfig(nodes=193, time_steps=12, gauss_method="ifgt")

    def test_round_trip(self):
        m = single_asset_model(gamma=0.5, rho=0.5)
        g_obs = solve_pipeline(m, np.zeros(0), self.CFG).price
        gamma = implied_gamma(m, g_obs, self.CFG, bracket=(0.05, 5.0))
        assert 0.4995 <= gamma <= 0.5005

    def test_price_above_range_rejected(self):
        m = single_asset_model(gamma=0.5, rho=0.5)
        with pytest.raises(NumericsError, match="outside attainable"):
            implied_gamma(m, 5.0, self.CFG, bracket=(0.05, 5.0))

    def test_lower_price_implies_larger_gamma(self):
        m = single_asset_model(gamma=0.5, rho=0.5)
        g1 = solve_pipeline(replace(m, risk_aversion=0.4), np.zeros(0), self.CFG).price
        g2 = solve_pipeline(replace(m, risk_aversion=1.6), np.zeros(0), self.CFG).price
        assert g2 < g1
        gamma1 = implied_gamma(m, g1, self.CFG, bracket=(0.05, 5.0))
        gamma2 = implied_gamma(m, g2, self.CFG, bracket=(0.05, 5.0))
        assert gamma2 > gamma1


class TestPriceProperties:
    def test_monotone_in_gamma(self):
        m = single_asset_model(rho=0.5)
        cfg = SolverConfig(nodes=129, time_steps=8, gauss_method="ifgt")
        prices = [
            solve_pipeline(replace(m, risk_aversion=g), np.zeros(0), cfg).price
            for g in (0.1, 0.3, 0.8, 2.0, 5.0)
        ]
        assert np.all(np.diff(prices) < 1e-10)

    def test_price_invariant_under_column_rescaling(self):
        m = two_asset_model()
        A, a = build_quadratic_data(m)
        fs = build_transform(A, a)
        cfg = SolverConfig(nodes=65, time_steps=6, gauss_method="direct")
        base = solve_pipeline(m, np.array([0.5]), cfg, fs=fs).price
        for k in (0, 1):
            for c in (0.5, 2.0):
                Rs = fs.R.copy()
                Rs[:, k] *= c
                fs_scaled = FactorizedSystem(
                    D=fs.D,
                    R=Rs,
                    eigenvalues=fs.eigenvalues,
                    p=np.diag(Rs.T @ A @ Rs).copy(),
                    b=a @ Rs,
                    beta=float((a @ Rs)[0] ** 2),
                    residual=fs.residual,
                    iterations=fs.iterations,
                )
                scaled = solve_pipeline(m, np.array([0.5]), cfg, fs=fs_scaled).price
                assert scaled == pytest.approx(base, abs=1e-6)

    def test_price_bounds_from_initial_data(self):
        m = two_asset_model()
        alpha = np.array([0.4])
        res = solve_pipeline(m, alpha, SolverConfig(nodes=65, time_steps=6))
        from proxyhedge.transform import terminal_condition, from_factorized

        z_nodes = from_factorized(res.field.node_points(), 0.0, res.coord_map)
        phi0 = terminal_condition(z_nodes, alpha, m)
        gamma, T, r = m.risk_aversion, m.maturity, m.rate
        extras = float(alpha @ m.proxy_prices)
        lo = -math.exp(-r * T) / gamma * math.log(float(phi0.max())) + extras
        hi = -math.exp(-r * T) / gamma * math.log(float(phi0.min())) + extras
        assert lo - 1e-9 <= res.price <= hi + 1e-9
