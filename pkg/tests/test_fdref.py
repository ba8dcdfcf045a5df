import numpy as np
import pytest
from dataclasses import replace

from proxyhedge import (
    FDConfig,
    GridField,
    NumericsError,
    SolverConfig,
    fd_solve,
    heat_step_separable,
    solve_pipeline,
)
from proxyhedge.market import effective_drifts
from proxyhedge.transform import terminal_condition

from conftest import single_asset_model, three_asset_model, two_asset_model


def test_vanishing_risk_aversion_gives_unit_field():
    m = single_asset_model(gamma=1e-12)
    res = fd_solve(m, np.zeros(0), FDConfig(nodes=41, time_steps=40))
    assert np.max(np.abs(res.values - 1.0)) < 1e-11
    assert res.phi_at_spot == pytest.approx(1.0, abs=1e-11)


def test_linear_case_matches_heat_propagated_data():
    # no index correlation and a diagonal asset correlation: the equation is
    # linear, so the solution is the terminal data propagated by the exact
    # kernel and shifted by the accumulated drift
    m = two_asset_model()
    m = replace(
        m,
        corr_yy=np.eye(2),
        corr_xy=np.zeros(2),
        drifts=m.drifts,
    )
    alpha = np.array([0.6])
    T = m.maturity
    _, Mbar = effective_drifts(m, T)

    cfg = FDConfig(nodes=101, time_steps=300)
    fd = fd_solve(m, alpha, cfg)

    # reference: sample the terminal data pre-shifted by the drift, then run
    # one exact separable heat step of duration T on the same grid
    mesh = np.stack(np.meshgrid(*fd.axes, indexing="ij"), axis=-1)
    shifted = terminal_condition(mesh + T * Mbar, alpha, m)
    fld = GridField(fd.axes, shifted, 0.0)
    diag = m.vols**2
    ref = heat_step_separable(fld, diag, T, axes=(0, 1), method="direct")

    n = cfg.nodes
    interior = (slice(n // 4, 3 * n // 4 + 1),) * 2
    err = np.max(np.abs(fd.values[interior] - ref.values[interior]))
    assert err < 1e-3


def test_nonlinear_case_cross_validates_pipeline():
    m = two_asset_model()
    alpha = np.array([0.7])
    fd = fd_solve(m, alpha, FDConfig(nodes=161, time_steps=400))
    pipe = solve_pipeline(m, alpha, SolverConfig(nodes=97, time_steps=24, gauss_method="ifgt"))
    rel = abs(pipe.phi_at_spot - fd.phi_at_spot) / fd.phi_at_spot
    assert rel < 1e-2


def test_more_than_two_proxies_rejected():
    from proxyhedge import MarketModel

    m4 = MarketModel(
        n_proxies=3,
        spots=[1.0] * 4,
        strikes=[1.0] * 4,
        drifts=(0.05,) * 4,
        vols=[0.3] * 4,
        corr_yy=np.eye(4),
        corr_xy=[0.0] * 4,
        index_drift=0.05,
        index_vol=0.25,
        rate=0.0,
        maturity=1.0,
        risk_aversion=0.5,
        proxy_prices=[0.9] * 3,
    )
    with pytest.raises(NumericsError, match="N <= 2"):
        fd_solve(m4, np.zeros(3), FDConfig(nodes=9, time_steps=4))


def test_cfl_violation_detected():
    # a handful of steps cannot carry the explicit terms of a sharply kinked
    # high-gamma problem
    m = two_asset_model(gamma=8.0)
    with pytest.raises(NumericsError, match="CFL"):
        fd_solve(m, np.array([-2.0]), FDConfig(nodes=201, time_steps=2))


def test_first_order_self_convergence():
    m = single_asset_model(gamma=0.8, rho=0.6, rate=0.0)
    cfg = lambda J: FDConfig(nodes=201, time_steps=J)
    phis = [fd_solve(m, np.zeros(0), cfg(J)).phi_at_spot for J in (25, 50, 100)]
    e1 = abs(phis[0] - phis[2])
    e2 = abs(phis[1] - phis[2])
    # explicit nonlinear term caps the temporal order at one
    ratio = e1 / e2
    assert 1.5 < ratio < 3.5
