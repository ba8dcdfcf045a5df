"""Shared fixtures: reference market data and small helper models."""

import numpy as np
import pytest

from proxyhedge import MarketModel

# Reference N=3 correlation case with a known factorization. The as-stated
# vectors below admit a unique real-spectrum root whose coefficients differ
# from the expected ones; swapping the last entries of corr_xy and vols
# (the "corrected" variant) reproduces the expected diagonal and
# coefficients exactly. Both variants are exercised in the tests.
REFERENCE_CORR_YY = np.array(
    [
        [1.0, 0.9, 0.6, 0.5],
        [0.9, 1.0, 0.75, 0.7],
        [0.6, 0.75, 1.0, 0.6],
        [0.5, 0.7, 0.6, 1.0],
    ]
)
REFERENCE_CORR_XY_STATED = np.array([0.23, 0.34, 0.45, 0.4])
REFERENCE_VOLS_STATED = np.array([0.3, 0.25, 0.35, 0.5])
REFERENCE_CORR_XY_CORRECTED = np.array([0.23, 0.34, 0.45, 0.5])
REFERENCE_VOLS_CORRECTED = np.array([0.3, 0.25, 0.35, 0.4])

# expected solution of the corrected reference case
EXPECTED_P = np.array([0.0678, 0.0096, 0.0062, 0.0508])
EXPECTED_B0 = -0.1446
EXPECTED_D_SCALE10 = np.array([-0.6108, 2.718, -1.145])  # root is 10x the 4-digit diagonal


def reference_quadratic(corrected: bool = True):
    if corrected:
        vols, cxy = REFERENCE_VOLS_CORRECTED, REFERENCE_CORR_XY_CORRECTED
    else:
        vols, cxy = REFERENCE_VOLS_STATED, REFERENCE_CORR_XY_STATED
    A = REFERENCE_CORR_YY * np.outer(vols, vols)
    a = cxy * vols
    return A, a


def single_asset_model(gamma=0.5, rho=0.5, rate=0.02, sigma=0.3, mu=0.07,
                       spot=1.0, strike=1.0, maturity=1.0):
    return MarketModel(
        n_proxies=0,
        spots=[spot],
        strikes=[strike],
        drifts=(mu,),
        vols=[sigma],
        corr_yy=[[1.0]],
        corr_xy=[rho],
        index_drift=0.08,
        index_vol=0.25,
        rate=rate,
        maturity=maturity,
        risk_aversion=gamma,
    )


def two_asset_model(gamma=0.5, rate=0.0, rho01=0.6, proxy_price=0.9):
    return MarketModel(
        n_proxies=1,
        spots=[1.0, 1.05],
        strikes=[1.0, 1.0],
        drifts=(0.06, 0.04),
        vols=[0.3, 0.25],
        corr_yy=[[1.0, rho01], [rho01, 1.0]],
        corr_xy=[0.35, 0.25],
        index_drift=0.05,
        index_vol=0.25,
        rate=rate,
        maturity=1.0,
        risk_aversion=gamma,
        proxy_prices=[proxy_price],
    )


def three_asset_model(gamma=0.5):
    return MarketModel(
        n_proxies=2,
        spots=[1.0, 1.05, 0.95],
        strikes=[1.0, 1.0, 1.0],
        drifts=(0.05, 0.04, 0.03),
        vols=[0.3, 0.25, 0.35],
        corr_yy=[[1.0, 0.6, 0.5], [0.6, 1.0, 0.4], [0.5, 0.4, 1.0]],
        corr_xy=[0.3, 0.25, 0.2],
        index_drift=0.05,
        index_vol=0.25,
        rate=0.0,
        maturity=1.0,
        risk_aversion=gamma,
        proxy_prices=[0.9, 0.85],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20130614)
