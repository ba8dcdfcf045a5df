"""Variable-change bookkeeping between log-moneyness and factorized coordinates.

Working coordinates are ``u = R.T @ (z + tau * Mbar(tau))`` where ``z_i =
log(y_i / K_i)`` and ``Mbar`` is the running average of the effective drifts.
Differentiating ``tau * Mbar(tau)`` reproduces the instantaneous effective
drift, so the evolution equation for the field is exactly drift-free in u
for every tau, including time-dependent drift term structures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError
from .factorize import FactorizedSystem
from .market import MarketModel, PiecewiseConstant, effective_drifts, sharpe_ratio


@dataclass(frozen=True)
class CoordinateMap:
    """Frozen map between z-space and factorized u-space for one model."""

    R: np.ndarray
    muhat_curves: tuple[PiecewiseConstant, ...]
    maturity: float

    def __post_init__(self):
        det = np.linalg.det(self.R)
        if abs(det) <= 1e-12:
            raise NumericsError(f"transformation matrix R is singular (det = {det:.3e})")
        object.__setattr__(self, "_R_inv", np.linalg.inv(self.R))

    @classmethod
    def from_model(cls, model: MarketModel, fs: FactorizedSystem) -> "CoordinateMap":
        eta = sharpe_ratio(model)
        offsets = -0.5 * model.vols**2 - eta * model.corr_xy * model.vols
        curves = tuple(d.shifted(off) for d, off in zip(model.drifts, offsets))
        return cls(R=fs.R, muhat_curves=curves, maturity=model.maturity)

    def drift_average(self, tau: float) -> np.ndarray:
        """Mbar_i(tau) = (1/tau) * integral_0^tau muhat_i, limit value at 0."""
        return np.array([c.average(tau) for c in self.muhat_curves])

    def _check_tau(self, tau: float):
        if tau < -1e-12 or tau > self.maturity + 1e-9:
            raise NumericsError(f"tau = {tau} outside [0, {self.maturity}]")


def to_factorized(z: np.ndarray, tau: float, cm: CoordinateMap) -> np.ndarray:
    """Map z-points (last axis = asset) to factorized coordinates at time tau."""
    cm._check_tau(tau)
    z = np.asarray(z, dtype=float)
    shift = tau * cm.drift_average(tau)
    return (z + shift) @ cm.R


def from_factorized(u: np.ndarray, tau: float, cm: CoordinateMap) -> np.ndarray:
    """Inverse of :func:`to_factorized`; round-trips to machine precision."""
    cm._check_tau(tau)
    u = np.asarray(u, dtype=float)
    shift = tau * cm.drift_average(tau)
    return u @ cm._R_inv - shift


def terminal_condition(z: np.ndarray, alpha: np.ndarray, model: MarketModel) -> np.ndarray:
    """Initial field for the tau-evolution at the given log-moneyness points.

    ``Phi_0 = exp(-gamma * (K_0 e^{z_0^-} - sum_i alpha_i K_i e^{z_i^-}))``
    with ``z^- = min(z, 0)``; this is the exponential-utility weight of the
    capped payoffs ``min(Y_i, K_i)``. Strictly positive everywhere, constant
    along each z_i direction once z_i >= 0.

    Parameters
    ----------
    z : (..., N+1) log-moneyness points
    alpha : (N,) static hedge sizes in the proxy options
    """
    z = np.asarray(z, dtype=float)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    n1 = model.n_assets
    if z.shape[-1] != n1:
        raise NumericsError(f"z last axis must be {n1}, got {z.shape[-1]}")
    if alpha.shape != (model.n_proxies,):
        raise NumericsError(f"alpha must have length {model.n_proxies}, got {alpha.shape}")
    capped = model.strikes * np.exp(np.minimum(z, 0.0))
    payoff = capped[..., 0]
    if model.n_proxies:
        payoff = payoff - capped[..., 1:] @ alpha
    return np.exp(-model.risk_aversion * payoff)
