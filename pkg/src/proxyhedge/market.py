"""Market description and the derived quantities every downstream stage consumes.

The model covers one illiquid asset (index 0), N liquid proxy assets carrying
traded options (indices 1..N), and a liquid index used for dynamic hedging.
All assets are lognormal with piecewise-constant drift term structures and
constant volatilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ModelError

# Eigenvalue floor for correlation PSD checks: tolerates rounding in user
# input, anything more negative is a hard error.
PSD_FLOOR = -1e-12


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous piecewise-constant curve on [0, end].

    ``values[k]`` applies on the interval ``(times[k-1], times[k]]`` (with
    ``times[-1] = 0`` implicitly); the value at t=0 is ``values[0]``.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ModelError("piecewise curve needs matching, non-empty times/values")
        t = np.asarray(self.times, dtype=float)
        if np.any(~np.isfinite(t)) or np.any(np.diff(t) <= 0) or t[0] <= 0:
            raise ModelError("piecewise breakpoints must be finite, positive, increasing")
        if np.any(~np.isfinite(np.asarray(self.values, dtype=float))):
            raise ModelError("piecewise values must be finite")

    @classmethod
    def from_spec(cls, spec, horizon: float) -> "PiecewiseConstant":
        """Build from a scalar (constant curve) or [(t_end, value), ...] pairs."""
        if isinstance(spec, PiecewiseConstant):
            curve = spec
        elif np.isscalar(spec):
            curve = cls(times=(float(horizon),), values=(float(spec),))
        else:
            pairs = [(float(t), float(v)) for t, v in spec]
            curve = cls(times=tuple(t for t, _ in pairs), values=tuple(v for _, v in pairs))
        if curve.times[-1] < horizon - 1e-12:
            raise ModelError(
                f"drift term structure ends at t={curve.times[-1]}, before maturity {horizon}"
            )
        return curve

    @property
    def end(self) -> float:
        return self.times[-1]

    def __call__(self, t: float) -> float:
        if t <= 0.0:
            return self.values[0]
        idx = int(np.searchsorted(np.asarray(self.times), t, side="left"))
        idx = min(idx, len(self.values) - 1)
        return self.values[idx]

    def integral(self, tau: float) -> float:
        """Exact integral over [0, tau]."""
        if tau <= 0.0:
            return 0.0
        total = 0.0
        prev = 0.0
        for t_end, v in zip(self.times, self.values):
            seg = min(tau, t_end) - prev
            if seg > 0:
                total += v * seg
            if t_end >= tau:
                break
            prev = t_end
        return total

    def average(self, tau: float) -> float:
        """(1/tau) * integral over [0, tau]; limit value at tau = 0."""
        if tau == 0.0:
            return self.values[0]
        return self.integral(tau) / tau

    def shifted(self, offset: float) -> "PiecewiseConstant":
        """New curve with ``offset`` added to every value."""
        return PiecewiseConstant(self.times, tuple(v + offset for v in self.values))


@dataclass(frozen=True)
class MarketModel:
    """Immutable market snapshot; safe to share across concurrent solves.

    Asset 0 is the illiquid underlying of the claim being priced; assets
    1..n_proxies carry the liquid options used for the static hedge.
    """

    n_proxies: int
    spots: np.ndarray
    strikes: np.ndarray
    drifts: tuple[PiecewiseConstant, ...]
    vols: np.ndarray
    corr_yy: np.ndarray
    corr_xy: np.ndarray
    index_drift: float
    index_vol: float
    rate: float
    maturity: float
    risk_aversion: float
    proxy_prices: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        n1 = self.n_proxies + 1
        if self.n_proxies < 0:
            raise ModelError("n_proxies must be >= 0")

        def _vec(name, value, length):
            arr = np.array(value, dtype=float, ndmin=1)
            if arr.shape != (length,):
                raise ModelError(f"{name}: expected length {length}, got shape {arr.shape}")
            arr.flags.writeable = False
            return arr

        object.__setattr__(self, "spots", _vec("spots", self.spots, n1))
        object.__setattr__(self, "strikes", _vec("strikes", self.strikes, n1))
        object.__setattr__(self, "vols", _vec("vols", self.vols, n1))
        object.__setattr__(self, "corr_xy", _vec("corr_xy", self.corr_xy, n1))
        object.__setattr__(
            self, "proxy_prices", _vec("proxy_prices", self.proxy_prices, self.n_proxies)
        )
        corr = np.array(self.corr_yy, dtype=float)
        if corr.shape != (n1, n1):
            raise ModelError(f"corr_yy: expected shape {(n1, n1)}, got {corr.shape}")
        if np.allclose(corr, corr.T, atol=1e-12):
            corr = 0.5 * (corr + corr.T)
        corr.flags.writeable = False
        object.__setattr__(self, "corr_yy", corr)

        if self.maturity <= 0:
            raise ModelError("maturity must be > 0")
        if self.risk_aversion <= 0:
            raise ModelError("risk_aversion must be > 0")
        if self.index_vol <= 0:
            raise ModelError("index_vol must be > 0")
        if np.any(self.spots <= 0):
            raise ModelError("spots must be > 0")
        if np.any(self.strikes <= 0):
            raise ModelError("strikes must be > 0")
        if np.any(self.vols <= 0):
            raise ModelError("vols must be > 0")
        if np.any(self.proxy_prices < 0):
            raise ModelError("proxy_prices must be >= 0")

        drifts = tuple(PiecewiseConstant.from_spec(d, self.maturity) for d in self.drifts)
        if len(drifts) != n1:
            raise ModelError(f"drifts: expected {n1} curves, got {len(drifts)}")
        object.__setattr__(self, "drifts", drifts)

        if not np.allclose(self.corr_yy, self.corr_yy.T, atol=1e-12):
            raise ModelError("corr_yy must be symmetric")
        if not np.allclose(np.diag(self.corr_yy), 1.0, atol=1e-12):
            raise ModelError("corr_yy must have a unit diagonal")
        if np.any(np.abs(self.corr_xy) > 1.0 + 1e-12):
            k = int(np.argmax(np.abs(self.corr_xy)))
            raise ModelError(f"corr_xy[{k}] = {self.corr_xy[k]} lies outside [-1, 1]")

        eig_yy = np.linalg.eigvalsh(self.corr_yy)
        if eig_yy[0] < PSD_FLOOR:
            raise ModelError(
                f"corr_yy is not positive semi-definite: smallest eigenvalue {eig_yy[0]:.3e}"
            )
        eig_full = np.linalg.eigvalsh(self.full_correlation())
        if eig_full[0] < PSD_FLOOR:
            raise ModelError(
                "full index+assets correlation matrix is not positive semi-definite: "
                f"smallest eigenvalue {eig_full[0]:.3e}"
            )

    @property
    def n_assets(self) -> int:
        """Total option underlyings, N + 1."""
        return self.n_proxies + 1

    def full_correlation(self) -> np.ndarray:
        """(N+2)x(N+2) correlation of (index, Y_0, ..., Y_N)."""
        n1 = self.n_assets
        full = np.empty((n1 + 1, n1 + 1))
        full[0, 0] = 1.0
        full[0, 1:] = self.corr_xy
        full[1:, 0] = self.corr_xy
        full[1:, 1:] = self.corr_yy
        return full

    def log_moneyness(self) -> np.ndarray:
        """z_i = log(spot_i / strike_i)."""
        return np.log(self.spots / self.strikes)


def sharpe_ratio(model: MarketModel) -> float:
    """Index Sharpe ratio eta_x = (mu_x - r) / sigma_x."""
    return (model.index_drift - model.rate) / model.index_vol


def build_quadratic_data(model: MarketModel) -> tuple[np.ndarray, np.ndarray]:
    """Hessian matrix A_ij = rho_ij sigma_i sigma_j and vector a_i = rho_xy_i sigma_i."""
    A = model.corr_yy * np.outer(model.vols, model.vols)
    a = model.corr_xy * model.vols
    return A, a


def effective_drifts(
    model: MarketModel, tau: float
) -> tuple[Callable[[float], np.ndarray], np.ndarray]:
    """Drift-adjusted log drifts and their running average over [0, tau].

    Returns ``(muhat, M)`` where ``muhat(t)_i = mu_i(t) - sigma_i^2/2
    - eta_x rho_xy_i sigma_i`` and ``M_i = (1/tau) * integral of muhat_i``
    (exact for piecewise-constant drifts; the tau=0 limit returns muhat(0)).
    """
    if tau < 0.0 or tau > model.maturity + 1e-12:
        raise ModelError(f"tau = {tau} outside [0, maturity = {model.maturity}]")
    eta = sharpe_ratio(model)
    offsets = -0.5 * model.vols**2 - eta * model.corr_xy * model.vols
    curves = [d.shifted(off) for d, off in zip(model.drifts, offsets)]

    def muhat(t: float) -> np.ndarray:
        return np.array([c(t) for c in curves])

    M = np.array([c.average(tau) for c in curves])
    return muhat, M
