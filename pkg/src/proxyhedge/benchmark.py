"""Complexity and accuracy benchmark: direct summation vs fast transform vs
finite differences on a d-dimensional heat-only pricing problem.

Each cell (d, M, p, J) evolves the same degenerate model (uncorrelated
assets, zero index correlation, zero effective drift) with four engines:

* ``direct``  - splitting pipeline with exact pairwise kernel sums (reference)
* ``ifgt``    - splitting pipeline with the separable fast transform
* ``ifgt_nd`` - one non-separable d-variate fast transform per step (d <= 3)
* ``fd``      - the theta-scheme reference solver (d <= 2)

The CSV schema is fixed (v1):
``method,d,M,p,J,f_dp,wall_time_ns,max_rel_error,status``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .config import RunConfig
from .errors import ProxyHedgeError
from .factorize import build_transform
from .fdref import FDConfig, fd_solve
from .gauss import ifgt_nd, taylor_term_count
from .market import MarketModel, build_quadratic_data
from .pricing import solve_pipeline
from .solver import SolverConfig

CSV_HEADER = "method,d,M,p,J,f_dp,wall_time_ns,max_rel_error,status"
CSV_SCHEMA = "v1"


@dataclass
class BenchRow:
    method: str
    d: int
    M: int
    p: int
    J: int
    f_dp: int
    wall_time_ns: int
    max_rel_error: float
    status: str = "ok"

    def to_csv(self) -> str:
        err = "" if np.isnan(self.max_rel_error) else f"{self.max_rel_error:.6e}"
        return (
            f"{self.method},{self.d},{self.M},{self.p},{self.J},"
            f"{self.f_dp},{self.wall_time_ns},{err},{self.status}"
        )


def _heat_model(d: int) -> MarketModel:
    """Uncorrelated lognormal model whose effective drifts vanish: the
    pricing PDE degenerates to a pure d-dimensional heat equation."""
    n = d - 1
    vols = np.full(d, 0.3)
    return MarketModel(
        n_proxies=n,
        spots=np.ones(d),
        strikes=np.ones(d),
        drifts=tuple(0.5 * v**2 for v in vols),
        vols=vols,
        corr_yy=np.eye(d),
        corr_xy=np.zeros(d),
        index_drift=0.0,
        index_vol=0.25,
        rate=0.0,
        maturity=1.0,
        risk_aversion=1.0,
        proxy_prices=np.zeros(n),
    )


def _alpha_for(d: int) -> np.ndarray:
    # negative hedge sizes keep every axis active in the terminal data
    return np.full(d - 1, -1.0)


def _run_pipeline(model, alpha, cfg) -> tuple[float, int]:
    t0 = time.perf_counter_ns()
    res = solve_pipeline(model, alpha, cfg)
    dt = time.perf_counter_ns() - t0
    return res.phi_at_spot, dt


def _run_dvariate(model, alpha, cfg: SolverConfig) -> tuple[float, int]:
    """J steps, each one non-separable d-variate Gauss transform."""
    from .pricing import initial_field
    from .solver import readout
    from .transform import CoordinateMap

    A, a = build_quadratic_data(model)
    fs = build_transform(A, a)
    cm = CoordinateMap.from_model(model, fs)
    field, u_star = initial_field(model, fs, cm, alpha, cfg)
    d = field.ndim
    dtau = model.maturity / cfg.time_steps

    t0 = time.perf_counter_ns()
    spacings = np.array(field.spacings)
    h = np.sqrt(2.0 * fs.p * dtau)
    npad = np.ceil(cfg.pad_bandwidths * h / spacings).astype(int) + 1
    padded_axes = [
        np.concatenate(
            [
                ax[0] + sp * np.arange(-k, 0),
                ax,
                ax[-1] + sp * np.arange(1, k + 1),
            ]
        )
        for ax, sp, k in zip(field.axes, spacings, npad)
    ]
    src_mesh = np.stack(np.meshgrid(*padded_axes, indexing="ij"), axis=-1).reshape(-1, d)
    tgt_mesh = field.node_points().reshape(-1, d)
    mass = 1.0
    for sp, hk in zip(spacings, h):
        m = int(np.ceil(6.0 * hk / sp)) + 1
        mass *= float(np.sum(np.exp(-((sp * np.arange(-m, m + 1)) ** 2) / hk**2)))
    pad_width = [(int(k), int(k)) for k in npad]
    values = field.values
    for _ in range(cfg.time_steps):
        padded = np.pad(values, pad_width, mode="edge")
        flat = ifgt_nd(
            src_mesh, padded.reshape(-1) / mass, tgt_mesh, h, cfg.ifgt_order,
            r_cluster=cfg.r_cluster,
        )
        values = flat.reshape(values.shape)
    dt = time.perf_counter_ns() - t0
    phi = readout(field.with_values(values), u_star)
    return phi, dt


def _run_fd(model, alpha, nodes: int, steps: int) -> tuple[float, int]:
    cfg = FDConfig(nodes=nodes, time_steps=steps)
    t0 = time.perf_counter_ns()
    res = fd_solve(model, alpha, cfg)
    dt = time.perf_counter_ns() - t0
    return res.phi_at_spot, dt


def run_benchmark(cfg: RunConfig) -> list[BenchRow]:
    spec = cfg.run.benchmark
    rows: list[BenchRow] = []
    for d in spec.dims:
        model = _heat_model(d)
        alpha = _alpha_for(d)
        for M in spec.nodes:
            for J in spec.time_steps:
                for p in spec.orders:
                    f_dp = taylor_term_count(d, p)
                    base = replace(
                        cfg.solver,
                        nodes=M,
                        time_steps=J,
                        ifgt_order=p,
                        threads=1,
                    )
                    try:
                        ref, t_direct = _run_pipeline(
                            model, alpha, replace(base, gauss_method="direct")
                        )
                        rows.append(BenchRow("direct", d, M, p, J, f_dp, t_direct, 0.0))
                    except (ProxyHedgeError, MemoryError) as exc:
                        rows.append(
                            BenchRow("direct", d, M, p, J, f_dp, 0, np.nan, f"error:{exc}")
                        )
                        continue
                    try:
                        phi, t_ifgt = _run_pipeline(
                            model, alpha, replace(base, gauss_method="ifgt")
                        )
                        rows.append(
                            BenchRow(
                                "ifgt", d, M, p, J, f_dp, t_ifgt,
                                abs(phi - ref) / abs(ref),
                            )
                        )
                    except (ProxyHedgeError, MemoryError) as exc:
                        rows.append(
                            BenchRow("ifgt", d, M, p, J, f_dp, 0, np.nan, f"error:{exc}")
                        )
                    if 2 <= d <= 3 and M**d <= 20000:
                        try:
                            phi, t_nd = _run_dvariate(model, alpha, base)
                            rows.append(
                                BenchRow(
                                    "ifgt_nd", d, M, p, J, f_dp, t_nd,
                                    abs(phi - ref) / abs(ref),
                                )
                            )
                        except (ProxyHedgeError, MemoryError) as exc:
                            rows.append(
                                BenchRow("ifgt_nd", d, M, p, J, f_dp, 0, np.nan, f"error:{exc}")
                            )
                    if d <= 2:
                        try:
                            phi, t_fd = _run_fd(model, alpha, M, max(J * 4, 32))
                            rows.append(
                                BenchRow(
                                    "fd", d, M, p, J, f_dp, t_fd,
                                    abs(phi - ref) / abs(ref),
                                )
                            )
                        except (ProxyHedgeError, MemoryError) as exc:
                            rows.append(
                                BenchRow("fd", d, M, p, J, f_dp, 0, np.nan, f"error:{exc}")
                            )
    return rows


def rows_to_csv(rows: list[BenchRow], config_digest: str = "") -> str:
    lines = [f"# proxyhedge benchmark schema={CSV_SCHEMA} config={config_digest}", CSV_HEADER]
    lines.extend(row.to_csv() for row in rows)
    return "\n".join(lines) + "\n"
