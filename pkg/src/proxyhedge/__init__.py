"""Utility-indifference pricing of claims on illiquid assets, hedged with a
static basket of proxy options and a dynamic index position.

The pricing PDE is solved in factorized coordinates where the diffusion
tensor is diagonal and the quadratic gradient term involves a single
direction; evolution uses second-order operator splitting with exact
Gaussian-kernel substeps (direct or fast-transform summation).
"""

from .errors import (
    ConfigError,
    FactorizationError,
    ModelError,
    NumericsError,
    ProxyHedgeError,
)
from .factorize import (
    FactorizationReport,
    FactorizedSystem,
    build_transform,
    residual_map,
    verify_factorization,
)
from .fdref import FDConfig, FDResult, fd_solve
from .field import GridField
from .gauss import (
    GaussTransformSpec,
    direct_gauss_1d,
    heat_step_separable,
    ifgt_1d,
    ifgt_error_bound,
    ifgt_nd,
    taylor_term_count,
)
from .market import (
    MarketModel,
    PiecewiseConstant,
    build_quadratic_data,
    effective_drifts,
    sharpe_ratio,
)
from .pricing import (
    PipelineResult,
    PricingResult,
    dynamic_hedge,
    implied_gamma,
    merton_value,
    optimize_static_hedge,
    price_given_alpha,
    single_claim_oracle,
    solve_pipeline,
)
from .solver import (
    EvolveResult,
    SolverConfig,
    cole_hopf_substep,
    evolve,
    readout,
    strang_step,
)
from .transform import CoordinateMap, from_factorized, terminal_condition, to_factorized

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CoordinateMap",
    "EvolveResult",
    "FDConfig",
    "FDResult",
    "FactorizationError",
    "FactorizationReport",
    "FactorizedSystem",
    "GaussTransformSpec",
    "GridField",
    "MarketModel",
    "ModelError",
    "NumericsError",
    "PipelineResult",
    "PiecewiseConstant",
    "PricingResult",
    "ProxyHedgeError",
    "SolverConfig",
    "build_quadratic_data",
    "build_transform",
    "cole_hopf_substep",
    "direct_gauss_1d",
    "dynamic_hedge",
    "effective_drifts",
    "evolve",
    "fd_solve",
    "from_factorized",
    "heat_step_separable",
    "ifgt_1d",
    "ifgt_error_bound",
    "ifgt_nd",
    "implied_gamma",
    "merton_value",
    "optimize_static_hedge",
    "price_given_alpha",
    "readout",
    "residual_map",
    "sharpe_ratio",
    "single_claim_oracle",
    "solve_pipeline",
    "strang_step",
    "taylor_term_count",
    "terminal_condition",
    "to_factorized",
    "verify_factorization",
]
