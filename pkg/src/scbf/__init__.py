"""Safety filters for scalar deterministic and stochastic control systems.

Barrier functions define safe sets; minimal-intervention filters project a
desired control onto the set of controls that keep the system safe, using
the deterministic barrier condition for ODEs and the corrected stochastic
condition for SDEs.  Shipped applications: optimal advertising (deterministic
and stochastic) and portfolio optimization with an emergency-fund floor.
"""

__version__ = "0.1.0"

from .barrier import (
    BarrierSpec,
    BoundaryError,
    ItoTerms,
    SdeModel,
    deterministic_bc,
    ito_terms,
    legacy_scbf_margin,
    make_h_oa,
    make_h_po,
    scbf_margin,
)
from .core import RngPolicy, StrengtheningFn, TimeGrid, Trajectory, alpha_eval, gaussian_increments
from .filters import (
    AffineConstraint,
    FilterOutcome,
    QuadraticConstraint,
    feasible_interval,
    filter_step,
    grid_project,
    nlp_filter,
    qp_filter,
)
from .montecarlo import McConfig, McSummary, run_batch, run_trial
from .problems import (
    AdvertisingParams,
    PortfolioParams,
    ProblemContext,
    ProblemSpec,
    StochAdvertisingParams,
    StressParams,
    advertising_primary,
    advertising_steady_state,
    build_context,
    merton_primary,
    objective_accumulate,
    soa_lambda_bar,
    soa_primary,
)
from .sde import Event, StepInput, em_step, euler_step, simulate

__all__ = [
    "__version__",
    "TimeGrid",
    "StrengtheningFn",
    "alpha_eval",
    "RngPolicy",
    "gaussian_increments",
    "Trajectory",
    "BarrierSpec",
    "SdeModel",
    "ItoTerms",
    "BoundaryError",
    "make_h_oa",
    "make_h_po",
    "deterministic_bc",
    "ito_terms",
    "scbf_margin",
    "legacy_scbf_margin",
    "AffineConstraint",
    "QuadraticConstraint",
    "FilterOutcome",
    "qp_filter",
    "nlp_filter",
    "feasible_interval",
    "grid_project",
    "filter_step",
    "StepInput",
    "Event",
    "euler_step",
    "em_step",
    "simulate",
    "AdvertisingParams",
    "StochAdvertisingParams",
    "PortfolioParams",
    "StressParams",
    "advertising_steady_state",
    "advertising_primary",
    "soa_lambda_bar",
    "soa_primary",
    "merton_primary",
    "objective_accumulate",
    "ProblemContext",
    "ProblemSpec",
    "build_context",
    "McConfig",
    "McSummary",
    "run_trial",
    "run_batch",
]
