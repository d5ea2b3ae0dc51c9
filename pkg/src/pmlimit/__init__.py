"""Finite-volume porous-medium/chemotaxis/growth solver and stiff-limit
verification harness."""

from .errors import (
    CflViolation,
    ConfigInvalid,
    DimensionUnsupported,
    IoFailure,
    KernelUnbounded,
    NegativeDensity,
    NonFiniteField,
    PositivityLoss,
    SimulationError,
    SupportTouchesBoundary,
)
from .grid import (
    GridSpec,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    integrate,
    laplacian,
    read_snapshot,
    write_snapshot,
)
from .model import GrowthLaw, ModelParams, growth_eval, pressure, validate_growth_law
from .potential import DriftKernel, drift_field, solve_newtonian
from .stepper import SimState, run, stable_dt, step
from .diagnostics import (
    DiagnosticsRecord,
    apriori_functionals,
    complementarity_residual,
    identity_check_fund1,
    l4_functionals,
    limit_relation_proxies,
)
from .harness import RunConfig, SweepReport, export, run_m_sweep, run_refinement_study

__version__ = "0.1.0"
