"""Velocity jump processes: effective Hamiltonians, Hamilton-Jacobi limits,
kinetic schemes and path sampling.

The package is organized bottom-up:

``measure``
    Velocity measures (interval, ball, atoms, tabulated radial profiles)
    with support queries, resolvent integrals and sampling.
``hamiltonian``
    The effective Hamiltonian H(p) from the implicit resolvent equation,
    its regular/singular dichotomy, eigen-measures, Legendre transforms
    and cached rate functions.
``hj``
    Macroscopic Hamilton-Jacobi solvers: the Hopf-Lax formula and a
    monotone Lax-Friedrichs scheme on periodic or open grids.
``kinetic``
    The stiff kinetic relaxation scheme for the potential at finite
    scale eps, the linear solver it shadows, and convergence reports
    against the Hopf-Lax reference.
``pdmp``
    Counter-based reproducible simulation of the underlying jump process
    and empirical moment checks.
``cli``
    Command-line front end emitting CSV/JSON/binary artifacts.
"""

from .errors import (
    VJumpError,
    ConfigError,
    ZeroMomentum,
    DenominatorNotPositive,
    NoBracket,
    DegenerateMaximizer,
    OutsideHull,
    CflViolation,
    BoundViolation,
    UnderflowRisk,
)
from .measure import (
    VelocityMeasure,
    UniformInterval,
    UniformBall,
    Atomic,
    TabulatedRadial,
    SupportQuery,
    support_mu,
    singular_integral,
    resolvent_integral,
    resolvent_moment,
    measure_from_config,
)
from .hamiltonian import (
    Regime,
    HamiltonianEval,
    EigenPair,
    LegendreEval,
    solve_H,
    solve_H_many,
    classify,
    grad_H,
    eigenpair,
    sing_boundary_radius,
    legendre,
    RateFunction,
    rate_function,
)
from .hj import (
    GridSpec,
    GridField,
    hopf_lax,
    hopf_lax_field,
    lax_friedrichs_solve,
)
from .kinetic import (
    KineticField,
    kinetic_solve,
    linear_f_solve,
    ConvergenceReport,
    convergence_report,
)
from .pdmp import (
    TrajectoryBatch,
    MomentCheck,
    sample_paths,
    empirical_moment_check,
)

__version__ = "0.1.0"

__all__ = [
    "VJumpError", "ConfigError", "ZeroMomentum", "DenominatorNotPositive",
    "NoBracket", "DegenerateMaximizer", "OutsideHull", "CflViolation",
    "BoundViolation", "UnderflowRisk",
    "VelocityMeasure", "UniformInterval", "UniformBall", "Atomic",
    "TabulatedRadial", "SupportQuery", "support_mu", "singular_integral",
    "resolvent_integral", "resolvent_moment", "measure_from_config",
    "Regime", "HamiltonianEval", "EigenPair", "LegendreEval", "solve_H",
    "solve_H_many", "classify", "grad_H", "eigenpair",
    "sing_boundary_radius", "legendre", "RateFunction", "rate_function",
    "GridSpec", "GridField", "hopf_lax", "hopf_lax_field",
    "lax_friedrichs_solve",
    "KineticField", "kinetic_solve", "linear_f_solve", "ConvergenceReport",
    "convergence_report",
    "TrajectoryBatch", "MomentCheck", "sample_paths",
    "empirical_moment_check",
    "__version__",
]
