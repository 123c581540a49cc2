"""fblab: a finite-difference laboratory for sublinear free boundary energies."""

from .core import (
    AnalysisPreconditionError,
    ConfigError,
    FBLabError,
    HalfSpaceSolution,
    ProblemParams,
    SolverError,
    beta_coefficient,
    eval_F,
    eval_f,
    halfspace_eval,
    halfspace_solution,
    negative_part,
    positive_part,
)
from .grid import BallSpec, GridField, field_from_function, grid_on_box
from .quadrature import ball_integral, energy_E, sphere_integral

__version__ = "0.1.0"
