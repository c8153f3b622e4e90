from .multi import solve_multiobjective, single_objective_optima
from .qp import solve_qp_regularized
from .result import LPSolution, SolverError
from .simplex import solve_lp

__all__ = [
    "LPSolution",
    "SolverError",
    "single_objective_optima",
    "solve_lp",
    "solve_multiobjective",
    "solve_qp_regularized",
]
