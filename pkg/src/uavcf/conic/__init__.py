"""Second-order cone programming with binary variables."""

from .branch import solve_mbsocp
from .interior import solve_socp
from .problem import ConeConstraint, LinearConstraint, SocpProblem, SocpSolution, SolveStatus
from .psd import IndefiniteMatrixError, psd_sqrt

__all__ = ["ConeConstraint", "LinearConstraint", "SocpProblem", "SocpSolution", "SolveStatus",
           "solve_socp", "solve_mbsocp", "psd_sqrt", "IndefiniteMatrixError"]
