"""Heat flow solver for the mean field equation on finite weighted graphs."""

from .energy import ProblemData, dj_pairing, field_m, j_rho, mass
from .errors import (CompatibilityError, DomainMismatchError, FitError, GraphError,
                     PhiAdmissibilityError, PhiRangeError, StiffnessError)
from .flow import FlowProblem, TrajectoryRecord, integrate, rhs, run_flow, step
from .graph import (VertexFunction, WeightedGraph, first_eigenvalue, gamma, grad_length_sq,
                    laplacian, mean_value, sobolev_norm)
from .phi import CustomPhi, ExpPhi, ExpPolyPhi, Phi, QuadLogPhi, phi_from_dict
from .steady import SteadyResult, kazdan_warner_residual, lojasiewicz_fit, newton_solve

__all__ = [
    "CompatibilityError", "CustomPhi", "DomainMismatchError", "ExpPhi", "ExpPolyPhi", "FitError",
    "FlowProblem", "GraphError", "Phi", "PhiAdmissibilityError", "PhiRangeError", "ProblemData",
    "QuadLogPhi", "SteadyResult", "StiffnessError", "TrajectoryRecord", "VertexFunction", "WeightedGraph",
    "dj_pairing", "field_m", "first_eigenvalue", "gamma", "grad_length_sq", "integrate",
    "j_rho", "kazdan_warner_residual", "laplacian", "lojasiewicz_fit", "mass", "mean_value",
    "newton_solve", "phi_from_dict", "rhs", "run_flow", "sobolev_norm", "step",
]
