from .problems import Cone, ConicSolution, SdpProblem, SocpProblem
from .socp import BarrierOptions, solve_socp
from .sdp import solve_sdp
from .adapter import (
    AdapterError,
    CvxpySolver,
    external_solver_adapter,
    problem_from_json,
    problem_to_json,
)
