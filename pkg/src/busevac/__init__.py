"""Bus evacuation planning toolkit.

Builds the bilinear evacuation model, reformulates it exactly into a MILP via
binary expansion and big-M-free product linearization, solves it with an
internal branch-and-bound / simplex engine, validates plans against the
original constraints, and reports routes, doses, completion times and costs.
"""

from .bnb import (
    SolveStats,
    SolverConfig,
    brute_force_oracle,
    format_gap,
    relative_gap,
    solve_milp,
)
from .formulation import (
    EvacuationPlan,
    MibpModel,
    build_mibp,
    check_plan,
    compute_doses,
    extract_routes,
)
from .instance import (
    Bus,
    EvacuationInstance,
    bit_width,
    index_variables,
    time_upper_bound,
    validate_instance,
)
from .linearize import BitEncoding, decode_bits, encode_bits, linearize_model, linearize_product
from .milp import MilpProblem, evaluate_point, objective_value
from .mps import export_mps, import_mps
from .oracle import OracleResult, SearchSpaceError
from .pipeline import EvacContext, SolveResult, build_models, solve_instance
from .scenario import GeneratorConfig, generate, load_instance, save_instance
from .simplex import LpSolution, phase1_feasibility, solve_lp

__version__ = "0.1.0"

__all__ = [
    "Bus",
    "BitEncoding",
    "EvacContext",
    "EvacuationInstance",
    "EvacuationPlan",
    "GeneratorConfig",
    "LpSolution",
    "MibpModel",
    "MilpProblem",
    "OracleResult",
    "SearchSpaceError",
    "SolveResult",
    "SolveStats",
    "SolverConfig",
    "bit_width",
    "brute_force_oracle",
    "build_mibp",
    "build_models",
    "check_plan",
    "compute_doses",
    "decode_bits",
    "encode_bits",
    "evaluate_point",
    "export_mps",
    "extract_routes",
    "format_gap",
    "generate",
    "import_mps",
    "index_variables",
    "linearize_model",
    "linearize_product",
    "load_instance",
    "objective_value",
    "phase1_feasibility",
    "relative_gap",
    "save_instance",
    "solve_instance",
    "solve_lp",
    "solve_milp",
    "time_upper_bound",
    "validate_instance",
]
