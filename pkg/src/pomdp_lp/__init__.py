"""Exact and relaxed linear programming for finite-horizon POMDPs.

The package builds the occupancy-measure MILP whose optimum is the best
deterministic memoryless policy, its strengthened variant with pairwise
valid equalities, and the per-component fluid LP of decomposable POMDPs,
all solved by a built-in simplex and branch and bound. Exact oracles and a
rolling-horizon simulator sit alongside for cross-checks and benchmarks.
"""

from .errors import (
    BasisSingular,
    DimensionMismatch,
    ImpossibleObservation,
    InvalidInstance,
    MissingVariable,
    NegativeProbability,
    NonFiniteReward,
    NonIntegralIncumbent,
    NonStochasticRow,
    PomdpLpError,
    ProductTooLarge,
    SearchSpaceTooLarge,
)
from .fluid import (
    FluidMeasures,
    FluidSolveReport,
    build_fluid_lp,
    check_achievable,
    extract_first_action,
    solve_fluid,
)
from .lp import LpProblem, LpSolution, LpStatus, check_feasibility, solve_lp
from .milp import MilpProblem, MilpResult, root_relaxation, solve_milp
from .model import (
    Belief,
    DecomposablePomdp,
    PomdpInstance,
    Policy,
    compose,
    conditional_state_given_obs,
    count_deterministic_policies,
    generate_random_decomposable,
    generate_random_instance,
    load_instance,
    save_instance,
    validate_decomposable,
    validate_instance,
)
from .oracle import (
    brute_force_memoryless,
    exact_policy_value,
    mdp_value,
    occupancy_from_policy,
    perfect_recall_value,
)
from .pomdp_milp import (
    OccupancyMeasures,
    build_pomdp_milp,
    extract_policy,
    solve_pomdp_milp,
    solve_relaxation,
)
from .simulate import (
    SimulationReport,
    belief_update,
    monte_carlo,
    run_greedy_policy,
    run_heuristic_policy,
)

__version__ = "0.1.0"

__all__ = [
    "LpProblem",
    "LpSolution",
    "LpStatus",
    "check_feasibility",
    "solve_lp",
    "MilpProblem",
    "MilpResult",
    "root_relaxation",
    "solve_milp",
    "BasisSingular",
    "DimensionMismatch",
    "ImpossibleObservation",
    "InvalidInstance",
    "MissingVariable",
    "NegativeProbability",
    "NonFiniteReward",
    "NonIntegralIncumbent",
    "NonStochasticRow",
    "PomdpLpError",
    "ProductTooLarge",
    "SearchSpaceTooLarge",
    "FluidMeasures",
    "FluidSolveReport",
    "build_fluid_lp",
    "check_achievable",
    "extract_first_action",
    "solve_fluid",
    "Belief",
    "DecomposablePomdp",
    "PomdpInstance",
    "Policy",
    "compose",
    "conditional_state_given_obs",
    "count_deterministic_policies",
    "generate_random_decomposable",
    "generate_random_instance",
    "load_instance",
    "save_instance",
    "validate_decomposable",
    "validate_instance",
    "brute_force_memoryless",
    "exact_policy_value",
    "mdp_value",
    "occupancy_from_policy",
    "perfect_recall_value",
    "OccupancyMeasures",
    "build_pomdp_milp",
    "extract_policy",
    "solve_pomdp_milp",
    "solve_relaxation",
    "SimulationReport",
    "belief_update",
    "monte_carlo",
    "run_greedy_policy",
    "run_heuristic_policy",
]
