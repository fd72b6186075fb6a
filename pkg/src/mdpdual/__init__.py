"""Exact tabular duality constructions for average-reward MDPs."""

__version__ = "0.1.0"

from .core import (
    OccupancyMeasure,
    Policy,
    TabularMDP,
    ValueSolution,
    average_reward,
    bellman_backup,
    brute_force_optimal,
    load_mdp,
    occupancy_from_policy,
    policy_bias_values,
    policy_from_occupancy,
    stationary_distribution,
    validate_mdp,
)
from .generators import chain, garnet_suite, generate_mdp, gridworld
from .imitation import RewardClass, causal_entropy, irl_saddle_solve, occupancy_distance
from .lp_duality import (
    build_dual_lp,
    build_primal_lp,
    extract_policy,
    solve_average_reward_lp,
    verify_strong_duality,
)
from .regularized import (
    RegKind,
    Regularizer,
    bregman_divergence,
    conditional_policy,
    dual_averaging_update,
    mirror_descent_solve,
    regularized_objective,
    shannon_dual,
    solve_conditional_dual,
    solve_shannon_dual,
    trpo_md_update,
)
from .simplex import LinearProgram, LPSolution, LPStatus, solve_lp
from .trpo import SoftmaxPolicyParams, conjugate_gradient, trpo_step
