"""
Average-reward LPs and their duals
==================================

Solve the occupancy-measure LP and its value-function dual on a small
gridworld, then check the two agree.
"""

import numpy as np

from mdpdual import brute_force_optimal, gridworld, solve_average_reward_lp
from mdpdual.lp_duality import build_primal_lp, extract_policy
from mdpdual.simplex import format_lp

# A 2x2 grid: start in the corner, reach the opposite one, get reset.
mdp = gridworld(2, 2, slip=0.1)
print("states, actions:", mdp.shape)

primal, dual, report = solve_average_reward_lp(mdp)
print("primal optimum  ", primal.objective_value)
print("dual optimum    ", dual.objective_value)
print("gap             ", report.gap)
print("Bellman residual", report.bellman_residual)

# The optimal occupancy puts all mass of a state on one action.
policy = extract_policy(primal, mdp)
print("greedy actions  ", policy.probs.argmax(axis=1))

# Exhaustive search over deterministic policies agrees.
_, best = brute_force_optimal(mdp)
print("brute force     ", best)
assert np.isclose(best, primal.objective_value)

# The LP itself, in the same listing the CLI writes with --dump-lp.
print(format_lp(build_primal_lp(mdp)))
