"""
Recovering a reward from an expert
==================================

A reward player and a policy player play a saddle point game: the reward
moves towards pairs the agent overuses relative to the expert, and the agent
answers with a (softly) cheapest policy. The averaged agent ends up matching
the expert's occupancy.
"""

import numpy as np

from mdpdual import Policy, chain
from mdpdual.imitation import RewardClass, irl_saddle_solve

mdp = chain(2)
expert = Policy.deterministic([1, 1], 2)     # always toggle

res = irl_saddle_solve(mdp, expert, RewardClass(1.0), entropy_weight=0.1, iters=500)
print("occupancy gap", res.occupancy_gap)
print("recovered reward\n", np.round(res.recovered_reward, 3))
print("recovered policy\n", np.round(res.recovered_policy.probs, 3))

gaps = [r.gap_or_residual for r in res.objective_trace.records]
for k in (1, 10, 100, 500):
    print(f"after {k:3d} rounds: gap {gaps[k - 1]:.4f}")
