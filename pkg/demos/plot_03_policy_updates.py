"""
Mirror descent, exact TRPO and dual averaging
=============================================

Three ways to iterate on a policy with exact advantages. The exact TRPO
update tilts the previous policy and improves monotonically; dual averaging
tilts a fixed reference and need not settle down.
"""

import numpy as np

from mdpdual import RegKind, generate_mdp, solve_average_reward_lp
from mdpdual.regularized import mirror_descent_solve, run_dual_averaging, run_theoretical_trpo

mdp = generate_mdp("garnet:6,3,2", seed=11)
best = solve_average_reward_lp(mdp)[0].objective_value

_, md = mirror_descent_solve(mdp, 1.0, RegKind.SHANNON, max_iters=50)
_, trpo = run_theoretical_trpo(mdp, eta=1.0, iters=50)
_, da = run_dual_averaging(mdp, 1.0, iters=50)

print("iter   mirror     exact-TRPO  dual-avg   (LP optimum %.5f)" % best)
for k in (1, 2, 5, 10, 20, 50):
    print(f"{k:4d}  {md.objectives[k - 1]:.5f}   {trpo.objectives[k]:.5f}    {da.objectives[k]:.5f}")

# monotone improvement of the exact TRPO iterates
print("largest TRPO decrease:", float(np.max(-np.diff(trpo.objectives), initial=0.0)))
