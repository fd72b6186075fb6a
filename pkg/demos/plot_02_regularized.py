"""
Entropy-regularized solutions and annealing
===========================================

Relative-entropy (Shannon) and conditional-entropy regularizers pull the
optimal occupancy towards a uniform reference. As eta grows the regularized
optimum climbs towards the LP value, never by more than W(mu*)/eta.
"""

from mdpdual import RegKind, Regularizer, generate_mdp, solve_average_reward_lp
from mdpdual.lp_duality import primal_occupancy
from mdpdual.regularized import bregman_divergence, solve_conditional_dual, solve_shannon_dual

mdp = generate_mdp("garnet:5,3,2", seed=4)
primal, _, _ = solve_average_reward_lp(mdp)
lp_value = primal.objective_value
print(f"LP optimum {lp_value:.6f}")

for kind, solve in ((RegKind.SHANNON, solve_shannon_dual), (RegKind.CONDITIONAL, solve_conditional_dual)):
    reg = Regularizer.uniform(kind, *mdp.shape)
    W = bregman_divergence(reg, primal_occupancy(primal, mdp))
    print(f"\n{kind.value}: W(mu*) = {W:.4f}")
    print(" eta        value      LP - value   W/eta")
    for eta in (0.1, 1.0, 10.0, 100.0, 1000.0):
        sol, trace = solve(mdp, eta, reg)
        v = sol.dual_objective
        print(f"{eta:7g}  {v:.6f}  {lp_value - v:11.3e}  {W / eta:9.3e}")
