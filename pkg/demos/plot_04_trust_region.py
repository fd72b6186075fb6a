"""
Natural-gradient trust-region steps
===================================

Parameterize the policy by softmax logits, build the surrogate gradient and
the KL Hessian exactly, solve for the natural gradient with conjugate
gradients and take the largest step allowed by the KL budget.
"""

import numpy as np

from mdpdual import chain
from mdpdual.trpo import SoftmaxPolicyParams, grad_and_hessian, run_trpo, trpo_step

mdp = chain(2)          # stay (reward 0) or toggle (reward 1)
theta = SoftmaxPolicyParams.zeros(*mdp.shape)

g, Hvp, H = grad_and_hessian(theta, mdp)
print("gradient", g)
print("Fisher block for state 0:\n", H[:2, :2])

step = trpo_step(theta, mdp, delta=0.01)
print("predicted KL", step.predicted_kl, "actual KL", step.actual_kl, "alpha", step.alpha)

run = run_trpo(mdp, delta=0.01, iters=100)
for rec in run.records[::10]:
    print(f"iter {rec.iter:3d}  avg reward {rec.avg_reward:.4f}  kl {rec.kl:.4f}")
print("final", run.records[-1].avg_reward)
print("policy\n", np.round(run.params.policy.probs, 4))
