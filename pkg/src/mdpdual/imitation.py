"""Inverse RL as a saddle point between a reward player and a policy player.

The objective for a reward ``R`` and an agent occupancy ``mu`` is

    E_mu[R] - w * H(pi_mu) - E_expert[R]

maximised over ``R`` in an l-infinity ball and minimised over the agent. The
agent therefore treats ``R`` as a cost: at equilibrium it visits the expert's
state-action pairs, because any other pair would be priced up.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from os import PathLike
from typing import Any, Mapping

import numpy as np

from .core import (
    OccupancyMeasure,
    Policy,
    TabularMDP,
    _mu,
    _probs,
    occupancy_from_policy,
    policy_from_occupancy,
    stationary_distribution,
)
from .errors import ShapeMismatch, ValidationError
from .lp_duality import build_primal_lp, primal_occupancy
from .regularized import RegKind, Regularizer, SolveTrace, solve_conditional_dual
from .simplex import solve_lp


@dataclass(frozen=True)
class RewardClass:
    """Rewards with ``|R(s, a)| <= bound``."""

    bound: float
    kind: str = "linf_ball"

    def __post_init__(self):
        if not self.bound > 0:
            raise ValidationError("reward bound must be positive")

    def project(self, R: np.ndarray) -> np.ndarray:
        return np.clip(R, -self.bound, self.bound)


@dataclass(frozen=True)
class SaddleResult:
    recovered_reward: np.ndarray
    recovered_policy: Policy
    agent_occupancy: OccupancyMeasure
    objective_trace: SolveTrace
    occupancy_gap: float


def causal_entropy(pi, mdp: TabularMDP) -> float:
    """Stationary per-step policy entropy ``-sum_s nu(s) sum_a pi log pi``."""
    p = _probs(pi)
    nu = stationary_distribution(p, mdp)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    return float(-nu @ plogp.sum(axis=1))


def occupancy_distance(mu1, mu2) -> float:
    """l1 distance, i.e. twice the total variation distance."""
    a, b = _mu(mu1), _mu(mu2)
    if a.shape != b.shape:
        raise ShapeMismatch(f"occupancy shapes differ: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def saddle_objective(R, mu_agent, mu_expert) -> float:
    """``E_agent[R] - E_expert[R]`` (entropy term excluded)."""
    R = np.asarray(R, dtype=float)
    return float(np.sum((_mu(mu_agent) - _mu(mu_expert)) * R))


def best_response(mdp: TabularMDP, R, entropy_weight: float = 0.0) -> OccupancyMeasure:
    """Occupancy minimising ``E_mu[R] - entropy_weight * H``.

    With a positive weight this is the conditional-entropy regularised problem
    on reward ``-R`` with a uniform reference and ``eta = 1 / entropy_weight``
    (the conditional divergence to uniform is ``log A`` minus the causal
    entropy). With zero weight it is the plain occupancy LP.
    """
    cost_mdp = mdp.with_rewards(-np.asarray(R, dtype=float))
    if entropy_weight < 0:
        raise ValidationError("entropy weight must be nonnegative")
    if entropy_weight == 0:
        return primal_occupancy(solve_lp(build_primal_lp(cost_mdp)), mdp)
    reg = Regularizer.uniform(RegKind.CONDITIONAL, *mdp.shape)
    sol, _ = solve_conditional_dual(cost_mdp, 1.0 / entropy_weight, reg)
    return sol.mu


def min_expected_reward(mdp: TabularMDP, R) -> float:
    """``min_pi E_pi[R]`` over stationary occupancies."""
    mu = best_response(mdp, R, 0.0)
    return float(np.sum(mu.mu * np.asarray(R, dtype=float)))


def _expert_occupancy(expert, mdp: TabularMDP) -> OccupancyMeasure:
    if isinstance(expert, OccupancyMeasure):
        return expert
    return occupancy_from_policy(expert, mdp)


def irl_saddle_solve(mdp: TabularMDP, expert, rc: RewardClass, entropy_weight: float = 0.0,
                     iters: int = 500, step: float = 1.0, cancel=None) -> SaddleResult:
    """Alternate agent best responses with projected reward ascent.

    The reward moves along ``mu_agent - mu_expert`` with step ``step / sqrt(k)``
    and is clipped back into the ball. Both players are averaged over the
    iterates; the gap reported is between the averaged agent occupancy and the
    expert's.
    """
    if iters < 1:
        raise ValidationError("iters must be at least 1")
    mu_e = _expert_occupancy(expert, mdp)
    R = np.zeros(mdp.shape)
    R_sum = np.zeros(mdp.shape)
    mu_sum = np.zeros(mdp.shape)
    trace = SolveTrace()
    k = 0
    for k in range(1, iters + 1):
        if cancel is not None and cancel.is_set():
            trace.reason = "cancelled"
            k -= 1
            break
        mu = best_response(mdp, R, entropy_weight)
        R_sum += R
        mu_sum += mu.mu
        value = saddle_objective(R, mu, mu_e)
        if entropy_weight > 0:
            value -= entropy_weight * causal_entropy(policy_from_occupancy(mu), mdp)
        gap = occupancy_distance(mu_sum / k, mu_e)
        lr = step / np.sqrt(k)
        trace.append(k, value, gap, lr)
        R = rc.project(R + lr * (mu.mu - mu_e.mu))
    else:
        trace.converged = True
        trace.reason = "completed"
    if k == 0:
        raise ValidationError("cancelled before the first iteration")
    avg_mu = OccupancyMeasure(mu_sum / mu_sum.sum())
    return SaddleResult(
        recovered_reward=rc.project(R_sum / k),
        recovered_policy=policy_from_occupancy(avg_mu),
        agent_occupancy=avg_mu,
        objective_trace=trace,
        occupancy_gap=occupancy_distance(avg_mu, mu_e),
    )


def demonstrations_to_occupancy(raw: Mapping[str, Any], n_states: int, n_actions: int) -> OccupancyMeasure:
    """Empirical occupancy from ``{"trajectories": [[[s, a], ...], ...]}``."""
    counts = np.zeros((n_states, n_actions))
    try:
        trajectories = raw["trajectories"]
    except (KeyError, TypeError) as exc:
        raise ValidationError("demonstration file needs a 'trajectories' list") from exc
    for i, traj in enumerate(trajectories):
        for j, pair in enumerate(traj):
            if len(pair) != 2:
                raise ValidationError(f"trajectory {i} step {j}: expected [s, a], got {pair!r}")
            s, a = int(pair[0]), int(pair[1])
            if not (0 <= s < n_states and 0 <= a < n_actions):
                raise ValidationError(f"trajectory {i} step {j}: ({s}, {a}) out of range")
            counts[s, a] += 1
    total = counts.sum()
    if total == 0:
        raise ValidationError("demonstrations contain no state-action pairs")
    return OccupancyMeasure(counts / total)


def load_demonstrations(path: str | PathLike, n_states: int, n_actions: int) -> OccupancyMeasure:
    with open(path) as fh:
        return demonstrations_to_occupancy(json.load(fh), n_states, n_actions)
