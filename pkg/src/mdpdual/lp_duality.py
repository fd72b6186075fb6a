"""Average-reward LP pair: occupancy-measure primal and value-function dual."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    OccupancyMeasure,
    Policy,
    TabularMDP,
    ValueSolution,
    policy_bias_values,
    policy_from_occupancy,
)
from .errors import MultichainError, NotOptimal, SingularSystem
from .simplex import LinearProgram, LPSolution, solve_lp

GAP_TOL = 1e-7
BELLMAN_TOL = 1e-6


def build_primal_lp(mdp: TabularMDP) -> LinearProgram:
    """Maximise expected reward over stationary state-action distributions.

    Variables are ``mu[s, a]`` flattened row-major. The flow row for state 0
    is dropped: the flow rows sum to zero, so it is implied by the others.
    """
    S, A = mdp.shape
    n = S * A
    rows = [np.ones(n)]
    rhs = [1.0]
    names = ["mass"]
    P = mdp.P.reshape(n, S)
    for t in range(1, S):
        row = -P[:, t].copy()
        row[t * A:(t + 1) * A] += 1.0
        rows.append(row)
        rhs.append(0.0)
        names.append(f"flow{t}")
    return LinearProgram(
        c=mdp.R.ravel(),
        A=np.array(rows),
        b=np.array(rhs),
        senses=("=",) * len(rows),
        lower=np.zeros(n),
        maximize=True,
        var_names=tuple(f"mu_{s}_{a}" for s in range(S) for a in range(A)),
        row_names=tuple(names),
    )


def build_dual_lp(mdp: TabularMDP) -> LinearProgram:
    """Minimise the gain over value functions satisfying every Bellman inequality.

    Variables are ``[gain, V[0], ..., V[S-1]]``, all free; the last row pins
    ``V[0] = 0``.
    """
    S, A = mdp.shape
    rows, rhs, names = [], [], []
    for s in range(S):
        for a in range(A):
            row = np.zeros(S + 1)
            row[0] = 1.0
            row[1 + s] += 1.0
            row[1:] -= mdp.P[s, a]
            rows.append(row)
            rhs.append(mdp.R[s, a])
            names.append(f"bell_{s}_{a}")
    anchor = np.zeros(S + 1)
    anchor[1] = 1.0
    rows.append(anchor)
    rhs.append(0.0)
    names.append("anchor")
    return LinearProgram(
        c=np.eye(S + 1)[0],
        A=np.array(rows),
        b=np.array(rhs),
        senses=(">=",) * (S * A) + ("=",),
        lower=np.full(S + 1, -np.inf),
        maximize=False,
        var_names=("gain",) + tuple(f"V_{s}" for s in range(S)),
        row_names=tuple(names),
    )


def primal_occupancy(primal: LPSolution, mdp: TabularMDP) -> OccupancyMeasure:
    mu = np.maximum(primal.x.reshape(mdp.shape), 0.0)
    return OccupancyMeasure(mu / mu.sum())


def dual_values(dual: LPSolution, mdp: TabularMDP, refine: bool = True) -> ValueSolution:
    """Gain and value function read off an optimal dual solution.

    The dual optimum is not unique in ``V``: on states that are transient
    under every optimal policy the LP vertex may leave the Bellman inequality
    slack. With ``refine`` the vertex is moved, by policy iteration started
    from its greedy policy, to the dual-optimal point that satisfies the
    optimality equations with equality.
    """
    gain = float(dual.x[0])
    V = np.array(dual.x[1:])
    if refine:
        V = _bellman_refine(V, mdp)
    return ValueSolution(V, gain, optimality_residual(V, gain, mdp))


def _greedy(q: np.ndarray, tol: float) -> np.ndarray:
    return np.argmax(q >= q.max(axis=1, keepdims=True) - tol, axis=1)


def _bellman_refine(V: np.ndarray, mdp: TabularMDP, max_iter: int = 1000) -> np.ndarray:
    actions = _greedy(mdp.R + mdp.P @ V, 1e-9)
    rows = np.arange(mdp.n_states)
    for _ in range(max_iter):
        try:
            sol = policy_bias_values(Policy.deterministic(actions, mdp.n_actions), mdp)
        except (MultichainError, SingularSystem):
            return V
        q = mdp.R + mdp.P @ sol.V
        better = q.max(axis=1) > q[rows, actions] + 1e-12
        if not better.any():
            return np.array(sol.V)
        actions = np.where(better, _greedy(q, 0.0), actions)
    return V


def optimality_residual(V, gain: float, mdp: TabularMDP) -> float:
    """``max_s |V(s) - max_a (R - gain + P V)(s, a)|``."""
    V = np.asarray(V, dtype=float)
    q = mdp.R - gain + mdp.P @ V
    return float(np.max(np.abs(V - q.max(axis=1))))


def extract_policy(primal: LPSolution, mdp: TabularMDP) -> Policy:
    return policy_from_occupancy(primal_occupancy(primal, mdp))


@dataclass(frozen=True)
class DualityReport:
    primal_objective: float
    dual_objective: float
    gap: float
    bellman_residual: float
    values: ValueSolution
    passed: bool


def verify_strong_duality(primal: LPSolution, dual: LPSolution, mdp: TabularMDP,
                          gap_tol: float = GAP_TOL, residual_tol: float = BELLMAN_TOL) -> DualityReport:
    if not (primal.optimal and dual.optimal):
        raise NotOptimal(f"primal status {primal.status.value}, dual status {dual.status.value}")
    values = dual_values(dual, mdp)
    gap = abs(primal.objective_value - dual.objective_value)
    passed = gap <= gap_tol and values.residual <= residual_tol
    return DualityReport(primal.objective_value, dual.objective_value, gap,
                         values.residual, values, passed)


def solve_average_reward_lp(mdp: TabularMDP):
    """Solve both programs and return ``(primal, dual, report)``."""
    primal = solve_lp(build_primal_lp(mdp))
    dual = solve_lp(build_dual_lp(mdp))
    return primal, dual, verify_strong_duality(primal, dual, mdp)
