"""Entropy-regularised average-reward MDPs and the solvers built on their duals.

Two Bregman regularisers are supported, both relative to a strictly positive
reference occupancy ``mu_ref``:

* ``shannon``: ``sum mu log(mu / mu_ref) - sum mu + sum mu_ref``
* ``conditional``: ``sum mu(s, a) log(pi_mu(a|s) / pi_ref(a|s))``

The Shannon dual is a smooth convex function of the value vector and is
minimised directly. The conditional dual is a soft average-reward Bellman
equation and is solved by soft policy iteration.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    OccupancyMeasure,
    Policy,
    TabularMDP,
    ValueSolution,
    _mu,
    _probs,
    average_reward,
    chain_bias,
    flow_residual,
    occupancy_from_policy,
    policy_bias_values,
    policy_from_occupancy,
)
from .errors import IterationLimit, SupportViolation, ValidationError

GRAD_TOL = 1e-8
SOFT_BELLMAN_TOL = 1e-8


class RegKind(str, enum.Enum):
    SHANNON = "shannon"
    CONDITIONAL = "conditional"


@dataclass(frozen=True)
class Regularizer:
    kind: RegKind
    reference: OccupancyMeasure
    reference_policy: Policy = field(init=False)

    def __post_init__(self):
        kind = RegKind(self.kind)
        ref = self.reference
        if not isinstance(ref, OccupancyMeasure):
            ref = OccupancyMeasure(ref)
        if np.any(ref.mu <= 0):
            raise SupportViolation("reference occupancy must be strictly positive")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "reference_policy", policy_from_occupancy(ref))

    @classmethod
    def uniform(cls, kind, n_states: int, n_actions: int) -> "Regularizer":
        return cls(kind, OccupancyMeasure(np.full((n_states, n_actions), 1.0 / (n_states * n_actions))))

    @classmethod
    def from_policy(cls, kind, pi, mdp: TabularMDP) -> "Regularizer":
        """Reference occupancy induced by a strictly positive policy."""
        return cls(kind, occupancy_from_policy(pi, mdp))


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    objective: float
    gap_or_residual: float
    step_size: float


@dataclass
class SolveTrace:
    records: list[TraceRecord] = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    def append(self, iter, objective, gap_or_residual, step_size):
        if self.records and iter <= self.records[-1].iter:
            raise ValueError("trace iterations must be strictly increasing")
        self.records.append(TraceRecord(int(iter), float(objective), float(gap_or_residual), float(step_size)))

    def __len__(self):
        return len(self.records)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])


@dataclass(frozen=True)
class RegularizedSolution:
    mu: OccupancyMeasure
    value: ValueSolution
    eta: float
    primal_objective: float
    dual_objective: float
    gap: float
    policy: Policy
    flow_residual_before: float = 0.0

    def __post_init__(self):
        if self.eta <= 0:
            raise ValidationError("eta must be positive")

    @property
    def avg_reward(self) -> float:
        """Regularised optimum, i.e. the dual objective at the solution."""
        return self.dual_objective


def _cancelled(cancel) -> bool:
    return cancel is not None and cancel.is_set()


def _xlogratio(p: np.ndarray, logp: np.ndarray, logq: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.where(p > 0, p * (logp - logq), 0.0)


def _logsumexp(z: np.ndarray, axis=None) -> np.ndarray:
    m = np.max(z, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = m + np.log(np.sum(np.exp(z - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if axis is not None else out.reshape(())


def bregman_divergence(reg: Regularizer, mu) -> float:
    m = _mu(mu)
    ref = reg.reference.mu
    if m.shape != ref.shape:
        raise ValidationError(f"occupancy shape {m.shape} differs from reference {ref.shape}")
    with np.errstate(divide="ignore"):
        if reg.kind is RegKind.SHANNON:
            return float(np.sum(_xlogratio(m, np.log(m), np.log(ref))) - m.sum() + ref.sum())
        pi = policy_from_occupancy(m).probs
        return float(np.sum(_xlogratio(m, np.log(pi), np.log(reg.reference_policy.probs))))


def regularized_objective(mdp: TabularMDP, eta: float, reg: Regularizer, mu) -> float:
    if eta <= 0:
        raise ValidationError("eta must be positive")
    return average_reward(mu, mdp) - bregman_divergence(reg, mu) / eta


def advantages(mdp: TabularMDP, V) -> np.ndarray:
    """``R(s, a) + sum_s' P(s'|s, a) V(s') - V(s)``."""
    V = np.asarray(V, dtype=float)
    return mdp.R + mdp.P @ V - V[:, None]


# ---------------------------------------------------------------------------
# Shannon (relative entropy) dual

def _shannon_parts(mdp, eta, reg, V):
    z = np.log(reg.reference.mu) + eta * advantages(mdp, V)
    lse = _logsumexp(z)
    w = np.exp(z - lse)
    grad = np.einsum("sa,sat->t", w, mdp.P) - w.sum(axis=1)
    return float(lse) / eta, grad, w


def shannon_dual(mdp: TabularMDP, eta: float, reg: Regularizer, V) -> tuple[float, np.ndarray]:
    """Dual function value and its gradient in ``V``.

    The gradient entry for state t is the inflow minus the outflow of the
    exponential-weight distribution at t, so it vanishes exactly when those
    weights are flow-feasible.
    """
    V = np.asarray(V, dtype=float)
    if not np.all(np.isfinite(V)):
        raise ValueError("V must be finite")
    g, grad, _ = _shannon_parts(mdp, eta, reg, V)
    return g, grad


def _flow_operator(mdp: TabularMDP) -> np.ndarray:
    """Matrix mapping V to the flattened ``(P V - V)(s, a)``."""
    S, A = mdp.shape
    M = mdp.P.reshape(S * A, S).copy()
    M[np.arange(S * A), np.repeat(np.arange(S), A)] -= 1.0
    return M


def _minimize_shannon(mdp, eta, reg, V, trace, max_iter, cancel, offset=0):
    M = _flow_operator(mdp)[:, 1:]    # V[0] pinned at 0
    g, grad, w = _shannon_parts(mdp, eta, reg, V)
    it = offset
    for _ in range(max_iter):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= GRAD_TOL or _cancelled(cancel):
            return V, g, grad, w, it
        wf = w.ravel()
        H = eta * (M.T * wf) @ M - eta * np.outer(M.T @ wf, M.T @ wf)
        H[np.diag_indices_from(H)] += 1e-12 * (1.0 + np.trace(H))
        d = np.zeros_like(V)
        try:
            d[1:] = -np.linalg.solve(H, grad[1:])
        except np.linalg.LinAlgError:
            d[1:] = -grad[1:]
        slope = float(grad @ d)
        if slope >= 0:
            d, slope = -grad, -float(grad @ grad)
        t = 1.0
        while True:
            g_new, grad_new, w_new = _shannon_parts(mdp, eta, reg, V + t * d)
            if g_new <= g + 1e-4 * t * slope:
                break
            # at round-off level the Armijo test is blind; fall back on the gradient
            if abs(g_new - g) <= 1e-14 * (1.0 + abs(g)) and np.max(np.abs(grad_new)) < gnorm:
                break
            t *= 0.5
            if t < 1e-20:
                break
        V = V + t * d
        V = V - V[0]
        g, grad, w = g_new, grad_new, w_new
        it += 1
        trace.append(it, g, np.max(np.abs(grad)), t)
    return V, g, grad, w, it


def solve_shannon_dual(mdp: TabularMDP, eta: float, reg: Regularizer, V0=None,
                       max_iter: int = 100_000, cancel=None) -> tuple[RegularizedSolution, SolveTrace]:
    """Minimise the Shannon dual and recover the primal optimum.

    Damped Newton steps with Armijo backtracking (shrink 0.5, slope factor
    1e-4, initial step 1) run until the gradient infinity norm is at most
    1e-8. Large ``eta`` is reached through a x10 continuation ladder starting
    at 1, each rung warm-starting the next. The recovered occupancy is made
    exactly flow-feasible by recomputing the stationary distribution of its
    conditional policy; the residual before that correction is reported.
    """
    if reg.kind is not RegKind.SHANNON:
        raise ValidationError("solve_shannon_dual needs a Shannon regulariser")
    if eta <= 0:
        raise ValidationError("eta must be positive")
    trace = SolveTrace()
    V = np.zeros(mdp.n_states) if V0 is None else np.asarray(V0, dtype=float) - float(V0[0])
    ladder = []
    e = 1.0
    while e * 10 < eta and V0 is None:
        ladder.append(e)
        e *= 10
    it = 0
    for rung in ladder:
        V, _, _, _, it = _minimize_shannon(mdp, rung, reg, V, trace, max_iter, cancel, it)
    V, g, grad, w, it = _minimize_shannon(mdp, eta, reg, V, trace, max_iter, cancel, it)
    gnorm = float(np.max(np.abs(grad)))
    trace.converged = gnorm <= GRAD_TOL
    trace.reason = "gradient tolerance reached" if trace.converged else (
        "cancelled" if _cancelled(cancel) else "iteration limit")

    raw = OccupancyMeasure(w / w.sum())
    before = flow_residual(raw, mdp)
    policy = policy_from_occupancy(raw)
    mu = occupancy_from_policy(policy, mdp)
    primal = regularized_objective(mdp, eta, reg, mu)
    sol = RegularizedSolution(mu, ValueSolution(V, g, gnorm), float(eta), primal, g,
                              abs(primal - g), policy, before)
    if not trace.converged and not _cancelled(cancel):
        raise IterationLimit(f"Shannon dual not converged (gradient {gnorm:.3g})", partial=(sol, trace))
    return sol, trace


# ---------------------------------------------------------------------------
# conditional-entropy dual

def soft_bellman_residual(V, lam: float, mdp: TabularMDP, eta: float, reg: Regularizer) -> float:
    """``max_s |V(s) - (1/eta) log sum_a pi_ref e^{eta (R - lam + P V)}|``."""
    V = np.asarray(V, dtype=float)
    z = np.log(reg.reference_policy.probs) + eta * (mdp.R - lam + mdp.P @ V)
    return float(np.max(np.abs(V - _logsumexp(z, axis=1) / eta)))


def _conditional_logits(V, mdp, eta, reg):
    return np.log(reg.reference_policy.probs) + eta * advantages(mdp, V)


def conditional_policy(V, lam, mdp: TabularMDP, eta: float, reg: Regularizer) -> Policy:
    """Exponentially tilted reference policy; ``lam`` cancels in the normalisation."""
    z = _conditional_logits(V, mdp, eta, reg)
    return Policy.from_logits(z)


def solve_conditional_dual(mdp: TabularMDP, eta: float, reg: Regularizer, max_iter: int = 500,
                           cancel=None) -> tuple[RegularizedSolution, SolveTrace]:
    """Solve the soft average-reward Bellman equation by soft policy iteration.

    Each sweep evaluates the current policy on the entropy-penalised reward
    (gain ``lam`` and bias ``V`` with ``V[0] = 0``) and then replaces it by
    the tilted reference policy for ``V``. This is Newton's method on the
    fixed-point system, so it converges quadratically near the solution; the
    gain increases monotonically along the way.
    """
    if reg.kind is not RegKind.CONDITIONAL:
        raise ValidationError("solve_conditional_dual needs a conditional regulariser")
    if eta <= 0:
        raise ValidationError("eta must be positive")
    log_ref = np.log(reg.reference_policy.probs)
    log_pi = log_ref.copy()
    trace = SolveTrace()
    residual = np.inf
    V, lam = np.zeros(mdp.n_states), 0.0
    for it in range(1, max_iter + 1):
        pi = np.exp(log_pi)
        P_pi = np.einsum("sa,sat->st", pi, mdp.P)
        penalty = np.sum(_xlogratio(pi, log_pi, log_ref), axis=1) / eta
        ev = chain_bias(P_pi, (pi * mdp.R).sum(axis=1) - penalty)
        V, lam = np.array(ev.V), ev.avg_reward
        residual = soft_bellman_residual(V, lam, mdp, eta, reg)
        z = log_ref + eta * advantages(mdp, V)
        log_pi = z - _logsumexp(z, axis=1)[:, None]
        trace.append(it, lam, residual, 1.0)
        if residual <= 1e-13 * (1.0 + abs(lam)) or _cancelled(cancel):
            break
        if it > 1 and residual <= SOFT_BELLMAN_TOL and trace.records[-2].gap_or_residual <= residual:
            break  # round-off floor
    trace.converged = residual <= SOFT_BELLMAN_TOL
    trace.reason = "soft Bellman residual reached" if trace.converged else (
        "cancelled" if _cancelled(cancel) else "iteration limit")
    policy = Policy.from_logits(log_pi)
    mu = occupancy_from_policy(policy, mdp)
    primal = regularized_objective(mdp, eta, reg, mu)
    sol = RegularizedSolution(mu, ValueSolution(V, lam, residual), float(eta), primal, lam,
                              abs(primal - lam), policy)
    if not trace.converged and not _cancelled(cancel):
        raise IterationLimit(f"conditional dual not converged (residual {residual:.3g})",
                             partial=(sol, trace))
    return sol, trace


def solve_regularized(mdp: TabularMDP, eta: float, reg: Regularizer, **kwargs):
    if reg.kind is RegKind.SHANNON:
        return solve_shannon_dual(mdp, eta, reg, **kwargs)
    return solve_conditional_dual(mdp, eta, reg, **kwargs)


# ---------------------------------------------------------------------------
# policy-space solvers

_TINY = np.finfo(float).tiny


def mirror_descent_solve(mdp: TabularMDP, eta_step: float, kind, max_iters: int = 1000,
                         mu0=None, tol: float = 1e-9, cancel=None) -> tuple[Policy, SolveTrace]:
    """Proximal steps ``mu_{k+1} = argmax_C <mu, R> - D(mu || mu_k) / eta_step``.

    The trace records the average reward of each new iterate and the l1
    change from the previous one.
    """
    if eta_step <= 0:
        raise ValidationError("eta_step must be positive")
    kind = RegKind(kind)
    S, A = mdp.shape
    mu = np.full((S, A), 1.0 / (S * A)) if mu0 is None else np.array(_mu(mu0), dtype=float)
    trace = SolveTrace()
    policy = policy_from_occupancy(mu)
    for k in range(1, max_iters + 1):
        if _cancelled(cancel):
            trace.reason = "cancelled"
            return policy, trace
        # entries that underflowed stay representable as a valid reference
        ref = np.maximum(mu, _TINY)
        reg = Regularizer(kind, OccupancyMeasure(ref / ref.sum()))
        sol, _ = solve_regularized(mdp, eta_step, reg)
        new = np.array(sol.mu.mu)
        change = float(np.abs(new - mu).sum())
        mu = new
        policy = sol.policy
        trace.append(k, average_reward(mu, mdp), change, eta_step)
        if change <= tol:
            trace.converged = True
            trace.reason = "iterates stalled"
            return policy, trace
    trace.reason = "iteration limit"
    return policy, trace


def _tilt(log_pi: np.ndarray, adv: np.ndarray, eta: float) -> Policy:
    z = log_pi + eta * adv
    return Policy.from_logits(z)


def trpo_md_update(pi_k, mdp: TabularMDP, eta: float) -> Policy:
    """Exact mirror-descent policy step weighted by the unregularised advantage."""
    p = _probs(pi_k)
    vals = policy_bias_values(p, mdp)
    with np.errstate(divide="ignore"):
        return _tilt(np.log(p), advantages(mdp, vals.V), eta)


def dual_averaging_update(pi_k, mdp: TabularMDP, eta_schedule: float | Callable[[int], float],
                          k: int) -> Policy:
    """Entropy-regularised greedy step with no pull towards ``pi_k``."""
    eta = eta_schedule(k) if callable(eta_schedule) else float(eta_schedule)
    if eta <= 0:
        raise ValidationError("the step schedule must be positive")
    vals = policy_bias_values(pi_k, mdp)
    return _tilt(np.zeros(mdp.shape), advantages(mdp, vals.V), eta)


def run_theoretical_trpo(mdp: TabularMDP, eta: float = 1.0, iters: int = 500, pi0=None,
                         cancel=None) -> tuple[Policy, SolveTrace]:
    pi = Policy.uniform(*mdp.shape) if pi0 is None else pi0
    trace = SolveTrace()
    prev = policy_bias_values(pi, mdp).avg_reward
    trace.append(0, prev, 0.0, eta)
    for k in range(1, iters + 1):
        if _cancelled(cancel):
            trace.reason = "cancelled"
            return pi, trace
        pi = trpo_md_update(pi, mdp, eta)
        gain = policy_bias_values(pi, mdp).avg_reward
        trace.append(k, gain, gain - prev, eta)
        prev = gain
    trace.converged = True
    trace.reason = "completed"
    return pi, trace


def run_dual_averaging(mdp: TabularMDP, eta_schedule=1.0, iters: int = 500, pi0=None,
                       cancel=None) -> tuple[Policy, SolveTrace]:
    """Iterate :func:`dual_averaging_update`; no convergence is claimed or checked."""
    pi = Policy.uniform(*mdp.shape) if pi0 is None else pi0
    trace = SolveTrace()
    prev = policy_bias_values(pi, mdp).avg_reward
    trace.append(0, prev, 0.0, eta_schedule(0) if callable(eta_schedule) else eta_schedule)
    for k in range(1, iters + 1):
        if _cancelled(cancel):
            trace.reason = "cancelled"
            return pi, trace
        new = dual_averaging_update(pi, mdp, eta_schedule, k)
        gain = policy_bias_values(new, mdp).avg_reward
        step = eta_schedule(k) if callable(eta_schedule) else eta_schedule
        trace.append(k, gain, float(np.abs(new.probs - pi.probs).sum()), step)
        pi = new
    trace.reason = "completed"
    return pi, trace
