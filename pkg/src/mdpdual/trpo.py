"""Trust-region policy steps for tabular softmax policies.

Expectations are exact: states are weighted by the stationary distribution of
the current policy instead of sampled trajectories. The surrogate uses the
reward advantage ``R(s, a) - E_{a ~ pi_k} R(s, a)``, and the trust region is
the stationary-weighted ``KL(pi_theta || pi_k)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Policy, TabularMDP, policy_bias_values, stationary_distribution
from .errors import MaxIterExceeded, NoAscentDirection, NumericalInconsistency, ValidationError

DAMPING = 1e-8
DEFAULT_DELTA = 0.01
CG_TOL = 1e-10


@dataclass(frozen=True)
class SoftmaxPolicyParams:
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 2 or not np.all(np.isfinite(theta)):
            raise ValidationError("theta must be a finite (S, A) matrix")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "SoftmaxPolicyParams":
        return cls(np.zeros((n_states, n_actions)))

    @property
    def log_probs(self) -> np.ndarray:
        z = self.theta - self.theta.max(axis=1, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=1, keepdims=True))

    @property
    def policy(self) -> Policy:
        return Policy.from_logits(self.theta)


def _theta(p) -> np.ndarray:
    return p.theta if isinstance(p, SoftmaxPolicyParams) else np.asarray(p, dtype=float)


def _log_softmax(theta: np.ndarray) -> np.ndarray:
    z = theta - theta.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _old_policy_stats(theta_k: np.ndarray, mdp: TabularMDP):
    logp_k = _log_softmax(theta_k)
    pi_k = np.exp(logp_k)
    nu = stationary_distribution(pi_k, mdp)
    adv = mdp.R - (pi_k * mdp.R).sum(axis=1, keepdims=True)
    return nu, pi_k, logp_k, adv


def surrogate_advantage(theta, theta_k, mdp: TabularMDP) -> float:
    nu, _, _, adv = _old_policy_stats(_theta(theta_k), mdp)
    pi = np.exp(_log_softmax(_theta(theta)))
    return float(nu @ (pi * adv).sum(axis=1))


def _kl_rows(theta: np.ndarray, logp_k: np.ndarray) -> np.ndarray:
    logp = _log_softmax(theta)
    return (np.exp(logp) * (logp - logp_k)).sum(axis=1)


def mean_kl(theta, theta_k, mdp: TabularMDP) -> float:
    """``E_{s ~ nu_k} KL(pi_theta(.|s) || pi_k(.|s))``."""
    nu, _, logp_k, _ = _old_policy_stats(_theta(theta_k), mdp)
    return float(nu @ _kl_rows(_theta(theta), logp_k))


def _kl_grad(theta: np.ndarray, nu: np.ndarray, logp_k: np.ndarray) -> np.ndarray:
    logp = _log_softmax(theta)
    p = np.exp(logp)
    kl = (p * (logp - logp_k)).sum(axis=1, keepdims=True)
    return nu[:, None] * p * (logp - logp_k - kl)


def _finite_difference_check(theta_k, g, H, nu, logp_k, adv, h=1e-5, rtol=1e-4):
    S, A = theta_k.shape
    n = S * A
    g_fd = np.empty(n)
    H_fd = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        e = e.reshape(S, A)
        up = np.exp(_log_softmax(theta_k + e))
        dn = np.exp(_log_softmax(theta_k - e))
        g_fd[j] = nu @ ((up - dn) * adv).sum(axis=1) / (2 * h)
        H_fd[:, j] = ((_kl_grad(theta_k + e, nu, logp_k) - _kl_grad(theta_k - e, nu, logp_k)) / (2 * h)).ravel()
    scale_g = max(np.linalg.norm(g), 1e-12)
    scale_H = max(np.linalg.norm(H), 1e-12)
    if np.linalg.norm(g - g_fd) > rtol * scale_g + 1e-10:
        raise NumericalInconsistency("surrogate gradient disagrees with finite differences")
    if np.linalg.norm(H - H_fd) > rtol * scale_H:
        raise NumericalInconsistency("KL Hessian disagrees with finite differences")


def grad_and_hessian(theta_k, mdp: TabularMDP, delta: float | None = None, check: bool = True):
    """Surrogate gradient and KL Hessian at ``theta_k``, both flattened row-major.

    Returns ``(g, Hvp, H)`` where ``H`` is the undamped Hessian (block
    diagonal over states, ``nu(s) (diag(pi) - pi pi^T)`` per block) and
    ``Hvp`` applies ``H + 1e-8 I`` without forming it. ``delta`` is accepted
    for signature symmetry with :func:`trpo_step` and unused.
    """
    theta_k = _theta(theta_k)
    S, A = theta_k.shape
    nu, pi_k, logp_k, adv = _old_policy_stats(theta_k, mdp)
    g = nu[:, None] * pi_k * adv
    # the surrogate is invariant to per-state shifts of theta, so each row of g
    # sums to zero; remove the round-off so the 1e-8 damping cannot amplify it
    g = (g - g.mean(axis=1, keepdims=True)).ravel()
    H = np.zeros((S * A, S * A))
    for s in range(S):
        sl = slice(s * A, (s + 1) * A)
        H[sl, sl] = nu[s] * (np.diag(pi_k[s]) - np.outer(pi_k[s], pi_k[s]))
    if check:
        _finite_difference_check(theta_k, g, H, nu, logp_k, adv)

    def Hvp(v):
        v = np.asarray(v, dtype=float).reshape(S, A)
        pv = (pi_k * v).sum(axis=1, keepdims=True)
        return (nu[:, None] * pi_k * (v - pv)).ravel() + DAMPING * v.ravel()

    return g, Hvp, H


def conjugate_gradient(Hvp: Callable[[np.ndarray], np.ndarray], g, tol: float = CG_TOL,
                       max_iter: int | None = None, return_iterations: bool = False):
    """Solve ``H x = g`` for symmetric positive (semi)definite ``H``.

    Stops once ``||H x - g|| <= tol ||g||``. Raises :class:`MaxIterExceeded`
    carrying the best iterate when ``max_iter`` (default: dimension) runs out.
    """
    g = np.asarray(g, dtype=float)
    max_iter = len(g) if max_iter is None else max_iter
    x = np.zeros_like(g)
    r = g.copy()
    p = r.copy()
    rr = r @ r
    target = tol * np.sqrt(rr)
    best_x, best_res = x.copy(), np.sqrt(rr)
    it = 0
    while np.sqrt(rr) > target:
        if it >= max_iter:
            raise MaxIterExceeded(f"conjugate gradient needed more than {max_iter} iterations",
                                  x=best_x, residual=best_res)
        Hp = Hvp(p)
        alpha = rr / (p @ Hp)
        x = x + alpha * p
        r = r - alpha * Hp
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
        if np.sqrt(rr) < best_res:
            best_x, best_res = x.copy(), np.sqrt(rr)
    return (x, it) if return_iterations else x


@dataclass(frozen=True)
class TrustRegionStep:
    g: np.ndarray
    direction: np.ndarray          # H^{-1} g
    step_scale: float              # sqrt(2 delta / g^T H^{-1} g)
    alpha: float                   # 0 when the line search gave up
    new_params: SoftmaxPolicyParams
    predicted_kl: float            # 0.5 s^T H s of the full (alpha = 1) step
    actual_kl: float
    surrogate: float
    cg_iters: int

    @property
    def accepted(self) -> bool:
        return self.alpha > 0


def trpo_step(theta_k, mdp: TabularMDP, delta: float = DEFAULT_DELTA, shrink: float = 0.8,
              max_backtracks: int = 15, check: bool = True) -> TrustRegionStep:
    """One natural-gradient step scaled to the trust region, then backtracked.

    The first ``alpha`` in ``1, shrink, shrink^2, ...`` whose true mean KL is
    within ``delta`` and whose surrogate is positive is accepted. If none of
    ``max_backtracks`` trials qualifies, the old parameters come back with
    ``alpha = 0``.
    """
    if delta <= 0:
        raise ValidationError("delta must be positive")
    theta_k = _theta(theta_k)
    g, Hvp, _ = grad_and_hessian(theta_k, mdp, delta, check=check)
    if np.max(np.abs(g)) <= 1e-12:
        raise NoAscentDirection("surrogate gradient vanishes")
    try:
        x, cg_iters = conjugate_gradient(Hvp, g, return_iterations=True)
    except MaxIterExceeded as exc:
        x, cg_iters = exc.x, len(g)
    gHg = float(g @ x)
    if gHg <= 0:
        raise NoAscentDirection("natural gradient has no ascent component")
    scale = float(np.sqrt(2.0 * delta / gHg))
    full = (scale * x).reshape(theta_k.shape)
    predicted = 0.5 * float(full.ravel() @ Hvp(full))
    alpha = 1.0
    for _ in range(max_backtracks):
        theta = theta_k + alpha * full
        kl = mean_kl(theta, theta_k, mdp)
        surr = surrogate_advantage(theta, theta_k, mdp)
        if kl <= delta and surr > 0:
            return TrustRegionStep(g, x, scale, alpha, SoftmaxPolicyParams(theta), predicted, kl, surr, cg_iters)
        alpha *= shrink
    return TrustRegionStep(g, x, scale, 0.0, SoftmaxPolicyParams(theta_k), predicted, 0.0, 0.0, cg_iters)


@dataclass(frozen=True)
class TRPORecord:
    iter: int
    avg_reward: float
    surrogate: float
    kl: float
    alpha: float
    cg_iters: int


@dataclass
class TRPORun:
    params: SoftmaxPolicyParams
    records: list[TRPORecord] = field(default_factory=list)
    reason: str = ""


def run_trpo(mdp: TabularMDP, delta: float = DEFAULT_DELTA, iters: int = 100, theta0=None,
             check: bool = False, cancel=None) -> TRPORun:
    params = SoftmaxPolicyParams.zeros(*mdp.shape) if theta0 is None else SoftmaxPolicyParams(_theta(theta0))
    run = TRPORun(params)
    gain = policy_bias_values(params.policy, mdp).avg_reward
    run.records.append(TRPORecord(0, gain, 0.0, 0.0, 0.0, 0))
    for k in range(1, iters + 1):
        if cancel is not None and cancel.is_set():
            run.reason = "cancelled"
            return run
        try:
            step = trpo_step(params, mdp, delta, check=check)
        except NoAscentDirection:
            run.reason = "no ascent direction"
            return run
        params = step.new_params
        gain = policy_bias_values(params.policy, mdp).avg_reward
        run.records.append(TRPORecord(k, gain, step.surrogate, step.actual_kl, step.alpha, step.cg_iters))
        run.params = params
    run.reason = "completed"
    return run
