"""Tabular MDP data model, stationary distributions and policy evaluation.

Arrays follow one layout everywhere: transitions ``P[s, a, s']``, rewards
``R[s, a]``, policies and occupancy measures ``[s, a]``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Any, Mapping

import numpy as np

from .errors import (
    DimensionMismatch,
    MultichainError,
    NegativeProbability,
    NonConvergence,
    NonStochasticRow,
    ShapeMismatch,
    SingularSystem,
    TooLarge,
    ValidationError,
)

ROW_TOL = 1e-9
POLICY_TOL = 1e-12
MASS_TOL = 1e-10
FLOW_TOL = 1e-8
STATIONARY_TOL = 1e-10
BRUTE_FORCE_LIMIT = 10**6


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TabularMDP:
    """Finite MDP. ``gamma=None`` means the average-reward setting."""

    P: np.ndarray
    R: np.ndarray
    gamma: float | None = None

    def __post_init__(self):
        P = _frozen(self.P)
        R = _frozen(self.R)
        if P.ndim != 3 or P.shape[0] != P.shape[2] or P.shape[0] == 0 or P.shape[1] == 0:
            raise DimensionMismatch(f"P must have shape (S, A, S), got {P.shape}")
        if R.shape != P.shape[:2]:
            raise DimensionMismatch(f"R must have shape {P.shape[:2]}, got {R.shape}")
        if not np.all(np.isfinite(P)):
            raise ValidationError("transition probabilities must be finite")
        if not np.all(np.isfinite(R)):
            raise ValidationError("rewards must be finite")
        neg = np.argwhere(P < 0)
        if len(neg):
            s, a, t = neg[0]
            raise NegativeProbability(f"P(s={s}, a={a}, s'={t}) = {P[s, a, t]} is negative")
        sums = P.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)
        if len(bad):
            s, a = bad[0]
            raise NonStochasticRow(f"transition row (s={s}, a={a}) sums to {sums[s, a]!r}")
        if self.gamma is not None and not 0.0 <= self.gamma <= 1.0:
            raise ValidationError(f"gamma must lie in [0, 1], got {self.gamma}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "R", R)

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.P.shape[:2]

    def with_rewards(self, R) -> "TabularMDP":
        return TabularMDP(self.P, R, self.gamma)

    def to_dict(self) -> dict:
        S, A = self.shape
        transitions = [
            [int(s), int(a), int(t), float(self.P[s, a, t])]
            for s, a, t in zip(*np.nonzero(self.P))
        ]
        rewards = [[s, a, float(self.R[s, a])] for s in range(S) for a in range(A)]
        out = {"n_states": S, "n_actions": A, "transitions": transitions, "rewards": rewards}
        if self.gamma is not None:
            out["gamma"] = self.gamma
        return out


@dataclass(frozen=True)
class Policy:
    """Row-stochastic matrix ``probs[s, a] = pi(a | s)``."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 2:
            raise ShapeMismatch(f"policy must be a matrix, got shape {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise NegativeProbability("policy entries must be finite and nonnegative")
        rows = p.sum(axis=1)
        bad = np.flatnonzero(np.abs(rows - 1.0) > POLICY_TOL)
        if len(bad):
            raise NonStochasticRow(f"policy row {bad[0]} sums to {rows[bad[0]]!r}")
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "Policy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), actions] = 1.0
        return cls(probs)

    @classmethod
    def from_weights(cls, w) -> "Policy":
        """Normalise nonnegative weights row by row."""
        w = np.asarray(w, dtype=float)
        return cls(w / w.sum(axis=1, keepdims=True))

    @classmethod
    def from_logits(cls, logits) -> "Policy":
        z = np.asarray(logits, dtype=float)
        z = z - z.max(axis=1, keepdims=True)
        return cls.from_weights(np.exp(z))

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape


@dataclass(frozen=True)
class OccupancyMeasure:
    """Joint state-action distribution ``mu[s, a]``.

    Only the simplex invariant is checked here; flow feasibility depends on
    an MDP and is measured by :func:`flow_residual`.
    """

    mu: np.ndarray

    def __post_init__(self):
        mu = _frozen(self.mu)
        if mu.ndim != 2:
            raise ShapeMismatch(f"occupancy must be a matrix, got shape {mu.shape}")
        if np.any(mu < 0) or not np.all(np.isfinite(mu)):
            raise NegativeProbability("occupancy entries must be finite and nonnegative")
        if abs(mu.sum() - 1.0) > MASS_TOL:
            raise ValidationError(f"occupancy mass is {mu.sum()!r}, expected 1")
        object.__setattr__(self, "mu", mu)

    @property
    def state_marginal(self) -> np.ndarray:
        return self.mu.sum(axis=1)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mu.shape


@dataclass(frozen=True)
class ValueSolution:
    V: np.ndarray
    avg_reward: float
    residual: float = 0.0

    def __post_init__(self):
        V = _frozen(self.V)
        if not np.all(np.isfinite(V)):
            raise ValidationError("value vector must be finite")
        if self.residual < 0:
            raise ValidationError("residual must be nonnegative")
        object.__setattr__(self, "V", V)


def _probs(pi) -> np.ndarray:
    return pi.probs if isinstance(pi, Policy) else np.asarray(pi, dtype=float)


def _mu(mu) -> np.ndarray:
    return mu.mu if isinstance(mu, OccupancyMeasure) else np.asarray(mu, dtype=float)


def _check_shape(arr: np.ndarray, mdp: TabularMDP, what: str):
    if arr.shape != mdp.shape:
        raise ShapeMismatch(f"{what} has shape {arr.shape}, MDP expects {mdp.shape}")


# ---------------------------------------------------------------------------
# parsing

def validate_mdp(raw: Mapping[str, Any] | TabularMDP) -> TabularMDP:
    """Build a validated :class:`TabularMDP` from its JSON description.

    The description lists sparse ``transitions`` as ``[s, a, s', p]`` and
    ``rewards`` as ``[s, a, r]``; anything unlisted is zero.
    """
    if isinstance(raw, TabularMDP):
        return TabularMDP(raw.P, raw.R, raw.gamma)
    try:
        S = int(raw["n_states"])
        A = int(raw["n_actions"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"n_states and n_actions are required integers ({exc})") from exc
    if S <= 0 or A <= 0:
        raise DimensionMismatch(f"need positive dimensions, got n_states={S}, n_actions={A}")
    P = np.zeros((S, A, S))
    R = np.zeros((S, A))
    seen = set()
    for i, entry in enumerate(raw.get("transitions", [])):
        if len(entry) != 4:
            raise DimensionMismatch(f"transition entry {i} must be [s, a, s', p], got {entry!r}")
        s, a, t, p = entry
        s, a, t = int(s), int(a), int(t)
        if not (0 <= s < S and 0 <= a < A and 0 <= t < S):
            raise DimensionMismatch(f"transition entry {i} index out of range: {entry!r}")
        if (s, a, t) in seen:
            raise ValidationError(f"transition entry {i} duplicates (s={s}, a={a}, s'={t})")
        seen.add((s, a, t))
        P[s, a, t] = float(p)
    seen.clear()
    for i, entry in enumerate(raw.get("rewards", [])):
        if len(entry) != 3:
            raise DimensionMismatch(f"reward entry {i} must be [s, a, r], got {entry!r}")
        s, a, r = entry
        s, a = int(s), int(a)
        if not (0 <= s < S and 0 <= a < A):
            raise DimensionMismatch(f"reward entry {i} index out of range: {entry!r}")
        if (s, a) in seen:
            raise ValidationError(f"reward entry {i} duplicates (s={s}, a={a})")
        seen.add((s, a))
        R[s, a] = float(r)
    gamma = raw.get("gamma")
    return TabularMDP(P, R, None if gamma is None else float(gamma))


def load_mdp(path: str | PathLike) -> TabularMDP:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    return validate_mdp(raw)


# ---------------------------------------------------------------------------
# dynamics

def induced_chain(pi, mdp: TabularMDP) -> np.ndarray:
    """State transition matrix ``P_pi[s, s']`` under ``pi``."""
    p = _probs(pi)
    _check_shape(p, mdp, "policy")
    return np.einsum("sa,sat->st", p, mdp.P)


def bellman_backup(Q, pi, mdp: TabularMDP) -> np.ndarray:
    """One application of the policy-evaluation operator to ``Q``."""
    Q = np.asarray(Q, dtype=float)
    p = _probs(pi)
    _check_shape(Q, mdp, "Q")
    _check_shape(p, mdp, "policy")
    next_v = (p * Q).sum(axis=1)
    future = mdp.P @ next_v
    if mdp.gamma is not None:
        future = mdp.gamma * future
    return mdp.R + future


def _stationary_system(P_pi: np.ndarray) -> np.ndarray:
    n = P_pi.shape[-1]
    M = np.swapaxes(P_pi, -1, -2) - np.eye(n)
    ones = np.ones(P_pi.shape[:-2] + (1, n))
    return np.concatenate([M, ones], axis=-2)


def chain_is_unichain(P_pi: np.ndarray) -> bool | np.ndarray:
    """Rank test: the stationary distribution is unique iff rank is full."""
    M = _stationary_system(P_pi)
    return np.linalg.matrix_rank(M) == P_pi.shape[-1]


def stationary_distribution(pi, mdp: TabularMDP) -> np.ndarray:
    P_pi = induced_chain(pi, mdp)
    n = mdp.n_states
    M = _stationary_system(P_pi)
    if np.linalg.matrix_rank(M) < n:
        raise MultichainError("induced chain has more than one recurrent class")
    b = np.zeros(n + 1)
    b[-1] = 1.0
    nu = np.linalg.lstsq(M, b, rcond=None)[0]
    nu = np.clip(nu, 0.0, None)
    nu /= nu.sum()
    if np.max(np.abs(nu @ P_pi - nu)) > STATIONARY_TOL:
        raise NonConvergence("stationary solve did not reach the required accuracy")
    return nu


def occupancy_from_policy(pi, mdp: TabularMDP) -> OccupancyMeasure:
    nu = stationary_distribution(pi, mdp)
    mu = nu[:, None] * _probs(pi)
    return OccupancyMeasure(mu / mu.sum())


def policy_from_occupancy(mu) -> Policy:
    """Conditional ``mu(a | s)``; states carrying no mass get uniform rows."""
    m = _mu(mu)
    mass = m.sum(axis=1, keepdims=True)
    A = m.shape[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(mass > 0, m / np.where(mass > 0, mass, 1.0), 1.0 / A)
    return Policy(probs / probs.sum(axis=1, keepdims=True))


def flow_residual(mu, mdp: TabularMDP) -> float:
    """Max violation of the stationarity constraints, in the infinity norm."""
    m = _mu(mu)
    _check_shape(m, mdp, "occupancy")
    inflow = np.einsum("sa,sat->t", m, mdp.P)
    return float(np.max(np.abs(m.sum(axis=1) - inflow)))


def average_reward(mu, mdp: TabularMDP) -> float:
    m = _mu(mu)
    _check_shape(m, mdp, "occupancy")
    return float(np.sum(m * mdp.R))


def chain_bias(P_pi: np.ndarray, r_pi: np.ndarray) -> ValueSolution:
    """Gain and bias of a Markov reward process, bias pinned to ``V[0] = 0``.

    No recurrence check; a multichain ``P_pi`` surfaces as
    :class:`SingularSystem`.
    """
    n = len(r_pi)
    # unknowns: [gain, V[1], ..., V[n-1]]
    M = np.eye(n) - P_pi
    M[:, 0] = 1.0
    try:
        x = np.linalg.solve(M, r_pi)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    gain = float(x[0])
    V = np.concatenate([[0.0], x[1:]])
    residual = float(np.max(np.abs(V - (r_pi - gain + P_pi @ V))))
    return ValueSolution(V, gain, residual)


def policy_bias_values(pi, mdp: TabularMDP) -> ValueSolution:
    """Gain and bias of ``pi``, with the bias pinned to ``V[0] = 0``."""
    p = _probs(pi)
    P_pi = induced_chain(p, mdp)
    if not chain_is_unichain(P_pi):
        raise MultichainError("policy induces more than one recurrent class")
    return chain_bias(P_pi, (p * mdp.R).sum(axis=1))


def _batched_gains(P: np.ndarray, R: np.ndarray, actions: np.ndarray):
    """Gains of a batch of deterministic policies; NaN marks multichain ones."""
    S = P.shape[0]
    idx = np.arange(S)
    P_pi = P[idx[None, :], actions]           # (k, S, S)
    r_pi = R[idx[None, :], actions]           # (k, S)
    uni = np.linalg.matrix_rank(_stationary_system(P_pi)) == S
    gains = np.full(len(actions), np.nan)
    if uni.any():
        M = np.eye(S) - P_pi[uni]
        M[:, :, 0] = 1.0
        gains[uni] = np.linalg.solve(M, r_pi[uni][..., None])[:, 0, 0]
    return gains


def _policy_batches(S: int, A: int, size: int = 4096):
    it = itertools.product(range(A), repeat=S)
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield np.array(block, dtype=int)


def brute_force_optimal(mdp: TabularMDP, tie_tol: float = 1e-12) -> tuple[Policy, float]:
    """Best deterministic unichain policy by exhaustive enumeration.

    Policies that induce several recurrent classes are skipped. Ties go to
    the lexicographically smallest action vector.
    """
    S, A = mdp.shape
    if A**S > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"{A}^{S} deterministic policies exceed the limit {BRUTE_FORCE_LIMIT}")
    best_gain, best_actions = -math.inf, None
    for actions in _policy_batches(S, A):
        gains = _batched_gains(mdp.P, mdp.R, actions)
        for k in np.flatnonzero(np.isfinite(gains)):
            if gains[k] > best_gain + tie_tol:
                best_gain, best_actions = float(gains[k]), actions[k]
    if best_actions is None:
        raise MultichainError("no deterministic policy induces a unichain chain")
    return Policy.deterministic(best_actions, A), best_gain


def is_unichain(mdp: TabularMDP) -> bool:
    """True when every deterministic policy induces a single recurrent class."""
    S, A = mdp.shape
    if A**S > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"{A}^{S} deterministic policies exceed the limit {BRUTE_FORCE_LIMIT}")
    idx = np.arange(S)
    for actions in _policy_batches(S, A):
        P_pi = mdp.P[idx[None, :], actions]
        if not np.all(np.linalg.matrix_rank(_stationary_system(P_pi)) == S):
            return False
    return True


def is_communicating(mdp: TabularMDP) -> bool:
    """True when every state reaches every other under some policy."""
    reach = (mdp.P.sum(axis=1) > 0) | np.eye(mdp.n_states, dtype=bool)
    for _ in range(max(1, math.ceil(math.log2(mdp.n_states)) + 1)):
        reach = (reach.astype(int) @ reach.astype(int)) > 0
    return bool(reach.all())
