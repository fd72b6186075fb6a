"""Seeded MDP generators.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence([seed, attempt])``, so every (kind, params, seed) triple maps
to one fixed instance and a rejected draw moves on to a fresh, derived
stream.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BRUTE_FORCE_LIMIT, TabularMDP, is_communicating, is_unichain
from .errors import GenerationFailed, ValidationError

MAX_RETRIES = 100
KINDS = ("chain", "gridworld", "garnet")


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    params: tuple

    @classmethod
    def parse(cls, text: str) -> "GeneratorSpec":
        """Parse ``kind:p1,p2,...``, e.g. ``garnet:5,3,2`` or ``gridworld:2,2,0.1``."""
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        if kind not in KINDS:
            raise ValidationError(f"unknown generator kind {kind!r}; expected one of {KINDS}")
        raw = [p.strip() for p in rest.split(",") if p.strip()]
        try:
            if kind == "chain":
                (n,) = raw
                params = (int(n),)
            elif kind == "gridworld":
                w, h, *slip = raw
                params = (int(w), int(h), float(slip[0]) if slip else 0.0)
            else:
                S, A, *b = raw
                params = (int(S), int(A), int(b[0]) if b else min(2, int(S)))
        except ValueError as exc:
            raise ValidationError(f"bad parameters for {kind}: {rest!r}") from exc
        return cls(kind, params)

    def __str__(self):
        return f"{self.kind}:" + ",".join(str(p) for p in self.params)


def chain(n: int) -> TabularMDP:
    """Ring of ``n`` states; action 0 stays (reward 0), action 1 advances (reward 1).

    ``chain(2)`` is the two-state toggle MDP.
    """
    if n < 1:
        raise ValidationError("chain needs at least one state")
    P = np.zeros((n, 2, n))
    R = np.zeros((n, 2))
    for s in range(n):
        P[s, 0, s] = 1.0
        P[s, 1, (s + 1) % n] = 1.0
        R[s, 1] = 1.0
    return TabularMDP(P, R)


_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right


def gridworld(width: int, height: int, slip: float = 0.0) -> TabularMDP:
    """Grid with the start in cell 0 and the goal in the last cell.

    Moves into walls leave the agent in place. With probability ``slip`` the
    move direction is replaced by a uniformly random one. Any action taken
    in the goal pays 1 and returns the agent to the start, so the optimal
    gain is one over the length of the shortest start-goal-start cycle.
    """
    if width < 1 or height < 1 or width * height < 2:
        raise ValidationError("gridworld needs at least two cells")
    if not 0.0 <= slip <= 1.0:
        raise ValidationError("slip must lie in [0, 1]")
    S = width * height
    goal = S - 1
    P = np.zeros((S, 4, S))
    R = np.zeros((S, 4))

    def step(s, move):
        r, c = divmod(s, width)
        dr, dc = move
        nr, nc = r + dr, c + dc
        if 0 <= nr < height and 0 <= nc < width:
            return nr * width + nc
        return s

    for s in range(S):
        for a in range(4):
            if s == goal:
                P[s, a, 0] = 1.0
                R[s, a] = 1.0
                continue
            P[s, a, step(s, _MOVES[a])] += 1.0 - slip
            for m in _MOVES:
                P[s, a, step(s, m)] += slip / 4
    return TabularMDP(P, R)


def garnet(n_states: int, n_actions: int, branching: int, rng: np.random.Generator) -> TabularMDP:
    """Random MDP: ``branching`` distinct successors per pair, uniform(0, 1) rewards."""
    if not 1 <= branching <= n_states:
        raise ValidationError(f"branching must lie in [1, {n_states}], got {branching}")
    P = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            succ = rng.choice(n_states, size=branching, replace=False)
            w = 1.0 - rng.random(branching)  # in (0, 1]
            P[s, a, succ] = w / w.sum()
    R = rng.random((n_states, n_actions))
    return TabularMDP(P, R)


def passes_recurrence_check(mdp: TabularMDP, strict: bool) -> bool:
    if not is_communicating(mdp):
        return False
    S, A = mdp.shape
    if strict and A**S <= BRUTE_FORCE_LIMIT:
        return is_unichain(mdp)
    return True


def generate_mdp(spec: GeneratorSpec | str, seed: int = 0) -> TabularMDP:
    """Deterministic instance for ``(spec, seed)``.

    Every output is communicating. Garnets must additionally be unichain
    under every deterministic policy (checked by enumeration when small
    enough); rejected draws are retried on a derived stream.
    """
    if isinstance(spec, str):
        spec = GeneratorSpec.parse(spec)
    if spec.kind == "chain":
        mdp = chain(*spec.params)
    elif spec.kind == "gridworld":
        mdp = gridworld(*spec.params)
    else:
        for attempt in range(MAX_RETRIES):
            rng = np.random.default_rng([int(seed), attempt])
            mdp = garnet(*spec.params, rng=rng)
            if passes_recurrence_check(mdp, strict=True):
                return mdp
        raise GenerationFailed(f"{spec} seed={seed}: no valid instance in {MAX_RETRIES} draws")
    if not passes_recurrence_check(mdp, strict=False):
        raise GenerationFailed(f"{spec} is not communicating")
    return mdp


def suite_spec(index: int) -> GeneratorSpec:
    """Garnet shape for the ``index``-th member of the standard test suite."""
    S = 2 + index % 5
    A = 2 + (index // 5) % 3
    return GeneratorSpec("garnet", (S, A, 2))


def garnet_suite(count: int = 100, base_seed: int = 0) -> list[TabularMDP]:
    """Seeded unichain garnets with 2..6 states and 2..4 actions."""
    return [generate_mdp(suite_spec(i), seed=base_seed + i) for i in range(count)]
