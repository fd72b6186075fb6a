import itertools
import json

import numpy as np
import pytest

from mdpdual.core import OccupancyMeasure, Policy, occupancy_from_policy
from mdpdual.errors import ShapeMismatch, ValidationError
from mdpdual.imitation import (
    RewardClass,
    best_response,
    causal_entropy,
    demonstrations_to_occupancy,
    irl_saddle_solve,
    load_demonstrations,
    min_expected_reward,
    occupancy_distance,
    saddle_objective,
)
from mdpdual.lp_duality import build_primal_lp, extract_policy
from mdpdual.simplex import solve_lp

from conftest import one_state, random_policy


def grid_game(expert_mu):
    """Exhaustive values of ``min_pi E_pi R - E_E R`` for R in {-1, 0, 1}^2, deterministic pi."""
    values = {}
    for R in itertools.product((-1.0, 0.0, 1.0), repeat=2):
        R = np.array([R])
        values[tuple(R[0])] = min(R[0]) - float(np.sum(R * expert_mu))
    return values


def test_reward_class_projection():
    rc = RewardClass(2.0)
    np.testing.assert_array_equal(rc.project(np.array([-5.0, 1.0, 3.0])), [-2.0, 1.0, 2.0])
    with pytest.raises(ValidationError):
        RewardClass(0.0)


def test_zero_objective_when_occupancies_agree(rng, suite):
    mdp = suite[5]
    mu = occupancy_from_policy(random_policy(rng, *mdp.shape), mdp)
    R = rng.uniform(-1, 1, size=mdp.shape)
    assert abs(saddle_objective(R, mu, mu)) <= 1e-12


def test_occupancy_distance():
    assert occupancy_distance([[1.0, 0.0]], [[0.0, 1.0]]) == 2.0
    with pytest.raises(ShapeMismatch):
        occupancy_distance([[1.0, 0.0]], [[1.0]])


def test_causal_entropy_uniform(toggle):
    assert causal_entropy(Policy.uniform(2, 2), toggle) == pytest.approx(np.log(2))
    assert causal_entropy(Policy.deterministic([1, 1], 2), toggle) == 0.0


def test_best_response_is_cost_minimiser():
    mdp = one_state([0.0, 0.0])
    mu = best_response(mdp, [[1.0, -1.0]])
    np.testing.assert_array_equal(mu.mu, [[0.0, 1.0]])
    assert min_expected_reward(mdp, [[1.0, -1.0]]) == -1.0


def test_soft_best_response_is_boltzmann():
    mdp = one_state([0.0, 0.0])
    mu = best_response(mdp, [[1.0, -1.0]], entropy_weight=0.5)
    # minimise E R - w H  ->  pi ∝ exp(-R / w)
    expected = np.exp(-np.array([1.0, -1.0]) / 0.5)
    np.testing.assert_allclose(mu.mu[0], expected / expected.sum(), atol=1e-12)


class TestOneStateSign:
    expert = np.array([[0.0, 1.0]])

    def test_grid_maximisers(self):
        values = grid_game(self.expert)
        best = max(values.values())
        assert best == 0.0
        winners = [R for R, v in values.items() if v == best]
        assert all(r1 <= r0 for r0, r1 in winners)
        assert values[(1.0, -1.0)] == best

    def test_solver_lands_on_grid_maximiser(self):
        mdp = one_state([0.0, 0.0])
        res = irl_saddle_solve(mdp, OccupancyMeasure(self.expert), RewardClass(1.0), iters=200)
        R = res.recovered_reward[0]
        assert R[1] < R[0]
        assert min(R) - R[1] == pytest.approx(0.0, abs=1e-12)
        assert res.occupancy_gap <= 0.05


def test_toggle_matches_always_go(toggle):
    expert = Policy.deterministic([1, 1], 2)
    res = irl_saddle_solve(toggle, expert, RewardClass(1.0), entropy_weight=0.1, iters=500)
    assert res.occupancy_gap <= 0.05
    assert len(res.objective_trace) == 500


def test_lp_expert_is_matched(suite):
    mdp = suite[2]
    expert = extract_policy(solve_lp(build_primal_lp(mdp)), mdp)
    res = irl_saddle_solve(mdp, expert, RewardClass(1.0), iters=300)
    assert res.occupancy_gap <= 0.1


def test_demonstrations(tmp_path):
    raw = {"trajectories": [[[0, 1], [1, 1]], [[0, 1], [1, 0]]]}
    mu = demonstrations_to_occupancy(raw, 2, 2)
    np.testing.assert_allclose(mu.mu, [[0, 0.5], [0.25, 0.25]])
    path = tmp_path / "demos.json"
    path.write_text(json.dumps(raw))
    np.testing.assert_array_equal(load_demonstrations(path, 2, 2).mu, mu.mu)
    for bad in ({}, {"trajectories": [[[0, 5]]]}, {"trajectories": [[[0]]]}, {"trajectories": []}):
        with pytest.raises(ValidationError):
            demonstrations_to_occupancy(bad, 2, 2)


def test_iters_validated(toggle):
    with pytest.raises(ValidationError):
        irl_saddle_solve(toggle, Policy.uniform(2, 2), RewardClass(1.0), iters=0)
