import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdpdual.core import (
    OccupancyMeasure,
    Policy,
    TabularMDP,
    average_reward,
    bellman_backup,
    brute_force_optimal,
    flow_residual,
    induced_chain,
    is_communicating,
    is_unichain,
    load_mdp,
    occupancy_from_policy,
    policy_bias_values,
    policy_from_occupancy,
    stationary_distribution,
    validate_mdp,
)
from mdpdual.errors import (
    DimensionMismatch,
    MultichainError,
    NegativeProbability,
    NonStochasticRow,
    ShapeMismatch,
    TooLarge,
)
from mdpdual.generators import chain

from conftest import one_state, random_mdp, random_policy


def two_cycle(r0=1.0, r1=3.0):
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = P[1, 0, 0] = 1.0
    return TabularMDP(P, [[r0], [r1]])


class TestValidate:
    def test_smallest_mdp(self):
        mdp = validate_mdp({"n_states": 1, "n_actions": 1, "transitions": [[0, 0, 0, 1.0]],
                            "rewards": [[0, 0, 5.0]]})
        assert mdp.shape == (1, 1)
        assert mdp.R[0, 0] == 5.0
        assert mdp.gamma is None

    def test_short_row_rejected_and_named(self):
        raw = {"n_states": 2, "n_actions": 1,
               "transitions": [[0, 0, 0, 0.5], [0, 0, 1, 0.4], [1, 0, 1, 1.0]]}
        with pytest.raises(NonStochasticRow, match=r"s=0, a=0"):
            validate_mdp(raw)

    def test_negative_probability(self):
        raw = {"n_states": 2, "n_actions": 1,
               "transitions": [[0, 0, 0, 1.5], [0, 0, 1, -0.5], [1, 0, 1, 1.0]]}
        with pytest.raises(NegativeProbability):
            validate_mdp(raw)

    def test_out_of_range_index(self):
        with pytest.raises(DimensionMismatch):
            validate_mdp({"n_states": 1, "n_actions": 1, "transitions": [[0, 0, 3, 1.0]]})

    def test_array_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            TabularMDP(np.ones((2, 1, 2)) / 2, np.zeros((2, 2)))

    def test_round_trip_through_json(self, tmp_path, rng):
        mdp = TabularMDP(random_mdp(rng, 4, 3).P, random_mdp(rng, 4, 3).R, gamma=0.9)
        path = tmp_path / "m.json"
        path.write_text(json.dumps(mdp.to_dict()))
        back = load_mdp(path)
        np.testing.assert_array_equal(back.P, mdp.P)
        np.testing.assert_array_equal(back.R, mdp.R)
        assert back.gamma == 0.9

    def test_arrays_are_immutable(self, toggle):
        with pytest.raises(ValueError):
            toggle.P[0, 0, 0] = 0.5


class TestBellmanBackup:
    def test_zero_q_gives_rewards(self, rng):
        mdp = random_mdp(rng, 3, 2)
        Q = bellman_backup(np.zeros((3, 2)), Policy.uniform(3, 2), mdp)
        np.testing.assert_array_equal(Q, mdp.R)

    def test_discounted_fixed_point(self):
        mdp = TabularMDP(np.ones((1, 1, 1)), [[1.0]], gamma=0.5)
        np.testing.assert_allclose(bellman_backup([[2.0]], Policy.uniform(1, 1), mdp), [[2.0]])

    def test_iteration_matches_linear_solve(self, rng):
        base = random_mdp(rng, 4, 2)
        mdp = TabularMDP(base.P, base.R, gamma=0.9)
        pi = random_policy(rng, 4, 2)
        Q = np.zeros((4, 2))
        for _ in range(500):
            Q = bellman_backup(Q, pi, mdp)
        # Q = R + gamma * M Q with M[(s,a),(t,b)] = P(t|s,a) pi(b|t)
        M = np.einsum("sat,tb->satb", mdp.P, pi).reshape(8, 8)
        exact = np.linalg.solve(np.eye(8) - 0.9 * M, mdp.R.ravel()).reshape(4, 2)
        np.testing.assert_allclose(Q, exact, atol=1e-12)

    def test_shape_mismatch(self, toggle):
        with pytest.raises(ShapeMismatch):
            bellman_backup(np.zeros((3, 2)), Policy.uniform(2, 2), toggle)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), gamma=st.floats(0.0, 0.99))
    def test_contraction(self, seed, gamma):
        rng = np.random.default_rng(seed)
        base = random_mdp(rng, 4, 3)
        mdp = TabularMDP(base.P, base.R, gamma=gamma)
        pi = random_policy(rng, 4, 3)
        Q1, Q2 = rng.normal(size=(2, 4, 3)) * 10
        lhs = np.max(np.abs(bellman_backup(Q1, pi, mdp) - bellman_backup(Q2, pi, mdp)))
        assert lhs <= gamma * np.max(np.abs(Q1 - Q2)) + 1e-12


class TestStationary:
    def test_symmetric_chain(self):
        P = np.array([[[0.3, 0.7]], [[0.7, 0.3]]])
        mdp = TabularMDP(P, np.zeros((2, 1)))
        np.testing.assert_allclose(stationary_distribution(Policy.uniform(2, 1), mdp), [0.5, 0.5])

    def test_periodic_cycle(self):
        np.testing.assert_allclose(stationary_distribution(Policy.uniform(2, 1), two_cycle()), [0.5, 0.5])

    def test_matches_long_power_iteration(self, rng):
        mdp = random_mdp(rng, 6, 3)
        pi = random_policy(rng, 6, 3)
        P_pi = induced_chain(pi, mdp)
        Pn = P_pi.copy()
        for _ in range(20):        # 2**20 > 10**6 steps
            Pn = Pn @ Pn
        power = np.full(6, 1 / 6) @ Pn
        nu = stationary_distribution(pi, mdp)
        np.testing.assert_allclose(nu, power, atol=1e-12)
        assert np.max(np.abs(nu @ P_pi - nu)) <= 1e-10

    def test_multichain_detected(self, toggle):
        with pytest.raises(MultichainError):
            stationary_distribution(Policy.deterministic([0, 0], 2), toggle)


class TestOccupancy:
    def test_one_state_uniform(self):
        mu = occupancy_from_policy(Policy.uniform(1, 2), one_state([0.0, 0.0]))
        np.testing.assert_allclose(mu.mu, [[0.5, 0.5]])

    def test_deterministic_support(self, rng):
        mdp = random_mdp(rng, 4, 3)
        actions = [2, 0, 1, 1]
        mu = occupancy_from_policy(Policy.deterministic(actions, 3), mdp)
        mask = np.zeros((4, 3), dtype=bool)
        mask[np.arange(4), actions] = True
        assert np.all(mu.mu[~mask] == 0)

    def test_flow_feasible(self, rng):
        mdp = random_mdp(rng, 5, 3)
        mu = occupancy_from_policy(random_policy(rng, 5, 3), mdp)
        assert abs(mu.mu.sum() - 1) <= 1e-10
        assert flow_residual(mu, mdp) <= 1e-8

    def test_policy_from_occupancy_uniform_fill(self):
        pi = policy_from_occupancy(OccupancyMeasure([[0.2, 0.8], [0.0, 0.0]]))
        np.testing.assert_allclose(pi.probs, [[0.2, 0.8], [0.5, 0.5]])

    def test_policy_from_one_state(self):
        np.testing.assert_allclose(policy_from_occupancy(OccupancyMeasure([[0.5, 0.5]])).probs, [[0.5, 0.5]])

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        mdp = random_mdp(rng, 5, 3)
        pi = random_policy(rng, 5, 3)
        back = policy_from_occupancy(occupancy_from_policy(pi, mdp))
        np.testing.assert_allclose(back.probs, pi, atol=1e-12)


class TestAverageReward:
    def test_one_state(self):
        assert average_reward(OccupancyMeasure([[1.0]]), one_state([5.0])) == 5.0

    def test_two_cycle(self):
        mdp = two_cycle()
        assert average_reward(occupancy_from_policy(Policy.uniform(2, 1), mdp), mdp) == pytest.approx(2.0)

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(7)
        mdp = random_mdp(rng, 4, 2)
        pi = random_policy(rng, 4, 2)
        exact = average_reward(occupancy_from_policy(pi, mdp), mdp)
        n, batches = 10**6, 100
        cum_pi = np.cumsum(pi, axis=1)
        cum_P = np.cumsum(mdp.P, axis=2)
        u = rng.random((n, 2))
        rewards = np.empty(n)
        s = 0
        R = mdp.R
        for t in range(n):
            a = min(int(np.searchsorted(cum_pi[s], u[t, 0], side="right")), 1)
            rewards[t] = R[s, a]
            s = min(int(np.searchsorted(cum_P[s, a], u[t, 1], side="right")), 3)
        means = rewards.reshape(batches, -1).mean(axis=1)
        se = means.std(ddof=1) / np.sqrt(batches)
        assert abs(rewards.mean() - exact) <= 3 * se


class TestBiasValues:
    def test_one_state(self):
        sol = policy_bias_values(Policy([[0.25, 0.75]]), one_state([4.0, 8.0]))
        np.testing.assert_array_equal(sol.V, [0.0])
        assert sol.avg_reward == pytest.approx(7.0)

    def test_two_cycle(self):
        # by hand with V0 = 0: V0 = 1 - g + V1, V1 = 3 - g + V0  =>  g = 2, V1 = 1
        sol = policy_bias_values(Policy.uniform(2, 1), two_cycle())
        assert sol.avg_reward == pytest.approx(2.0, abs=1e-14)
        np.testing.assert_allclose(sol.V, [0.0, 1.0], atol=1e-14)
        assert sol.residual <= 1e-14

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_consistent_with_occupancy(self, seed):
        rng = np.random.default_rng(seed)
        mdp = random_mdp(rng, 5, 3)
        pi = random_policy(rng, 5, 3)
        gain = policy_bias_values(pi, mdp).avg_reward
        assert gain == pytest.approx(average_reward(occupancy_from_policy(pi, mdp), mdp), abs=1e-9)


class TestBruteForce:
    def test_one_state_argmax(self):
        pi, gain = brute_force_optimal(one_state([1.0, 4.0, 2.0]))
        np.testing.assert_array_equal(pi.probs, [[0, 1, 0]])
        assert gain == 4.0

    def test_toggle(self, toggle):
        # stay/stay is multichain; stay/go and go/stay reach an absorbing
        # zero-reward state; go/go cycles with reward 1 per step
        pi, gain = brute_force_optimal(toggle)
        np.testing.assert_array_equal(pi.probs, [[0, 1], [0, 1]])
        assert gain == pytest.approx(1.0)

    def test_beats_uniform(self, suite):
        for mdp in suite[:20]:
            _, gain = brute_force_optimal(mdp)
            assert gain >= policy_bias_values(Policy.uniform(*mdp.shape), mdp).avg_reward - 1e-12

    def test_shift_invariance(self, suite):
        for mdp in suite[:20]:
            pi, gain = brute_force_optimal(mdp)
            pi2, gain2 = brute_force_optimal(mdp.with_rewards(mdp.R + 3.5))
            np.testing.assert_array_equal(pi.probs, pi2.probs)
            assert gain2 == pytest.approx(gain + 3.5, abs=1e-12)

    def test_lexicographic_ties(self):
        pi, _ = brute_force_optimal(one_state([2.0, 2.0]))
        np.testing.assert_array_equal(pi.probs, [[1, 0]])

    def test_guard(self):
        P = np.ones((21, 2, 21)) / 21
        with pytest.raises(TooLarge):
            brute_force_optimal(TabularMDP(P, np.zeros((21, 2))))


def test_recurrence_classification(toggle):
    assert is_communicating(toggle)
    assert not is_unichain(toggle)
    P = np.zeros((2, 1, 2))
    P[:, 0, 0] = 1.0
    absorbing = TabularMDP(P, np.zeros((2, 1)))
    assert is_unichain(absorbing)
    assert not is_communicating(absorbing)
