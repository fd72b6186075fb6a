import numpy as np
import pytest

from mdpdual.core import Policy, policy_bias_values
from mdpdual.errors import NotOptimal
from mdpdual.generators import chain, gridworld
from mdpdual.lp_duality import (
    build_dual_lp,
    build_primal_lp,
    dual_values,
    extract_policy,
    optimality_residual,
    primal_occupancy,
    solve_average_reward_lp,
    verify_strong_duality,
)
from mdpdual.simplex import LPSolution, LPStatus, solve_lp

from conftest import one_state


def test_one_state_shapes():
    mdp = one_state([1.0, 4.0])
    primal = build_primal_lp(mdp)
    assert primal.n_vars == 2
    assert primal.row_names == ("mass",)
    dual = build_dual_lp(mdp)
    assert dual.n_vars == 2           # gain and V_0
    assert dual.n_rows == 3           # one row per action plus the anchor


def test_one_state_solution():
    mdp = one_state([1.0, 4.0])
    primal, dual, report = solve_average_reward_lp(mdp)
    assert primal.objective_value == 4.0
    assert dual.objective_value == 4.0
    assert report.gap == 0.0
    assert report.bellman_residual == 0.0
    np.testing.assert_array_equal(extract_policy(primal, mdp).probs, [[0, 1]])


def test_row_counts(suite):
    for mdp in suite[:10]:
        S, A = mdp.shape
        assert build_primal_lp(mdp).n_rows == S
        assert build_dual_lp(mdp).n_rows == S * A + 1


def test_toggle_optimum(toggle):
    primal, _, report = solve_average_reward_lp(toggle)
    assert primal.objective_value == pytest.approx(1.0)
    np.testing.assert_allclose(primal_occupancy(primal, toggle).mu, [[0, 0.5], [0, 0.5]], atol=1e-12)
    assert report.passed


def test_weak_duality_on_feasible_points(suite, rng):
    # any policy's occupancy is primal feasible; any V with gain = max Bellman slack is dual feasible
    for mdp in suite[:20]:
        S, A = mdp.shape
        pi = rng.random((S, A))
        pi /= pi.sum(axis=1, keepdims=True)
        primal_value = policy_bias_values(pi, mdp).avg_reward
        V = rng.normal(size=S)
        V[0] = 0.0
        gain = np.max(mdp.R + mdp.P @ V - V[:, None])
        assert primal_value <= gain + 1e-12
        assert build_dual_lp(mdp).max_violation(np.concatenate([[gain], V])) <= 1e-12


def test_complementary_slackness_on_raw_vertex(suite):
    for mdp in suite[:30]:
        primal, dual, _ = solve_average_reward_lp(mdp)
        gain, V = dual.x[0], dual.x[1:]
        slack = gain + V[:, None] - mdp.P @ V - mdp.R
        assert np.all(slack >= -1e-9)
        mu = primal.x.reshape(mdp.shape)
        assert np.max(mu * slack) <= 1e-9


def test_refined_values_solve_optimality_equations(suite):
    for mdp in suite:
        _, dual, _ = solve_average_reward_lp(mdp)
        vals = dual_values(dual, mdp)
        assert vals.V[0] == pytest.approx(0.0, abs=1e-12)
        assert optimality_residual(vals.V, vals.avg_reward, mdp) <= 1e-9


def test_extracted_policy_is_optimal(suite):
    for mdp in suite[:30]:
        primal, _, _ = solve_average_reward_lp(mdp)
        pi = extract_policy(primal, mdp)
        assert policy_bias_values(pi, mdp).avg_reward == pytest.approx(primal.objective_value, abs=1e-9)


@pytest.mark.parametrize("mdp", [chain(4), gridworld(2, 2, 0.0), gridworld(3, 2, 0.2)])
def test_structured_instances(mdp):
    _, _, report = solve_average_reward_lp(mdp)
    assert report.passed


def test_requires_optimal_solutions(toggle):
    bad = LPSolution(np.zeros(4), np.nan, LPStatus.INFEASIBLE, 0)
    dual = solve_lp(build_dual_lp(toggle))
    with pytest.raises(NotOptimal):
        verify_strong_duality(bad, dual, toggle)


def test_shift_moves_gain_only(suite):
    mdp = suite[7]
    _, dual, _ = solve_average_reward_lp(mdp)
    _, dual2, _ = solve_average_reward_lp(mdp.with_rewards(mdp.R + 2.0))
    a, b = dual_values(dual, mdp), dual_values(dual2, mdp.with_rewards(mdp.R + 2.0))
    assert b.avg_reward == pytest.approx(a.avg_reward + 2.0, abs=1e-10)
    np.testing.assert_allclose(b.V, a.V, atol=1e-9)
