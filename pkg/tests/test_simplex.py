import itertools

import numpy as np
import pytest

from mdpdual.errors import ValidationError
from mdpdual.simplex import LinearProgram, LPStatus, format_lp, solve_lp


def lp(c, A, b, senses, lower=None, maximize=False):
    c = np.asarray(c, dtype=float)
    return LinearProgram(c, A, b, senses, np.zeros(len(c)) if lower is None else lower, maximize)


def vertex_optimum(c, A, b):
    """Best vertex of ``{x >= 0, A x <= b}`` found by enumerating active sets."""
    m, n = A.shape
    G = np.vstack([A, -np.eye(n)])
    h = np.concatenate([b, np.zeros(n)])
    best = -np.inf
    for active in itertools.combinations(range(m + n), n):
        M = G[list(active)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, h[list(active)])
        if np.all(G @ x <= h + 1e-9):
            best = max(best, c @ x)
    return best


def test_textbook_maximisation():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), value 36
    sol = solve_lp(lp([3, 5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18], ("<=",) * 3, maximize=True))
    assert sol.status is LPStatus.OPTIMAL
    np.testing.assert_allclose(sol.x, [2, 6], atol=1e-12)
    assert sol.objective_value == pytest.approx(36)


def test_equality_and_greater_rows():
    # min x + y, x + y >= 2, x - y = 0
    sol = solve_lp(lp([1, 1], [[1, 1], [1, -1]], [2, 0], (">=", "=")))
    np.testing.assert_allclose(sol.x, [1, 1], atol=1e-12)


def test_free_and_shifted_variables():
    # min x with x free and x >= -3 written as a row
    sol = solve_lp(lp([1.0], [[1.0]], [-3.0], (">=",), lower=[-np.inf]))
    assert sol.x[0] == pytest.approx(-3)
    sol = solve_lp(lp([1.0, 1.0], [[1.0, 1.0]], [10.0], ("<=",), lower=[2.0, -1.0]))
    np.testing.assert_allclose(sol.x, [2, -1])


def test_infeasible():
    sol = solve_lp(lp([1, 1], [[1, 1], [1, 1]], [1, 2], ("<=", ">=")))
    assert sol.status is LPStatus.INFEASIBLE
    assert not sol.optimal


def test_unbounded():
    sol = solve_lp(lp([1, 1], [[1, -1]], [1], ("<=",), maximize=True))
    assert sol.status is LPStatus.UNBOUNDED


def test_redundant_equalities():
    sol = solve_lp(lp([1, 2, 3], [[1, 1, 1], [2, 2, 2]], [1, 2], ("=", "=")))
    np.testing.assert_allclose(sol.x, [1, 0, 0], atol=1e-12)


def test_degenerate_cycling_example():
    # Beale's example cycles under the textbook largest-coefficient rule
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    sol = solve_lp(lp(c, A, [0, 0, 1], ("<=",) * 3))
    assert sol.objective_value == pytest.approx(-0.05)


@pytest.mark.parametrize("seed", range(15))
def test_random_lps_match_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(2, 5), rng.integers(2, 4)
    A = rng.random((m, n))
    b = rng.random(m) + 0.1
    c = rng.normal(size=n)
    sol = solve_lp(lp(c, A, b, ("<=",) * m, maximize=True))
    assert sol.objective_value == pytest.approx(vertex_optimum(c, A, b), abs=1e-10)
    assert lp(c, A, b, ("<=",) * m).max_violation(sol.x) <= 1e-10


def test_rejects_bad_programs():
    with pytest.raises(ValidationError):
        lp([1, 1], [[1, 1]], [1, 2], ("<=",))
    with pytest.raises(ValidationError):
        lp([1], [[1]], [1], ("<",))
    with pytest.raises(ValidationError):
        lp([np.nan], [[1]], [1], ("<=",))


def test_format_is_stable():
    prog = LinearProgram([1, 2], [[1, 1]], [3], ("<=",), [0, -np.inf], True, ("a", "b"), ("cap",))
    text = format_lp(prog)
    assert text == format_lp(prog)
    assert text.splitlines()[2].startswith("OBJ")
    assert "cap  <=" in text
    assert "BOUND b free" in text
    assert "BOUND a >= 0" in text
