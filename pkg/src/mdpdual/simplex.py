"""Dense two-phase revised simplex with Bland's rule.

Meant for the desk-scale LPs built in :mod:`mdpdual.lp_duality` (a few
hundred variables at most). Basic solutions are recomputed from the original
data at every pivot, which keeps them accurate without refactorisation
bookkeeping.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import IterationLimit, ValidationError

SENSES = ("<=", "=", ">=")


class LPStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """``max``/``min`` c.x subject to ``A x (sense) b`` and ``lower <= x``.

    Lower bounds are 0, a finite number, or ``-inf`` for free variables;
    upper bounds are always ``+inf``.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: tuple[str, ...]
    lower: np.ndarray
    maximize: bool = False
    var_names: tuple[str, ...] = ()
    row_names: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        A = np.asarray(self.A, dtype=float).reshape(-1, len(c))
        b = np.asarray(self.b, dtype=float).ravel()
        lower = np.asarray(self.lower, dtype=float).ravel()
        senses = tuple(self.senses)
        if len(b) != A.shape[0] or len(senses) != A.shape[0]:
            raise ValidationError("rows of A, b and senses disagree")
        if len(lower) != len(c):
            raise ValidationError("one lower bound per variable is required")
        if any(s not in SENSES for s in senses):
            raise ValidationError(f"row senses must be among {SENSES}")
        if np.any(lower == np.inf):
            raise ValidationError("lower bounds must be finite or -inf")
        for name, arr in (("c", c), ("A", A), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} must be finite")
        var_names = tuple(self.var_names) or tuple(f"x{j}" for j in range(len(c)))
        row_names = tuple(self.row_names) or tuple(f"r{i}" for i in range(len(b)))
        for key, val in (("c", c), ("A", A), ("b", b), ("lower", lower)):
            val.setflags(write=False)
            object.__setattr__(self, key, val)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "var_names", var_names)
        object.__setattr__(self, "row_names", row_names)

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.b)

    def max_violation(self, x) -> float:
        """Largest row or bound violation of ``x``."""
        x = np.asarray(x, dtype=float)
        Ax = self.A @ x
        viol = [0.0]
        for i, sense in enumerate(self.senses):
            d = Ax[i] - self.b[i]
            viol.append(max(d, 0.0) if sense == "<=" else max(-d, 0.0) if sense == ">=" else abs(d))
        viol.append(float(np.max(self.lower - x, initial=0.0)))
        return float(max(viol))


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    objective_value: float
    status: LPStatus
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


@dataclass
class _StandardForm:
    """``min c.z, A z = b, z >= 0`` plus the map back to the original variables."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    plus: np.ndarray          # column of x_j (or of x_j^+)
    minus: np.ndarray         # column of x_j^-, or -1
    shift: np.ndarray         # finite lower bounds


def _standardize(lp: LinearProgram) -> _StandardForm:
    n, m = lp.n_vars, lp.n_rows
    free = np.isneginf(lp.lower)
    shift = np.where(free, 0.0, lp.lower)
    plus = np.arange(n)
    minus = np.full(n, -1)
    cols = [lp.A]
    costs = [lp.c]
    nfree = int(free.sum())
    if nfree:
        minus[free] = n + np.arange(nfree)
        cols.append(-lp.A[:, free])
        costs.append(-lp.c[free])
    n_slack = sum(s != "=" for s in lp.senses)
    slack = np.zeros((m, n_slack))
    k = 0
    for i, sense in enumerate(lp.senses):
        if sense != "=":
            slack[i, k] = 1.0 if sense == "<=" else -1.0
            k += 1
    cols.append(slack)
    costs.append(np.zeros(n_slack))
    A = np.hstack(cols)
    c = np.concatenate(costs)
    if lp.maximize:
        c = -c
    b = lp.b - lp.A @ shift
    flip = b < 0
    A[flip] *= -1
    b = np.where(flip, -b, b)
    return _StandardForm(c, A, b, plus, minus, shift)


class _Simplex:
    def __init__(self, A, b, max_iter, tol):
        self.A = A
        self.b = b
        self.max_iter = max_iter
        self.tol = tol
        self.iterations = 0

    def basic_solution(self, basis):
        return np.linalg.solve(self.A[:, basis], self.b)

    def run(self, c, basis, allowed):
        """Bland-rule pivots until optimal; returns ``"optimal"`` or ``"unbounded"``."""
        A, tol = self.A, self.tol
        while True:
            if self.iterations >= self.max_iter:
                raise IterationLimit(f"simplex exceeded {self.max_iter} pivots")
            B = A[:, basis]
            xB = np.linalg.solve(B, self.b)
            y = np.linalg.solve(B.T, c[basis])
            reduced = c - A.T @ y
            in_basis = np.zeros(A.shape[1], dtype=bool)
            in_basis[basis] = True
            scale = 1.0 + np.abs(c)
            candidates = np.flatnonzero(allowed & ~in_basis & (reduced < -tol * scale))
            if len(candidates) == 0:
                return "optimal"
            j = candidates[0]
            u = np.linalg.solve(B, A[:, j])
            rows = np.flatnonzero(u > tol)
            if len(rows) == 0:
                return "unbounded"
            ratios = np.maximum(xB[rows], 0.0) / u[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol * (1.0 + best)]
            leave = ties[np.argmin(np.asarray(basis)[ties])]
            basis[leave] = j
            self.iterations += 1


def solve_lp(lp: LinearProgram, tol: float = 1e-10, max_iter: int = 20000) -> LPSolution:
    """Solve ``lp`` exactly up to floating point; deterministic for a given input.

    Infeasible and unbounded programs are reported through ``status``; running
    out of pivots raises :class:`IterationLimit`.
    """
    sf = _standardize(lp)
    m, n = sf.A.shape
    # phase 1: one artificial per row
    A1 = np.hstack([sf.A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    solver = _Simplex(A1, sf.b, max_iter, tol)
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    solver.run(c1, basis, allowed)
    xB = solver.basic_solution(basis)
    infeas = float(sum(xB[i] for i, j in enumerate(basis) if j >= n))
    if infeas > 1e-9 * (1.0 + np.abs(sf.b).max(initial=0.0)):
        return LPSolution(np.full(lp.n_vars, np.nan), np.nan, LPStatus.INFEASIBLE, solver.iterations)

    # drive zero-level artificials out of the basis, dropping redundant rows
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] < n:
            continue
        B = A1[:, basis]
        row = np.linalg.solve(B.T, np.eye(m)[i]) @ sf.A
        row[[j for j in basis if j < n]] = 0.0
        cand = np.flatnonzero(np.abs(row) > 1e-9)
        if len(cand):
            basis[i] = int(cand[0])
        else:
            keep[i] = False
    rows = np.flatnonzero(keep)
    basis = [basis[i] for i in rows]
    A2 = sf.A[rows]
    b2 = sf.b[rows]
    phase2 = _Simplex(A2, b2, max_iter, tol)
    phase2.iterations = solver.iterations
    status = phase2.run(sf.c, basis, np.ones(n, dtype=bool))
    if status == "unbounded":
        return LPSolution(np.full(lp.n_vars, np.nan), np.nan, LPStatus.UNBOUNDED, phase2.iterations)
    z = np.zeros(n)
    if basis:
        z[basis] = np.maximum(phase2.basic_solution(basis), 0.0)
    x = sf.shift + z[sf.plus]
    has_minus = sf.minus >= 0
    x[has_minus] -= z[sf.minus[has_minus]]
    return LPSolution(x, float(lp.c @ x), LPStatus.OPTIMAL, phase2.iterations)


def format_lp(lp: LinearProgram) -> str:
    """Fixed-format listing: objective row, one line per constraint, then bounds."""
    def coefs(values):
        return " ".join(f"{v:.12g}" for v in values)

    width = max(len(n) for n in (*lp.row_names, "OBJ"))
    lines = [
        f"# {lp.n_rows} rows, {lp.n_vars} columns",
        "# columns: " + " ".join(lp.var_names),
        f"{'OBJ':<{width}} {'max' if lp.maximize else 'min':>3} {'':>20} : {coefs(lp.c)}",
    ]
    for name, sense, rhs, row in zip(lp.row_names, lp.senses, lp.b, lp.A):
        lines.append(f"{name:<{width}} {sense:>3} {rhs:>20.12g} : {coefs(row)}")
    for name, lo in zip(lp.var_names, lp.lower):
        lines.append(f"BOUND {name} {'free' if np.isneginf(lo) else f'>= {lo:.12g}'}")
    return "\n".join(lines) + "\n"
