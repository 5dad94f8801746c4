"""Log-barrier interior-point solver for the box-volume program.

The program is

    minimize   sum_b 1 / prod_k x[nu_b[k]]
    subject to G x + h >= 0                       (affine rows)
               r2_i - ||B_i x + d_i||^2 >= 0      (ball-vertex rows)

Newton steps use exact Hessians of the objective and of the quadratic rows
and a dense Cholesky factorization. A phase-I stage locates a strictly
feasible start or certifies infeasibility.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import InfeasibleError


class Status(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    ITER_LIMIT = "IterLimit"


@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-6
    decrease: float = 0.2
    t0: float = 1.0
    max_newton: int = 50
    max_outer: int = 60
    beta: float = 0.5
    alpha: float = 1e-4

    def __post_init__(self):
        for name in ("tol", "t0", "max_newton", "max_outer"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("decrease", "beta", "alpha"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass(eq=False)
class NumericProblem:
    n_vars: int
    nu_blocks: list
    G: np.ndarray
    h: np.ndarray
    B: np.ndarray
    d: np.ndarray
    r2: np.ndarray
    x0: np.ndarray
    owner_affine: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    owner_ball: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def n_rows(self) -> int:
        return self.h.size + self.r2.size

    # -- objective
    def objective(self, x) -> float:
        return float(sum(1.0 / np.prod(x[idx]) for idx in self.nu_blocks))

    def objective_grad(self, x) -> np.ndarray:
        g = np.zeros(self.n_vars)
        for idx in self.nu_blocks:
            v = x[idx]
            g[idx] += -(1.0 / np.prod(v)) / v
        return g

    def objective_hess(self, x) -> np.ndarray:
        H = np.zeros((self.n_vars, self.n_vars))
        for idx in self.nu_blocks:
            v = x[idx]
            f = 1.0 / np.prod(v)
            inv = 1.0 / v
            H[np.ix_(idx, idx)] += f * (np.outer(inv, inv) + np.diag(inv**2))
        return H

    def in_domain(self, x) -> bool:
        return all(np.all(x[idx] > 0) for idx in self.nu_blocks)

    # -- constraints
    def _ball_residual(self, x):
        return np.einsum("mij,j->mi", self.B, x) + self.d

    def constraint_values(self, x) -> np.ndarray:
        aff = self.G @ x + self.h
        u = self._ball_residual(x)
        quad = self.r2 - np.einsum("mi,mi->m", u, u)
        return np.concatenate([aff, quad])

    def constraint_jacobian(self, x) -> np.ndarray:
        u = self._ball_residual(x)
        Jq = -2.0 * np.einsum("mi,mij->mj", u, self.B)
        return np.vstack([self.G, Jq])

    def ball_curvature(self) -> np.ndarray:
        """``B_i^T B_i`` per quadratic row (the row Hessian is ``-2 B_i^T B_i``)."""
        return np.einsum("mij,mik->mjk", self.B, self.B)


@dataclass(eq=False)
class Solution:
    x: np.ndarray
    objective: float
    margins: np.ndarray
    status: Status
    iterations: int = 0
    outer_iterations: int = 0
    gap: float = float("inf")
    history: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    phase_one_iterations: int = 0

    @property
    def max_violation(self) -> float:
        if self.margins.size == 0:
            return 0.0
        return float(max(0.0, -np.min(self.margins)))


# ------------------------------------------------------------------ internals


class _Barrier:
    """``t * f(x) + phi(x)`` with ``phi = -sum log g_i``; ``f`` is optional."""

    def __init__(self, prob: NumericProblem, with_objective=True, slack=False):
        self.p = prob
        self.with_objective = with_objective
        self.slack = slack  # phase I: last variable s shifts every row
        self.BtB = prob.ball_curvature() if prob.r2.size else None

    def _split(self, z):
        return (z[:-1], z[-1]) if self.slack else (z, 0.0)

    def rows(self, z):
        x, s = self._split(z)
        return self.p.constraint_values(x) + s

    def feasible(self, z) -> bool:
        x, _ = self._split(z)
        if self.with_objective and not self.p.in_domain(x):
            return False
        return bool(np.all(self.rows(z) > 0))

    def value(self, z, t) -> float:
        x, s = self._split(z)
        g = self.rows(z)
        f = self.p.objective(x) if self.with_objective else s
        return float(t * f - np.sum(np.log(g)))

    def derivatives(self, z, t):
        x, _ = self._split(z)
        p = self.p
        g = self.rows(z)
        J = p.constraint_jacobian(x)
        if self.slack:
            J = np.hstack([J, np.ones((J.shape[0], 1))])
        n = z.size
        if self.with_objective:
            fg = p.objective_grad(x)
            fH = p.objective_hess(x)
        else:
            fg = np.zeros(n)
            fg[-1] = 1.0
            fH = np.zeros((n, n))
        inv = 1.0 / g
        grad = t * fg - J.T @ inv
        H = t * fH + (J * inv[:, None] ** 2).T @ J
        if self.BtB is not None:
            w = 2.0 * inv[p.h.size:]
            curv = np.einsum("m,mjk->jk", w, self.BtB)
            H[: p.n_vars, : p.n_vars] += curv
        return grad, H


def _newton_step(H, grad):
    scale = max(1.0, float(np.max(np.abs(np.diag(H))))) if H.size else 1.0
    ridge = 1e-12 * scale
    for _ in range(12):
        try:
            c = cho_factor(H + ridge * np.eye(H.shape[0]), lower=True, check_finite=False)
            return -cho_solve(c, grad, check_finite=False)
        except LinAlgError:
            ridge *= 100.0
    raise LinAlgError("Newton system is not positive definite")


def _center(bar: _Barrier, z, t, params: SolverParams, stop=None):
    """Damped Newton minimization of the barrier function at weight ``t``."""
    iters = 0
    for _ in range(params.max_newton):
        grad, H = bar.derivatives(z, t)
        dz = _newton_step(H, grad)
        lam2 = float(-grad @ dz)
        if lam2 / 2 <= 1e-10:
            break
        step = 1.0
        while not bar.feasible(z + step * dz):
            step *= params.beta
            if step < 1e-14:
                break
        f0 = bar.value(z, t)
        slope = float(grad @ dz)
        while step >= 1e-14 and bar.value(z + step * dz, t) > f0 + params.alpha * step * slope:
            step *= params.beta
        if step < 1e-14:
            break
        z = z + step * dz
        iters += 1
        if stop is not None and stop(z):
            break
    return z, iters


# -------------------------------------------------------------------- public


def phase_one(prob: NumericProblem, params: SolverParams | None = None):
    """Find a strictly feasible point for ``prob``.

    Returns ``(x, iterations)``. Raises :class:`InfeasibleError` whose
    ``certificate`` is ``(s_star, x)``: the smallest uniform shift ``s`` with
    every row ``g_i(x) + s >= 0``; a non-negative ``s_star`` means no strictly
    feasible point exists.
    """
    params = params or SolverParams()
    x0 = np.array(prob.x0, dtype=float)
    if prob.n_rows == 0:
        return x0, 0
    g0 = prob.constraint_values(x0)
    if np.all(g0 > 0) and prob.in_domain(x0):
        return x0, 0
    s0 = max(0.0, float(-np.min(g0))) + 1.0
    z = np.append(x0, s0)
    bar = _Barrier(prob, with_objective=False, slack=True)

    def done(zz):
        return zz[-1] < 0 and prob.in_domain(zz[:-1])

    t, total = params.t0, 0
    m = prob.n_rows
    for _ in range(params.max_outer):
        z, k = _center(bar, z, t, params, stop=done)
        total += k
        if done(z):
            return z[:-1], total
        if m / t < params.tol:
            break
        t /= params.decrease
    s_star = float(-np.min(prob.constraint_values(z[:-1])))
    if s_star < 0:
        # rows satisfied but some size variable sits at or below zero
        raise InfeasibleError("no point with positive sizes satisfies every row", (s_star, z[:-1]))
    raise InfeasibleError(f"no strictly feasible point (max violation {s_star:.3g})", (s_star, z[:-1]))


def solve(prob: NumericProblem, params: SolverParams | None = None) -> Solution:
    """Minimize the volume objective by barrier path following."""
    params = params or SolverParams()
    if prob.n_vars == 0:
        return Solution(np.zeros(0), 0.0, prob.constraint_values(np.zeros(0)), Status.OPTIMAL, gap=0.0)
    x, p1 = phase_one(prob, params)
    m = prob.n_rows
    if m == 0:
        # objective has no minimizer without constraints
        return Solution(x, prob.objective(x), np.zeros(0), Status.ITER_LIMIT, phase_one_iterations=p1)
    bar = _Barrier(prob)
    t, total, status = params.t0, 0, Status.ITER_LIMIT
    history, trace = [], [x.copy()]
    outer = 0
    for outer in range(1, params.max_outer + 1):
        x, k = _center(bar, x, t, params)
        total += k
        history.append(prob.objective(x))
        trace.append(x.copy())
        if m / t < params.tol:
            status = Status.OPTIMAL
            break
        t /= params.decrease
    margins = prob.constraint_values(x)
    if status is Status.ITER_LIMIT and np.all(margins >= -params.tol):
        status = Status.FEASIBLE
    return Solution(x, prob.objective(x), margins, status, total, outer, m / t, history, trace, p1)


@dataclass
class FeasibilityReport:
    """Per-constraint margins at a given point.

    A ``nan`` margin marks a constraint skipped because some of its variables
    were not supplied.
    """

    labels: list
    groups: list
    margins: np.ndarray
    tol: float

    @property
    def evaluated(self) -> np.ndarray:
        return self.margins[~np.isnan(self.margins)]

    @property
    def skipped(self) -> int:
        return int(np.sum(np.isnan(self.margins)))

    @property
    def min_margin(self) -> float:
        m = self.evaluated
        return float(np.min(m)) if m.size else float("inf")

    @property
    def passed(self) -> bool:
        return bool(np.all(self.evaluated >= -self.tol))

    def failures(self) -> list:
        return [(l, float(m)) for l, m in zip(self.labels, self.margins) if m < -self.tol]

    def select(self, groups) -> "FeasibilityReport":
        keep = [k for k, g in enumerate(self.groups) if g in set(groups)]
        return FeasibilityReport(
            [self.labels[k] for k in keep], [self.groups[k] for k in keep], self.margins[keep], self.tol
        )


def check_point(problem, values, tol: float = 1e-6, allow_missing: bool = False) -> FeasibilityReport:
    """Evaluate every constraint of a :class:`~stldecomp.problem.ConvexProblem`.

    ``values`` is either a full decision vector or a mapping from parameter
    block keys to ``(center, size)``. Margins are in predicate units: for
    inclusion rows the smallest predicate value over the box vertices. With
    ``allow_missing`` absent blocks are left undefined and every constraint
    touching them is skipped.
    """
    if isinstance(values, dict):
        if allow_missing:
            nan = np.full(problem.params.dim, np.nan)
            values = {b.key: values.get(b.key, (nan, nan)) for b in problem.params.blocks}
        unknown = [k for k in values if k not in problem.params]
        if unknown:
            raise KeyError(f"values for unknown parameter blocks {unknown}")
        x = problem.params.pack(values)
    else:
        x = np.asarray(values, dtype=float).reshape(-1)
        if x.size != problem.n_vars:
            raise KeyError(f"expected {problem.n_vars} values, got {x.size}")
    missing = np.isnan(x)
    filled = np.where(missing, 0.0, x)
    margins = np.array(
        [np.nan if missing[c.columns()].any() else c.margin(filled) for c in problem.constraints], dtype=float
    )
    return FeasibilityReport(
        [c.label for c in problem.constraints], [c.group for c in problem.constraints], margins, tol
    )
