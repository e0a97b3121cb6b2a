"""Scaled ADMM with adaptive penalty, plus structured solvers for the
penalized portfolio problems (smoothed, sparse and cardinality-constrained)."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import prox
from .errors import NoConvergence
from .mvo import ConstraintSet
from .qp import QpProblem, solve_qp
from .report import CONVERGED, DIVERGED, MAX_ITER, SolveReport

_DIVERGE_LIMIT = 1e12


@dataclass
class AdmmParams:
    phi0: float = 1.0
    mu: float = 1e3            # residual balance factor
    tau_up: float = 2.0
    tau_down: float = 2.0
    eps_primal: float = 1e-10
    eps_dual: float = 1e-10
    max_iter: int = 10000
    adaptive: bool = True
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if min(self.phi0, self.mu, self.eps_primal, self.eps_dual) <= 0:
            raise ValueError("phi0, mu and tolerances must be positive")
        if min(self.tau_up, self.tau_down) < 1.0:
            raise ValueError("penalty multipliers must be >= 1")


@dataclass
class AdmmState:
    x: np.ndarray
    z: np.ndarray
    u: np.ndarray
    phi: float
    r_norm: float
    s_norm: float
    iterations: int


def adaptive_penalty(phi: float, r_norm: float, s_norm: float,
                     params: AdmmParams) -> float:
    """Rescale the penalty to keep the two squared residuals within a factor."""
    r2, s2 = r_norm ** 2, s_norm ** 2
    if r2 > params.mu * s2:
        return phi * params.tau_up
    if s2 > params.mu * r2:
        return phi / params.tau_down
    return phi


def admm_solve(x_update, z_update, coupling, params: AdmmParams | None = None,
               z0: np.ndarray | None = None, u0: np.ndarray | None = None,
               objective=None) -> SolveReport:
    """Generic scaled ADMM on ``min f(x) + g(z)  s.t.  A x + B z = c``.

    ``x_update(z, u, phi)`` must return the minimizer of
    ``f(x) + phi/2 ||Ax + Bz - c + u||^2`` and ``z_update(x, u, phi)`` the
    analogue for ``g``.  The scaled dual ``u`` is rescaled whenever the
    penalty changes so the fixed point is preserved.
    """
    params = params or AdmmParams()
    a, b, c = coupling
    m = c.size
    z = np.zeros(b.shape[1]) if z0 is None else np.asarray(z0, dtype=float).copy()
    u = np.zeros(m) if u0 is None else np.asarray(u0, dtype=float).copy()
    phi = params.phi0
    x = None
    r_norm = s_norm = np.inf
    status = MAX_ITER
    it = 0
    for it in range(1, params.max_iter + 1):
        x = x_update(z, u, phi)
        z_new = z_update(x, u, phi)
        r = a @ x + b @ z_new - c
        s = phi * (a.T @ (b @ (z_new - z)))
        z = z_new
        u = u + r
        r_norm = float(np.linalg.norm(r))
        s_norm = float(np.linalg.norm(s))
        if not np.isfinite(r_norm) or r_norm > _DIVERGE_LIMIT or s_norm > _DIVERGE_LIMIT:
            status = DIVERGED
            break
        if r_norm <= params.eps_primal and s_norm <= params.eps_dual:
            status = CONVERGED
            break
        if params.adaptive:
            phi_new = adaptive_penalty(phi, r_norm, s_norm, params)
            if phi_new != phi:
                u *= phi / phi_new
                phi = phi_new
    obj = float(objective(x)) if objective is not None else float("nan")
    report = SolveReport(weights=x, objective=obj, status=status, iterations=it,
                         r_norm=r_norm, s_norm=s_norm)
    report.meta["state"] = AdmmState(x=x, z=z, u=u, phi=phi, r_norm=r_norm,
                                     s_norm=s_norm, iterations=it)
    report.meta["coupling_dual"] = phi * u
    return report


# --- structured layer --------------------------------------------------------


def _constraint_sets(constraints: ConstraintSet | None, extra_sets=()):
    """Split a constraint set into x-step equalities and z-step projections."""
    sets = list(extra_sets)
    eq = None
    if constraints is not None:
        eq_rows = []
        eq_rhs = []
        if constraints.budget is not None:
            eq_rows.append(None)  # filled once n is known
            eq_rhs.append(float(constraints.budget))
        if constraints.eq is not None:
            a, b = constraints.eq
            eq_rows.append(np.atleast_2d(np.asarray(a, float)))
            eq_rhs.append(np.asarray(b, float).ravel())
        eq = (eq_rows, eq_rhs) if eq_rows else None
        lo, up = constraints.lower, constraints.upper
        if lo is not None or up is not None:
            sets.append(prox.Box(-np.inf if lo is None else lo,
                                 np.inf if up is None else up))
        if constraints.ineq is not None:
            a, b = constraints.ineq
            a = np.atleast_2d(np.asarray(a, float))
            b = np.asarray(b, float).ravel()
            for i in range(b.size):
                sets.append(prox.Halfspace(-a[i], -b[i]))  # a_i'x >= b_i
    return eq, sets


def _assemble_eq(eq, n):
    if eq is None:
        return np.zeros((0, n)), np.zeros(0)
    rows, rhs = eq
    mats, vals = [], []
    for row, val in zip(rows, rhs):
        if row is None:  # budget row
            mats.append(np.ones((1, n)))
            vals.append(np.atleast_1d(val))
        else:
            mats.append(row)
            vals.append(np.atleast_1d(val))
    return np.vstack(mats), np.concatenate(vals)


class _StackedProblem:
    """ADMM data for ``min 0.5 x'Px - q'x + sum_i g_i(G_i x - d_i)`` with
    equality constraints in the x-step and prox/projection blocks in z."""

    def __init__(self, p_mat, q_vec, a_eq, b_eq, blocks):
        self.p = p_mat
        self.q = q_vec
        self.a_eq = a_eq
        self.b_eq = b_eq
        self.gammas = [g for g, _, _ in blocks]
        self.offsets = [d for _, d, _ in blocks]
        self.steppers = [s for _, _, s in blocks]
        self.n = q_vec.size
        self.gram = sum(g.T @ g for g in self.gammas)
        self.a_stack = np.vstack(self.gammas)
        self.b_stack = -np.eye(self.a_stack.shape[0])
        self.c_stack = np.concatenate(self.offsets)
        self.sizes = [d.size for d in self.offsets]
        self._factors = {}

    def _factor(self, phi):
        if phi not in self._factors:
            me = self.a_eq.shape[0]
            kkt = np.zeros((self.n + me, self.n + me))
            kkt[:self.n, :self.n] = self.p + phi * self.gram
            if me:
                kkt[:self.n, self.n:] = self.a_eq.T
                kkt[self.n:, :self.n] = self.a_eq
            self._factors[phi] = lu_factor(kkt)
        return self._factors[phi]

    def x_update(self, z, u, phi):
        rhs = self.q.copy()
        start = 0
        for g, d, size in zip(self.gammas, self.offsets, self.sizes):
            rhs += phi * (g.T @ (z[start:start + size] + d - u[start:start + size]))
            start += size
        me = self.a_eq.shape[0]
        full = np.concatenate([rhs, self.b_eq]) if me else rhs
        sol = lu_solve(self._factor(phi), full)
        self._eq_dual = sol[self.n:] if me else np.zeros(0)
        return sol[:self.n]

    def z_update(self, x, u, phi):
        out = np.empty(self.c_stack.size)
        start = 0
        for g, d, size, stepper in zip(self.gammas, self.offsets, self.sizes,
                                       self.steppers):
            v = g @ x - d + u[start:start + size]
            out[start:start + size] = stepper(v, phi)
            start += size
        return out

    def z_init(self, x_init):
        return np.concatenate([g @ x_init - d for g, d in zip(self.gammas, self.offsets)])


def _solve_stacked(p_mat, q_vec, eq, blocks, params, x_init=None, warm=None,
                   objective=None) -> SolveReport:
    n = q_vec.size
    a_eq, b_eq = _assemble_eq(eq, n)
    prob = _StackedProblem(p_mat, q_vec, a_eq, b_eq, blocks)
    if warm is not None and warm.z.size != prob.c_stack.size:
        warm = None
    if warm is not None:
        z0, u0 = warm.z, warm.u
    elif x_init is not None:
        z0, u0 = prob.z_init(np.asarray(x_init, float)), None
    else:
        z0 = u0 = None
    report = admm_solve(prob.x_update, prob.z_update,
                        (prob.a_stack, prob.b_stack, prob.c_stack),
                        params, z0=z0, u0=u0, objective=objective)
    report.meta["eq_dual"] = getattr(prob, "_eq_dual", np.zeros(0))
    return report


def _as_matrix(gamma, n):
    if gamma is None:
        return np.eye(n)
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim == 1:
        return np.diag(gamma)
    return gamma


def _gram_terms(a1, b1):
    a1 = np.atleast_2d(np.asarray(a1, dtype=float))
    b1 = np.asarray(b1, dtype=float).ravel()
    return a1, b1, a1.T @ a1, a1.T @ b1


def solve_tikhonov_constrained(a1, b1, penalty, constraints: ConstraintSet | None = None,
                               extra_sets=(), params: AdmmParams | None = None,
                               x_init=None, warm=None) -> SolveReport:
    """Quadratically penalized least squares over box / halfspace / norm-ball
    sets, with equalities folded into the x-step.

    ``penalty`` is an L2 penalty spec (rho, matrix, anchor); the z-step is a
    projection onto the intersection of the remaining sets.
    """
    params = params or AdmmParams()
    a1, b1, gram, atb = _gram_terms(a1, b1)
    n = a1.shape[1]
    g2 = _as_matrix(getattr(penalty, "gamma_matrix", None), n)
    rho2 = float(getattr(penalty, "rho", 0.0))
    x0 = np.zeros(n) if getattr(penalty, "anchor", None) is None \
        else np.asarray(penalty.anchor, float)
    p_mat = gram + rho2 * g2.T @ g2
    q_vec = atb + rho2 * (g2.T @ (g2 @ x0))
    eq, sets = _constraint_sets(constraints, extra_sets)

    def project_step(v, _phi):
        return prox.project_intersection(v, sets) if sets else v

    blocks = [(np.eye(n), np.zeros(n), project_step)]

    def objective(x):
        res = a1 @ x - b1
        return 0.5 * res @ res + 0.5 * rho2 * np.sum((g2 @ (x - x0)) ** 2)

    return _solve_stacked(p_mat, q_vec, eq, blocks, params, x_init=x_init,
                          warm=warm, objective=objective)


def solve_mixed_lp(a1, b1, penalty_l2, penalty_lp, x0=None,
                   constraints: ConstraintSet | None = None, extra_sets=(),
                   params: AdmmParams | None = None, x_init=None,
                   warm=None) -> SolveReport:
    """Least squares with an L2 penalty plus an Lp penalty split off through
    ``Gamma_p (x - x0) = z``; the z-step is the componentwise Lp prox.

    The penalty matrices may carry negative entries, which is what rules out
    the augmented-QP route.
    """
    params = params or AdmmParams()
    a1, b1, gram, atb = _gram_terms(a1, b1)
    n = a1.shape[1]
    rho2 = float(getattr(penalty_l2, "rho", 0.0)) if penalty_l2 is not None else 0.0
    g2 = _as_matrix(getattr(penalty_l2, "gamma_matrix", None) if penalty_l2 is not None else None, n)
    anchor2 = None if penalty_l2 is None else getattr(penalty_l2, "anchor", None)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    x0_2 = x0 if anchor2 is None else np.asarray(anchor2, float)
    rho_p = float(penalty_lp.rho)
    p_ord = float(getattr(penalty_lp, "p", 1.0) or 1.0)
    gp = _as_matrix(getattr(penalty_lp, "gamma_matrix", None), n)
    anchor_p = getattr(penalty_lp, "anchor", None)
    x0_p = x0 if anchor_p is None else np.asarray(anchor_p, float)

    p_mat = gram + rho2 * g2.T @ g2
    q_vec = atb + rho2 * (g2.T @ (g2 @ x0_2))
    eq, sets = _constraint_sets(constraints, extra_sets)

    def lp_step(v, phi):
        return prox.prox_lp(v, rho_p / phi, p_ord)

    blocks = [(gp, gp @ x0_p, lp_step)]
    if sets:
        blocks.append((np.eye(n), np.zeros(n),
                       lambda v, _phi: prox.project_intersection(v, sets)))

    def objective(x):
        res = a1 @ x - b1
        val = 0.5 * res @ res + 0.5 * rho2 * np.sum((g2 @ (x - x0_2)) ** 2)
        bets = gp @ (x - x0_p)
        return val + rho_p / p_ord * np.sum(np.abs(bets) ** p_ord)

    return _solve_stacked(p_mat, q_vec, eq, blocks, params, x_init=x_init,
                          warm=warm, objective=objective)


def _feasible_points(n, eq, sets, relax, x0, rng):
    """Candidate starts: anchor, equal weights, convex relaxation, random."""
    starts = []
    regions = list(sets)
    if eq is not None:
        a_eq, b_eq = _assemble_eq(eq, n)
        if a_eq.shape[0]:
            regions = [prox.AffineSet(a_eq, b_eq)] + regions

    def feasibilize(v):
        if not regions:
            return v
        try:
            return prox.project_intersection(v, regions, max_sweeps=200)
        except Exception:
            return v

    starts.append(feasibilize(x0.copy()))
    starts.append(feasibilize(np.full(n, 1.0 / n)))
    if relax is not None:
        starts.append(relax)
    while len(starts) < 5:
        starts.append(feasibilize(rng.normal(loc=1.0 / n, scale=0.5, size=n)))
    return starts


def solve_cardinality(a1, b1, penalty_l2, gamma1, x0, n1,
                      constraints: ConstraintSet | None = None, extra_sets=(),
                      params: AdmmParams | None = None,
                      z_bounds=(-np.inf, np.inf)) -> SolveReport:
    """Restrict ``gamma1 (x - x0)`` to at most ``n1`` nonzeros.

    The z-step projects onto the sparse set, which makes the problem
    non-convex: the solver restarts from several feasible points, polishes
    each candidate support with an exact convex solve and reports the best
    objective.  Per-restart diagnostics land in ``meta['restarts']``.
    """
    params = params or AdmmParams()
    a1, b1, gram, atb = _gram_terms(a1, b1)
    n = a1.shape[1]
    rho2 = float(getattr(penalty_l2, "rho", 0.0)) if penalty_l2 is not None else 0.0
    g2 = _as_matrix(getattr(penalty_l2, "gamma_matrix", None) if penalty_l2 is not None else None, n)
    g1 = _as_matrix(gamma1, n)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if not 1 <= n1 <= g1.shape[0]:
        raise ValueError(f"n1 must be in [1, {g1.shape[0]}]")
    p_mat = gram + rho2 * g2.T @ g2
    q_vec = atb + rho2 * (g2.T @ (g2 @ x0))
    eq, sets = _constraint_sets(constraints, extra_sets)
    rng = np.random.default_rng(params.seed)

    def objective(x):
        res = a1 @ x - b1
        return 0.5 * res @ res + 0.5 * rho2 * np.sum((g2 @ (x - x0)) ** 2)

    # convex relaxation start: drop the cardinality restriction entirely
    relax = None
    try:
        eq_rows, eq_rhs = _assemble_eq(eq, n)
        qp_eq = (eq_rows, eq_rhs) if eq_rows.shape[0] else None
        lower = constraints.lower if constraints is not None else None
        upper = constraints.upper if constraints is not None else None
        ineq = constraints.ineq if constraints is not None else None
        relax_rep = solve_qp(QpProblem(Q=p_mat, c=-q_vec, eq=qp_eq, ineq=ineq,
                                       lower=lower, upper=upper))
        relax = relax_rep.weights
    except Exception:
        relax = None

    def sparse_step(v, _phi):
        return prox.project_cardinality(v, n1, z_bounds)

    def polish(support):
        """Exact solve with off-support bets pinned to zero."""
        off = [i for i in range(g1.shape[0]) if i not in support]
        rows = [np.ones((1, n))] if constraints is not None and constraints.budget is not None else []
        rhs = [np.atleast_1d(float(constraints.budget))] if rows else []
        if constraints is not None and constraints.eq is not None:
            rows.append(np.atleast_2d(np.asarray(constraints.eq[0], float)))
            rhs.append(np.asarray(constraints.eq[1], float).ravel())
        if off:
            rows.append(g1[off])
            rhs.append(g1[off] @ x0)
        qp_eq2 = (np.vstack(rows), np.concatenate(rhs)) if rows else None
        rep = solve_qp(QpProblem(
            Q=p_mat, c=-q_vec, eq=qp_eq2,
            ineq=constraints.ineq if constraints is not None else None,
            lower=constraints.lower if constraints is not None else None,
            upper=constraints.upper if constraints is not None else None))
        return rep

    best = None
    diagnostics = []
    starts = _feasible_points(n, eq, sets, relax, x0, rng)[:max(params.restarts, 1)]
    for k, start in enumerate(starts):
        blocks = [(g1, g1 @ x0, sparse_step)]
        if sets:
            blocks.append((np.eye(n), np.zeros(n),
                           lambda v, _phi: prox.project_intersection(v, sets)))
        sub = replace(params, max_iter=min(params.max_iter, 2000))
        rep = _solve_stacked(p_mat, q_vec, eq, blocks, sub, x_init=start,
                             objective=objective)
        bets = g1 @ (rep.weights - x0)
        support = set(np.argsort(-np.abs(bets), kind="stable")[:n1].tolist())
        entry = {"restart": k, "admm_status": rep.status,
                 "iterations": rep.iterations, "support": sorted(support)}
        try:
            polished = polish(support)
            entry["objective"] = polished.objective
            if best is None or polished.objective < best[0] - 1e-15:
                best = (polished.objective, polished, sorted(support))
        except Exception as exc:  # infeasible support: record and move on
            entry["error"] = str(exc)
        diagnostics.append(entry)
    if best is None:
        raise NoConvergence(f"all {len(starts)} restarts failed: {diagnostics}")
    _, report, support = best
    report.meta["restarts"] = diagnostics
    report.meta["support"] = support
    return report
