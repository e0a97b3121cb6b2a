"""Dense convex quadratic programming with exact multipliers.

Solves ``min 0.5 x'Qx + c'x`` subject to ``A x = b``, ``G x >= h`` and
bounds, with a primal active-set method.  All iterates stay feasible: steps
are taken in the nullspace of the working constraints, which also keeps
degenerate (PSD but singular) Hessians and linearly dependent rows safe.
A phase-1 run constructs the starting point.  Multipliers follow the
stationarity convention

    Q x + c + A' nu - G' lam_ineq - lam_lo + lam_up = 0,

with ``lam_ineq``, ``lam_lo`` and ``lam_up`` nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, MaxIterations, NegativeGammaEntries, Unbounded
from .report import CONVERGED, SolveReport

_FEAS_TOL = 1e-9


@dataclass
class QpProblem:
    Q: np.ndarray
    c: np.ndarray
    eq: tuple | None = None      # (A, b) with A x = b
    ineq: tuple | None = None    # (G, h) with G x >= h
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        if self.Q.shape != (n, n):
            raise ValueError("Q and c dimensions disagree")
        if np.abs(self.Q - self.Q.T).max() > 1e-12 * max(1.0, np.abs(self.Q).max()):
            raise ValueError("Q must be symmetric")
        self.Q = 0.5 * (self.Q + self.Q.T)
        if self.eq is not None:
            a, b = self.eq
            self.eq = (np.atleast_2d(np.asarray(a, float)), np.asarray(b, float).ravel())
            if self.eq[0].shape != (self.eq[1].size, n):
                raise ValueError("equality block dimensions disagree")
        if self.ineq is not None:
            g, h = self.ineq
            self.ineq = (np.atleast_2d(np.asarray(g, float)), np.asarray(h, float).ravel())
            if self.ineq[0].shape != (self.ineq[1].size, n):
                raise ValueError("inequality block dimensions disagree")
        for name in ("lower", "upper"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float).ravel()
                if v.size == 1:
                    v = np.full(n, v[0])
                if v.size != n:
                    raise ValueError(f"{name} bound has wrong length")
                setattr(self, name, v)
        if self.lower is not None and self.upper is not None:
            if (self.lower > self.upper + 1e-15).any():
                raise Infeasible("lower bound exceeds upper bound")

    @property
    def n(self) -> int:
        return self.c.size


def _gather_rows(problem: QpProblem):
    """Stack general inequalities and finite bounds into rows (g, h, tag, idx)."""
    n = problem.n
    rows_g, rows_h, tags = [], [], []
    if problem.ineq is not None:
        g, h = problem.ineq
        for i in range(h.size):
            rows_g.append(g[i])
            rows_h.append(h[i])
            tags.append(("ineq", i))
    if problem.lower is not None:
        for j in range(n):
            if np.isfinite(problem.lower[j]):
                e = np.zeros(n)
                e[j] = 1.0
                rows_g.append(e)
                rows_h.append(problem.lower[j])
                tags.append(("lower", j))
    if problem.upper is not None:
        for j in range(n):
            if np.isfinite(problem.upper[j]):
                e = np.zeros(n)
                e[j] = -1.0
                rows_g.append(e)
                rows_h.append(-problem.upper[j])
                tags.append(("upper", j))
    if rows_g:
        return np.array(rows_g), np.array(rows_h), tags
    return np.zeros((0, n)), np.zeros(0), tags


def _nullspace(a, n):
    """Orthonormal basis of the nullspace of ``a`` (identity if no rows)."""
    if a.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > 1e-11 * max(s[0], 1.0))) if s.size else 0
    return vt[rank:].T


def _reduced_step(q, grad, basis):
    """Minimizing step within the working-set manifold.

    Returns ``(p, flat)`` where ``flat`` flags a direction of descent with
    (numerically) zero curvature, i.e. the subproblem is unbounded until a
    blocking constraint clamps it.
    """
    if basis.shape[1] == 0:
        return np.zeros(q.shape[0]), False, False
    h = basis.T @ q @ basis
    h = 0.5 * (h + h.T)
    g_r = basis.T @ grad
    lam, vec = np.linalg.eigh(h)
    scale = max(lam.max(), 1.0) if lam.size else 1.0
    positive = lam > 1e-12 * scale
    degenerate = not positive.all()
    g_modes = vec.T @ g_r
    flat_component = np.where(positive, 0.0, g_modes)
    if np.linalg.norm(flat_component) > 1e-10 * max(1.0, np.linalg.norm(g_r)):
        # zero-curvature descent: pure direction, length set by the line search
        direction = -vec @ flat_component
        return basis @ direction, True, degenerate
    y = -vec @ np.where(positive, g_modes / np.where(positive, lam, 1.0), 0.0)
    return basis @ y, False, degenerate


def _refine_multipliers(q, c, x, a_eq, g_act):
    """Least-squares multipliers from stationarity at the final point."""
    n = q.shape[0]
    me, ma = a_eq.shape[0], g_act.shape[0]
    if me + ma == 0:
        return np.zeros(0), np.zeros(0)
    m = np.hstack([a_eq.T, -g_act.T]) if ma else a_eq.T
    if me == 0:
        m = -g_act.T
    sol, *_ = np.linalg.lstsq(m, -(q @ x + c), rcond=None)
    return sol[:me], sol[me:]


def _active_set(q, c, a_eq, b_eq, g, h, x0, max_iter, tol=_FEAS_TOL):
    """Primal active-set loop from a feasible ``x0``.

    Steps are computed in the nullspace of the working rows, so iterates
    stay on the working-set manifold even when rows are linearly dependent
    or the reduced Hessian is singular.  After a run of degenerate steps
    the pivoting switches to Bland's rule to break cycles.
    """
    n = c.size
    x = x0.copy()
    n_rows = h.size
    work = [i for i in range(n_rows) if abs(g[i] @ x - h[i]) <= tol]
    degenerate_run = 0
    bland = False
    saw_degenerate = False
    for it in range(1, max_iter + 1):
        g_act = g[work] if work else np.zeros((0, n))
        stacked = np.vstack([a_eq, g_act]) if work or a_eq.shape[0] else np.zeros((0, n))
        grad = q @ x + c
        basis = _nullspace(stacked, n)
        p, flat, degenerate = _reduced_step(q, grad, basis)
        saw_degenerate |= degenerate
        if not flat and np.linalg.norm(p, np.inf) <= 1e-11 * (1.0 + np.linalg.norm(x, np.inf)):
            nu, lam = _refine_multipliers(q, c, x, a_eq, g_act)
            if lam.size == 0 or lam.min() >= -1e-9:
                return x, work, it, saw_degenerate
            if bland:  # lowest constraint index among the violators
                candidates = [k for k, v in enumerate(lam) if v < -1e-9]
                drop = min(candidates, key=lambda k: work[k])
            else:
                drop = int(np.argmin(lam))
            work.pop(drop)
            continue
        # line search toward the nearest blocking constraint
        alpha = np.inf if flat else 1.0
        blocking = -1
        for i in range(n_rows):
            if i in work:
                continue
            gp = g[i] @ p
            if gp < -1e-13:
                a_i = max((h[i] - g[i] @ x) / gp, 0.0)
                if a_i < alpha - 1e-15:
                    alpha = a_i
                    blocking = i
                elif blocking >= 0 and a_i <= alpha + 1e-15 and bland and i < blocking:
                    blocking = i
        if flat and blocking < 0:
            if grad @ p < -1e-12:
                raise Unbounded("zero-curvature descent with no blocking constraint")
            alpha = 0.0  # numerically flat but not a real descent: stay put
        if not np.isfinite(alpha):
            alpha = 0.0
        x = x + alpha * p
        if blocking >= 0 and (flat or alpha < 1.0 - 1e-15):
            work.append(blocking)
        degenerate_run = degenerate_run + 1 if alpha <= 1e-14 else 0
        if degenerate_run > n + 2:
            bland = True
    raise MaxIterations(f"active set did not terminate in {max_iter} iterations")


def _phase1(n, a_eq, b_eq, g, h, max_iter):
    """Feasible point via slack minimization (near-zero quadratic term)."""
    if a_eq.shape[0]:
        x0, *_ = np.linalg.lstsq(a_eq, b_eq, rcond=None)
        if np.linalg.norm(a_eq @ x0 - b_eq, np.inf) > 1e-7 * max(1.0, np.abs(b_eq).max()):
            raise Infeasible("equality constraints are inconsistent")
    else:
        x0 = np.zeros(n)
    m = h.size
    if m == 0:
        return x0
    viol = h - g @ x0
    if viol.max() <= _FEAS_TOL:
        return x0
    # variables (x, s): min 1's + eps/2 ||.||^2  s.t.  Gx + s >= h, s >= 0, Ax = b
    s0 = np.maximum(viol, 0.0)
    qq = 1e-8 * np.eye(n + m)
    cc = np.concatenate([np.zeros(n), np.ones(m)])
    aeq = np.hstack([a_eq, np.zeros((a_eq.shape[0], m))]) if a_eq.shape[0] else np.zeros((0, n + m))
    rows = np.vstack([
        np.hstack([g, np.eye(m)]),
        np.hstack([np.zeros((m, n)), np.eye(m)]),
    ])
    rhs = np.concatenate([h, np.zeros(m)])
    y0 = np.concatenate([x0, s0 + 1e-12])
    y, *_ = _active_set(qq, cc, aeq, b_eq, rows, rhs, y0, max_iter)
    if y[n:].sum() > 1e-7:
        raise Infeasible(f"no feasible point, residual {y[n:].sum():.3e}")
    return y[:n]


def solve_qp(problem: QpProblem, x0: np.ndarray | None = None,
             max_iter: int | None = None) -> SolveReport:
    """Minimize ``0.5 x'Qx + c'x`` over the problem's constraint set.

    Returns a report whose ``duals`` dict carries multipliers for every
    declared constraint block, with inactive entries at zero.
    """
    n = problem.n
    q, c = problem.Q, problem.c
    if problem.eq is not None:
        a_eq, b_eq = problem.eq
    else:
        a_eq, b_eq = np.zeros((0, n)), np.zeros(0)
    g, h, tags = _gather_rows(problem)
    if max_iter is None:
        max_iter = 100 * (n + h.size) + 200

    if x0 is not None:
        x0 = np.asarray(x0, dtype=float).ravel()
        ok = (a_eq.shape[0] == 0 or np.abs(a_eq @ x0 - b_eq).max() <= _FEAS_TOL) and (
            h.size == 0 or (g @ x0 - h).min() >= -_FEAS_TOL)
        if not ok:
            x0 = None
    if x0 is None:
        x0 = _phase1(n, a_eq, b_eq, g, h, max_iter)

    x, work, iters, degenerate = _active_set(q, c, a_eq, b_eq, g, h, x0, max_iter)
    g_act = g[work] if work else np.zeros((0, n))
    nu, lam_act = _refine_multipliers(q, c, x, a_eq, g_act)
    lam_act = np.clip(lam_act, 0.0, None)

    duals = {
        "eq": nu,
        "ineq": np.zeros(problem.ineq[1].size if problem.ineq is not None else 0),
        "lower": np.zeros(n),
        "upper": np.zeros(n),
    }
    for k, row_idx in enumerate(work):
        tag, j = tags[row_idx]
        duals[tag][j] = lam_act[k]

    objective = 0.5 * x @ q @ x + c @ x
    report = SolveReport(weights=x, objective=float(objective), status=CONVERGED,
                         iterations=iters, duals=duals)
    if degenerate:
        report.meta["degenerate_hessian"] = True
    return report


def augment_l1(problem: QpProblem, gamma1: np.ndarray, rho1: float,
               x0: np.ndarray) -> QpProblem:
    """Rewrite an L1 penalty around ``x0`` as a QP over ``(x, d-, d+)``.

    ``gamma1`` must be entrywise nonnegative; at the optimum the split is
    complementary (``d- = max(0, x0-x)``, ``d+ = max(0, x-x0)``) and the
    penalty term evaluates to ``sum_j colsum_j(gamma1) |x_j - x0_j|``.  For
    the usual diagonal unit-cost matrices this equals
    ``rho1 ||gamma1 (x-x0)||_1`` exactly; a matrix whose rows mix bets of
    opposite signs only bounds that norm from above, and the splitting
    solver is the route that prices the composed norm itself.
    """
    gamma1 = np.atleast_2d(np.asarray(gamma1, dtype=float))
    if (gamma1 < 0).any():
        raise NegativeGammaEntries("L1 split needs a nonnegative penalty matrix")
    n = problem.n
    x0 = np.asarray(x0, dtype=float).ravel()
    zero = np.zeros((n, n))
    q = np.block([[problem.Q, zero, zero], [zero, zero, zero], [zero, zero, zero]])
    lin = rho1 * (gamma1.T @ np.ones(n))
    c = np.concatenate([problem.c, lin, lin])

    eq_rows = [np.hstack([np.eye(n), np.eye(n), -np.eye(n)])]
    eq_rhs = [x0]
    if problem.eq is not None:
        a, b = problem.eq
        eq_rows.append(np.hstack([a, np.zeros((a.shape[0], 2 * n))]))
        eq_rhs.append(b)
    eq = (np.vstack(eq_rows), np.concatenate(eq_rhs))

    ineq = None
    if problem.ineq is not None:
        gg, hh = problem.ineq
        ineq = (np.hstack([gg, np.zeros((gg.shape[0], 2 * n))]), hh)

    lower = np.concatenate([
        problem.lower if problem.lower is not None else np.full(n, -np.inf),
        np.zeros(2 * n),
    ])
    upper = np.concatenate([
        problem.upper if problem.upper is not None else np.full(n, np.inf),
        np.full(2 * n, np.inf),
    ])
    out = QpProblem(Q=q, c=c, eq=eq, ineq=ineq, lower=lower, upper=upper)
    out.meta["augmented_from"] = n
    return out
