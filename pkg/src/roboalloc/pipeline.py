"""Rebalancing assembly: dual-anchor penalized optimization, regularization
paths and tracking-error targeting."""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np

from . import prox
from .admm import AdmmParams, _constraint_sets, _solve_stacked
from .errors import TargetUnreachable
from .mvo import ConstraintSet
from .qp import QpProblem, solve_qp
from .report import SolveReport

_TE_TOL = 1e-6
_GAMMA_CAP = 1e6


def _matrix_or_identity(m, n):
    if m is None:
        return np.eye(n)
    m = np.asarray(m, dtype=float)
    return np.diag(m) if m.ndim == 1 else m


@dataclass
class RoboConfig:
    """Penalized rebalancing toward a strategic anchor from the current book.

    Sparsity (L1) and smoothing (L2) penalties are applied both to the
    active bets ``x - strategic`` and to the trades ``x - current``; the
    objective is either plain risk/return or the tracking-error variant
    against the strategic portfolio.
    """

    strategic: np.ndarray
    current: np.ndarray
    objective: str = "tracking_error"        # tracking_error | mvo
    gamma: float | None = None
    te_target: float | None = None
    rho1_strategic: float = 0.0
    gamma1_strategic: np.ndarray | None = None
    rho2_strategic: float = 0.0
    gamma2_strategic: np.ndarray | None = None
    rho1_turnover: float = 0.0
    gamma1_turnover: np.ndarray | None = None
    rho2_turnover: float = 0.0
    gamma2_turnover: np.ndarray | None = None
    constraints: ConstraintSet | None = None
    extra_sets: tuple = ()
    admm: AdmmParams = field(default_factory=AdmmParams)

    def __post_init__(self):
        self.strategic = np.asarray(self.strategic, dtype=float).ravel()
        self.current = np.asarray(self.current, dtype=float).ravel()
        if self.strategic.size != self.current.size:
            raise ValueError("strategic and current portfolios differ in length")
        for name in ("rho1_strategic", "rho2_strategic",
                     "rho1_turnover", "rho2_turnover"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.objective not in ("tracking_error", "mvo"):
            raise ValueError(f"unknown objective {self.objective!r}")
        for label, w in (("strategic", self.strategic), ("current", self.current)):
            if np.abs(w).max() == 0.0:
                continue  # all-zero anchor: penalize the weights themselves
            if abs(w.sum() - 1.0) > 1e-8 or (w < -1e-12).any():
                raise ValueError(f"{label} portfolio must lie on the simplex")
        if self.constraints is None:
            n = self.strategic.size
            self.constraints = ConstraintSet(budget=1.0, lower=np.zeros(n),
                                             upper=np.ones(n))

    @property
    def n(self) -> int:
        return self.strategic.size


def _quadratic_parts(config: RoboConfig, mu, sigma, gamma):
    """P and q of the smooth part: objective plus both L2 penalty blocks."""
    n = config.n
    mu = np.asarray(mu, dtype=float).ravel()
    sigma = np.asarray(sigma, dtype=float)
    g2s = _matrix_or_identity(config.gamma2_strategic, n)
    g2t = _matrix_or_identity(config.gamma2_turnover, n)
    p_mat = sigma + config.rho2_strategic * g2s.T @ g2s \
        + config.rho2_turnover * g2t.T @ g2t
    q_vec = gamma * mu
    if config.objective == "tracking_error":
        q_vec = q_vec + sigma @ config.strategic
    q_vec = q_vec + config.rho2_strategic * (g2s.T @ (g2s @ config.strategic))
    q_vec = q_vec + config.rho2_turnover * (g2t.T @ (g2t @ config.current))
    return p_mat, q_vec


def _full_objective(config: RoboConfig, mu, sigma, gamma, x):
    """Value of the complete penalized objective at ``x``."""
    n = config.n
    mu = np.asarray(mu, dtype=float).ravel()
    if config.objective == "tracking_error":
        d = x - config.strategic
        val = 0.5 * d @ sigma @ d - gamma * d @ mu
    else:
        val = 0.5 * x @ sigma @ x - gamma * x @ mu
    g1s = _matrix_or_identity(config.gamma1_strategic, n)
    g1t = _matrix_or_identity(config.gamma1_turnover, n)
    g2s = _matrix_or_identity(config.gamma2_strategic, n)
    g2t = _matrix_or_identity(config.gamma2_turnover, n)
    val += config.rho1_strategic * np.abs(g1s @ (x - config.strategic)).sum()
    val += config.rho1_turnover * np.abs(g1t @ (x - config.current)).sum()
    val += 0.5 * config.rho2_strategic * np.sum((g2s @ (x - config.strategic)) ** 2)
    val += 0.5 * config.rho2_turnover * np.sum((g2t @ (x - config.current)) ** 2)
    return float(val)


def rebalance(config: RoboConfig, mu, sigma, gamma: float | None = None,
              warm=None) -> SolveReport:
    """Solve the full rebalancing problem for the next-period weights.

    Both L1 blocks are split off through one stacked coupling so a single
    ADMM run handles them; with no L1 terms the problem is a plain QP and
    is solved directly.
    """
    gamma = config.gamma if gamma is None else gamma
    if gamma is None:
        if config.te_target is not None:
            gamma = te_target_to_gamma(config, mu, sigma, config.te_target)
        else:
            gamma = 0.0
    sigma = np.asarray(sigma, dtype=float)
    p_mat, q_vec = _quadratic_parts(config, mu, sigma, gamma)
    n = config.n
    eq, sets = _constraint_sets(config.constraints, config.extra_sets)

    blocks = []
    if config.rho1_strategic > 0:
        g1s = _matrix_or_identity(config.gamma1_strategic, n)
        rho = config.rho1_strategic
        blocks.append((g1s, g1s @ config.strategic,
                       lambda v, phi, r=rho: prox.prox_l1(v, r / phi)))
    if config.rho1_turnover > 0:
        g1t = _matrix_or_identity(config.gamma1_turnover, n)
        rho = config.rho1_turnover
        blocks.append((g1t, g1t @ config.current,
                       lambda v, phi, r=rho: prox.prox_l1(v, r / phi)))

    if not blocks and not config.extra_sets:
        eq_qp, ineq, lower, upper = config.constraints.qp_pieces(n)
        report = solve_qp(QpProblem(Q=p_mat, c=-q_vec, eq=eq_qp, ineq=ineq,
                                    lower=lower, upper=upper))
        report.gamma = float(gamma)
        report.objective = _full_objective(config, mu, sigma, gamma, report.weights)
        return report

    if sets:
        blocks.append((np.eye(n), np.zeros(n),
                       lambda v, _phi: prox.project_intersection(v, sets)))

    report = _solve_stacked(
        p_mat, q_vec, eq, blocks, config.admm, warm=warm,
        x_init=config.current if warm is None else None,
        objective=lambda x: _full_objective(config, mu, sigma, gamma, x))
    report.gamma = float(gamma)
    return report


def tracking_error(x, strategic, sigma) -> float:
    d = np.asarray(x, float) - np.asarray(strategic, float)
    return float(np.sqrt(max(d @ np.asarray(sigma, float) @ d, 0.0)))


def te_target_to_gamma(config: RoboConfig, mu, sigma, te_target: float,
                       tol: float = _TE_TOL) -> float:
    """Trade-off parameter whose solution attains the tracking-error target.

    The tracking error is nondecreasing in the trade-off, so the target is
    bracketed by doubling and bisected.
    """
    if te_target < 0:
        raise TargetUnreachable("tracking-error target must be nonnegative")
    base = replace(config, te_target=None)

    def te_of(gamma):
        rep = rebalance(base, mu, sigma, gamma=gamma)
        return tracking_error(rep.weights, config.strategic, sigma)

    te0 = te_of(0.0)
    if te_target <= te0 + tol:
        return 0.0
    lo, hi = 0.0, 1.0
    te_hi = te_of(hi)
    while te_hi < te_target:
        hi *= 2.0
        if hi > _GAMMA_CAP:
            raise TargetUnreachable(
                f"tracking error saturates at {te_hi:.6f} below target {te_target}")
        te_hi = te_of(hi)
    gamma = hi
    for _ in range(100):
        value = te_of(gamma)
        if abs(value - te_target) <= tol:
            return float(gamma)
        if value < te_target:
            lo = gamma
        else:
            hi = gamma
        gamma = 0.5 * (lo + hi)
    raise TargetUnreachable("bisection did not reach the tracking-error tolerance")


@dataclass
class PathTable:
    """Solutions along a penalty grid, one row per grid value."""

    param: str
    values: np.ndarray
    weights: np.ndarray          # grid x n
    objective: np.ndarray
    status: list
    assets: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        names = self.assets or [f"A{i + 1}" for i in range(self.weights.shape[1])]
        tmp_fd, tmp_path = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                                            suffix=".tmp")
        try:
            with os.fdopen(tmp_fd, "w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["param"] + names + ["objective", "status"])
                for i, value in enumerate(self.values):
                    row = [repr(float(value))]
                    row += [repr(float(w)) for w in self.weights[i]]
                    row += [repr(float(self.objective[i])), self.status[i]]
                    writer.writerow(row)
            os.replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)
            raise


_PATH_PARAMS = {
    "rho1": "rho1_strategic",
    "rho2": "rho2_strategic",
    "rho1_strategic": "rho1_strategic",
    "rho2_strategic": "rho2_strategic",
    "rho1_turnover": "rho1_turnover",
    "rho2_turnover": "rho2_turnover",
}


def regularization_path(config: RoboConfig, mu, sigma, grid,
                        param: str = "rho1", assets=None) -> PathTable:
    """Re-solve along a sorted penalty grid, warm-starting each point from
    the previous solution; per-point failures are recorded in the row and
    the sweep continues."""
    if param not in _PATH_PARAMS:
        raise ValueError(f"unknown path parameter {param!r}")
    attr = _PATH_PARAMS[param]
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be nonempty and sorted ascending")
    n = config.n
    weights = np.full((grid.size, n), np.nan)
    objective = np.full(grid.size, np.nan)
    status = []
    warm = None
    for i, value in enumerate(grid):
        point = replace(config, **{attr: float(value)})
        try:
            rep = rebalance(point, mu, sigma, warm=warm)
            weights[i] = rep.weights
            objective[i] = rep.objective
            status.append(rep.status)
            warm = rep.meta.get("state") if rep.converged else None
        except Exception as exc:  # keep sweeping; the row records the failure
            status.append(f"error:{type(exc).__name__}")
            warm = None
    return PathTable(param=param, values=grid, weights=weights,
                     objective=objective, status=status,
                     assets=list(assets) if assets else [])
