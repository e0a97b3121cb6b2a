"""Mean-variance problems: risk/return trade-off solves, target calibration,
implied returns, hedging-portfolio decomposition and constraint-implied
covariance shrinkage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidCorrelation,
    MissingDuals,
    PerfectCollinearity,
    SingularCovariance,
    TargetUnreachable,
    ZeroVolatilityPortfolio,
)
from .market_data import clip_psd
from .qp import QpProblem, solve_qp
from .report import CONVERGED, SolveReport

_CAL_TOL = 1e-6
_GAMMA_CAP = 1e6


@dataclass
class MvoInputs:
    mu: np.ndarray
    sigma: np.ndarray
    r: float = 0.0

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float).ravel()
        self.sigma = clip_psd(np.asarray(self.sigma, dtype=float))
        if self.sigma.shape != (self.mu.size, self.mu.size):
            raise ValueError("mu and sigma dimensions disagree")

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def excess(self) -> np.ndarray:
        return self.mu - self.r


@dataclass
class ConstraintSet:
    """Budget, bounds and general linear restrictions on the weights."""

    budget: float | None = None
    lower: np.ndarray | float | None = None
    upper: np.ndarray | float | None = None
    eq: tuple | None = None      # (A, b): A x = b
    ineq: tuple | None = None    # (A, b): A x >= b

    def is_empty(self) -> bool:
        return all(v is None for v in (self.budget, self.lower, self.upper,
                                       self.eq, self.ineq))

    def qp_pieces(self, n: int):
        """Assemble (eq, ineq, lower, upper) blocks for the QP solver."""
        eq_rows, eq_rhs = [], []
        if self.budget is not None:
            eq_rows.append(np.ones((1, n)))
            eq_rhs.append(np.array([float(self.budget)]))
        if self.eq is not None:
            a, b = self.eq
            eq_rows.append(np.atleast_2d(np.asarray(a, float)))
            eq_rhs.append(np.asarray(b, float).ravel())
        eq = (np.vstack(eq_rows), np.concatenate(eq_rhs)) if eq_rows else None
        ineq = None
        if self.ineq is not None:
            a, b = self.ineq
            ineq = (np.atleast_2d(np.asarray(a, float)), np.asarray(b, float).ravel())
        return eq, ineq, self.lower, self.upper


@dataclass
class StevensReport:
    """Per-asset hedging regression quantities and the implied optimal weights."""

    alpha: np.ndarray
    beta: np.ndarray        # row i: coefficients on the other assets, in index order
    r2: np.ndarray
    s: np.ndarray           # residual (idiosyncratic) volatility
    mu_hat: np.ndarray
    sigma_hat: np.ndarray
    omega: np.ndarray
    y_star: np.ndarray
    z_star: np.ndarray
    x_star: np.ndarray
    gamma: float
    assets: list = field(default_factory=list)


def _solve_spd(sigma: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    lam = np.linalg.eigvalsh(sigma)
    if lam.min() < 1e-12 * max(lam.max(), 1e-300):
        raise SingularCovariance(
            f"covariance nearly singular (eig ratio {lam.min():.2e}/{lam.max():.2e})"
        )
    return np.linalg.solve(sigma, rhs)


def solve_gamma_problem(inputs: MvoInputs, gamma: float,
                        constraints: ConstraintSet | None = None) -> SolveReport:
    """Minimize ``0.5 x'Sx - gamma x'(mu - r 1)`` over the constraint set.

    Without constraints the closed form ``gamma S^-1 (mu - r 1)`` is used;
    otherwise the QP solver carries the constraints and returns multipliers.
    """
    if not np.isfinite(gamma):
        raise ValueError("gamma must be finite")
    if constraints is None or constraints.is_empty():
        x = gamma * _solve_spd(inputs.sigma, inputs.excess)
        obj = 0.5 * x @ inputs.sigma @ x - gamma * x @ inputs.excess
        return SolveReport(weights=x, objective=float(obj), status=CONVERGED,
                           iterations=0, gamma=float(gamma))
    eq, ineq, lower, upper = constraints.qp_pieces(inputs.n)
    problem = QpProblem(Q=inputs.sigma, c=-gamma * inputs.excess,
                        eq=eq, ineq=ineq, lower=lower, upper=upper)
    report = solve_qp(problem)
    report.gamma = float(gamma)
    return report


def _portfolio_stats(x: np.ndarray, inputs: MvoInputs):
    vol = float(np.sqrt(max(x @ inputs.sigma @ x, 0.0)))
    ret = float(x @ inputs.mu)
    return ret, vol


def calibrate_gamma(inputs: MvoInputs, constraints: ConstraintSet | None = None, *,
                    target_return: float | None = None,
                    target_vol: float | None = None,
                    tol: float = _CAL_TOL):
    """Find the trade-off parameter hitting a return or volatility target.

    Closed forms cover the unconstrained case; otherwise the target is
    bracketed by doubling and bisected, which is justified because the
    attained return and volatility are nondecreasing in the trade-off.
    Returns ``(gamma, report)``; the bisection samples are recorded in
    ``report.meta['calibration']``.
    """
    if (target_return is None) == (target_vol is None):
        raise ValueError("specify exactly one of target_return / target_vol")
    metric_idx, target = (0, target_return) if target_vol is None else (1, target_vol)

    if constraints is None or constraints.is_empty():
        w = _solve_spd(inputs.sigma, inputs.excess)
        if target_vol is not None:
            gamma = target_vol / float(np.sqrt(inputs.excess @ w))
        else:
            denom = float(inputs.mu @ w)
            if denom <= 0:
                raise TargetUnreachable("expected return not increasing in gamma")
            gamma = target_return / denom
        report = solve_gamma_problem(inputs, gamma)
        return gamma, report

    history = []

    def metric(gam: float):
        rep = solve_gamma_problem(inputs, gam, constraints)
        value = _portfolio_stats(rep.weights, inputs)[metric_idx]
        history.append((gam, value))
        return value, rep

    val_lo, rep_lo = metric(0.0)
    if val_lo >= target - tol:
        if val_lo > target + tol and target_vol is not None:
            raise TargetUnreachable(
                f"volatility target {target} below minimum attainable {val_lo:.6f}")
        rep_lo.meta["calibration"] = history
        rep_lo.gamma = 0.0
        return 0.0, rep_lo
    hi = 1.0
    val_hi, rep_hi = metric(hi)
    while val_hi < target:
        hi *= 2.0
        if hi > _GAMMA_CAP:
            raise TargetUnreachable(f"target not bracketed up to gamma={_GAMMA_CAP:.0e}")
        val_hi, rep_hi = metric(hi)
    lo = 0.0
    gam, val, rep = hi, val_hi, rep_hi
    for _ in range(200):
        if abs(val - target) <= tol:
            break
        gam = 0.5 * (lo + hi)
        val, rep = metric(gam)
        if val < target:
            lo = gam
        else:
            hi = gam
    else:
        raise TargetUnreachable("bisection did not reach the target tolerance")
    rep.meta["calibration"] = history
    rep.gamma = float(gam)
    return float(gam), rep


def max_sharpe_bound(inputs: MvoInputs) -> float:
    """Upper bound on any portfolio's Sharpe ratio, ``sqrt(e' S^-1 e)``."""
    e = inputs.excess
    return float(np.sqrt(e @ _solve_spd(inputs.sigma, e)))


def sharpe_ratio(x: np.ndarray, inputs: MvoInputs) -> float:
    ret, vol = _portfolio_stats(np.asarray(x, float), inputs)
    return (ret - inputs.r) / vol


def implied_returns(x0: np.ndarray, sigma: np.ndarray, r: float,
                    sharpe: float) -> np.ndarray:
    """Expected returns that make ``x0`` optimal, scaled to a given Sharpe ratio."""
    x0 = np.asarray(x0, dtype=float).ravel()
    sigma = np.asarray(sigma, dtype=float)
    variance = float(x0 @ sigma @ x0)
    if variance <= 0.0:
        raise ZeroVolatilityPortfolio("reference portfolio has zero variance")
    return r + sharpe * (sigma @ x0) / np.sqrt(variance)


def stevens_decomposition(inputs: MvoInputs, gamma: float,
                          assets: list | None = None) -> StevensReport:
    """Express the unconstrained optimum through per-asset hedging regressions.

    Asset ``i`` is regressed on the other assets; the optimal weight is
    ``gamma * alpha_i / s_i^2`` where ``alpha_i`` is the return the hedge
    cannot replicate and ``s_i`` the residual volatility.
    """
    mu, sigma = inputs.mu, inputs.sigma
    n = inputs.n
    lam = np.linalg.eigvalsh(sigma)
    if lam.min() < 1e-12 * max(lam.max(), 1e-300):
        raise SingularCovariance("covariance not invertible")
    alpha = np.zeros(n)
    beta = np.zeros((n, max(n - 1, 0)))
    r2 = np.zeros(n)
    s = np.zeros(n)
    mu_hat = np.zeros(n)
    for i in range(n):
        idx = [j for j in range(n) if j != i]
        sxx = sigma[np.ix_(idx, idx)]
        sxy = sigma[idx, i]
        b = np.linalg.solve(sxx, sxy)
        r2_i = float(b @ sxy / sigma[i, i])
        if r2_i >= 1.0 - 1e-10:
            raise PerfectCollinearity(f"asset {i} is replicated by the others (R2={r2_i:.12f})")
        beta[i] = b
        mu_hat[i] = b @ mu[idx]
        alpha[i] = mu[i] - mu_hat[i]
        r2[i] = r2_i
        s[i] = np.sqrt(sigma[i, i] * (1.0 - r2_i))
    diag = np.diag(sigma)
    sigma_hat = np.sqrt(diag * r2)
    omega = r2 / (1.0 - r2)
    y_star = gamma * mu / diag
    hedge_var = diag - s ** 2
    z_star = np.where(hedge_var > 1e-300, gamma * mu_hat / np.where(hedge_var > 0, hedge_var, 1.0), 0.0)
    x_star = gamma * alpha / s ** 2
    return StevensReport(alpha=alpha, beta=beta, r2=r2, s=s, mu_hat=mu_hat,
                         sigma_hat=sigma_hat, omega=omega, y_star=y_star,
                         z_star=z_star, x_star=x_star, gamma=float(gamma),
                         assets=assets or [f"A{i + 1}" for i in range(n)])


def constant_correlation_r2(n: int, rho: float) -> float:
    """Hedging R2 in an ``n``-asset universe with uniform correlation.

    With ``k = n - 1`` regressors the coefficient of determination is
    ``k rho^2 / (k rho - (rho - 1))``.
    """
    if n < 2:
        raise InvalidCorrelation("need at least two assets")
    if not -1.0 / (n - 1) < rho < 1.0:
        raise InvalidCorrelation(f"uniform correlation {rho} invalid for n={n}")
    k = n - 1
    return float(k * rho ** 2 / (k * rho - (rho - 1.0)))


def jagannathan_ma_shrinkage(sigma: np.ndarray, constraints: ConstraintSet,
                             solution: SolveReport):
    """Covariance implied by binding weight constraints.

    The bound and inequality multipliers of a constrained solve are folded
    into the covariance so that dropping those constraints (keeping budget
    and any return target) reproduces the constrained optimum.  Returns
    ``(sigma_tilde, vol_tilde, corr_tilde)``.
    """
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    if solution.duals is None:
        raise MissingDuals("solution does not carry constraint multipliers")
    duals = solution.duals
    delta = np.asarray(duals.get("upper", np.zeros(n)), float) - \
        np.asarray(duals.get("lower", np.zeros(n)), float)
    ones = np.ones(n)
    sigma_tilde = sigma + np.outer(delta, ones) + np.outer(ones, delta)
    lam_ineq = np.asarray(duals.get("ineq", np.zeros(0)), float)
    if lam_ineq.size and constraints.ineq is not None:
        a = np.atleast_2d(np.asarray(constraints.ineq[0], float))
        v = a.T @ lam_ineq
        sigma_tilde = sigma_tilde - (np.outer(v, ones) + np.outer(ones, v))
    vol_tilde = np.sqrt(np.clip(np.diag(sigma_tilde), 0.0, None))
    denom = np.outer(vol_tilde, vol_tilde)
    corr_tilde = np.divide(sigma_tilde, denom, out=np.eye(n), where=denom > 0)
    np.fill_diagonal(corr_tilde, 1.0)
    return sigma_tilde, vol_tilde, corr_tilde


def te_transform(mu: np.ndarray, sigma: np.ndarray, benchmark: np.ndarray,
                 gamma: float) -> MvoInputs:
    """Fold a tracking-error objective into adjusted expected returns.

    ``0.5 (x-b)'S(x-b) - gamma (x-b)'mu`` equals, up to a constant,
    ``0.5 x'Sx - gamma x'(mu + S b / gamma)``.
    """
    if gamma == 0:
        raise ValueError("gamma must be nonzero to rescale the benchmark term")
    mu = np.asarray(mu, dtype=float).ravel()
    benchmark = np.asarray(benchmark, dtype=float).ravel()
    if benchmark.size != mu.size:
        raise ValueError("benchmark length does not match mu")
    sigma = np.asarray(sigma, dtype=float)
    return MvoInputs(mu=mu + (sigma @ benchmark) / gamma, sigma=sigma)
