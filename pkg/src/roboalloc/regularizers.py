"""Quadratic-penalty closed forms, shrinkage maps and spectral filters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AllSingularValuesFiltered,
    NotPositiveDefinite,
    SingularKKT,
)
from .qp import QpProblem, solve_qp
from .report import CONVERGED, SolveReport

_RANK_CUTOFF = 1e-12  # singular values below cutoff * s_max count as zero


@dataclass
class PenaltySpec:
    """One norm penalty ``rho * ||gamma (x - anchor)||``, squared for l2."""

    kind: str                       # l1 | l2 | lp
    rho: float = 0.0
    p: float | None = None
    gamma_matrix: np.ndarray | None = None
    anchor: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("l1", "l2", "lp"):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.kind == "lp":
            if self.p is None or self.p <= 0:
                raise ValueError("lp penalty needs p > 0")
        elif self.kind == "l1":
            self.p = 1.0
        elif self.kind == "l2":
            self.p = 2.0
        if self.gamma_matrix is not None:
            self.gamma_matrix = np.atleast_2d(np.asarray(self.gamma_matrix, float))
        if self.anchor is not None:
            self.anchor = np.asarray(self.anchor, dtype=float).ravel()


@dataclass(frozen=True)
class FilterSpec:
    """Singular-value filter: none, ridge smoothing, uniformly scaled ridge,
    or hard-threshold denoising."""

    kind: str = "none"             # none | ridge | diag_ridge | hard_threshold
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "ridge", "diag_ridge", "hard_threshold"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")


def _gamma_or_identity(penalty: PenaltySpec | None, n: int):
    if penalty is None or penalty.gamma_matrix is None:
        return np.eye(n)
    return penalty.gamma_matrix


def _anchor_or_zero(penalty: PenaltySpec | None, n: int):
    if penalty is None or penalty.anchor is None:
        return np.zeros(n)
    return penalty.anchor


def _kkt(block11, a2, rhs1, b2):
    n = block11.shape[0]
    if a2 is None:
        try:
            x = np.linalg.solve(block11, rhs1)
        except np.linalg.LinAlgError as exc:
            raise SingularKKT(str(exc)) from exc
        resid = np.linalg.norm(block11 @ x - rhs1, np.inf)
        if resid > 1e-10 * max(1.0, np.abs(rhs1).max()):
            raise SingularKKT(f"normal equations residual {resid:.2e}")
        return x, np.zeros(0)
    a2 = np.atleast_2d(np.asarray(a2, float))
    b2 = np.asarray(b2, float).ravel()
    m = a2.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = block11
    kkt[:n, n:] = a2.T
    kkt[n:, :n] = a2
    rhs = np.concatenate([rhs1, b2])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularKKT(str(exc)) from exc
    resid = np.linalg.norm(kkt @ sol - rhs, np.inf)
    if resid > 1e-10 * max(1.0, np.abs(rhs).max()):
        raise SingularKKT(f"block system residual {resid:.2e}")
    return sol[:n], sol[n:]


def tikhonov_solve(a1, b1, penalty: PenaltySpec, eq=None):
    """Exact solve of the quadratically penalized least-squares problem.

    Returns ``(x, lam)`` from the block system whose (1,1) block is
    ``A1'A1 + rho Gamma'Gamma`` and whose off-diagonal blocks carry the
    equality constraints.
    """
    a1 = np.atleast_2d(np.asarray(a1, float))
    b1 = np.asarray(b1, float).ravel()
    n = a1.shape[1]
    g2 = _gamma_or_identity(penalty, n)
    x0 = _anchor_or_zero(penalty, n)
    rho = float(penalty.rho)
    block = a1.T @ a1 + rho * g2.T @ g2
    rhs1 = a1.T @ b1 + rho * (g2.T @ (g2 @ x0))
    if eq is None and rho == 0.0:
        x, *_ = np.linalg.lstsq(a1, b1, rcond=None)
        return x, np.zeros(0)
    if eq is None:
        return _kkt(block, None, rhs1, None)
    return _kkt(block, eq[0], rhs1, eq[1])


def ridge_mvo(mu, sigma, gamma, rho2, x0=None, constraints=None) -> SolveReport:
    """Mean-variance solve with an added ``rho2/2 ||x - x0||^2`` term.

    Unconstrained this blends the raw optimizer with the anchor through the
    weight matrix ``(I + rho2 S^-1)^-1``; with constraints it becomes a QP on
    ``S + rho2 I`` and shifted expected returns.
    """
    mu = np.asarray(mu, dtype=float).ravel()
    sigma = np.asarray(sigma, dtype=float)
    n = mu.size
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    q_mat = sigma + rho2 * np.eye(n)
    lin = gamma * mu + rho2 * x0
    if constraints is None or constraints.is_empty():
        x = np.linalg.solve(q_mat, lin)
        obj = 0.5 * x @ sigma @ x - gamma * x @ mu + 0.5 * rho2 * np.sum((x - x0) ** 2)
        return SolveReport(weights=x, objective=float(obj), status=CONVERGED,
                           iterations=0, gamma=float(gamma))
    eq, ineq, lower, upper = constraints.qp_pieces(n)
    report = solve_qp(QpProblem(Q=q_mat, c=-lin, eq=eq, ineq=ineq,
                                lower=lower, upper=upper))
    report.gamma = float(gamma)
    report.objective = float(0.5 * report.weights @ sigma @ report.weights
                             - gamma * report.weights @ mu
                             + 0.5 * rho2 * np.sum((report.weights - x0) ** 2))
    return report


def shrunk_correlation(sigma, rho2, mode: str = "identity"):
    """Volatilities and correlations implied by quadratic shrinkage.

    ``identity`` adds ``rho2`` to every variance, damping correlations by
    the ratio of old to new volatilities; ``diag_sigma`` divides every
    off-diagonal correlation by ``1 + rho2`` and keeps volatilities.
    """
    sigma = np.asarray(sigma, dtype=float)
    var = np.diag(sigma)
    vol = np.sqrt(var)
    corr = sigma / np.outer(vol, vol)
    if mode == "identity":
        vol_new = np.sqrt(var + rho2)
        corr_new = corr * np.outer(vol, vol) / np.outer(vol_new, vol_new)
        np.fill_diagonal(corr_new, 1.0)
        return vol_new, corr_new
    if mode == "diag_sigma":
        corr_new = corr / (1.0 + rho2)
        np.fill_diagonal(corr_new, 1.0)
        return vol.copy(), corr_new
    raise ValueError(f"unknown mode {mode!r}")


def _filter_values(s: np.ndarray, filt) -> np.ndarray:
    if callable(filt):
        return np.asarray(filt(s), dtype=float)
    if filt.kind == "none":
        return 1.0 / s
    if filt.kind == "ridge":
        return s / (s ** 2 + filt.rho)
    if filt.kind == "diag_ridge":
        return 1.0 / (s * (1.0 + filt.rho))
    if filt.kind == "hard_threshold":
        return np.where(np.abs(s) >= filt.rho, 1.0 / s, 0.0)
    raise ValueError(f"unknown filter kind {filt.kind!r}")


def _pinv_comp(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    nz = v != 0
    out[nz] = 1.0 / v[nz]
    return out


def _svd_retained(a1):
    a1 = np.atleast_2d(np.asarray(a1, dtype=float))
    u, s, vt = np.linalg.svd(a1, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        raise AllSingularValuesFiltered("matrix is zero")
    keep = s > _RANK_CUTOFF * s[0]
    return u[:, keep], s[keep], vt[keep]


def _gram_spectrum(s, g, filt, rule: str):
    """Regularized squared singular values for the gram matrix."""
    g_dag = _pinv_comp(g)
    if rule == "g_dagger_sq":
        return g_dag * g_dag
    if rule == "g_of_s_sq":
        if callable(filt):
            raise ValueError("g_of_s_sq needs a named filter kind")
        return _pinv_comp(_filter_values(s * s, filt))
    if rule == "g_dagger_times_s":
        return g_dag * s
    raise ValueError(f"unknown gram rule {rule!r}")


def spectral_filter(a1, filt, gram_rule: str = "g_dagger_sq"):
    """Filtered pseudo-inverse and regularized gram matrix of ``a1``.

    The filter maps each retained singular value ``s`` to a gain ``G(s)``;
    the pseudo-inverse becomes ``V diag(G) U'`` and the gram matrix
    ``V diag(s2) V'`` with ``s2`` given by the chosen reconstruction rule
    (default: squared reciprocal gains).
    """
    u, s, vt = _svd_retained(a1)
    g = _filter_values(s, filt)
    if not np.any(g != 0):
        raise AllSingularValuesFiltered("filter removed every singular value")
    pinv_reg = (vt.T * g) @ u.T
    s2 = _gram_spectrum(s, g, filt, gram_rule)
    gram_reg = (vt.T * s2) @ vt
    return pinv_reg, gram_reg


def filtered_normal_solve(a1, b1, filt, eq=None, gram_rule: str = "g_dagger_sq"):
    """Solve the filtered normal equations, optionally with equalities.

    The (1,1) block is the regularized gram matrix and the right-hand side
    uses the componentwise reciprocal gains, so a trivial filter recovers
    the plain least-squares normal equations.
    """
    a1 = np.atleast_2d(np.asarray(a1, float))
    b1 = np.asarray(b1, float).ravel()
    u, s, vt = _svd_retained(a1)
    g = _filter_values(s, filt)
    if not np.any(g != 0):
        raise AllSingularValuesFiltered("filter removed every singular value")
    s2 = _gram_spectrum(s, g, filt, gram_rule)
    block = (vt.T * s2) @ vt
    rhs1 = vt.T @ (_pinv_comp(g) * (u.T @ b1))
    if eq is None:
        return _kkt(block, None, rhs1, None)
    return _kkt(block, eq[0], rhs1, eq[1])


def ledoit_wolf_to_tikhonov(alpha_star: float, phi_hat) -> PenaltySpec:
    """Map a convex shrinkage weight and target matrix to an L2 penalty.

    The blend ``alpha S + (1 - alpha) Phi`` corresponds, up to scale, to
    penalizing with ``rho = (1 - alpha)/alpha`` and the upper Cholesky
    factor of ``Phi``.
    """
    if not 0.0 < alpha_star <= 1.0:
        raise ValueError("alpha_star must lie in (0, 1]")
    phi_hat = np.asarray(phi_hat, dtype=float)
    try:
        lower = np.linalg.cholesky(phi_hat)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("shrinkage target is not positive definite") from exc
    gamma = lower.T  # upper factor, gamma' gamma == phi_hat
    rho = (1.0 - alpha_star) / alpha_star
    return PenaltySpec(kind="l2", rho=rho, gamma_matrix=gamma,
                       anchor=np.zeros(phi_hat.shape[0]))
