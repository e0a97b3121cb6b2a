"""Hyperparameter selection for the quadratic penalty (leave-one-out closed
form, generalized cross-validation, k-fold) and tracking-error level rules."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import GridEmpty, InputError, LeverageSingularity, SingularGamma

_LEVERAGE_TOL = 1e-12


@dataclass
class RidgeRegressionData:
    """Design matrix, response and penalty matrix for ridge-style fits."""

    x: np.ndarray
    y: np.ndarray
    gamma2: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        t, k = self.x.shape
        if self.y.size != t:
            raise InputError("response length does not match the design matrix")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise InputError("non-finite entries in regression data")
        if self.gamma2 is None:
            self.gamma2 = np.eye(k)
        else:
            self.gamma2 = np.atleast_2d(np.asarray(self.gamma2, dtype=float))
            if self.gamma2.shape != (k, k):
                raise InputError("gamma2 must be K x K")
        if t <= k:
            warnings.warn(f"T={t} <= K={k}: fit is weakly determined", stacklevel=2)

    @property
    def penalty_gram(self) -> np.ndarray:
        return self.gamma2 @ self.gamma2.T


def _smoother(data: RidgeRegressionData, rho2: float) -> np.ndarray:
    return np.linalg.inv(data.x.T @ data.x + rho2 * data.penalty_gram)


def ridge_fit(data: RidgeRegressionData, rho2: float) -> np.ndarray:
    return _smoother(data, rho2) @ data.x.T @ data.y


def press(data: RidgeRegressionData, rho2: float) -> float:
    """Leave-one-out squared prediction error without refitting.

    Each term divides the in-sample residual by one minus the observation's
    leverage; refitting with the observation removed gives exactly the same
    number.
    """
    s = _smoother(data, rho2)
    beta = s @ data.x.T @ data.y
    leverage = np.einsum("ti,ij,tj->t", data.x, s, data.x)
    denom = 1.0 - leverage
    if denom.min() <= _LEVERAGE_TOL:
        raise LeverageSingularity(f"leverage reaches {leverage.max():.12f}")
    resid = data.y - data.x @ beta
    return float(np.sum((resid / denom) ** 2))


def gcv(data: RidgeRegressionData, rho2: float) -> float:
    """Rotation-invariant leave-one-out surrogate.

    The smoother trace is computed from the eigenvalues of
    ``X (Gamma2 Gamma2')^-1 X'``, which prices the whole penalty grid from
    one decomposition.
    """
    t = data.x.shape[0]
    resid = data.y - data.x @ ridge_fit(data, rho2)
    rss = float(resid @ resid)
    if rho2 > 0:
        try:
            inner = np.linalg.solve(data.penalty_gram, data.x.T)
        except np.linalg.LinAlgError as exc:
            raise SingularGamma("penalty matrix is singular") from exc
        lam = np.linalg.eigvalsh(data.x @ inner)
        trace = float(np.sum(1.0 / (1.0 + lam / rho2)))
    else:
        s = _smoother(data, 0.0)
        trace = float(np.trace(np.eye(t) - data.x @ s @ data.x.T))
    if trace <= 0:
        raise SingularGamma("projection trace is not positive")
    return t ** 2 * rss / trace ** 2


def kfold_cv(data: RidgeRegressionData, k: int, grid, shuffle_seed: int = 0):
    """Shuffled k-fold validation error over a penalty grid.

    Returns ``(best_rho2, error_curve)`` where the curve aligns with the
    given grid and ties resolve to the smallest penalty.
    """
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0:
        raise GridEmpty("penalty grid is empty")
    t = data.x.shape[0]
    if not 2 <= k <= t:
        raise InputError(f"k must be in [2, {t}]")
    rng = np.random.default_rng(shuffle_seed)
    order = rng.permutation(t)
    groups = np.array_split(order, k)
    errors = np.zeros(grid.size)
    for j, test_idx in enumerate(groups):
        mask = np.ones(t, dtype=bool)
        mask[test_idx] = False
        x_tr, y_tr = data.x[mask], data.y[mask]
        x_te, y_te = data.x[test_idx], data.y[test_idx]
        xtx = x_tr.T @ x_tr
        xty = x_tr.T @ y_tr
        for g_idx, rho2 in enumerate(grid):
            beta = np.linalg.solve(xtx + rho2 * data.penalty_gram, xty)
            errors[g_idx] += float(np.sum((y_te - x_te @ beta) ** 2))
    errors /= t
    best_value = errors.min()
    best_rho2 = float(grid[np.isclose(errors, best_value)].min())
    return best_rho2, errors


def make_grid(scale: str, start: float, stop: float, points: int) -> np.ndarray:
    """Penalty grid helper: ``log`` spaces geometrically, ``linear`` evenly."""
    if points < 1:
        raise GridEmpty("grid needs at least one point")
    if scale == "log":
        if start <= 0 or stop <= 0:
            raise InputError("log grid needs positive endpoints")
        return np.geomspace(start, stop, points)
    if scale == "linear":
        return np.linspace(start, stop, points)
    raise InputError(f"unknown grid scale {scale!r}")


# --- tracking-error level rules ------------------------------------------------


def max_te_from_vol(sigma_benchmark: float, correlation: float) -> float:
    """Tracking-error level implied by a correlation to the benchmark,
    assuming the portfolio's volatility is close to the benchmark's."""
    if not -1.0 <= correlation <= 1.0:
        raise InputError("correlation must lie in [-1, 1]")
    return float(np.sqrt(2.0 * (1.0 - correlation)) * sigma_benchmark)


@dataclass
class ScoreSet:
    """Integer conviction grades plus the scaling of the tracking-error rule."""

    scores: np.ndarray
    sigma_plus: float
    c: float = 1.0 / 3.0
    n_s: int = 3

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float).ravel()
        if self.scores.size < 2:
            raise InputError("need at least two scores")
        if np.any(np.abs(self.scores - np.round(self.scores)) > 1e-12):
            raise InputError("scores must be integers")
        if np.any(np.abs(self.scores) > self.n_s):
            raise InputError(f"scores must lie in [-{self.n_s}, {self.n_s}]")
        if self.sigma_plus < 0:
            raise InputError("sigma_plus must be nonnegative")


def mean_absolute_difference(scores: np.ndarray) -> float:
    """Gini mean difference over all ordered pairs, self-pairs included
    (divide by n^2).  Other conventions rescale this by constants."""
    s = np.asarray(scores, dtype=float)
    return float(np.abs(s[:, None] - s[None, :]).mean())


def te_level_rule(scores: ScoreSet) -> float:
    """Dispersion-driven tracking-error target.

    Averages the population standard deviation and the mean absolute
    difference of the grades, scaled by ``c`` and the maximum tracking
    error.  Zero dispersion gives exactly zero.
    """
    s = scores.scores
    std = float(np.std(s))  # population convention
    mad = mean_absolute_difference(s)
    return scores.c * 0.5 * (std + mad) * scores.sigma_plus
