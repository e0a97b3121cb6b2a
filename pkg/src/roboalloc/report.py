"""Common result container returned by the solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CONVERGED = "converged"
MAX_ITER = "max_iter"
DIVERGED = "diverged"


@dataclass
class SolveReport:
    """Outcome of one optimization run.

    ``duals`` holds per-constraint Lagrange multipliers keyed by
    ``eq`` / ``ineq`` / ``lower`` / ``upper`` when the solve path
    produces them, ``None`` otherwise.  ``meta`` carries diagnostics
    (warm-start state, calibration history, restart reports) and is
    not serialized.
    """

    weights: np.ndarray
    objective: float
    status: str = CONVERGED
    iterations: int = 0
    gamma: float | None = None
    duals: dict | None = None
    r_norm: float | None = None
    s_norm: float | None = None
    meta: dict = field(default_factory=dict, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self) -> dict:
        duals = None
        if self.duals is not None:
            duals = {k: np.asarray(v).tolist() for k, v in self.duals.items()}
        out = {
            "weights": np.asarray(self.weights).tolist(),
            "gamma": self.gamma,
            "objective": float(self.objective),
            "duals": duals,
            "status": self.status,
            "iterations": int(self.iterations),
        }
        if self.r_norm is not None:
            out["residuals"] = {"primal": float(self.r_norm), "dual": float(self.s_norm)}
        return out
