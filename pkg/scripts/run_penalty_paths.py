"""Sweep the smoothing and sparsity penalties on a four-asset book and write
the weight paths to CSV.

Run:  python3 scripts/run_penalty_paths.py [outdir]
"""

import sys

import numpy as np

from roboalloc.mvo import ConstraintSet
from roboalloc.pipeline import RoboConfig, regularization_path


def universe():
    mu = np.array([0.04, 0.05, 0.09, 0.10])
    vols = np.array([0.15, 0.18, 0.20, 0.25])
    corr = np.array([
        [1.00, 0.70, 0.10, -0.20],
        [0.70, 1.00, 0.10, -0.20],
        [0.10, 0.10, 1.00, -0.70],
        [-0.20, -0.20, -0.70, 1.00],
    ])
    return mu, np.outer(vols, vols) * corr


def main(outdir="."):
    mu, sigma = universe()
    anchor = np.array([0.4, 0.3, 0.2, 0.1])
    assets = ["A1", "A2", "A3", "A4"]
    budget = ConstraintSet(budget=1.0)

    sweeps = {
        "ridge_anchored": ("rho2", RoboConfig(
            strategic=anchor, current=anchor, objective="mvo", gamma=0.25,
            constraints=budget), np.geomspace(1e-6, 1e3, 41)),
        "ridge_unanchored": ("rho2", RoboConfig(
            strategic=np.zeros(4), current=np.zeros(4), objective="mvo",
            gamma=0.25, constraints=budget), np.geomspace(1e-6, 1e3, 41)),
        "lasso_anchored": ("rho1", RoboConfig(
            strategic=anchor, current=anchor, objective="mvo", gamma=0.25,
            constraints=budget), np.geomspace(1e-6, 1e0, 41)),
        "lasso_unanchored": ("rho1", RoboConfig(
            strategic=np.zeros(4), current=np.zeros(4), objective="mvo",
            gamma=0.25, constraints=budget), np.geomspace(1e-6, 1e0, 41)),
        "elastic_net": ("rho1", RoboConfig(
            strategic=anchor, current=anchor, objective="mvo", gamma=0.25,
            rho2_strategic=0.01, constraints=budget), np.geomspace(1e-6, 1e0, 41)),
    }
    for name, (param, config, grid) in sweeps.items():
        table = regularization_path(config, mu, sigma, grid, param=param,
                                    assets=assets)
        path = f"{outdir}/{name}.csv"
        table.to_csv(path)
        end = np.round(100 * table.weights[-1], 2)
        print(f"{name:>18}: wrote {path}; endpoint weights % = {end}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else ".")
