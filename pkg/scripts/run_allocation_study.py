"""Walk through the allocation engine on the built-in demo universes.

Prints eigen-diagnostics, the hedging-portfolio decomposition, sensitivity
of a volatility-targeted allocation, constraint-implied shrinkage, the
capped nine-asset allocation and the grade-blending scenarios.

Run:  python3 scripts/run_allocation_study.py
"""

import numpy as np

from roboalloc.market_data import eigen_decompose
from roboalloc.mvo import (
    ConstraintSet,
    MvoInputs,
    calibrate_gamma,
    jagannathan_ma_shrinkage,
    solve_gamma_problem,
    stevens_decomposition,
)
from roboalloc.views import grades_to_expected_returns

np.set_printoptions(precision=2, suppress=True)


def pct(x):
    return np.round(100 * np.asarray(x), 2)


def four_asset_universe():
    mu = np.array([0.07, 0.08, 0.09, 0.10])
    vols = np.array([0.15, 0.18, 0.20, 0.25])
    corr = np.array([
        [1.00, 0.50, 0.50, 0.60],
        [0.50, 1.00, 0.50, 0.50],
        [0.50, 0.50, 1.00, 0.40],
        [0.60, 0.50, 0.40, 1.00],
    ])
    return mu, np.outer(vols, vols) * corr


def nine_asset_universe():
    mu = np.array([4.2, 3.8, 5.3, 10.4, 9.2, 8.6, 5.3, 11.0, 8.8]) / 100
    vols = np.array([5.0, 5.0, 7.0, 10.0, 15.0, 15.0, 15.0, 18.0, 30.0]) / 100
    rows = [
        [100], [80, 100], [60, 40, 100], [-20, -20, 50, 100],
        [-10, -20, 30, 60, 100], [-20, -10, 20, 60, 90, 100],
        [-20, -20, 20, 50, 70, 60, 100], [-20, -20, 30, 60, 70, 70, 70, 100],
        [0, 0, 10, 20, 20, 20, 30, 30, 100],
    ]
    corr = np.zeros((9, 9))
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            corr[i, j] = corr[j, i] = v / 100
    return mu, np.outer(vols, vols) * corr


def ten_asset_universe():
    vols = np.array([9.2, 7.0, 9.4, 7.6, 10.1, 7.6, 16.1, 20.5, 24.3, 17.8]) / 100
    rows = [
        [100.0], [17.7, 100.0], [98.1, 19.4, 100.0], [16.5, 99.5, 18.1, 100.0],
        [71.1, 2.4, 76.3, 2.1, 100.0], [85.9, 12.7, 87.6, 11.8, 89.1, 100.0],
        [34.5, 0.7, 38.1, 1.3, 68.8, 57.8, 100.0],
        [-13.2, 2.8, -4.0, 3.6, 41.0, 18.2, 59.5, 100.0],
        [20.3, 2.0, 27.6, 0.8, 21.6, 25.3, 8.0, 15.6, 100.0],
        [16.6, 10.2, 26.0, 10.5, 57.2, 44.6, 54.3, 67.7, 42.9, 100.0],
    ]
    corr = np.zeros((10, 10))
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            corr[i, j] = corr[j, i] = v / 100
    return np.outer(vols, vols) * corr


def main():
    mu, sigma = four_asset_universe()
    inp = MvoInputs(mu=mu, sigma=sigma)

    print("== eigen diagnostics (four assets) ==")
    _, lam = eigen_decompose(sigma)
    print("variance shares %:", pct(lam / lam.sum()))
    _, lam_prec = eigen_decompose(np.linalg.inv(sigma))
    print("precision eigenvalues:", np.round(lam_prec, 2))

    print("\n== volatility-targeted allocation, 15% ==")
    gamma, rep = calibrate_gamma(inp, ConstraintSet(budget=1.0), target_vol=0.15)
    print(f"gamma = {gamma:.4f}  weights % = {pct(rep.weights)}")

    print("\n== hedging-portfolio decomposition ==")
    g_full = 1.0 / (np.ones(4) @ np.linalg.solve(sigma, mu))
    stv = stevens_decomposition(inp, g_full)
    print("alpha %:", pct(stv.alpha), " R2 %:", pct(stv.r2))
    print("x* %:  ", pct(stv.x_star))

    print("\n== constraint-implied covariance shrinkage ==")
    cons = ConstraintSet(budget=1.0, lower=0.10, upper=0.40)
    gmv = solve_gamma_problem(inp, 0.0, cons)
    _, vol_t, corr_t = jagannathan_ma_shrinkage(sigma, cons, gmv)
    print("boxed minimum-variance %:", pct(gmv.weights))
    print("implied volatilities %:  ", pct(vol_t))
    print("implied correlations %:\n", pct(corr_t))

    print("\n== nine-asset allocation at 7% volatility ==")
    mu9, sigma9 = nine_asset_universe()
    inp9 = MvoInputs(mu=mu9, sigma=sigma9)
    for label, cons9 in (("long-only", ConstraintSet(budget=1.0, lower=0.0)),
                         ("25% cap", ConstraintSet(budget=1.0, lower=0.0, upper=0.25))):
        _, rep9 = calibrate_gamma(inp9, cons9, target_vol=0.07)
        x = rep9.weights
        print(f"{label:>10}: {pct(x)}  mu={100 * x @ mu9:.2f}% "
              f"vol={100 * np.sqrt(x @ sigma9 @ x):.2f}%")

    print("\n== grade blending on ten asset classes ==")
    sigma10 = ten_asset_universe()
    ew = np.full(10, 0.1)
    for label, scores, tau in (
            ("bearish equities", [1, 1, 0, 0, 0, 0, -1, -1, -1, -1], 1.0),
            ("bullish equities", [0, 0, 0, 0, 0, 0, 1, 3, 1, 1], 1.0),
            ("adverse emerging", [0, 0, 0, 0, 0, -3, 0, 0, 0, -3], 0.5)):
        mu_i, mu_m, mu_b = grades_to_expected_returns(
            ew, sigma10, 0.0, 0.5, np.array(scores), tau=tau)
        print(f"{label}: blended mu % = {pct(mu_b)}")


if __name__ == "__main__":
    main()
