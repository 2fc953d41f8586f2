"""Brute-force reference implementations used only by the tests.

They share no code with the package: the profile oracle solves the inner
empirical likelihood by bisection on its single multiplier, the constrained
oracle solves the inner problem with cvxpy, and both search over ``theta`` by
a grid followed by Nelder-Mead polishing.  Instances are two occasions with the
linear basis ``q(y) = (1, y)``, so ``theta_1 = (a, b)``.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize


def _inner_profile(g: np.ndarray) -> np.ndarray:
    """max sum log p  s.t.  sum p = 1, sum p g = 0, rows of ``g`` vectorised.

    Returns the maximum (``-inf`` where infeasible).  The optimum is
    ``p_i = 1 / (N (1 + lam g_i))`` with ``sum g_i / (1 + lam g_i) = 0``;
    ``lam`` is found by bisection on the interval keeping every ``1 + lam g_i``
    positive.
    """
    G = np.atleast_2d(g)
    P, N = G.shape
    gmax, gmin = G.max(axis=1), G.min(axis=1)
    feasible = (gmax > 0) & (gmin < 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(feasible, -1.0 / gmax, 0.0)
        hi = np.where(feasible, -1.0 / gmin, 0.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = np.sum(G / (1.0 + mid[:, None] * G), axis=1)
        # f is decreasing in lam
        lo = np.where(f > 0, mid, lo)
        hi = np.where(f > 0, hi, mid)
    lam = 0.5 * (lo + hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -np.sum(np.log(N * (1.0 + lam[:, None] * G)), axis=1)
    return np.where(feasible, val, -np.inf)


def profile_objective(theta, y0, y1):
    """Profile composite log EL at ``theta = (a, b)`` (array of shape (P, 2) allowed)."""
    th = np.atleast_2d(theta)
    y = np.r_[y0, y1]
    h = np.exp(th[:, :1] + th[:, 1:2] * y[None, :])
    inner = _inner_profile(h - 1.0)
    return inner + len(y1) * th[:, 0] + th[:, 1] * np.sum(y1)


def profile_oracle(y0, y1, *, box=5.0, coarse=0.1, fine=0.01):
    """Grid search on ``[-box, box]^2`` (coarse, then a fine window) plus Nelder-Mead."""
    ax = np.arange(-box, box + coarse / 2, coarse)
    A, B = np.meshgrid(ax, ax, indexing="ij")
    grid = np.column_stack([A.ravel(), B.ravel()])
    vals = profile_objective(grid, y0, y1)
    best = grid[np.argmax(vals)]
    ax2 = np.arange(-10 * fine, 10 * fine + fine / 2, fine)
    A2, B2 = np.meshgrid(best[0] + ax2, best[1] + ax2, indexing="ij")
    grid2 = np.column_stack([A2.ravel(), B2.ravel()])
    vals2 = profile_objective(grid2, y0, y1)
    best = grid2[np.argmax(vals2)]
    res = minimize(
        lambda t: -profile_objective(t, y0, y1)[0],
        best,
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000},
    )
    return float(-res.fun), res.x


def _inner_constrained(theta, y, xi, level):
    import cvxpy as cp

    a, b = theta
    h = np.exp(a + b * y)
    ind = (y <= xi).astype(float)
    p = cp.Variable(y.size)
    cons = [cp.sum(p) == 1, h @ p == 1, ind @ p == level, (h * ind) @ p == level]
    prob = cp.Problem(cp.Maximize(cp.sum(cp.log(p))), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.SolverError:
        return -np.inf
    if prob.status not in ("optimal", "optimal_inaccurate") or prob.value is None:
        return -np.inf
    return float(prob.value)


def constrained_objective(theta, y0, y1, xi, level):
    y = np.r_[y0, y1]
    inner = _inner_constrained(theta, y, xi, level)
    return inner + len(y1) * theta[0] + theta[1] * np.sum(y1)


def constrained_oracle(y0, y1, xi, level, *, start, box=5.0, step=0.5):
    """Coarse grid over ``[-box, box]^2`` plus ``start``, then Nelder-Mead."""
    ax = np.arange(-box, box + step / 2, step)
    cands = [np.asarray(start, dtype=float)] + [np.array([a, b]) for a in ax for b in ax]
    vals = [constrained_objective(c, y0, y1, xi, level) for c in cands]
    order = np.argsort(vals)[::-1][:3]
    best_val, best_x = -np.inf, None
    for i in order:
        if not np.isfinite(vals[i]):
            continue
        res = minimize(
            lambda t: -constrained_objective(t, y0, y1, xi, level),
            cands[i],
            method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 2000},
        )
        if -res.fun > best_val:
            best_val, best_x = float(-res.fun), res.x
    return best_val, best_x


def wilcoxon_double_loop(x0, x1) -> float:
    total = 0.0
    for b in x1:
        for a in x0:
            total += 1.0 if b > a else 0.5 if b == a else 0.0
    return total
