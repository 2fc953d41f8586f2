"""Density ratio model fitted by composite empirical likelihood.

The model links the occasion marginals by ``dG_k(y) = exp(theta_k . q(y)) dG_0(y)``
with ``theta_0 = 0``.  All observations are pooled; with ``n_s`` values on
occasion ``s`` and ``h_s(y) = exp(theta_s . q(y))`` the profile weights are

    p(y) = 1 / sum_s n_s h_s(y)

and the profile log-likelihood is ``sum log p + sum_k sum_{y in k} theta_k . q(y)``,
a concave function of ``theta`` maximised here by Newton's method.

The constrained fit adds, for the compared pair of occasions ``(a, b)``,
``sum p h_s 1(y <= xi) = alpha``.  Its Lagrangian reduces to the weights

    p(y) = 1 / sum_s n_s h_s(y) [1 + lambda_s (1(y <= xi) - alpha)]

(``lambda_s = 0`` outside the pair).  The optimum is a stationary point of

    Phi(theta, lambda) = -sum log(1 / p) + sum_{s >= 1} theta_s . S_s

with ``S_s = sum_{y in s} q(y)``.  It is found by damped Newton iteration on
``grad Phi = 0`` with the analytic Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import least_squares, linprog
from scipy.special import logsumexp

from .errors import (
    BasisDomainError,
    ConvexHullError,
    PercentileRangeError,
    ProfileFitError,
    SolverDivergedError,
)
from .panel import RotatingPanelSample
from .stats import empirical_quantile, weighted_quantile

# ---------------------------------------------------------------------------
# basis functions


def _q_normal2(y):
    return np.column_stack([np.ones_like(y), y, y * y])


def _q_gamma2(y):
    if np.any(y <= 0):
        raise BasisDomainError("basis domain error: gamma2 basis needs y > 0")
    return np.column_stack([np.ones_like(y), np.log(y), y])


def _q_general3(y):
    if np.any(y == 0):
        raise BasisDomainError("basis domain error: general3 basis needs y != 0")
    return np.column_stack([np.ones_like(y), np.log(np.abs(y)), y, y * y])


def _q_linear(y):
    return np.column_stack([np.ones_like(y), y])


_CATALOG: dict[str, tuple[Callable, int, str]] = {
    "normal2": (_q_normal2, 3, "(1, y, y^2)"),
    "gamma2": (_q_gamma2, 3, "(1, log y, y)"),
    "general3": (_q_general3, 4, "(1, log|y|, y, y^2)"),
    "linear": (_q_linear, 2, "(1, y)"),
}


@dataclass(frozen=True)
class BasisFunction:
    """A named member of the basis catalog; the first component is always 1."""

    name: str

    def __post_init__(self):
        if self.name not in _CATALOG:
            raise ValueError(f"unknown basis {self.name!r}; choose from {sorted(_CATALOG)}")

    @property
    def dim(self) -> int:
        return _CATALOG[self.name][1]

    @property
    def formula(self) -> str:
        return _CATALOG[self.name][2]

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float).ravel()
        return _CATALOG[self.name][0](y)


def as_basis(basis) -> BasisFunction:
    return basis if isinstance(basis, BasisFunction) else BasisFunction(str(basis))


# ---------------------------------------------------------------------------
# pooled design


@dataclass(frozen=True)
class _Design:
    y: np.ndarray  # pooled values
    occ: np.ndarray  # occasion of each value
    Q: np.ndarray  # basis rows, (N, d)
    counts: np.ndarray  # n_s
    S: np.ndarray  # per-occasion basis sums, (K+1, d)
    R: np.ndarray  # whitening: Q @ inv(R) has orthogonal columns
    Qw: np.ndarray
    Sw: np.ndarray

    @property
    def N(self):
        return self.y.size

    @property
    def K1(self):
        return self.counts.size

    def to_theta(self, theta_w):
        """Whitened coefficients (rows s = 1..K) to the full (K+1, d) matrix."""
        full = np.zeros((self.K1, self.Q.shape[1]))
        full[1:] = np.linalg.solve(self.R, theta_w.T).T
        return full

    def to_whitened(self, theta):
        return np.asarray(theta)[1:] @ self.R.T


def _design(y, occ, basis: BasisFunction, num_occasions: int) -> _Design:
    Q = basis(y)
    if not np.all(np.isfinite(Q)):
        raise BasisDomainError(f"basis domain error: non-finite {basis.name} features")
    counts = np.bincount(occ, minlength=num_occasions).astype(float)
    if np.any(counts == 0):
        raise ValueError("every occasion needs at least one observation")
    S = np.zeros((num_occasions, Q.shape[1]))
    np.add.at(S, occ, Q)
    R = np.linalg.qr(Q / np.sqrt(y.size), mode="r")
    if np.min(np.abs(np.diag(R))) < 1e-12 * np.max(np.abs(np.diag(R))):
        raise ProfileFitError("profile fit failed: basis features are collinear on this sample")
    Qw = np.linalg.solve(R.T, Q.T).T
    Sw = np.linalg.solve(R.T, S.T).T
    return _Design(y, occ, Q, counts, S, R, Qw, Sw)


def _sample_design(sample: RotatingPanelSample, basis: BasisFunction) -> _Design:
    y, occ = sample.pooled()
    return _design(y, occ, basis, sample.num_occasions)


# ---------------------------------------------------------------------------
# profile fit


@dataclass(frozen=True)
class DrmFit:
    """Maximum composite EL fit.

    ``theta`` has shape (K+1, d) with row 0 zero.  ``weights[i]`` is the mass
    on pooled value ``y[i]`` under ``G_0``; ``tilts[i, j] = exp(theta_j . q(y_i))``.
    """

    theta: np.ndarray
    weights: np.ndarray
    basis: BasisFunction
    loglik: float
    y: np.ndarray
    occasions: np.ndarray
    tilts: np.ndarray
    iterations: int = 0

    def cdf(self, j: int, y) -> np.ndarray | float:
        return fitted_cdf(self, j, y)

    def quantile(self, j: int, level: float) -> float:
        return el_quantile(self, j, level)

    def normalization_residuals(self) -> np.ndarray:
        return self.weights @ self.tilts - 1.0


def _profile_state(D: _Design, theta_w):
    eta = np.zeros((D.N, D.K1))
    eta[:, 1:] = D.Qw @ theta_w.T
    logc = eta + np.log(D.counts)
    lse = logsumexp(logc, axis=1)
    value = -lse.sum() + np.sum(theta_w * D.Sw[1:])
    return eta, logc, lse, value


def _profile_newton(D: _Design, theta_w0, *, max_iter=100, tol=1e-11):
    K, d = D.K1 - 1, D.Q.shape[1]
    theta_w = np.array(theta_w0, dtype=float).reshape(K, d)
    if K == 0:  # a single occasion: nothing to fit, G_0 is the empirical CDF
        return theta_w, 0
    eta, logc, lse, value = _profile_state(D, theta_w)
    for it in range(1, max_iter + 1):
        pi = np.exp(logc - lse[:, None])[:, 1:]  # (N, K)
        grad = D.Sw[1:] - pi.T @ D.Qw  # (K, d)
        if np.max(np.abs(grad) / D.counts[1:, None]) < tol:
            return theta_w, it - 1
        # Hessian of the concave profile: -sum_i q q^T (pi_s delta_st - pi_s pi_t)
        W = -pi[:, :, None] * pi[:, None, :]
        W[:, np.arange(K), np.arange(K)] += pi
        QQ = D.Qw[:, :, None] * D.Qw[:, None, :]
        H = (W.reshape(D.N, K * K).T @ QQ.reshape(D.N, d * d)).reshape(K, K, d, d)
        H = H.transpose(0, 2, 1, 3).reshape(K * d, K * d)
        try:
            step = np.linalg.solve(H, grad.ravel()).reshape(K, d)
        except np.linalg.LinAlgError:
            break
        slope = float(np.sum(grad * step))  # directional derivative, > 0
        t = 1.0
        for _ in range(40):
            cand = theta_w + t * step
            new = _profile_state(D, cand)
            if np.isfinite(new[3]) and new[3] >= value + 1e-4 * t * slope - 1e-12 * abs(value):
                break
            t *= 0.5
        else:
            break
        theta_w = cand
        eta, logc, lse, value = new
    raise ProfileFitError("profile fit failed: Newton iteration did not converge")


def _profile_from_design(D: _Design, basis: BasisFunction, theta0=None) -> DrmFit:
    K, d = D.K1 - 1, D.Q.shape[1]
    start = np.zeros((K, d)) if theta0 is None else D.to_whitened(theta0)
    try:
        theta_w, iters = _profile_newton(D, start)
    except ProfileFitError:
        if theta0 is None:
            raise
        theta_w, iters = _profile_newton(D, np.zeros((K, d)))
    theta = D.to_theta(theta_w)
    eta = D.Q @ theta.T
    logc = eta + np.log(D.counts)
    lse = logsumexp(logc, axis=1)
    weights = np.exp(-lse)
    tilts = np.exp(eta)
    loglik = float(-lse.sum() + np.sum(theta * D.S))
    fit = DrmFit(theta, weights, basis, loglik, D.y, D.occ, tilts, iters)
    resid = fit.normalization_residuals()
    if not np.all(np.abs(resid) < 1e-8):
        raise ProfileFitError(
            f"profile fit failed: normalization residual {np.max(np.abs(resid)):.2e}"
        )
    return fit


def fit_profile(sample: RotatingPanelSample, basis, *, theta0=None) -> DrmFit:
    """Maximise the profile composite empirical likelihood over ``theta``.

    Parameters
    ----------
    sample : RotatingPanelSample
    basis : BasisFunction or catalog name
    theta0 : optional (K+1, d) starting point; zeros by default.

    Raises
    ------
    BasisDomainError
        If the basis is undefined at an observed value.
    ProfileFitError
        If Newton's method does not converge (e.g. separated occasions).
    """
    basis = as_basis(basis)
    return _profile_from_design(_sample_design(sample, basis), basis, theta0)


def fitted_cdf(fit: DrmFit, j: int, y) -> np.ndarray | float:
    """``G_j(y) = sum_i p_i exp(theta_j . q(y_i)) 1(y_i <= y)``."""
    mass = fit.weights * fit.tilts[:, j]
    order = np.argsort(fit.y, kind="stable")
    ys, cm = fit.y[order], np.cumsum(mass[order])
    pos = np.searchsorted(ys, np.asarray(y, dtype=float), side="right")
    out = np.where(pos > 0, cm[np.maximum(pos - 1, 0)], 0.0)
    return float(out) if out.ndim == 0 else out


def el_quantile(fit: DrmFit, j: int, level: float) -> float:
    """Smallest observed ``y`` with ``G_j(y) >= level``."""
    return weighted_quantile(fit.y, fit.weights * fit.tilts[:, j], level)


def el_statistic(sample: RotatingPanelSample, basis, level: float, *, pair=(0, 1), fit=None) -> float:
    """Difference of fitted quantiles, occasion ``pair[1]`` minus ``pair[0]``."""
    fit = fit_profile(sample, basis) if fit is None else fit
    a, b = pair
    return el_quantile(fit, b, level) - el_quantile(fit, a, level)


def pooled_percentile(sample: RotatingPanelSample, level: float, *, pair=(0, 1)) -> float:
    """Type-1 ``level`` quantile of the union of the two compared occasions."""
    a, b = pair
    return empirical_quantile(np.r_[sample.occasion_values(a), sample.occasion_values(b)], level)


# ---------------------------------------------------------------------------
# constrained fit


@dataclass(frozen=True)
class ConstrainedFit:
    theta: np.ndarray
    lam: np.ndarray  # multipliers for the two quantile constraints
    t_mult: np.ndarray  # equals n_s at the solution
    xi_hat: float
    level: float
    loglik: float
    weights: np.ndarray
    tilts: np.ndarray
    pair: tuple[int, int]
    residuals: dict
    iterations: int = 0

    @property
    def max_residual(self) -> float:
        return max(float(np.max(np.abs(v))) for v in self.residuals.values())


def _check_range(sample, xi, pair):
    for s in pair:
        v = sample.occasion_values(s)
        if not (v.min() < xi < v.max()):
            raise PercentileRangeError(
                f"percentile outside range: pooled percentile {xi:.6g} is not inside "
                f"(min, max) = ({v.min():.6g}, {v.max():.6g}) of occasion {s}; this is a "
                f"strong indication that the population has significantly changed"
            )


class _Saddle:
    """``Phi(theta, lambda)`` and its derivatives in whitened coordinates."""

    def __init__(self, D: _Design, xi: float, level: float, pair):
        self.D = D
        self.pair = tuple(pair)
        self.c = (D.y <= xi).astype(float) - level
        self.K, self.d = D.K1 - 1, D.Q.shape[1]

    def unpack(self, x):
        K, d = self.K, self.d
        return x[: K * d].reshape(K, d), x[K * d :]

    def parts(self, x):
        D = self.D
        theta_w, lam = self.unpack(x)
        h = np.ones((D.N, D.K1))
        h[:, 1:] = np.exp(D.Qw @ theta_w.T)
        nh = h * D.counts
        A = nh.copy()
        B = np.zeros((D.N, 2))
        for j, s in enumerate(self.pair):
            B[:, j] = nh[:, s] * self.c
            A[:, s] += lam[j] * B[:, j]
        Dn = A.sum(axis=1)
        return h, A, B, Dn

    def value(self, x):
        h, A, B, Dn = self.parts(x)
        if np.any(Dn <= 0):
            return -np.inf
        theta_w, _ = self.unpack(x)
        return -np.log(Dn).sum() + np.sum(theta_w * self.D.Sw[1:])

    def gradient(self, x, parts=None):
        D = self.D
        h, A, B, Dn = self.parts(x) if parts is None else parts
        g_theta = D.Sw[1:] - (A[:, 1:] / Dn[:, None]).T @ D.Qw
        g_lam = -(B / Dn[:, None]).sum(axis=0)
        return np.r_[g_theta.ravel(), g_lam]

    def hessian(self, x, parts=None):
        D, K, d = self.D, self.K, self.d
        h, A, B, Dn = self.parts(x) if parts is None else parts
        a = A[:, 1:] / Dn[:, None]  # (N, K)
        b = B / Dn[:, None]  # (N, 2)
        Qw = D.Qw
        # theta-theta: -sum q q^T (a_s delta_st - a_s a_t)
        W = a[:, :, None] * a[:, None, :]
        W[:, np.arange(K), np.arange(K)] -= a
        QQ = Qw[:, :, None] * Qw[:, None, :]
        Htt = (W.reshape(D.N, K * K).T @ QQ.reshape(D.N, d * d)).reshape(K, K, d, d)
        Htt = Htt.transpose(0, 2, 1, 3).reshape(K * d, K * d)
        # theta-lambda: -sum q (delta_st b_t - a_s b_t)
        V = a[:, :, None] * b[:, None, :]  # (N, K, 2)
        for j, s in enumerate(self.pair):
            if s >= 1:
                V[:, s - 1, j] -= b[:, j]
        Htl = np.einsum("nkj,nd->kdj", V, Qw).reshape(K * d, 2)
        Hll = b.T @ b
        return np.block([[Htt, Htl], [Htl.T, Hll]])


def _constraint_residuals(D: _Design, weights, tilts, xi, level, pair, lam):
    ind = (D.y <= xi).astype(float)
    normal = weights @ tilts - 1.0
    quant = np.array([weights @ (tilts[:, s] * ind) - level for s in pair])
    factor = np.ones((D.N, D.K1))
    for j, s in enumerate(pair):
        factor[:, s] += lam[j] * (ind - level)
    score = ((weights[:, None] * tilts * factor).T @ D.Q) - D.S / D.counts[:, None]
    return {"normalization": normal, "quantile": quant, "score": score}


def _newton_saddle(F: _Saddle, x0, *, max_iter=200, max_halvings=30, tol=1e-13, accept=1e-10):
    # ``tol`` is tight because the whitened gradient understates residuals on the
    # original basis scale; a stalled line search is accepted below ``accept``
    x = np.array(x0, dtype=float)
    parts = F.parts(x)
    if np.any(parts[3] <= 0):
        raise SolverDivergedError("solver diverged: infeasible starting point")
    g = F.gradient(x, parts)
    scale = np.r_[np.repeat(F.D.counts[1:], F.d), F.D.counts[list(F.pair)]]
    norm = np.max(np.abs(g) / scale)
    for it in range(1, max_iter + 1):
        if norm < tol:
            return x, it - 1
        H = F.hessian(x, parts)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, -g, rcond=None)[0]
        t = 1.0
        for _ in range(max_halvings + 1):
            cand = x + t * step
            cparts = F.parts(cand)
            if np.all(cparts[3] > 0):
                cg = F.gradient(cand, cparts)
                cnorm = np.max(np.abs(cg) / scale)
                if np.isfinite(cnorm) and cnorm < (1 - 1e-4 * t) * norm:
                    break
            t *= 0.5
        else:
            if norm < accept:
                return x, it - 1
            raise SolverDivergedError(
                f"solver diverged: no decrease after {max_halvings} step halvings "
                f"(iteration {it}, residual {norm:.2e})"
            )
        x, parts, g, norm = cand, cparts, cg, cnorm
    if norm < accept:
        return x, max_iter
    raise SolverDivergedError(f"solver diverged: residual {norm:.2e} after {max_iter} iterations")


def fit_constrained(
    sample: RotatingPanelSample,
    basis,
    level: float,
    *,
    pair=(0, 1),
    profile: DrmFit | None = None,
    weight_form: str = "derived",
) -> ConstrainedFit:
    """Composite EL maximised under equal ``level``-quantile constraints.

    Both occasions of ``pair`` are forced to put mass ``level`` at or below
    the pooled percentile of the pair.  Starts at the profile fit with
    ``lambda = 0``.

    ``weight_form="printed"`` instead solves, by least squares, the variant of
    the root system whose weight denominator carries the extra ``n(K+1)``
    factor and ``h_s 1(y <= xi) - alpha`` term.  That variant is kept only to
    compare against brute force; it is not a consistent stationarity system.

    Raises
    ------
    PercentileRangeError, ConvexHullError, SolverDivergedError
    """
    basis = as_basis(basis)
    xi = pooled_percentile(sample, level, pair=pair)
    _check_range(sample, xi, pair)
    D = _sample_design(sample, basis)
    if profile is None:
        profile = _profile_from_design(D, basis)
    if weight_form == "printed":
        return _fit_printed(D, basis, profile, xi, level, tuple(pair))
    if weight_form != "derived":
        raise ValueError("weight_form must be 'derived' or 'printed'")

    F = _Saddle(D, xi, level, pair)
    x0 = np.r_[D.to_whitened(profile.theta).ravel(), 0.0, 0.0]
    try:
        x, iters = _newton_saddle(F, x0)
    except SolverDivergedError:
        if not convex_hull_check(sample, basis, profile.theta, level, xi, pair=pair):
            raise ConvexHullError(
                "convex hull violated: zero is not inside the hull of constraint residuals"
            ) from None
        raise
    theta_w, lam = F.unpack(x)
    theta = D.to_theta(theta_w)
    tilts = np.exp(D.Q @ theta.T)
    factor = np.ones_like(tilts)
    for j, s in enumerate(pair):
        factor[:, s] += lam[j] * F.c
    A = tilts * D.counts * factor
    Dn = A.sum(axis=1)
    weights = 1.0 / Dn
    t_mult = (A / Dn[:, None]).sum(axis=0)
    loglik = float(-np.log(Dn).sum() + np.sum(theta * D.S))
    res = _constraint_residuals(D, weights, tilts, xi, level, pair, lam)
    res["t_mult"] = (t_mult - D.counts) / D.counts
    fit = ConstrainedFit(theta, np.asarray(lam), t_mult, xi, level, loglik, weights, tilts, tuple(pair), res, iters)
    if fit.max_residual > 1e-8:
        raise SolverDivergedError(f"solver diverged: constraint residual {fit.max_residual:.2e}")
    return fit


def _fit_printed(D: _Design, basis, profile: DrmFit, xi, level, pair) -> ConstrainedFit:
    K1, d = D.K1, D.Q.shape[1]
    nr = float(D.counts.mean())
    ind = (D.y <= xi).astype(float)
    c = ind - level

    def unpack(x):
        theta = np.zeros((K1, d))
        theta[1:] = x[: (K1 - 1) * d].reshape(K1 - 1, d)
        return theta, x[(K1 - 1) * d :]

    def state(x):
        theta, lam = unpack(x)
        tilts = np.exp(D.Q @ theta.T)
        den = nr * tilts.sum(axis=1)
        for j, s in enumerate(pair):
            den = den + nr * K1 * lam[j] * (tilts[:, s] * ind - level)
        return theta, lam, tilts, den

    def resid(x):
        theta, lam, tilts, den = state(x)
        p = 1.0 / den
        factor = np.ones_like(tilts)
        for j, s in enumerate(pair):
            factor[:, s] += lam[j] * c
        normal = p @ tilts - 1.0
        quant = np.array([p @ (tilts[:, s] * c) for s in pair])
        score = (p[:, None] * tilts * factor).T @ D.Q - D.S / D.counts[:, None]
        return np.r_[normal, quant, score.ravel()]

    x0 = np.r_[profile.theta[1:].ravel(), 0.0, 0.0]
    sol = least_squares(resid, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    theta, lam, tilts, den = state(sol.x)
    weights = 1.0 / den
    r = resid(sol.x)
    res = {
        "normalization": r[:K1],
        "quantile": r[K1 : K1 + 2],
        "score": r[K1 + 2 :].reshape(K1, d),
    }
    loglik = float(np.sum(np.log(np.where(den > 0, weights, np.nan))) + np.sum(theta * D.S))
    return ConstrainedFit(
        theta, lam, np.full(K1, nr), xi, level, loglik, weights, tilts, pair, res, int(sol.nfev)
    )


def convex_hull_check(sample, basis, theta, level, xi_hat, *, pair=(0, 1)) -> bool:
    """Is zero in the relative interior of the constraint-residual vectors' hull?

    Solves ``max tau`` s.t. ``w_i >= tau``, ``sum w = 1``, ``sum w_i v_i = 0``;
    the condition holds iff the optimum is strictly positive, i.e. some strictly
    positive weights satisfy every constraint.
    """
    basis = as_basis(basis)
    y, _ = sample.pooled()
    N = y.size
    if N < 2:
        return False
    theta = np.asarray(theta, dtype=float)
    tilts = np.exp(basis(y) @ theta.T)
    ind = (y <= xi_hat).astype(float)
    V = np.column_stack([tilts - 1.0] + [tilts[:, s] * ind - level for s in pair])
    # drop identically-zero coordinates (the baseline normalization)
    V = V[:, np.any(np.abs(V) > 1e-14, axis=0)]
    A_eq = np.zeros((V.shape[1] + 1, N + 1))
    A_eq[:-1, :N] = V.T
    A_eq[-1, :N] = 1.0
    b_eq = np.zeros(V.shape[1] + 1)
    b_eq[-1] = 1.0
    A_ub = np.hstack([-np.eye(N), np.ones((N, 1))])  # tau - w_i <= 0
    bounds = [(0, None)] * N + [(None, 1.0 / N)]
    res = linprog(np.r_[np.zeros(N), -1.0], A_ub=A_ub, b_ub=np.zeros(N), A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    return bool(res.status == 0 and -res.fun > 1e-9 / N)


# ---------------------------------------------------------------------------
# likelihood-ratio statistic


def elr_statistic(sample, basis, level, *, pair=(0, 1), profile=None, constrained=None) -> float:
    """``sup l^C - sup l^CC``; non-negative up to solver tolerance."""
    basis = as_basis(basis)
    profile = fit_profile(sample, basis) if profile is None else profile
    if constrained is None:
        constrained = fit_constrained(sample, basis, level, pair=pair, profile=profile)
    return profile.loglik - constrained.loglik


def signed_elr_statistic(sample, basis, level, *, pair=(0, 1), profile=None, constrained=None) -> float:
    """ELR carrying the sign of ``G_b(xi) - G_a(xi)``.

    Positive values say occasion ``pair[1]`` puts more mass below the pooled
    percentile, i.e. has the lower quantile.
    """
    basis = as_basis(basis)
    profile = fit_profile(sample, basis) if profile is None else profile
    elr = elr_statistic(sample, basis, level, pair=pair, profile=profile, constrained=constrained)
    xi = pooled_percentile(sample, level, pair=pair)
    a, b = pair
    direction = fitted_cdf(profile, b, xi) - fitted_cdf(profile, a, xi)
    return float(np.copysign(max(elr, 0.0), direction))
