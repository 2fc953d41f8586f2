import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import constrained_oracle, profile_oracle
from rotperm import (
    BasisDomainError,
    NormalModelConfig,
    PercentileRangeError,
    PlanConfig,
    ProfileFitError,
    RotatingPanelSample,
    StatisticError,
    canonical_sample,
    convex_hull_check,
    el_statistic,
    elr_statistic,
    fit_constrained,
    fit_profile,
    generate_normal,
    signed_elr_statistic,
)
from rotperm import drm
from rotperm.stats import empirical_quantile

TINY = PlanConfig(2, 2, 1, 2)  # 8 observations: clusters {1, 2} then {2, 3}


def _normal(means, seed, plan=None, sig=(1.0, 1.0, 2.0)):
    plan = plan or PlanConfig(len(means), 36, 6, 5)
    return generate_normal(NormalModelConfig(means, *sig, plan, seed=seed))


def _relabel(sample, mapping):
    occ = np.array([mapping[int(k)] for k in sample.occasions])
    return RotatingPanelSample(sample.plan, occ, sample.cluster_ids, sample.values)


def tiny_instance(rng, shift=0.3):
    vals = rng.normal(size=(2, 2, 2))
    vals[1] += shift
    return canonical_sample(TINY, vals)


# --- basis catalog ---------------------------------------------------------


@pytest.mark.parametrize("name, dim", [("normal2", 3), ("gamma2", 3), ("general3", 4), ("linear", 2)])
def test_basis_catalog(name, dim):
    b = drm.BasisFunction(name)
    q = b(np.array([0.5, 2.0, 3.0]))
    assert b.dim == dim and q.shape == (3, dim)
    np.testing.assert_array_equal(q[:, 0], 1.0)


def test_unknown_basis():
    with pytest.raises(ValueError, match="unknown basis"):
        drm.BasisFunction("cubic")


def test_basis_domain_error_at_fit_time():
    s = canonical_sample(TINY, np.array([[[1.0, -2.0], [3.0, 4.0]], [[1.5, 2.5], [3.5, 0.5]]]))
    with pytest.raises(BasisDomainError, match="basis domain error"):
        fit_profile(s, "gamma2")


def test_collinear_features_fail():
    s = canonical_sample(TINY, np.ones((2, 2, 2)))
    with pytest.raises(ProfileFitError, match="profile fit failed"):
        fit_profile(s, "linear")


# --- profile fit -----------------------------------------------------------


def test_profile_invariants(null_sample):
    fit = fit_profile(null_sample, "normal2")
    assert np.all(fit.weights > 0)
    assert abs(fit.weights.sum() - 1.0) < 1e-8
    assert np.max(np.abs(fit.normalization_residuals())) < 1e-8
    np.testing.assert_array_equal(fit.theta[0], 0.0)


def test_profile_theta_near_zero_under_equal_populations():
    thetas = np.array([fit_profile(_normal([8.0] * 3, seed=s), "normal2").theta[1:].ravel() for s in range(40)])
    se = thetas.std(axis=0, ddof=1) / np.sqrt(len(thetas))
    assert np.all(np.abs(thetas.mean(axis=0)) < 3 * se)


def test_profile_matches_grid_oracle():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 3:
        s = tiny_instance(rng)
        fit = fit_profile(s, "linear")
        if np.abs(fit.theta).max() > 4:
            continue
        value, theta = profile_oracle(s.occasion_values(0), s.occasion_values(1))
        assert fit.loglik == pytest.approx(value, abs=1e-4)
        np.testing.assert_allclose(fit.theta[1], theta, atol=1e-3)
        checked += 1


def test_profile_baseline_relabeling():
    s = _normal([8.0, 7.6, 8.3], seed=3)
    fit = fit_profile(s, "normal2")
    swapped = fit_profile(_relabel(s, {0: 2, 1: 1, 2: 0}), "normal2")
    assert swapped.loglik == pytest.approx(fit.loglik, abs=1e-8)
    # new occasion k is old occasion perm[k]; theta'_k = theta_perm[k] - theta_2
    expected = fit.theta[[2, 1, 0]] - fit.theta[2]
    np.testing.assert_allclose(swapped.theta, expected, atol=1e-6)


def test_warm_start_gives_same_fit(null_sample):
    cold = fit_profile(null_sample, "normal2")
    warm = fit_profile(null_sample, "normal2", theta0=cold.theta * 0.9)
    assert warm.loglik == pytest.approx(cold.loglik, abs=1e-10)


# --- fitted CDF and quantiles ---------------------------------------------


def test_fitted_cdf_limits(null_sample):
    fit = fit_profile(null_sample, "normal2")
    y = null_sample.values.ravel()
    for j in range(5):
        assert fit.cdf(j, y.min() - 1) == 0.0
        assert abs(fit.cdf(j, y.max()) - 1.0) < 1e-8
        grid = np.linspace(y.min(), y.max(), 50)
        assert np.all(np.diff(fit.cdf(j, grid)) >= -1e-15)


def test_single_occasion_reduces_to_empirical():
    s = canonical_sample(PlanConfig(1, 4, 2, 3), np.random.default_rng(0).normal(size=(1, 4, 3)))
    fit = fit_profile(s, "normal2")
    y = np.sort(s.values.ravel())
    np.testing.assert_allclose(fit.cdf(0, y), np.arange(1, 13) / 12, rtol=0, atol=1e-15)
    for level in (0.1, 0.5, 0.75, 1.0):
        assert drm.el_quantile(fit, 0, level) == empirical_quantile(y, level)
    assert drm.el_quantile(fit, 0, 1.0) == y.max()


def test_el_quantile_order_under_dominance():
    wins = sum(
        (lambda f: drm.el_quantile(f, 1, 0.5) >= drm.el_quantile(f, 0, 0.5))(fit_profile(_normal([8.0, 9.0], s), "normal2"))
        for s in range(40)
    )
    assert wins >= 38


def test_el_statistic_swap_negates():
    s = _normal([8.0, 7.6, 8.1], seed=5)
    a = el_statistic(s, "normal2", 0.3)
    b = el_statistic(_relabel(s, {0: 1, 1: 0, 2: 2}), "normal2", 0.3)
    assert b == pytest.approx(-a, abs=1e-9)


def test_el_statistic_equal_data_reduces_to_em():
    rng = np.random.default_rng(2)
    vals = rng.normal(size=(1, 6, 3))
    s = canonical_sample(PlanConfig(2, 6, 6, 3), np.vstack([vals, vals[:, ::-1]]))
    fit = fit_profile(s, "normal2")
    np.testing.assert_allclose(fit.theta, 0.0, atol=1e-10)
    pooled = s.values.ravel()
    for level in (0.05, 0.5):
        assert el_statistic(s, "normal2", level, fit=fit) == 0.0
        assert drm.el_quantile(fit, 1, level) == empirical_quantile(pooled, level)


def test_el_statistic_null_mean_near_zero():
    vals = [el_statistic(_normal([8.0] * 3, seed=100 + s), "normal2", 0.5) for s in range(40)]
    assert abs(np.mean(vals)) < 3 * np.std(vals, ddof=1) / np.sqrt(len(vals))


# --- pooled percentile -----------------------------------------------------


def test_pooled_percentile_examples():
    vals = np.arange(1.0, 101.0).reshape(2, 1, 50)
    s = canonical_sample(PlanConfig(2, 1, 1, 50), vals)
    assert drm.pooled_percentile(s, 0.5) == 50.0
    same = canonical_sample(PlanConfig(2, 1, 1, 4), np.array([[[3.0, 1, 2, 4]], [[4.0, 3, 2, 1]]]))
    assert drm.pooled_percentile(same, 0.5) == 2.0


def test_pooled_percentile_order_statistic(null_sample):
    pooled = np.sort(np.r_[null_sample.occasion_values(0), null_sample.occasion_values(1)])
    assert pooled.size == 360
    assert drm.pooled_percentile(null_sample, 0.05) == pooled[17]


# --- constrained fit -------------------------------------------------------


def test_constraint_already_satisfied():
    vals = np.array([[[1.0, 2.0], [3.0, 4.0]], [[4.0, 3.0], [2.0, 1.0]]])
    s = canonical_sample(PlanConfig(2, 2, 2, 2), vals)
    prof = fit_profile(s, "linear")
    cons = fit_constrained(s, "linear", 0.5, profile=prof)
    np.testing.assert_allclose(cons.lam, 0.0, atol=1e-6)
    np.testing.assert_allclose(cons.theta, prof.theta, atol=1e-6)
    assert abs(elr_statistic(s, "linear", 0.5)) < 1e-6


def test_constrained_matches_oracle():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 2:
        s = tiny_instance(rng)
        try:
            cons = fit_constrained(s, "linear", 0.5)
        except StatisticError:
            continue
        if np.abs(cons.theta).max() > 4:
            continue
        value, _ = constrained_oracle(
            s.occasion_values(0), s.occasion_values(1), cons.xi_hat, 0.5, start=cons.theta[1], step=1.0
        )
        assert cons.loglik == pytest.approx(value, abs=1e-3)
        checked += 1


def test_printed_weight_form_gap_is_surfaced(capsys):
    """The printed multiplier form is solved by least squares and compared."""
    gaps = []
    for seed in range(3):
        s = _normal([8.0, 7.6, 8.0], seed=seed, plan=PlanConfig(3, 12, 4, 5))
        prof = fit_profile(s, "normal2")
        derived = fit_constrained(s, "normal2", 0.5, profile=prof)
        printed = fit_constrained(s, "normal2", 0.5, profile=prof, weight_form="printed")
        gaps.append((derived.loglik - printed.loglik, printed.max_residual))
        assert derived.max_residual < 1e-8
    with capsys.disabled():
        for g, r in gaps:
            print(f"\n[printed weight form] loglik gap vs derived solution {g:+.4f}, max constraint residual {r:.3g}")
    # the printed system leaves constraint residuals far above solver tolerance
    assert min(r for _, r in gaps) > 1e-4


def test_constrained_residuals(null_sample):
    for level in (0.05, 0.5):
        cons = fit_constrained(null_sample, "normal2", level)
        assert cons.max_residual < 1e-8
        assert set(cons.residuals) == {"normalization", "quantile", "score", "t_mult"}
        assert cons.residuals["normalization"].size + cons.residuals["quantile"].size == 5 + 2
        np.testing.assert_allclose(cons.t_mult, 180.0, rtol=1e-8)
        below = null_sample.pooled()[0] <= cons.xi_hat
        for s in (0, 1):
            assert abs(cons.weights @ (cons.tilts[:, s] * below) - level) < 1e-8


def test_percentile_outside_range():
    vals = np.zeros((2, 2, 10))
    vals[0] = np.arange(20.0).reshape(2, 10)
    vals[1] = 100 + np.arange(20.0).reshape(2, 10)
    s = canonical_sample(PlanConfig(2, 2, 1, 10), vals)
    with pytest.raises(PercentileRangeError, match="strong indication that the population has significantly changed"):
        fit_constrained(s, "linear", 0.05)


def test_invalid_weight_form(null_sample):
    with pytest.raises(ValueError):
        fit_constrained(null_sample, "normal2", 0.5, weight_form="other")


# --- convex hull -----------------------------------------------------------


def test_hull_true_at_zero_theta(null_sample):
    theta = np.zeros((5, 3))
    xi = drm.pooled_percentile(null_sample, 0.5)
    assert convex_hull_check(null_sample, "normal2", theta, 0.5, xi)


def test_hull_false_below_minimum(null_sample):
    xi = null_sample.occasion_values(1).min() - 1.0
    assert not convex_hull_check(null_sample, "normal2", np.zeros((5, 3)), 0.05, xi)


def test_hull_false_for_single_observation():
    s = canonical_sample(PlanConfig(1, 1, 1, 1), np.array([[[2.0]]]))
    assert not convex_hull_check(s, "linear", np.zeros((1, 2)), 0.5, 2.0, pair=(0, 0))


# --- ELR ---------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), shift=st.floats(-1.0, 1.0), level=st.sampled_from([0.05, 0.25, 0.5]))
def test_elr_nonnegative(seed, shift, level):
    s = _normal([8.0, 8.0 + shift, 8.0], seed=seed, plan=PlanConfig(3, 6, 2, 3))
    try:
        value = elr_statistic(s, "normal2", level)
    except StatisticError:
        return
    assert value >= -1e-6


def test_elr_grows_with_downward_shift():
    means = []
    for delta in (0.0, 0.4, 0.8, 1.2):
        vals = [elr_statistic(_normal([8.0, 8.0 - delta, 8.0], seed=200 + s), "normal2", 0.5) for s in range(15)]
        means.append(np.mean(vals))
    assert np.all(np.diff(means) >= 0)


def test_signed_elr_sign_follows_shift():
    s = _normal([8.0, 6.5, 8.0], seed=1)
    assert signed_elr_statistic(s, "normal2", 0.5) > 0
    s = _normal([8.0, 9.5, 8.0], seed=1)
    assert signed_elr_statistic(s, "normal2", 0.5) < 0


# --- Newton system derivatives --------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_saddle_hessian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    s = _normal([8.0, 7.5, 8.2], seed=seed, plan=PlanConfig(3, 12, 4, 5))
    D = drm._sample_design(s, drm.as_basis("normal2"))
    F = drm._Saddle(D, drm.pooled_percentile(s, 0.3), 0.3, (0, 1))
    x = np.r_[rng.normal(scale=0.1, size=6), rng.normal(scale=0.05, size=2)]
    eps = 1e-6
    numeric = np.column_stack(
        [(F.gradient(x + eps * e) - F.gradient(x - eps * e)) / (2 * eps) for e in np.eye(x.size)]
    )
    H = F.hessian(x)
    assert np.max(np.abs(H - numeric)) / np.max(np.abs(H)) < 1e-5
