"""Estimator-style wrappers around the functional API.

The classes follow the scikit-learn conventions that fit the problem:
constructor arguments are stored unchanged, ``get_params``/``set_params``
work through :class:`sklearn.base.BaseEstimator`, ``fit`` validates its input
and stores learned state in attributes ending with ``_``.  There is no
``predict``/``transform``: a density ratio fit and a hypothesis test do not
map new rows to outputs.

``fit`` accepts a :class:`~rotperm.panel.RotatingPanelSample` or a
four-column array with rows ``(occasion, cluster_id, unit, value)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from . import drm
from .csvio import infer_plan
from .panel import RotatingPanelSample, validate
from .permute import StatisticSpec, permutation_test


def check_sample(X, *, validate_plan: bool = True) -> RotatingPanelSample:
    """Coerce ``X`` to a validated :class:`RotatingPanelSample`.

    Parameters
    ----------
    X : RotatingPanelSample or array-like of shape (n_rows, 4)
        Long-format rows ``(occasion, cluster_id, unit, value)``.
    validate_plan : bool
        Raise ``ValueError`` listing the rotation violations, if any.
    """
    if isinstance(X, RotatingPanelSample):
        sample = X
    else:
        arr = check_array(X, dtype=np.float64, ensure_min_samples=1)
        if arr.shape[1] != 4:
            raise ValueError(f"expected 4 columns (occasion, cluster_id, unit, value), got {arr.shape[1]}")
        labels = arr[:, :3]
        if np.any(labels != np.round(labels)):
            raise ValueError("occasion, cluster_id and unit must be integers")
        cells: dict[tuple[int, int], dict[int, float]] = {}
        for k, i, u, v in arr:
            units = cells.setdefault((int(k), int(i)), {})
            if int(u) in units:
                raise ValueError(f"duplicate observation (occasion {int(k)}, cluster {int(i)}, unit {int(u)})")
            units[int(u)] = float(v)
        plan = infer_plan(cells)
        keys = sorted(cells)
        values = np.array([[cells[key][u] for u in sorted(cells[key])] for key in keys])
        sample = RotatingPanelSample(
            plan, np.array([k for k, _ in keys]), np.array([i for _, i in keys]), values
        )
    if validate_plan:
        problems = validate(sample)
        if problems:
            raise ValueError("invalid rotating panel: " + "; ".join(str(p) for p in problems))
    return sample


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class DensityRatioModel(BaseEstimator):
    """Composite empirical likelihood fit of the density ratio model.

    Parameters
    ----------
    basis : str
        Catalog name: ``normal2``, ``gamma2``, ``general3`` or ``linear``.

    Attributes
    ----------
    theta_ : ndarray of shape (K+1, d)
        Tilt coefficients, row 0 is zero.
    loglik_ : float
    n_iter_ : int
    fit_ : DrmFit
    """

    def __init__(self, basis: str = "normal2"):
        self.basis = basis

    def fit(self, X, y=None):
        sample = check_sample(X)
        self.fit_ = drm.fit_profile(sample, self.basis)
        self.theta_ = self.fit_.theta
        self.loglik_ = self.fit_.loglik
        self.n_iter_ = self.fit_.iterations
        self.n_occasions_ = sample.num_occasions
        return self

    def cdf(self, values, occasion: int = 0):
        """Fitted distribution function of ``occasion`` at ``values``."""
        _check_fitted(self, "fit_")
        return drm.fitted_cdf(self.fit_, occasion, values)

    def quantile(self, level: float, occasion: int = 0) -> float:
        _check_fitted(self, "fit_")
        return drm.el_quantile(self.fit_, occasion, level)


class ClusteredPermutationTest(BaseEstimator):
    """Cluster-swap permutation test of occasion ``pair[1]`` against ``pair[0]``.

    Parameters
    ----------
    statistic : {"T", "W", "EM", "EL", "ELR"}
    level : float or None
        Quantile level for ``EM``, ``EL`` and ``ELR``.
    basis : str or None
        Basis for ``EL`` and ``ELR``.
    n_permutations : int
    alpha_test : float
    step1plus : bool
        Also reassign the clusters seen on only one of the two occasions.
    random_state : int
    pair : tuple of int

    Attributes
    ----------
    statistic_, p_value_, reject_ : observed value, p-value and decision
    result_ : PermutationResult
    """

    def __init__(
        self,
        statistic: str = "T",
        level: float | None = None,
        basis: str | None = None,
        n_permutations: int = 999,
        alpha_test: float = 0.05,
        step1plus: bool = True,
        random_state: int = 0,
        pair: tuple[int, int] = (0, 1),
    ):
        self.statistic = statistic
        self.level = level
        self.basis = basis
        self.n_permutations = n_permutations
        self.alpha_test = alpha_test
        self.step1plus = step1plus
        self.random_state = random_state
        self.pair = pair

    def fit(self, X, y=None):
        sample = check_sample(X)
        spec = StatisticSpec(self.statistic, self.level, self.basis)
        self.result_ = permutation_test(
            sample,
            spec,
            self.n_permutations,
            self.alpha_test,
            seed=self.random_state,
            pair=tuple(self.pair),
            step1plus=self.step1plus,
        )
        self.statistic_ = self.result_.observed
        self.p_value_ = self.result_.p_value
        self.reject_ = self.result_.reject
        return self
