"""Cluster-blind two-sample statistics: t, Wilcoxon rank-sum, quantile difference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError
from .panel import RotatingPanelSample

# slack absorbing float error in level * count, e.g. 0.07 * 100 = 7.000000000000001
_INDEX_SLACK = 1e-9


@dataclass(frozen=True)
class TwoSampleView:
    """Flat values of two occasions with the cluster label of every value."""

    sample0: np.ndarray
    sample1: np.ndarray
    labels0: np.ndarray | None = None
    labels1: np.ndarray | None = None

    @classmethod
    def from_sample(cls, sample: RotatingPanelSample, pair: tuple[int, int] = (0, 1)) -> "TwoSampleView":
        a, b = pair
        r = sample.values.shape[1]
        ra, rb = sample.rows(a), sample.rows(b)
        return cls(
            sample.values[ra].ravel(),
            sample.values[rb].ravel(),
            np.repeat(sample.cluster_ids[ra], r),
            np.repeat(sample.cluster_ids[rb], r),
        )

    @classmethod
    def from_arrays(cls, sample0, sample1) -> "TwoSampleView":
        return cls(np.asarray(sample0, dtype=float).ravel(), np.asarray(sample1, dtype=float).ravel())

    @property
    def n0(self) -> int:
        return self.sample0.size

    @property
    def n1(self) -> int:
        return self.sample1.size

    def swapped(self) -> "TwoSampleView":
        return TwoSampleView(self.sample1, self.sample0, self.labels1, self.labels0)


def t_statistic(view: TwoSampleView) -> float:
    """Pooled-variance two-sample t, ``(mean1 - mean0) / sqrt((1/n0 + 1/n1) s^2)``."""
    x0, x1 = view.sample0, view.sample1
    n0, n1 = x0.size, x1.size
    if n0 < 2 or n1 < 2:
        raise DegenerateSampleError("t statistic needs at least 2 values per occasion")
    m0, m1 = x0.mean(), x1.mean()
    ss = ((x0 - m0) ** 2).sum() + ((x1 - m1) ** 2).sum()
    s2 = ss / (n0 + n1 - 2)
    if not s2 > 0:
        raise DegenerateSampleError("degenerate sample: pooled variance is zero")
    return float((m1 - m0) / np.sqrt((1.0 / n0 + 1.0 / n1) * s2))


def wilcoxon_statistic(view: TwoSampleView) -> float:
    """Count of pairs with the occasion-1 value above the occasion-0 value.

    Tied pairs count 1/2.  Computed by binary search in the sorted occasion-0
    values, O((n0 + n1) log n0).
    """
    s0 = np.sort(view.sample0)
    lo = np.searchsorted(s0, view.sample1, side="left")
    hi = np.searchsorted(s0, view.sample1, side="right")
    return float(lo.sum() + 0.5 * (hi - lo).sum())


def wilcoxon_bruteforce(view: TwoSampleView) -> float:
    """Double-loop reference for :func:`wilcoxon_statistic`."""
    w = 0.0
    for y1 in view.sample1:
        for y0 in view.sample0:
            if y1 > y0:
                w += 1.0
            elif y1 == y0:
                w += 0.5
    return w


def quantile_index(level: float, count: int) -> int:
    """0-based position of the type-1 ``level`` quantile among ``count`` sorted values."""
    if not 0 < level <= 1:
        raise ValueError(f"level must be in (0, 1], got {level}")
    j = int(np.ceil(level * count - _INDEX_SLACK))
    return min(max(j, 1), count) - 1


def empirical_quantile(values, level: float) -> float:
    """Left-continuous inverse of the empirical CDF: ``inf{y : F(y) >= level}``."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empirical_quantile of an empty sample")
    j = quantile_index(level, x.size)
    return float(np.partition(x, j)[j])


def weighted_quantile(values, weights, level: float, *, slack: float = 1e-12) -> float:
    """``inf{y : sum(weights[values <= y]) >= level}`` over the observed values."""
    x = np.asarray(values, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    order = np.argsort(x, kind="stable")
    xs, cw = x[order], np.cumsum(w[order])
    # collapse ties onto their last position so the CDF is evaluated at distinct values
    last = np.r_[xs[1:] != xs[:-1], True]
    xs, cw = xs[last], cw[last]
    j = np.searchsorted(cw, level - slack, side="left")
    return float(xs[min(j, xs.size - 1)])


def em_statistic(view: TwoSampleView, level: float) -> float:
    """Difference of empirical quantiles, occasion 1 minus occasion 0."""
    return empirical_quantile(view.sample1, level) - empirical_quantile(view.sample0, level)
