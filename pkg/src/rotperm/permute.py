"""Cluster-swap permutation test for two occasions of a rotating panel.

One permuted sample is formed as follows:

* Step I: each cluster observed on both compared occasions has its two
  cluster vectors exchanged with probability 1/2.
* Step I+ (optional, on by default): the cluster vectors of clusters seen on
  only one of the two occasions are randomly reassigned among those slots.
* Step II: all other occasions are left untouched.

The p-value is the share of permuted statistics strictly beyond the observed
one in the rejection direction.  With ``M`` replicates the smallest attainable
non-zero p-value is ``1/M``, and with ``M = 1`` a tie gives ``p = 0``; use a
moderate odd ``M`` (e.g. 999 or more in applications).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Collection, Sequence

import numpy as np

from . import drm
from ._rng import Role, Seed, stream
from .errors import StatisticError
from .panel import RotatingPanelSample
from .stats import TwoSampleView, em_statistic, t_statistic, wilcoxon_statistic

KINDS = ("T", "W", "EM", "EL", "ELR")
REJECT_LARGE = "reject-large"
REJECT_SMALL = "reject-small"


class ObservedStatisticError(StatisticError):
    """The statistic failed on the unpermuted data; the test cannot run."""


@dataclass(frozen=True)
class StatisticSpec:
    """Which statistic to permute, and which tail rejects.

    ``T``, ``W``, ``EM`` and ``EL`` reject small (the alternative says
    occasion 1 is stochastically lower).  ``ELR`` rejects large; with
    ``signed=True`` (default) it carries the sign of the fitted shift so the
    test stays one-sided.
    """

    kind: str
    level: float | None = None
    basis: drm.BasisFunction | None = None
    orientation: str | None = None
    signed: bool = True

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in KINDS:
            raise ValueError(f"unknown statistic {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "kind", kind)
        needs_level = kind in ("EM", "EL", "ELR")
        needs_basis = kind in ("EL", "ELR")
        if needs_level != (self.level is not None):
            raise ValueError(f"{kind} {'needs' if needs_level else 'takes no'} level")
        if needs_level and not 0 < self.level < 1:
            raise ValueError("level must be in (0, 1)")
        if needs_basis != (self.basis is not None):
            raise ValueError(f"{kind} {'needs' if needs_basis else 'takes no'} basis")
        if self.basis is not None:
            object.__setattr__(self, "basis", drm.as_basis(self.basis))
        if self.orientation is None:
            object.__setattr__(self, "orientation", REJECT_LARGE if kind == "ELR" else REJECT_SMALL)
        elif self.orientation not in (REJECT_LARGE, REJECT_SMALL):
            raise ValueError(f"orientation must be {REJECT_LARGE!r} or {REJECT_SMALL!r}")

    @property
    def label(self) -> str:
        if self.level is None:
            return self.kind
        return f"{self.kind}@{self.level:g}"

    @property
    def uses_drm(self) -> bool:
        return self.kind in ("EL", "ELR")


@dataclass(frozen=True)
class PermutationResult:
    observed: float
    replicates: np.ndarray
    failed_replicates: int
    p_value: float
    alpha_test: float
    reject: bool
    spec: StatisticSpec | None = None
    failures: tuple[str, ...] = field(default=(), repr=False)

    def as_dict(self) -> dict:
        return {
            "statistic": self.spec.label if self.spec else None,
            "observed": self.observed,
            "p_value": self.p_value,
            "alpha_test": self.alpha_test,
            "reject": self.reject,
            "num_replicates": int(self.replicates.size),
            "failed_replicates": self.failed_replicates,
        }


# ---------------------------------------------------------------------------
# statistics on a whole sample


class StatisticEvaluator:
    """Evaluate several statistics on one sample, sharing DRM fits.

    The profile fit for each basis is computed once per sample and reused by
    every EL/ELR statistic and level.  Fits on the observed sample are kept
    as warm starts for replicates.
    """

    def __init__(self, specs: Sequence[StatisticSpec], pair=(0, 1)):
        self.specs = list(specs)
        self.pair = tuple(pair)
        self._warm: dict[str, np.ndarray] = {}

    def evaluate(self, sample: RotatingPanelSample, *, observed: bool = False):
        """Statistic values (NaN on failure) and the failure messages."""
        out = np.full(len(self.specs), np.nan)
        errors: list[str | None] = [None] * len(self.specs)
        view = None
        profiles: dict[str, drm.DrmFit | Exception] = {}
        for j, spec in enumerate(self.specs):
            try:
                if spec.uses_drm:
                    name = spec.basis.name
                    if name not in profiles:
                        try:
                            profiles[name] = drm.fit_profile(sample, spec.basis, theta0=self._warm.get(name))
                        except StatisticError as exc:
                            profiles[name] = exc
                    fit = profiles[name]
                    if isinstance(fit, Exception):
                        raise fit
                    if observed:
                        self._warm[name] = fit.theta
                    out[j] = self._drm_value(sample, spec, fit)
                else:
                    if view is None:
                        view = TwoSampleView.from_sample(sample, self.pair)
                    out[j] = self._plain_value(view, spec)
            except StatisticError as exc:
                errors[j] = str(exc)
        return out, errors

    def _plain_value(self, view, spec):
        if spec.kind == "T":
            return t_statistic(view)
        if spec.kind == "W":
            return wilcoxon_statistic(view)
        return em_statistic(view, spec.level)

    def _drm_value(self, sample, spec, fit):
        if spec.kind == "EL":
            return drm.el_statistic(sample, spec.basis, spec.level, pair=self.pair, fit=fit)
        cons = drm.fit_constrained(sample, spec.basis, spec.level, pair=self.pair, profile=fit)
        if spec.signed:
            return drm.signed_elr_statistic(
                sample, spec.basis, spec.level, pair=self.pair, profile=fit, constrained=cons
            )
        return drm.elr_statistic(sample, spec.basis, spec.level, pair=self.pair, profile=fit, constrained=cons)


# ---------------------------------------------------------------------------
# permutation


class _Layout:
    """Row indices of the swappable and rotation-only clusters for one pair."""

    def __init__(self, sample: RotatingPanelSample, pair, exclude: Collection[int] = ()):
        a, b = pair
        K1 = sample.num_occasions
        if not (0 <= a < K1 and 0 <= b < K1) or a == b:
            raise ValueError(f"pair {pair} needs two distinct occasions in 0..{K1 - 1}")
        rows_a = {int(i): r for i, r in zip(sample.cluster_ids[sample.rows(a)], sample.rows(a))}
        rows_b = {int(i): r for i, r in zip(sample.cluster_ids[sample.rows(b)], sample.rows(b))}
        excluded = set(int(i) for i in exclude)
        both = sorted(set(rows_a) & set(rows_b) - excluded)
        self.swap_a = np.array([rows_a[i] for i in both], dtype=np.int64)
        self.swap_b = np.array([rows_b[i] for i in both], dtype=np.int64)
        self.rotation_rows = np.array(
            [rows_a[i] for i in sorted(set(rows_a) - set(rows_b))]
            + [rows_b[i] for i in sorted(set(rows_b) - set(rows_a))],
            dtype=np.int64,
        )

    def apply(self, values: np.ndarray, rng, step1plus: bool) -> np.ndarray:
        out = values.copy()
        if self.swap_a.size:
            swap = np.asarray(rng.random(self.swap_a.size)) < 0.5
            ia, ib = self.swap_a[swap], self.swap_b[swap]
            out[ia], out[ib] = values[ib], values[ia]
        if step1plus and self.rotation_rows.size > 1:
            perm = np.asarray(rng.permutation(self.rotation_rows.size))
            out[self.rotation_rows] = values[self.rotation_rows[perm]]
        return out


def permute_once(
    sample: RotatingPanelSample,
    rng,
    *,
    pair=(0, 1),
    step1plus: bool = True,
    exclude: Collection[int] = (),
) -> RotatingPanelSample:
    """One permuted sample (Steps I, I+ and II).

    ``rng`` needs ``random(size)`` and ``permutation(n)``.  Clusters in
    ``exclude`` (e.g. dropouts) are never swapped in Step I.
    """
    layout = _Layout(sample, pair, exclude)
    return sample.with_values(layout.apply(sample.values, rng, step1plus))


def _p_value(observed: float, reps: np.ndarray, orientation: str) -> tuple[float, int]:
    ok = reps[~np.isnan(reps)]
    if ok.size == 0:
        return math.nan, 0
    beyond = ok > observed if orientation == REJECT_LARGE else ok < observed
    return float(beyond.mean()), ok.size


def permutation_tests(
    sample: RotatingPanelSample,
    specs: Sequence[StatisticSpec],
    M: int,
    alpha_test: float = 0.05,
    seed: Seed = 0,
    *,
    pair=(0, 1),
    step1plus: bool = True,
    exclude: Collection[int] = (),
    n_jobs: int = 1,
) -> list[PermutationResult]:
    """Permutation tests for several statistics on the same permuted samples.

    Replicate ``b`` uses the random stream keyed by ``(seed, b)``, so results
    do not depend on ``n_jobs``.  A replicate whose statistic fails is left
    out of the p-value and counted in ``failed_replicates``.

    Raises
    ------
    ObservedStatisticError
        If any statistic fails on the unpermuted sample.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    specs = list(specs)
    evaluator = StatisticEvaluator(specs, pair)
    observed, errors = evaluator.evaluate(sample, observed=True)
    for spec, err in zip(specs, errors):
        if err is not None:
            raise ObservedStatisticError(f"observed statistic failed ({spec.label}): {err}")
    layout = _Layout(sample, pair, exclude)

    def replicate(b):
        values = layout.apply(sample.values, stream(seed, Role.REPLICATE, b), step1plus)
        return evaluator.evaluate(sample.with_values(values))

    if n_jobs == 1:
        outcomes = [replicate(b) for b in range(M)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(replicate, range(M)))
    reps = np.array([o[0] for o in outcomes]).reshape(M, len(specs))

    results = []
    for j, spec in enumerate(specs):
        p, used = _p_value(observed[j], reps[:, j], spec.orientation)
        failures = tuple(o[1][j] for o in outcomes if o[1][j] is not None)
        results.append(
            PermutationResult(
                observed=float(observed[j]),
                replicates=reps[:, j].copy(),
                failed_replicates=M - used,
                p_value=p,
                alpha_test=alpha_test,
                reject=bool(p < alpha_test) if not math.isnan(p) else False,
                spec=spec,
                failures=failures,
            )
        )
    return results


def permutation_test(
    sample: RotatingPanelSample,
    spec: StatisticSpec,
    M: int,
    alpha_test: float = 0.05,
    seed: Seed = 0,
    **kwargs,
) -> PermutationResult:
    """Single-statistic form of :func:`permutation_tests`."""
    return permutation_tests(sample, [spec], M, alpha_test, seed, **kwargs)[0]


def uniformity_probe(
    sample_generator: Callable[[int], RotatingPanelSample],
    spec: StatisticSpec,
    M: int,
    num_reps: int,
    seed: Seed = 0,
    *,
    step1plus: bool = True,
) -> np.ndarray:
    """Permutation p-values over ``num_reps`` samples from a null generator.

    ``sample_generator(rep)`` must return the sample for repetition ``rep``.
    """
    out = np.empty(num_reps)
    for rep in range(num_reps):
        res = permutation_test(
            sample_generator(rep), spec, M, seed=(*_tuple(seed), rep), step1plus=step1plus
        )
        out[rep] = res.p_value
    return out


def _tuple(seed: Seed) -> tuple[int, ...]:
    return (int(seed),) if isinstance(seed, (int, np.integer)) else tuple(int(s) for s in seed)
