"""Monte Carlo harness: repeated data generation, testing and tallying.

A :class:`SimulationConfig` names a data model with a template of parameters
for the first occasions.  Entries left unspecified are redrawn on every
repetition from the configured fill rule.  Each repetition generates one
sample, runs every permutation test on it (sharing permuted samples across
statistics) and, for ``T`` and ``W``, also the classical p-values that
ignore the clusters.  Results are tallied into a :class:`ResultTable`.

Every random draw in repetition ``i`` is keyed by ``(master_seed, i,
attempt)``, so the table does not depend on ``parallelism``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats as sps

from ._rng import Role, child_seed, stream
from .errors import DegenerateSampleError, StatisticError
from .panel import PlanConfig, RotatingPanelSample
from .permute import ObservedStatisticError, StatisticSpec, permutation_tests
from .stats import TwoSampleView, t_statistic, wilcoxon_statistic
from .synth import (
    GammaModelConfig,
    NoNameModelConfig,
    NormalModelConfig,
    generate_gamma,
    generate_noname,
    generate_normal,
    load_population,
)

MODELS = ("normal", "gamma", "noname")
PERM = "perm"
NONPERM = "non-perm"
# share of regenerated repetitions above which a warning is raised
EXTRA_WARN_SHARE = 0.05


# ---------------------------------------------------------------------------
# classical p-values


def nonperm_pvalues(view: TwoSampleView) -> tuple[float, float]:
    """One-sided p-values of the pooled t test and the rank-sum test.

    Both treat all values as independent.  The alternative is that occasion 1
    is stochastically lower, so small statistics are significant.  The rank-sum
    p-value uses the normal approximation with the tie-corrected variance.

    Raises
    ------
    DegenerateSampleError
        If either statistic has zero variance.
    """
    n0, n1 = view.n0, view.n1
    if n0 < 2 or n1 < 2:
        raise DegenerateSampleError("need at least 2 values per occasion")
    try:
        t = t_statistic(view)
    except DegenerateSampleError:
        raise DegenerateSampleError("degenerate variance in t statistic") from None
    t_p = float(sps.t.cdf(t, n0 + n1 - 2))

    w = wilcoxon_statistic(view)
    N = n0 + n1
    _, counts = np.unique(np.concatenate([view.sample0, view.sample1]), return_counts=True)
    tie = float(np.sum(counts.astype(float) ** 3 - counts))
    var = n0 * n1 / 12.0 * ((N + 1) - tie / (N * (N - 1)))
    if not var > 0:
        raise DegenerateSampleError("degenerate variance in rank-sum statistic")
    w_p = float(sps.norm.cdf((w - n0 * n1 / 2.0) / math.sqrt(var)))
    return t_p, w_p


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class FillRule:
    """Draw ``loc + spread * Z`` where ``Z`` is standard ``normal`` or ``uniform`` on [0, 1]."""

    loc: float
    spread: float
    dist: str = "normal"

    def __post_init__(self):
        if self.dist not in ("normal", "uniform"):
            raise ValueError("fill distribution must be 'normal' or 'uniform'")

    def draw(self, rng, size: int) -> np.ndarray:
        z = rng.standard_normal(size) if self.dist == "normal" else rng.random(size)
        return self.loc + self.spread * z


def _fill(template: Sequence[float], K1: int, rule: FillRule, rng) -> tuple[float, ...]:
    template = tuple(float(v) for v in template)
    if len(template) > K1:
        raise ValueError(f"template {template} longer than {K1} occasions")
    extra = rule.draw(rng, K1 - len(template)) if K1 > len(template) else []
    return template + tuple(float(v) for v in extra)


@dataclass(frozen=True)
class SimulationConfig:
    """One simulation setting.

    Model parameters are templates: the leading entries are fixed and the
    rest of the ``num_occasions`` entries are drawn per repetition.

    Normal model: ``means`` filled by ``mean_fill`` (8 + 0.5 N(0, 1)),
    constant ``sigmas = (sigma1, sigma2, sigma3)``.
    Gamma model: ``etas`` filled by ``mean_fill``, ``lambdas`` by
    ``scale_fill`` (1 + 0.2 U), fixed ``gammas = (gamma1, gamma2)``.
    No-name model: ``sigma2s`` filled by ``sigma2_fill`` (3 + 2 U), fixed
    ``sigma1``, population from ``population_path`` (``None`` = bundled
    stand-in).
    """

    model: str
    plan: PlanConfig
    statistics: tuple[StatisticSpec, ...]
    num_reps: int = 1000
    M: int = 201
    alpha_test: float = 0.05
    master_seed: int = 0
    parallelism: int = 1
    step1plus: bool = True
    nonperm: bool = True
    label: str = ""
    means: tuple[float, ...] = (8.0, 8.0)
    sigmas: tuple[float, float, float] = (1.0, 1.0, 2.0)
    etas: tuple[float, ...] = (8.0, 8.0)
    lambdas: tuple[float, ...] = (1.0, 1.0)
    gammas: tuple[float, float] = (2.0, 1.5)
    sigma1: float = 2.0
    sigma2s: tuple[float, ...] = (6.0, 6.0)
    population_path: str | None = None
    mean_fill: FillRule = FillRule(8.0, 0.5, "normal")
    scale_fill: FillRule = FillRule(1.0, 0.2, "uniform")
    sigma2_fill: FillRule = FillRule(3.0, 2.0, "uniform")
    max_attempts: int = 50

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.num_reps < 1:
            raise ValueError("num_reps must be >= 1")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not 0 < self.alpha_test < 1:
            raise ValueError("alpha_test must be in (0, 1)")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.plan.num_occasions < 2:
            raise ValueError("a simulation needs at least two occasions")
        object.__setattr__(self, "statistics", tuple(self.statistics))
        if not self.statistics:
            raise ValueError("at least one statistic is required")
        for name in ("means", "sigmas", "etas", "lambdas", "gammas", "sigma2s"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if len(self.sigmas) != 3 or len(self.gammas) != 2:
            raise ValueError("sigmas needs 3 entries and gammas 2")

    def with_overrides(self, **kw) -> "SimulationConfig":
        return replace(self, **kw)

    def draw_model(self, rng, seed) -> NormalModelConfig | GammaModelConfig | NoNameModelConfig:
        """Model configuration for one repetition (fills drawn from ``rng``)."""
        K1 = self.plan.num_occasions
        if self.model == "normal":
            s1, s2, s3 = self.sigmas
            return NormalModelConfig(_fill(self.means, K1, self.mean_fill, rng), s1, s2, s3, self.plan, seed)
        if self.model == "gamma":
            etas = _fill(self.etas, K1, self.mean_fill, rng)
            lambdas = _fill(self.lambdas, K1, self.scale_fill, rng)
            return GammaModelConfig(self.gammas[0], self.gammas[1], etas, lambdas, self.plan, seed)
        return NoNameModelConfig(
            _population(self.population_path),
            self.sigma1,
            _fill(self.sigma2s, K1, self.sigma2_fill, rng),
            self.plan,
            seed=seed,
        )


_POPULATIONS: dict[str | None, np.ndarray] = {}


def _population(path):
    if path not in _POPULATIONS:
        _POPULATIONS[path] = load_population(path)
    return _POPULATIONS[path]


def generate(model_cfg) -> RotatingPanelSample:
    if isinstance(model_cfg, NormalModelConfig):
        return generate_normal(model_cfg)
    if isinstance(model_cfg, GammaModelConfig):
        return generate_gamma(model_cfg)
    return generate_noname(model_cfg)


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class Cell:
    setting: str
    statistic: str
    method: str
    rejections: int
    num_reps: int
    failed_replicates: int = 0
    failed_reps: int = 0

    @property
    def rate(self) -> float:
        done = self.num_reps - self.failed_reps
        return self.rejections / done if done else math.nan

    @property
    def percent(self) -> float:
        return 100.0 * self.rate

    @property
    def se(self) -> float:
        """Monte Carlo standard error of :attr:`percent`."""
        done = self.num_reps - self.failed_reps
        if not done:
            return math.nan
        p = self.rate
        return 100.0 * math.sqrt(p * (1.0 - p) / done)

    def as_dict(self) -> dict:
        return {
            "setting": self.setting,
            "statistic": self.statistic,
            "method": self.method,
            "rejections": self.rejections,
            "num_reps": self.num_reps,
            "percent": _round(self.percent),
            "se": _round(self.se),
            "failed_replicates": self.failed_replicates,
            "failed_reps": self.failed_reps,
        }


def _round(x: float):
    return None if math.isnan(x) else round(x, 6)


@dataclass
class ResultTable:
    """Rejection percentages keyed by ``(setting, statistic, method)``."""

    cells: list[Cell] = field(default_factory=list)
    extra_repetitions: dict[str, int] = field(default_factory=dict)

    def cell(self, statistic: str, method: str = PERM, setting: str | None = None) -> Cell:
        for c in self.cells:
            if c.statistic == statistic and c.method == method and (setting is None or c.setting == setting):
                return c
        raise KeyError((setting, statistic, method))

    def extend(self, other: "ResultTable") -> "ResultTable":
        self.cells.extend(other.cells)
        self.extra_repetitions.update(other.extra_repetitions)
        return self

    def to_json(self) -> str:
        payload = {
            "cells": [c.as_dict() for c in self.cells],
            "extra_repetitions": self.extra_repetitions,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(Cell("", "", "", 0, 1).as_dict())
        writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        for c in self.cells:
            writer.writerow(c.as_dict())
        return buf.getvalue()

    def to_text(self) -> str:
        head = ("setting", "statistic", "method", "reject %", "SE", "failed repl.", "reps")
        rows = [
            (
                c.setting,
                c.statistic,
                c.method,
                f"{c.percent:.1f}",
                f"{c.se:.2f}",
                str(c.failed_replicates),
                str(c.num_reps - c.failed_reps),
            )
            for c in self.cells
        ]
        widths = [max(len(h), *(len(r[j]) for r in rows)) if rows else len(h) for j, h in enumerate(head)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
        lines.append("  ".join("-" * w for w in widths))
        lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in rows]
        for setting, extra in self.extra_repetitions.items():
            if extra:
                lines.append(f"{setting}: {extra} repetition(s) regenerated after observed-statistic failure")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str = "text") -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        if fmt == "text":
            return self.to_text()
        raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# running


@dataclass(frozen=True)
class _RepOutcome:
    rejects: tuple[bool | None, ...]  # None = could not be computed
    failed_replicates: tuple[int, ...]
    attempts: int


def _row_keys(cfg: SimulationConfig) -> list[tuple[str, str]]:
    keys = []
    if cfg.nonperm:
        keys += [(s.label, NONPERM) for s in cfg.statistics if s.kind in ("T", "W")]
    keys += [(s.label, PERM) for s in cfg.statistics]
    return keys


def run_repetition(cfg: SimulationConfig, rep: int) -> _RepOutcome:
    """One repetition; regenerates data while the observed statistic fails."""
    for attempt in range(cfg.max_attempts):
        rng = stream(cfg.master_seed, Role.PARAMETERS, rep, attempt)
        model = cfg.draw_model(rng, child_seed(cfg.master_seed, Role.REPETITION, rep, attempt))
        sample = generate(model)
        try:
            results = permutation_tests(
                sample,
                cfg.statistics,
                cfg.M,
                cfg.alpha_test,
                seed=child_seed(cfg.master_seed, Role.TEST, rep, attempt),
                step1plus=cfg.step1plus,
            )
        except ObservedStatisticError:
            continue
        rejects: list[bool | None] = []
        failed: list[int] = []
        if cfg.nonperm:
            kinds = [s.kind for s in cfg.statistics if s.kind in ("T", "W")]
            try:
                t_p, w_p = nonperm_pvalues(TwoSampleView.from_sample(sample))
                ps = {"T": t_p, "W": w_p}
                rejects += [ps[k] < cfg.alpha_test for k in kinds]
            except StatisticError:
                rejects += [None] * len(kinds)
            failed += [0] * len(kinds)
        rejects += [r.reject if not math.isnan(r.p_value) else None for r in results]
        failed += [r.failed_replicates for r in results]
        return _RepOutcome(tuple(rejects), tuple(failed), attempt + 1)
    n = len(_row_keys(cfg))
    return _RepOutcome((None,) * n, (0,) * n, cfg.max_attempts)


def _run_one(args):
    cfg, rep = args
    return run_repetition(cfg, rep)


def run_simulation(cfg: SimulationConfig) -> ResultTable:
    """Run ``cfg.num_reps`` repetitions and tally rejection rates.

    Repetitions run on a process pool when ``cfg.parallelism > 1`` and are
    reduced in repetition order.  A repetition whose statistic fails on the
    observed data is regenerated with fresh draws; the number of extra
    repetitions is reported, with a warning above 5% of ``num_reps``.
    """
    jobs = [(cfg, i) for i in range(cfg.num_reps)]
    if cfg.parallelism == 1:
        outcomes = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            outcomes = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * cfg.parallelism))))

    label = cfg.label or cfg.model
    extra = sum(o.attempts - 1 for o in outcomes)
    if extra > EXTRA_WARN_SHARE * cfg.num_reps:
        warnings.warn(
            f"{label}: {extra} repetitions regenerated after observed-statistic failures "
            f"(more than {EXTRA_WARN_SHARE:.0%} of {cfg.num_reps})",
            RuntimeWarning,
            stacklevel=2,
        )
    table = ResultTable(extra_repetitions={label: extra})
    for j, (stat, method) in enumerate(_row_keys(cfg)):
        flags = [o.rejects[j] for o in outcomes]
        table.cells.append(
            Cell(
                setting=label,
                statistic=stat,
                method=method,
                rejections=sum(1 for f in flags if f),
                num_reps=cfg.num_reps,
                failed_replicates=sum(o.failed_replicates[j] for o in outcomes),
                failed_reps=sum(1 for f in flags if f is None),
            )
        )
    return table


def run_many(configs: Sequence[SimulationConfig]) -> ResultTable:
    table = ResultTable()
    for cfg in configs:
        table.extend(run_simulation(cfg))
    return table


# ---------------------------------------------------------------------------
# presets for the reference simulation designs

_SHIFTS = (8.4, 8.0, 7.6, 7.2)
_GEOMETRIES = ((5, 36), (10, 36), (5, 48))


def _plan(r: int, n: int) -> PlanConfig:
    return PlanConfig(num_occasions=5, clusters_per_occasion=n, replaced_per_occasion=6, cluster_size=r)


def _percentile_specs(basis: str) -> tuple[StatisticSpec, ...]:
    return tuple(
        StatisticSpec(kind, level, basis if kind != "EM" else None)
        for level in (0.05, 0.5)
        for kind in ("EM", "EL", "ELR")
    )


def _grid(shifts):
    # the "higher" setting (first shift) is only run for r = 5, n = 36
    for r, n in _GEOMETRIES:
        for idx, shift in enumerate(shifts):
            if idx == 0 and (r, n) != (5, 36):
                continue
            yield r, n, idx + 1, shift


def preset(name: str, **overrides) -> list[SimulationConfig]:
    """Configurations for one reference simulation design.

    ``name`` is ``table1`` .. ``table5``.  Defaults follow the reference
    design (1000 repetitions, 201 permutations); pass ``num_reps``, ``M`` and
    similar keyword overrides to scale it down.
    """
    base = dict(num_reps=1000, M=201, alpha_test=0.05)
    base.update(overrides)
    out = []
    tw = (StatisticSpec("T"), StatisticSpec("W"))
    if name in ("table1", "table2"):
        specs = tw if name == "table1" else _percentile_specs("normal2")
        for sig in ((1.0, 1.0, 2.0), (1.0, 2.0, 3.0)):
            for r, n, idx, mu in _grid(_SHIFTS):
                label = f"{name} sigma={sig} r={r} n={n} mu=(8.0, {mu})"
                out.append(
                    SimulationConfig(
                        "normal", _plan(r, n), specs, nonperm=name == "table1", label=label,
                        means=(8.0, mu), sigmas=sig, **base,
                    )
                )
    elif name in ("table3", "table4"):
        specs = tw if name == "table3" else _percentile_specs("gamma2")
        for gam in ((2.0, 1.5), (2.0, 3.0)):
            for r, n, idx, eta in _grid(_SHIFTS):
                label = f"{name} gammas={gam} r={r} n={n} eta=(8.0, {eta})"
                out.append(
                    SimulationConfig(
                        "gamma", _plan(r, n), specs, nonperm=name == "table3", label=label,
                        etas=(8.0, eta), gammas=gam, **base,
                    )
                )
    elif name == "table5":
        specs = _percentile_specs("general3")
        for s1 in (2.0, 4.0):
            for r, n, idx, s2 in _grid((7.5, 6.0, 4.5, 3.0)):
                label = f"{name} sigma1={s1} r={r} n={n} setting={idx}"
                out.append(
                    SimulationConfig(
                        "noname", _plan(r, n), specs, nonperm=False, label=label,
                        sigma1=s1, sigma2s=(6.0, s2), **base,
                    )
                )
    else:
        raise ValueError(f"unknown preset {name!r}; choose table1 .. table5")
    return out
