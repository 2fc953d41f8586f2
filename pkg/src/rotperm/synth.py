"""Synthetic rotating-panel samples with longitudinal and cross-sectional effects.

Three generators are provided: clustered normal data, clustered Gamma data,
and biased resampling of a finite population ("no-name" data).  All use the
canonical rotation ``s_k = {k m + 1, ..., k m + n}``.

Longitudinal effects are drawn from a stream keyed by cluster id only and
cross-sectional effects and unit noise from a stream keyed by
``(cluster id, occasion)``.  A sample truncated to its first occasions is
therefore bit-identical to one generated with fewer occasions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from ._rng import Role, Seed, stream
from .panel import PlanConfig, RotatingPanelSample


def _vec(x, name, length=None) -> tuple[float, ...]:
    out = tuple(float(v) for v in np.atleast_1d(x))
    if length is not None and len(out) != length:
        raise ValueError(f"{name} has length {len(out)}, expected {length}")
    return out


@dataclass(frozen=True)
class NormalModelConfig:
    """``y = mu_k + sigma1 eta_i + sigma2 eta_{k,i} + sigma3 eps_{k,i,u}``."""

    means: Sequence[float]
    sigma1: float
    sigma2: float
    sigma3: float
    plan: PlanConfig
    seed: Seed = 0

    def __post_init__(self):
        object.__setattr__(self, "means", _vec(self.means, "means", self.plan.num_occasions))
        # zero sigmas give the degenerate no-cluster model
        if min(self.sigma1, self.sigma2, self.sigma3) < 0 or self.sigma3 == 0:
            raise ValueError("sigmas must be >= 0 and sigma3 > 0")


@dataclass(frozen=True)
class GammaModelConfig:
    """``y_{k,j} = lambda_k (eps_j + eps_{k,j} + x_{k,j})`` with unit-scale Gamma parts."""

    gamma1: float
    gamma2: float
    etas: Sequence[float]
    lambdas: Sequence[float]
    plan: PlanConfig
    seed: Seed = 0

    def __post_init__(self):
        K1 = self.plan.num_occasions
        object.__setattr__(self, "etas", _vec(self.etas, "etas", K1))
        object.__setattr__(self, "lambdas", _vec(self.lambdas, "lambdas", K1))
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ValueError("gamma1 and gamma2 must be > 0")
        if min(self.etas) <= 0 or min(self.lambdas) <= 0:
            raise ValueError("etas and lambdas must be > 0")


@dataclass(frozen=True)
class NoNameModelConfig:
    """Biased draws from a finite population.

    Cluster ``j`` on occasion ``k`` draws ``r`` population values with
    probability proportional to ``x ** (sigma1 * eps_j + sigma2s[k] * eps_kj)``
    (``eps`` uniform), each multiplied by a Gamma(shape, scale) factor.
    """

    population: np.ndarray
    sigma1: float
    sigma2s: Sequence[float]
    plan: PlanConfig
    lambda_shape: float = 20.0
    lambda_scale: float = 0.05
    seed: Seed = 0
    _logpop: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pop = np.asarray(self.population, dtype=float).ravel()
        if pop.size == 0 or np.any(pop <= 0):
            raise ValueError("population values must be positive")
        object.__setattr__(self, "population", pop)
        object.__setattr__(self, "_logpop", np.log(pop))
        object.__setattr__(self, "sigma2s", _vec(self.sigma2s, "sigma2s", self.plan.num_occasions))
        if self.sigma1 < 0 or min(self.sigma2s) < 0:
            raise ValueError("sigma1 and sigma2s must be >= 0")
        if self.lambda_shape <= 0 or self.lambda_scale <= 0:
            raise ValueError("lambda_shape and lambda_scale must be > 0")


def _assemble(plan: PlanConfig, draw_cluster) -> RotatingPanelSample:
    occ, ids, rows = [], [], []
    for k in range(plan.num_occasions):
        for i in plan.canonical_membership(k):
            occ.append(k)
            ids.append(int(i))
            rows.append(draw_cluster(k, int(i)))
    return RotatingPanelSample(plan, np.array(occ), np.array(ids), np.array(rows))


def _longitudinal(seed: Seed, plan: PlanConfig, draw) -> dict[int, float]:
    total = plan.total_clusters()
    return {i: draw(stream(seed, Role.LONGITUDINAL, i)) for i in range(1, total + 1)}


def generate_normal(cfg: NormalModelConfig) -> RotatingPanelSample:
    plan, r = cfg.plan, cfg.plan.cluster_size
    eta = _longitudinal(cfg.seed, plan, lambda g: g.standard_normal())

    def cluster(k, i):
        g = stream(cfg.seed, Role.CROSS_SECTIONAL, i, k)
        eta_ki = g.standard_normal()
        eps = g.standard_normal(r)
        return cfg.means[k] + cfg.sigma1 * eta[i] + cfg.sigma2 * eta_ki + cfg.sigma3 * eps

    return _assemble(plan, cluster)


def generate_gamma(cfg: GammaModelConfig) -> RotatingPanelSample:
    plan, r = cfg.plan, cfg.plan.cluster_size
    eps = _longitudinal(cfg.seed, plan, lambda g: g.standard_gamma(cfg.gamma1))

    def cluster(k, i):
        g = stream(cfg.seed, Role.CROSS_SECTIONAL, i, k)
        eps_ki = g.standard_gamma(cfg.gamma2)
        x = g.standard_gamma(cfg.etas[k], size=r)
        return cfg.lambdas[k] * (eps[i] + eps_ki + x)

    return _assemble(plan, cluster)


def generate_noname(cfg: NoNameModelConfig) -> RotatingPanelSample:
    plan, r = cfg.plan, cfg.plan.cluster_size
    eps = _longitudinal(cfg.seed, plan, lambda g: g.random())
    pop, logpop = cfg.population, cfg._logpop

    def cluster(k, i):
        g = stream(cfg.seed, Role.CROSS_SECTIONAL, i, k)
        power = cfg.sigma1 * eps[i] + cfg.sigma2s[k] * g.random()
        logw = power * logpop
        w = np.exp(logw - logw.max())
        cdf = np.cumsum(w)
        idx = np.searchsorted(cdf, g.random(r) * cdf[-1], side="right")
        lam = g.gamma(cfg.lambda_shape, cfg.lambda_scale, size=r)
        return lam * pop[np.minimum(idx, pop.size - 1)]

    return _assemble(plan, cluster)


def load_population(path: str | Path | None = None) -> np.ndarray:
    """Read a one-column population file; ``None`` loads the bundled stand-in.

    Blank lines and ``#`` comments are skipped.  The bundled file is synthetic
    (a Gamma-shaped population of 825 values with mean near 6.57 and variance
    near 2.82) and is *not* a real lumber-strength dataset.
    """
    if path is None:
        text = resources.files("rotperm").joinpath("data/standin_population.txt").read_text()
    else:
        text = Path(path).read_text()
    vals = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            vals.append(float(line))
        except ValueError:
            raise ValueError(f"population file line {lineno}: not a number: {line!r}") from None
    return np.array(vals)
