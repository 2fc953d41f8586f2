"""Permutation tests for clustered data from rotating panel surveys."""

__version__ = "0.1.0"

from .drm import (
    BasisFunction,
    ConstrainedFit,
    DrmFit,
    convex_hull_check,
    el_statistic,
    elr_statistic,
    fit_constrained,
    fit_profile,
    signed_elr_statistic,
)
from .errors import (
    BasisDomainError,
    ConvexHullError,
    DegenerateSampleError,
    PercentileRangeError,
    ProfileFitError,
    SolverDivergedError,
    StatisticError,
)
from .panel import PlanConfig, RotatingPanelSample, canonical_sample, overlap_sets, validate
from .permute import (
    ObservedStatisticError,
    PermutationResult,
    StatisticSpec,
    permutation_test,
    permutation_tests,
    permute_once,
    uniformity_probe,
)
from .stats import TwoSampleView, em_statistic, t_statistic, wilcoxon_statistic
from .synth import (
    GammaModelConfig,
    NoNameModelConfig,
    NormalModelConfig,
    generate_gamma,
    generate_noname,
    generate_normal,
    load_population,
)
from .csvio import emit_csv, ingest_csv
from .sim import ResultTable, SimulationConfig, nonperm_pvalues, run_simulation
from .estimators import ClusteredPermutationTest, DensityRatioModel, check_sample

__all__ = [name for name in dir() if not name.startswith("_")]
