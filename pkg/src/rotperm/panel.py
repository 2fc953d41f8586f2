"""Rotating-panel data model.

A sample is stored as three aligned arrays: one row per (occasion, cluster)
pair, holding the ``r`` unit responses of that cluster on that occasion.
Rows are kept sorted by ``(occasion, cluster_id)``.  Membership sets ``s_k``
are derived from the rows, so rotation with dropouts is representable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class PlanConfig:
    """Rotation geometry: ``K+1`` occasions, ``n = m * N`` clusters of size ``r``."""

    num_occasions: int
    clusters_per_occasion: int
    replaced_per_occasion: int
    cluster_size: int

    def __post_init__(self):
        if self.num_occasions < 1:
            raise ValueError("num_occasions must be >= 1")
        if self.clusters_per_occasion < 1:
            raise ValueError("clusters_per_occasion must be >= 1")
        if self.replaced_per_occasion < 1:
            raise ValueError("replaced_per_occasion must be >= 1")
        if self.cluster_size < 1:
            raise ValueError("cluster_size must be >= 1")
        if self.clusters_per_occasion % self.replaced_per_occasion:
            raise ValueError(
                f"clusters_per_occasion ({self.clusters_per_occasion}) must be a "
                f"multiple of replaced_per_occasion ({self.replaced_per_occasion})"
            )

    @property
    def full_rotation(self) -> int:
        """N, the number of occasions after which the panel is fully replaced."""
        return self.clusters_per_occasion // self.replaced_per_occasion

    @property
    def K(self) -> int:
        return self.num_occasions - 1

    def canonical_membership(self, k: int) -> np.ndarray:
        """Cluster ids of the canonical rotation, ``s_k = {k m + 1, ..., k m + n}``."""
        start = k * self.replaced_per_occasion + 1
        return np.arange(start, start + self.clusters_per_occasion)

    def total_clusters(self) -> int:
        return self.clusters_per_occasion + self.K * self.replaced_per_occasion


@dataclass(frozen=True)
class ClusterObservation:
    occasion: int
    cluster_id: int
    values: np.ndarray


@dataclass(frozen=True)
class Violation:
    """One failed invariant. ``where`` holds the offending (k, i) or (k1, k2)."""

    kind: str
    where: tuple
    message: str

    def __str__(self):
        return f"{self.kind} at {self.where}: {self.message}"


@dataclass(frozen=True, eq=False)
class RotatingPanelSample:
    """Multi-occasion clustered dataset ``{y_{k,i,u}}``.

    Parameters
    ----------
    plan : PlanConfig
    occasions, cluster_ids : int arrays of length C
        The (k, i) label of each row.
    values : float array of shape (C, r')
        Unit responses; ``r'`` should equal ``plan.cluster_size``.

    Construction only checks array shapes; use :func:`validate` to check the
    rotation invariants.
    """

    plan: PlanConfig
    occasions: np.ndarray
    cluster_ids: np.ndarray
    values: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        occ = np.asarray(self.occasions, dtype=np.int64)
        ids = np.asarray(self.cluster_ids, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError("values must be 2-D (rows x units)")
        if not (occ.shape == ids.shape == (vals.shape[0],)):
            raise ValueError("occasions, cluster_ids and values rows must align")
        order = np.lexsort((ids, occ))
        occ, ids, vals = occ[order], ids[order], vals[order]
        for a in (occ, ids, vals):
            a.setflags(write=False)
        object.__setattr__(self, "occasions", occ)
        object.__setattr__(self, "cluster_ids", ids)
        object.__setattr__(self, "values", vals)
        index = {}
        for row, key in enumerate(zip(occ.tolist(), ids.tolist())):
            index.setdefault(key, []).append(row)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_observations(
        cls, plan: PlanConfig, observations: Iterable[ClusterObservation]
    ) -> "RotatingPanelSample":
        obs = list(observations)
        sizes = {len(np.atleast_1d(o.values)) for o in obs}
        if len(sizes) > 1:
            raise ValueError(f"inconsistent cluster sizes {sorted(sizes)}")
        r = sizes.pop() if sizes else plan.cluster_size
        values = np.array([np.atleast_1d(o.values) for o in obs], dtype=float).reshape(-1, r)
        return cls(
            plan,
            np.array([o.occasion for o in obs], dtype=np.int64),
            np.array([o.cluster_id for o in obs], dtype=np.int64),
            values,
        )

    @property
    def num_occasions(self) -> int:
        return self.plan.num_occasions

    def membership(self, k: int) -> np.ndarray:
        """Sorted cluster ids ``s_k`` observed on occasion ``k``."""
        return np.unique(self.cluster_ids[self.occasions == k])

    def observation(self, k: int, i: int) -> ClusterObservation:
        rows = self._index.get((k, i))
        if not rows:
            raise KeyError((k, i))
        return ClusterObservation(k, i, self.values[rows[0]])

    def occasion_values(self, k: int) -> np.ndarray:
        """All responses on occasion ``k``, flattened."""
        return self.values[self.occasions == k].ravel()

    def rows(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.occasions == k)

    def with_values(self, values: np.ndarray) -> "RotatingPanelSample":
        """Same labels, new responses (rows in this sample's order).

        The rows are already sorted, so the label arrays and index are shared
        instead of rebuilt; this is the hot path of permutation replicates.
        """
        vals = np.array(values, dtype=float)
        if vals.shape != self.values.shape:
            raise ValueError(f"values shape {vals.shape} does not match {self.values.shape}")
        vals.setflags(write=False)
        new = object.__new__(RotatingPanelSample)
        for name, v in (
            ("plan", self.plan),
            ("occasions", self.occasions),
            ("cluster_ids", self.cluster_ids),
            ("values", vals),
            ("_index", self._index),
        ):
            object.__setattr__(new, name, v)
        return new

    def truncate(self, num_occasions: int) -> "RotatingPanelSample":
        keep = self.occasions < num_occasions
        plan = PlanConfig(
            num_occasions,
            self.plan.clusters_per_occasion,
            self.plan.replaced_per_occasion,
            self.plan.cluster_size,
        )
        return RotatingPanelSample(
            plan, self.occasions[keep], self.cluster_ids[keep], self.values[keep]
        )

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (values, occasion label per value) over every occasion."""
        r = self.values.shape[1]
        return self.values.ravel(), np.repeat(self.occasions, r)

    def __eq__(self, other):
        if not isinstance(other, RotatingPanelSample):
            return NotImplemented
        return (
            self.plan == other.plan
            and np.array_equal(self.occasions, other.occasions)
            and np.array_equal(self.cluster_ids, other.cluster_ids)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def canonical_sample(
    plan: PlanConfig, values: Mapping[tuple[int, int], Sequence[float]] | np.ndarray
) -> RotatingPanelSample:
    """Build a sample on the canonical rotation.

    ``values`` is either a mapping ``(k, i) -> r values`` or an array of shape
    ``(K+1, n, r)`` ordered by occasion and then by cluster id within ``s_k``.
    """
    occ, ids, rows = [], [], []
    arr = None if isinstance(values, Mapping) else np.asarray(values, dtype=float)
    for k in range(plan.num_occasions):
        for pos, i in enumerate(plan.canonical_membership(k)):
            occ.append(k)
            ids.append(int(i))
            rows.append(arr[k, pos] if arr is not None else values[(k, int(i))])
    return RotatingPanelSample(plan, np.array(occ), np.array(ids), np.array(rows, dtype=float))


def validate(sample: RotatingPanelSample) -> list[Violation]:
    """Every violated rotation invariant, empty if the sample is well formed."""
    plan = sample.plan
    out: list[Violation] = []
    n, m, r = plan.clusters_per_occasion, plan.replaced_per_occasion, plan.cluster_size

    for key, rows in sample._index.items():
        if len(rows) > 1:
            out.append(Violation("duplicate", key, f"{len(rows)} observations for one cluster-occasion"))
    bad_occ = sorted(set(sample.occasions.tolist()) - set(range(plan.num_occasions)))
    for k in bad_occ:
        out.append(Violation("occasion-range", (k,), f"occasion {k} outside 0..{plan.K}"))

    if sample.values.shape[1] != r:
        out.append(
            Violation("cluster-size", (), f"clusters have {sample.values.shape[1]} units, plan says {r}")
        )
    nonfinite = ~np.isfinite(sample.values).all(axis=1)
    for row in np.flatnonzero(nonfinite):
        key = (int(sample.occasions[row]), int(sample.cluster_ids[row]))
        out.append(Violation("non-finite", key, "non-finite response"))

    members = [set(sample.membership(k).tolist()) for k in range(plan.num_occasions)]
    for k, s in enumerate(members):
        if len(s) != n:
            expected = set(plan.canonical_membership(k).tolist())
            missing = sorted(expected - s)
            detail = f"; missing canonical ids {missing}" if missing and len(s) < n else ""
            out.append(Violation("occasion-size", (k, *missing), f"|s_{k}| = {len(s)}, expected {n}{detail}"))
    for k in range(plan.num_occasions - 1):
        if len(members[k]) != n or len(members[k + 1]) != n:
            continue  # already reported as an occasion-size violation
        both = len(members[k] & members[k + 1])
        if both != n - m:
            out.append(
                Violation("overlap", (k, k + 1), f"|s_{k} & s_{k + 1}| = {both}, expected {n - m}")
            )
    return out


def overlap_sets(sample: RotatingPanelSample, k1: int, k2: int) -> tuple[set, set, set]:
    """Partition ``s_k1 | s_k2`` into (both, only in k1, only in k2)."""
    K1 = sample.plan.num_occasions
    for k in (k1, k2):
        if not 0 <= k < K1:
            raise IndexError(f"occasion {k} out of range 0..{K1 - 1}")
    if k1 == k2:
        raise ValueError("k1 and k2 must differ")
    a = set(sample.membership(k1).tolist())
    b = set(sample.membership(k2).tolist())
    return a & b, a - b, b - a
