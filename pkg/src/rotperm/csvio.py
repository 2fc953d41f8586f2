"""Panel data as CSV: one row per unit, ``occasion,cluster_id,unit,value``."""

from __future__ import annotations

import csv
import warnings
from pathlib import Path
from typing import TextIO

import numpy as np

from .panel import PlanConfig, RotatingPanelSample, validate

HEADER = ("occasion", "cluster_id", "unit", "value")


class CsvFormatError(ValueError):
    """The file does not follow the panel CSV schema."""


class PanelValidationError(ValueError):
    """The file parses but the panel violates the rotation invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n  ".join(str(v) for v in self.violations)
        super().__init__(f"{len(self.violations)} validation error(s):\n  {lines}")


def _int(text: str, what: str, lineno: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise CsvFormatError(f"line {lineno}: {what} must be an integer, got {text!r}") from None


def parse_rows(handle: TextIO, source: str = "<input>") -> dict[tuple[int, int], dict[int, float]]:
    """Read the CSV into ``{(occasion, cluster_id): {unit: value}}``."""
    reader = csv.reader(handle)
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError(f"{source}: empty file, expected header {','.join(HEADER)}") from None
    if tuple(h.strip() for h in header) != HEADER:
        raise CsvFormatError(f"{source} line 1: header must be {','.join(HEADER)}, got {','.join(header)}")
    cells: dict[tuple[int, int], dict[int, float]] = {}
    for row in reader:
        lineno = reader.line_num
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != 4:
            raise CsvFormatError(f"{source} line {lineno}: expected 4 fields, got {len(row)}")
        occ = _int(row[0].strip(), "occasion", lineno)
        cid = _int(row[1].strip(), "cluster_id", lineno)
        unit = _int(row[2].strip(), "unit", lineno)
        try:
            value = float(row[3])
        except ValueError:
            raise CsvFormatError(f"{source} line {lineno}: value must be a decimal number, got {row[3]!r}") from None
        if occ < 0:
            raise CsvFormatError(f"{source} line {lineno}: occasion must be >= 0")
        units = cells.setdefault((occ, cid), {})
        if unit in units:
            raise CsvFormatError(
                f"{source} line {lineno}: duplicate observation for occasion {occ}, cluster {cid}, unit {unit}"
            )
        units[unit] = value
    if not cells:
        raise CsvFormatError(f"{source}: no data rows")
    return cells


def infer_plan(cells) -> PlanConfig:
    """Plan geometry from the observed memberships.

    ``K+1`` is one more than the largest occasion, ``n`` the size of
    ``s_0``, ``r`` the common cluster size and ``m = n - |s_0 & s_1|``.
    """
    sizes = {len(u) for u in cells.values()}
    if len(sizes) != 1:
        raise CsvFormatError(f"inconsistent cluster size: clusters have {sorted(sizes)} units")
    K1 = max(k for k, _ in cells) + 1
    members = [{i for k, i in cells if k == occ} for occ in range(min(K1, 2))]
    n = len(members[0])
    if n == 0:
        raise CsvFormatError("occasion 0 has no clusters")
    m = n - len(members[0] & members[1]) if K1 > 1 else n
    if m == 0:
        raise CsvFormatError("occasions 0 and 1 have identical clusters; no rotation to infer")
    if n % m:
        raise CsvFormatError(f"{n} clusters per occasion is not a multiple of the {m} replaced clusters")
    return PlanConfig(K1, n, m, sizes.pop())


def ingest_csv(path: str | Path) -> RotatingPanelSample:
    """Read and validate a panel CSV.

    Raises
    ------
    CsvFormatError
        Malformed rows (the message names the line), duplicates or
        inconsistent cluster sizes.
    PanelValidationError
        If the inferred panel violates the rotation invariants.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        cells = parse_rows(fh, str(path))
    plan = infer_plan(cells)
    keys = sorted(cells)
    units = [sorted(cells[k]) for k in keys]
    if any(u != units[0] for u in units):
        raise CsvFormatError("clusters use different unit labels")
    values = np.array([[cells[k][u] for u in units[0]] for k in keys])
    sample = RotatingPanelSample(
        plan, np.array([k for k, _ in keys]), np.array([i for _, i in keys]), values
    )
    violations = validate(sample)
    if violations:
        raise PanelValidationError(violations)
    if plan.num_occasions > 1 and plan.replaced_per_occasion == plan.clusters_per_occasion:
        warnings.warn(
            "occasions 0 and 1 share no clusters: Step I has no clusters to swap and the "
            "permutation test reduces to Step I+ only",
            UserWarning,
            stacklevel=2,
        )
    return sample


def emit_csv(sample: RotatingPanelSample, dest: str | Path | TextIO) -> None:
    """Write ``sample`` in the panel CSV schema (units numbered from 1).

    Values are written with ``repr`` precision so reading them back gives
    identical floats.
    """
    if isinstance(dest, (str, Path)):
        with Path(dest).open("w", newline="", encoding="utf-8") as fh:
            emit_csv(sample, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(HEADER)
    for k, i, row in zip(sample.occasions, sample.cluster_ids, sample.values):
        for u, v in enumerate(row, 1):
            writer.writerow((int(k), int(i), u, repr(float(v))))
