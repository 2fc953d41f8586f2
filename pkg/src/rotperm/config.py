"""Flat ``key = value`` configuration files with dotted section names.

Example::

    # simulation setting
    model = normal
    plan.occasions = 5
    plan.clusters = 36
    normal.means = 8.0, 7.2
    test.stats = EM, EL, ELR
    test.level = 0.5

A ``[section]`` line prefixes the following keys with ``section.``.
Values stay strings here; :func:`to_simulation_config` converts them.
"""

from __future__ import annotations

from pathlib import Path

from .panel import PlanConfig
from .permute import StatisticSpec
from .sim import SimulationConfig

DEFAULT_BASIS = {"normal": "normal2", "gamma": "gamma2", "noname": "general3"}

KNOWN_KEYS = {
    "model",
    "plan.occasions",
    "plan.clusters",
    "plan.replaced",
    "plan.cluster_size",
    "test.stats",
    "test.level",
    "test.alpha",
    "test.perms",
    "test.basis",
    "test.step1plus",
    "test.two_sided",
    "sim.reps",
    "sim.seed",
    "sim.threads",
    "sim.label",
    "sim.nonperm",
    "normal.means",
    "normal.sigmas",
    "gamma.etas",
    "gamma.lambdas",
    "gamma.gammas",
    "noname.sigma1",
    "noname.sigma2s",
    "noname.population",
    "output.format",
    "output.path",
}


class ConfigError(ValueError):
    pass


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source} line {lineno}: empty key")
        key = f"{section}.{key}" if section else key
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source} line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def _floats(value: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in value.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {value!r}") from None


def _number(value: str, key: str, kind=float):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None


def _bool(value: str, key: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def parse_stat(text: str, level: float, basis: str, signed: bool = True) -> StatisticSpec:
    """``T``, ``W``, ``EM``, ``EL``, ``ELR``; ``KIND@level`` overrides the level."""
    kind, _, lvl = text.strip().partition("@")
    kind = kind.upper()
    if lvl:
        level = _number(lvl, "statistic level")
    try:
        return StatisticSpec(
            kind,
            level if kind in ("EM", "EL", "ELR") else None,
            basis if kind in ("EL", "ELR") else None,
            signed=signed,
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"statistic {text!r}: {exc}") from None


def statistics(values: dict[str, str], model: str = "normal") -> tuple[StatisticSpec, ...]:
    level = _number(values.get("test.level", "0.5"), "test.level")
    basis = values.get("test.basis", DEFAULT_BASIS.get(model, "normal2"))
    signed = not _bool(values.get("test.two_sided", "false"), "test.two_sided")
    names = [s for s in values.get("test.stats", "T").split(",") if s.strip()]
    return tuple(parse_stat(s, level, basis, signed) for s in names)


def plan_from(values: dict[str, str]) -> PlanConfig:
    try:
        return PlanConfig(
            _number(values.get("plan.occasions", "5"), "plan.occasions", int),
            _number(values.get("plan.clusters", "36"), "plan.clusters", int),
            _number(values.get("plan.replaced", "6"), "plan.replaced", int),
            _number(values.get("plan.cluster_size", "5"), "plan.cluster_size", int),
        )
    except ValueError as exc:
        raise ConfigError(f"plan: {exc}") from None


def to_simulation_config(values: dict[str, str]) -> SimulationConfig:
    """Build a :class:`SimulationConfig`; unspecified keys take the defaults."""
    model = values.get("model", "normal")
    kw: dict = {}
    for key, field, kind in (
        ("sim.reps", "num_reps", int),
        ("test.perms", "M", int),
        ("test.alpha", "alpha_test", float),
        ("sim.seed", "master_seed", int),
        ("sim.threads", "parallelism", int),
        ("noname.sigma1", "sigma1", float),
    ):
        if key in values:
            kw[field] = _number(values[key], key, kind)
    for key, field in (
        ("normal.means", "means"),
        ("normal.sigmas", "sigmas"),
        ("gamma.etas", "etas"),
        ("gamma.lambdas", "lambdas"),
        ("gamma.gammas", "gammas"),
        ("noname.sigma2s", "sigma2s"),
    ):
        if key in values:
            kw[field] = _floats(values[key], key)
    if "test.step1plus" in values:
        kw["step1plus"] = _bool(values["test.step1plus"], "test.step1plus")
    if "sim.nonperm" in values:
        kw["nonperm"] = _bool(values["sim.nonperm"], "sim.nonperm")
    if "sim.label" in values:
        kw["label"] = values["sim.label"]
    if "noname.population" in values:
        kw["population_path"] = values["noname.population"]
    try:
        return SimulationConfig(model, plan_from(values), statistics(values, model), **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
