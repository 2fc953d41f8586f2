"""Command line interface: ``rotperm {test,simulate,generate,validate}``.

Exit codes: 0 success, 2 configuration or input error, 3 statistic failure
on the observed data.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from pathlib import Path

from . import __version__
from ._rng import Role, child_seed, stream
from .config import ConfigError, KNOWN_KEYS, load_config, statistics, to_simulation_config
from .csvio import CsvFormatError, PanelValidationError, emit_csv, ingest_csv
from .permute import ObservedStatisticError, permutation_tests
from .sim import generate, preset, run_many, run_simulation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STATISTIC = 3

# flag destination -> config key
_FLAG_KEYS = {
    "model": "model",
    "level": "test.level",
    "alpha": "test.alpha",
    "perms": "test.perms",
    "reps": "sim.reps",
    "seed": "sim.seed",
    "threads": "sim.threads",
    "basis": "test.basis",
    "format": "output.format",
    "out": "output.path",
    "occasions": "plan.occasions",
    "clusters": "plan.clusters",
    "replaced": "plan.replaced",
    "cluster_size": "plan.cluster_size",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, *, plan: bool = False):
    p.add_argument("--config", help="key = value configuration file; flags override its keys")
    p.add_argument("--model", choices=("normal", "gamma", "noname"))
    p.add_argument("--stat", action="append", help="T, W, EM, EL or ELR, optionally KIND@level (repeatable)")
    p.add_argument("--level", type=float, help="quantile level alpha_q for EM/EL/ELR (default 0.5)")
    p.add_argument("--alpha", type=float, help="nominal test level alpha_test (default 0.05)")
    p.add_argument("--perms", type=int, metavar="M", help="number of permutations")
    p.add_argument("--reps", type=int, help="simulation repetitions")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--threads", type=int, help="worker count")
    p.add_argument("--basis", help="DRM basis: normal2, gamma2, general3, linear")
    p.add_argument("--no-step1plus", action="store_true", help="do not reassign rotation-only clusters")
    p.add_argument("--two-sided", action="store_true", help="use the unsigned ELR statistic")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("text", "csv", "json"))
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    if plan:
        p.add_argument("--occasions", type=int, help="K+1")
        p.add_argument("--clusters", type=int, help="clusters per occasion n")
        p.add_argument("--replaced", type=int, help="clusters replaced per occasion m")
        p.add_argument("--cluster-size", type=int, help="units per cluster r")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rotperm", description="Permutation tests for clustered rotating-panel data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test", help="run permutation tests on one CSV dataset")
    p.add_argument("data", help="panel CSV (occasion,cluster_id,unit,value)")
    _common(p)

    p = sub.add_parser("simulate", help="run a simulation study and print the rejection table")
    p.add_argument("--preset", choices=[f"table{i}" for i in range(1, 6)], help="reference simulation design")
    _common(p, plan=True)

    p = sub.add_parser("generate", help="write one synthetic panel as CSV")
    _common(p, plan=True)

    p = sub.add_parser("validate", help="check a panel CSV against the schema and rotation rules")
    p.add_argument("data")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    return parser


def _settings(args) -> dict[str, str]:
    values = load_config(args.config) if getattr(args, "config", None) else {}
    for item in getattr(args, "set", []):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in KNOWN_KEYS:
            raise ConfigError(f"--set expects KEY=VALUE with a known key, got {item!r}")
        values[key] = value.strip()
    for dest, key in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[key] = str(v)
    if getattr(args, "stat", None):
        values["test.stats"] = ",".join(args.stat)
    if getattr(args, "no_step1plus", False):
        values["test.step1plus"] = "false"
    if getattr(args, "two_sided", False):
        values["test.two_sided"] = "true"
    return values


def _write(text: str, path: str | None):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _render_results(results, fmt: str) -> str:
    rows = [r.as_dict() for r in results]
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    lines = []
    for r in results:
        decision = "reject" if r.reject else "do not reject"
        lines.append(
            f"{r.spec.label}: observed = {r.observed:.6g}, p* = {r.p_value:.4f}, "
            f"{decision} at alpha_test = {r.alpha_test:g}, "
            f"failed replicates = {r.failed_replicates}/{r.replicates.size}"
        )
    return "\n".join(lines) + "\n"


def cmd_test(args) -> int:
    values = _settings(args)
    sample = ingest_csv(args.data)
    specs = statistics(values, values.get("model", "normal"))
    M = int(values.get("test.perms", "999"))
    alpha = float(values.get("test.alpha", "0.05"))
    seed = int(values.get("sim.seed", "0"))
    step1plus = values.get("test.step1plus", "true").lower() not in ("false", "0", "no", "off")
    try:
        results = permutation_tests(sample, specs, M, alpha, seed=seed, step1plus=step1plus)
    except ObservedStatisticError as exc:
        print(f"rotperm: {exc}", file=sys.stderr)
        return EXIT_STATISTIC
    _write(_render_results(results, values.get("output.format", "text")), values.get("output.path"))
    return EXIT_OK


def cmd_simulate(args) -> int:
    values = _settings(args)
    if args.preset:
        overrides = {}
        for key, field, kind in (
            ("sim.reps", "num_reps", int),
            ("test.perms", "M", int),
            ("test.alpha", "alpha_test", float),
            ("sim.seed", "master_seed", int),
            ("sim.threads", "parallelism", int),
        ):
            if key in values:
                overrides[field] = kind(values[key])
        if "test.step1plus" in values:
            overrides["step1plus"] = values["test.step1plus"].lower() not in ("false", "0", "no", "off")
        table = run_many(preset(args.preset, **overrides))
    else:
        table = run_simulation(to_simulation_config(values))
    _write(table.render(values.get("output.format", "text")), values.get("output.path"))
    return EXIT_OK


def cmd_generate(args) -> int:
    values = _settings(args)
    values.setdefault("test.stats", "T")
    cfg = to_simulation_config(values)
    model = cfg.draw_model(
        stream(cfg.master_seed, Role.PARAMETERS, 0, 0), child_seed(cfg.master_seed, Role.REPETITION, 0, 0)
    )
    sample = generate(model)
    path = values.get("output.path")
    if path:
        emit_csv(sample, path)
    else:
        emit_csv(sample, sys.stdout)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        sample = ingest_csv(args.data)
    except PanelValidationError as exc:
        problems = [str(v) for v in exc.violations]
    else:
        problems = []
    if args.format == "json":
        text = json.dumps({"valid": not problems, "violations": problems}, indent=2) + "\n"
    elif problems:
        text = "invalid panel:\n" + "".join(f"  {p}\n" for p in problems)
    else:
        p = sample.plan
        text = (
            f"valid panel: K+1={p.num_occasions} n={p.clusters_per_occasion} "
            f"m={p.replaced_per_occasion} r={p.cluster_size}\n"
        )
    _write(text, args.out)
    return EXIT_OK if not problems else EXIT_CONFIG


COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "generate": cmd_generate, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            return COMMANDS[args.command](args)
    except (ConfigError, CsvFormatError, PanelValidationError, OSError, ValueError) as exc:
        print(f"rotperm: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"rotperm: warning: {message}", file=sys.stderr)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
