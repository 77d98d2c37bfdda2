"""Command-line front end: ``adabo {optimize,benchmark,sensitivity,report}``.

Experiments are described by a YAML file. A minimal optimize config is::

    objective: {name: Sphere, dim: 2}
    variant: BO

Everything else has defaults (16 initial points, 50 iterations, 5 seeds).
``ADABO_OUT`` and ``ADABO_WORKERS`` override the output directory and the
worker count; the ``--out`` and ``--workers`` flags override both.

Exit codes: 0 success, 1 a run failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .acquisition import AcquisitionKind, AcquisitionTag
from .bench import (
    ObjectiveName,
    SyntheticObjective,
    load_ensembles,
    reference_configs,
    run_ensemble,
)
from .gpi import GpiConfig
from .kernels import KernelFamily, KernelSpec
from .optimizer import (
    DEFAULT_ACQUISITIONS,
    ExternalObjective,
    GpiCondition,
    ObjectiveError,
    OptimizerConfig,
    Variant,
    recommend,
)
from .report import emit_history_plotdata, emit_table, wcri_report
from .selection import EsSchedule, SelectionStrategy
from .sensitivity import convergence_curve, ishigami, report_to_text

log = logging.getLogger("adabo")

EXIT_OK, EXIT_RUN_FAILURE, EXIT_CONFIG = 0, 1, 2
MODES = ("optimize", "benchmark", "sensitivity")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


# ---------------------------------------------------------------- schema

_OBJECTIVE_KEYS = {"name", "dim", "command", "timeout", "a", "b"}
_OPTIMIZER_KEYS = {
    "variant", "kernel", "fixed", "acquisition", "beta", "acquisitions", "selection",
    "gpi_trials", "gpi_period", "gpi_condition", "gpi_relmse", "gpi_test_fraction", "gpi_depth",
    "es_start", "es_end", "es_values", "restarts", "warm_restarts", "acq_seeds", "acq_steps",
}
_SENSITIVITY_KEYS = {"n_base", "level", "resamples", "names"}
_TOP_KEYS = {
    "mode", "objective", "objectives", "n_init", "iterations", "seeds", "shared_init", "out",
    "workers", "delimiter", "optimizers", "reference", "challengers", "sensitivity",
} | _OPTIMIZER_KEYS


@dataclass
class ObjectiveSpec:
    name: str
    dim: int
    command: list[str] | None = None
    timeout: float = 60.0
    a: float = 7.0
    b: float = 0.1

    @property
    def label(self) -> str:
        return f"{self.name}-{self.dim}D"

    def build(self):
        if self.name == "external":
            return ExternalObjective(self.command, self.timeout, dim=self.dim)
        if self.name == "Ishigami":
            a, b = self.a, self.b
            return lambda U: ishigami(U, a, b)
        return SyntheticObjective(self.name, self.dim)


@dataclass
class ExperimentSpec:
    mode: str
    objectives: list[ObjectiveSpec]
    optimizers: list[OptimizerConfig] = field(default_factory=list)
    reference: list[OptimizerConfig] = field(default_factory=list)
    challengers: list[OptimizerConfig] = field(default_factory=list)
    seeds: list[int] = field(default_factory=lambda: list(range(5)))
    n_init: int = 16
    iterations: int = 50
    shared_init: bool = True
    out: str = "adabo-out"
    workers: int = 1
    delimiter: str = ","
    n_base: list[int] = field(default_factory=lambda: [256, 512, 1024])
    level: float = 0.95
    resamples: int = 1000
    names: list[str] | None = None


def _reject_unknown(d: dict, allowed: set, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key {unknown[0]!r}")


def _int(d, key, where, default, lo=None):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{where}.{key}: must be >= {lo}, got {v}")
    return v


def _float(d, key, where, default, lo=None, hi=None):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: expected a finite number, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{where}.{key}: must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(f"{where}.{key}: must be <= {hi}, got {v}")
    return float(v)


def _objective(d, where) -> ObjectiveSpec:
    if isinstance(d, str):
        d = {"name": d}
    _reject_unknown(d, _OBJECTIVE_KEYS, where)
    if "name" not in d:
        raise ConfigError(f"{where}.name: required")
    name = str(d["name"])
    if name.lower() == "external":
        cmd = d.get("command")
        if isinstance(cmd, str):
            cmd = cmd.split()
        if not cmd or not all(isinstance(c, str) for c in cmd):
            raise ConfigError(f"{where}.command: required for an external objective")
        if "dim" not in d:
            raise ConfigError(f"{where}.dim: required for an external objective")
        return ObjectiveSpec("external", _int(d, "dim", where, None, 1), list(cmd),
                             _float(d, "timeout", where, 60.0, lo=0.001))
    if name.lower() == "ishigami":
        return ObjectiveSpec("Ishigami", 3, a=_float(d, "a", where, 7.0), b=_float(d, "b", where, 0.1))
    try:
        name = ObjectiveName.parse(name).value
    except ValueError:
        raise ConfigError(f"{where}.name: unknown objective {name!r}") from None
    return ObjectiveSpec(name, _int(d, "dim", where, 2, 1))


def _acquisition(v, where, beta=None) -> AcquisitionKind:
    if isinstance(v, dict):
        _reject_unknown(v, {"name", "beta"}, where)
        beta = v.get("beta")
        v = v.get("name")
    try:
        tag = AcquisitionTag.parse(v)
    except ValueError:
        raise ConfigError(f"{where}: unknown acquisition {v!r}") from None
    if beta is not None:
        if isinstance(beta, bool) or not isinstance(beta, (int, float)) or not math.isfinite(beta) or beta < 0:
            raise ConfigError(f"{where}.beta: must be a finite number >= 0, got {beta!r}")
    return AcquisitionKind(tag, beta)


def _optimizer(d, where, n_iter) -> OptimizerConfig:
    _reject_unknown(d, _OPTIMIZER_KEYS, where)
    try:
        variant = Variant.parse(d.get("variant", "BO"))
    except ValueError:
        raise ConfigError(f"{where}.variant: unknown variant {d.get('variant')!r}") from None
    if "beta" in d:
        _float(d, "beta", where, None, lo=0.0)
    try:
        kernel = KernelSpec(KernelFamily.parse(d.get("kernel", "Matern32")), fixed=dict(d.get("fixed") or {}))
    except ValueError as exc:
        raise ConfigError(f"{where}.kernel: {exc}") from None
    acq = _acquisition(d.get("acquisition", "LogEI"), f"{where}.acquisition", d.get("beta"))
    acqs = DEFAULT_ACQUISITIONS
    if "acquisitions" in d:
        items = d["acquisitions"]
        if not isinstance(items, list) or not items:
            raise ConfigError(f"{where}.acquisitions: expected a non-empty list")
        acqs = tuple(_acquisition(a, f"{where}.acquisitions[{j}]") for j, a in enumerate(items))
    try:
        selection = SelectionStrategy.parse(d.get("selection", "Uniform"))
    except ValueError:
        raise ConfigError(f"{where}.selection: unknown strategy {d.get('selection')!r}") from None
    depth = _int(d, "gpi_depth", where, 2, 0)
    if depth > 2:
        raise ConfigError(f"{where}.gpi_depth: must be <= 2, got {depth}")
    gpi = GpiConfig(
        trial_threshold=_int(d, "gpi_trials", where, 20, 1),
        relmse_threshold=_float(d, "gpi_relmse", where, 0.05, lo=0.0),
        test_fraction=_float(d, "gpi_test_fraction", where, 0.2, lo=0.01, hi=0.99),
        max_depth=depth,
    )
    kind = d.get("gpi_condition", "periodic")
    if kind not in ("periodic", "stagnation", "never"):
        raise ConfigError(f"{where}.gpi_condition: expected periodic, stagnation or never, got {kind!r}")
    cond = GpiCondition(kind, _int(d, "gpi_period", where, 25, 1))
    es_values = d.get("es_values")
    if es_values is not None:
        if not isinstance(es_values, list) or not es_values:
            raise ConfigError(f"{where}.es_values: expected a non-empty list")
        es = EsSchedule(values=tuple(float(v) for v in es_values))
    else:
        es = EsSchedule(_float(d, "es_start", where, 0.5), _float(d, "es_end", where, 2.0))
    restarts = _int(d, "restarts", where, 8, 0)
    warm_restarts = _int(d, "warm_restarts", where, 2, 0)
    budget = (_int(d, "acq_seeds", where, 512, 1), _int(d, "acq_steps", where, 100, 0))
    try:
        return OptimizerConfig(
            variant=variant,
            kernel=kernel,
            acquisition=acq,
            acquisitions=acqs,
            selection=selection,
            gpi=gpi,
            gpi_condition=cond,
            es_schedule=es,
            iterations=n_iter,
            restarts=restarts,
            warm_restarts=warm_restarts,
            acq_budget=budget,
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _optimizer_list(v, where, n_iter):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where}: expected a non-empty list of optimizers")
    return [_optimizer(o, f"{where}[{j}]", n_iter) for j, o in enumerate(v)]


def parse_config_dict(raw: dict, mode: str | None = None) -> ExperimentSpec:
    """Validate a loaded config mapping; ``mode`` (from the subcommand) wins if given."""
    if raw is None:
        raw = {}
    _reject_unknown(raw, _TOP_KEYS, "config")
    cfg_mode = raw.get("mode")
    if cfg_mode is not None and cfg_mode not in MODES:
        raise ConfigError(f"config.mode: expected one of {MODES}, got {cfg_mode!r}")
    if mode is not None and cfg_mode is not None and cfg_mode != mode:
        raise ConfigError(f"config.mode: {cfg_mode!r} does not match subcommand {mode!r}")
    mode = mode or cfg_mode or "optimize"

    if "objectives" in raw:
        if not isinstance(raw["objectives"], list) or not raw["objectives"]:
            raise ConfigError("config.objectives: expected a non-empty list")
        objectives = [_objective(o, f"config.objectives[{j}]") for j, o in enumerate(raw["objectives"])]
    elif "objective" in raw:
        objectives = [_objective(raw["objective"], "config.objective")]
    else:
        raise ConfigError("config.objective: required")

    n_iter = _int(raw, "iterations", "config", 50, 1)
    seeds = raw.get("seeds", 5)
    if isinstance(seeds, bool) or not isinstance(seeds, (int, list)):
        raise ConfigError(f"config.seeds: expected a count or a list of integers, got {seeds!r}")
    if isinstance(seeds, int):
        if seeds < 1:
            raise ConfigError(f"config.seeds: must be >= 1, got {seeds}")
        seeds = list(range(seeds))
    elif not seeds or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise ConfigError("config.seeds: expected a non-empty list of non-negative integers")
    spec = ExperimentSpec(
        mode=mode,
        objectives=objectives,
        seeds=list(seeds),
        n_init=_int(raw, "n_init", "config", 16, 2),
        iterations=n_iter,
        shared_init=bool(raw.get("shared_init", True)),
        out=str(raw.get("out", "adabo-out")),
        workers=_int(raw, "workers", "config", 1, 1),
        delimiter=raw.get("delimiter", ","),
    )
    if spec.delimiter not in (",", "\t", "tab"):
        raise ConfigError(f"config.delimiter: expected ',' or 'tab', got {spec.delimiter!r}")
    spec.delimiter = "\t" if spec.delimiter == "tab" else spec.delimiter

    inline = {k: raw[k] for k in _OPTIMIZER_KEYS if k in raw}
    if mode == "optimize":
        if "optimizers" in raw:
            spec.optimizers = _optimizer_list(raw["optimizers"], "config.optimizers", n_iter)
        else:
            spec.optimizers = [_optimizer(inline, "config", n_iter)]
    elif mode == "benchmark":
        ref = raw.get("reference", "standard")
        if ref == "standard":
            spec.reference = reference_configs(n_iter)
        else:
            spec.reference = _optimizer_list(ref, "config.reference", n_iter)
        if "challengers" in raw:
            spec.challengers = _optimizer_list(raw["challengers"], "config.challengers", n_iter)
        else:
            spec.challengers = [OptimizerConfig(variant=Variant.BO_GPI_IADA, selection=s, iterations=n_iter)
                                for s in (SelectionStrategy.CATEGORICAL, SelectionStrategy.UNIFORM)]
        for o in spec.objectives:
            if o.name in ("external", "Ishigami"):
                raise ConfigError(f"config.objective.name: benchmarks need a built-in objective, got {o.name!r}")
    else:
        s = raw.get("sensitivity", {}) or {}
        _reject_unknown(s, _SENSITIVITY_KEYS, "config.sensitivity")
        n_base = s.get("n_base", [256, 512, 1024])
        if isinstance(n_base, int):
            n_base = [n_base]
        if not isinstance(n_base, list) or not n_base or not all(isinstance(n, int) and n >= 4 for n in n_base):
            raise ConfigError("config.sensitivity.n_base: expected integers >= 4")
        if any(b <= a for a, b in zip(n_base, n_base[1:])):
            raise ConfigError("config.sensitivity.n_base: must be increasing")
        spec.n_base = n_base
        spec.level = _float(s, "level", "config.sensitivity", 0.95, lo=0.5, hi=0.999)
        spec.resamples = _int(s, "resamples", "config.sensitivity", 1000, 100)
        names = s.get("names")
        if names is not None and (not isinstance(names, list) or len(names) != objectives[0].dim):
            raise ConfigError(f"config.sensitivity.names: expected {objectives[0].dim} names")
        spec.names = names
    return spec


def parse_config(path, mode: str | None = None) -> ExperimentSpec:
    """Load and validate a YAML experiment file.

    Raises
    ------
    ConfigError
        On a missing or unreadable file, a YAML syntax error or any schema
        violation; the message names the field and location.
    """
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror or exc})") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: invalid YAML{where}") from None
    try:
        return parse_config_dict(raw, mode)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- commands

def _apply_overrides(spec: ExperimentSpec, out=None, workers=None, seed_offset=0) -> ExperimentSpec:
    env_out = os.environ.get("ADABO_OUT")
    env_workers = os.environ.get("ADABO_WORKERS")
    spec.out = out or env_out or spec.out
    if workers is not None:
        spec.workers = workers
    elif env_workers:
        try:
            spec.workers = int(env_workers)
        except ValueError:
            raise ConfigError(f"ADABO_WORKERS: expected an integer, got {env_workers!r}") from None
    if spec.workers < 1:
        raise ConfigError(f"workers: must be >= 1, got {spec.workers}")
    if seed_offset < 0:
        raise ConfigError(f"--seed-offset: must be >= 0, got {seed_offset}")
    spec.seeds = [s + seed_offset for s in spec.seeds]
    return spec


def cmd_optimize(spec: ExperimentSpec) -> int:
    """Run every (optimizer, seed) pair per objective and persist the histories."""
    status = EXIT_OK
    out = Path(spec.out)
    for obj_spec in spec.objectives:
        objective = obj_spec.build()
        try:
            ensembles = run_ensemble(objective, spec.optimizers, spec.seeds, spec.n_init,
                                     spec.shared_init, spec.workers, out / obj_spec.label)
        except ObjectiveError as exc:
            print(f"error: {obj_spec.label}: initial design failed: {exc}", file=sys.stderr)
            status = EXIT_RUN_FAILURE
            continue
        finally:
            if hasattr(objective, "close"):
                objective.close()
        for e in ensembles:
            for s, h in zip(e.seeds, e.histories):
                x, y = recommend(h)
                coords = " ".join(f"{v:.6g}" for v in x)
                print(f"{obj_spec.label} {e.label} seed={s} status={h.status} best={y!r} x=[{coords}]")
                if h.aborted:
                    print(f"  {h.message}", file=sys.stderr)
                    status = EXIT_RUN_FAILURE
    return status


def _group_challengers(configs):
    groups: dict = {}
    for c in configs:
        key = (c.variant, c.selection if c.variant.adaptive else None)
        groups.setdefault(key, []).append(c)
    return groups


def cmd_benchmark(spec: ExperimentSpec) -> int:
    """Run reference and challenger ensembles and emit the WCRI table and plot data."""
    status = EXIT_OK
    out = Path(spec.out)
    reports = {}
    plot_ensembles = []
    meta = []
    for obj_spec in spec.objectives:
        objective = obj_spec.build()
        base = out / obj_spec.label
        ref = run_ensemble(objective, spec.reference, spec.seeds, spec.n_init, spec.shared_init, spec.workers,
                           base / "reference")
        groups = _group_challengers(spec.challengers)
        chal = run_ensemble(objective, [c for g in groups.values() for c in g], spec.seeds, spec.n_init,
                            spec.shared_init, spec.workers, base / "challengers")
        for e in ref + chal:
            for s, h in zip(e.seeds, e.histories):
                if h.aborted:
                    print(f"{obj_spec.label} {e.label} seed={s}: {h.message}", file=sys.stderr)
                    status = EXIT_RUN_FAILURE
        offset = objective.lower_bound
        reports.update(_wcri_rows(obj_spec.label, ref, chal, offset))
        plot_ensembles.extend(ref + chal)
        meta.append({"objective": obj_spec.label, "offset": offset})
    _write_tables(out, reports, plot_ensembles, spec.delimiter)
    (out / "benchmark.json").write_text(json.dumps({"objectives": meta}, sort_keys=True, indent=1) + "\n")
    print((out / _table_name(spec.delimiter)).read_text(), end="")
    return status


def _wcri_rows(label, ref, chal, offset):
    rows = {(label, Variant.BO, None): wcri_report(ref, ref, offset)}
    grouped: dict = {}
    for e in chal:
        c = e.config
        grouped.setdefault((c.variant, c.selection if c.variant.adaptive else None), []).append(e)
    for (variant, sel), ens in grouped.items():
        rows[(label, variant, sel)] = wcri_report(ref, ens, offset)
    return rows


def _table_name(delimiter):
    return "wcri_table.tsv" if delimiter == "\t" else "wcri_table.csv"


def _write_tables(out: Path, reports, ensembles, delimiter):
    out.mkdir(parents=True, exist_ok=True)
    ext = "tsv" if delimiter == "\t" else "csv"
    (out / _table_name(delimiter)).write_text(emit_table(reports, delimiter))
    (out / f"plotdata.{ext}").write_text(emit_history_plotdata(ensembles, delimiter))


def cmd_report(out_dir, delimiter: str = ",") -> int:
    """Recompute the WCRI table and plot data from a finished benchmark directory."""
    out = Path(out_dir)
    meta_path = out / "benchmark.json"
    if not meta_path.exists():
        raise ConfigError(f"{meta_path}: no benchmark results found")
    meta = json.loads(meta_path.read_text())
    reports = {}
    ensembles = []
    for m in meta["objectives"]:
        base = out / m["objective"]
        ref = load_ensembles(base / "reference" / "index.json")
        chal = load_ensembles(base / "challengers" / "index.json")
        reports.update(_wcri_rows(m["objective"], ref, chal, float(m["offset"])))
        ensembles.extend(ref + chal)
    _write_tables(out, reports, ensembles, delimiter)
    print((out / _table_name(delimiter)).read_text(), end="")
    return EXIT_OK


def cmd_sensitivity(spec: ExperimentSpec) -> int:
    """Indices with bootstrap bounds for each base-sample count, plus a convergence series."""
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "tsv" if spec.delimiter == "\t" else "csv"
    status = EXIT_OK
    for obj_spec in spec.objectives:
        objective = obj_spec.build()
        if obj_spec.name == "Ishigami":
            batch = objective
        else:
            def batch(U, f=objective):
                return np.array([f(u) for u in U])
        seed = spec.seeds[0]
        try:
            reports = convergence_curve(batch, obj_spec.dim, spec.n_base, seed, spec.names, spec.level,
                                        spec.resamples)
        except (ObjectiveError, ValueError) as exc:
            print(f"error: {obj_spec.label}: {exc}", file=sys.stderr)
            status = EXIT_RUN_FAILURE
            continue
        finally:
            if hasattr(objective, "close"):
                objective.close()
        lines = []
        for rep in reports:
            text = report_to_text(rep, spec.delimiter)
            (out / f"{obj_spec.label}_sobol_N{rep.n_base}.{ext}").write_text(text)
            body = text.splitlines()
            if not lines:
                lines.append(spec.delimiter.join(["n_base"] + body[0].split(spec.delimiter)))
            lines.extend(f"{rep.n_base}{spec.delimiter}{row}" for row in body[1:])
        (out / f"{obj_spec.label}_convergence.{ext}").write_text("\n".join(lines) + "\n")
        last = reports[-1]
        summary = ", ".join(f"{n}: S1={s:.3f} ST={t:.3f}" for n, s, t in zip(last.names, last.s1, last.st))
        print(f"{obj_spec.label} N={last.n_base} {summary}")
    return status


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adabo", description="Adaptive Bayesian optimization experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("optimize", "run optimizers on an objective and persist their histories"),
        ("benchmark", "compare challenger optimizers against a reference set by WCRI"),
        ("sensitivity", "Sobol' sensitivity indices with bootstrap confidence bounds"),
        ("report", "recompute WCRI tables and plot data from a benchmark directory"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=name != "report", help="YAML experiment file")
        p.add_argument("--out", help="output directory (overrides config and ADABO_OUT)")
        p.add_argument("--workers", type=int, help="worker processes (overrides config and ADABO_WORKERS)")
        p.add_argument("--seed-offset", type=int, default=0, help="add K to every seed")
        p.add_argument("--delimiter", choices=("comma", "tab"), help="delimiter for emitted tables")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    delim = {"comma": ",", "tab": "\t", None: None}[args.delimiter]
    try:
        if args.command == "report":
            out = args.out or os.environ.get("ADABO_OUT")
            if out is None and args.config:
                out = parse_config(args.config, "benchmark").out
            if out is None:
                raise ConfigError("report: give --out, ADABO_OUT or a --config with an 'out' key")
            return cmd_report(out, delim or ",")
        spec = parse_config(args.config, args.command)
        spec = _apply_overrides(spec, args.out, args.workers, args.seed_offset)
        if delim:
            spec.delimiter = delim
        command = {"optimize": cmd_optimize, "benchmark": cmd_benchmark, "sensitivity": cmd_sensitivity}
        return command[args.command](spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
