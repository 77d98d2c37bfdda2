"""Synthetic benchmark objectives and multi-seed ensembles of optimizer runs.

Objectives take points of the unit cube and map them affinely to their
native domain. Run histories are persisted as delimited text, one file per
run, with an index file describing each ensemble.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .gpr import Doe
from .optimizer import IterationRecord, OptimizerConfig, RunHistory, _evaluate, config_from_dict, run
from .sampling import sobol_points

__all__ = [
    "ObjectiveName",
    "SyntheticObjective",
    "RunEnsemble",
    "objective_eval",
    "initial_doe",
    "run_ensemble",
    "quartile_curves",
    "config_digest",
    "history_to_text",
    "history_from_text",
    "save_ensembles",
    "load_ensembles",
    "reference_configs",
]

HISTORY_MAGIC = "# adabo-history 1"


class ObjectiveName(str, Enum):
    SPHERE = "Sphere"
    ALPINE_N2 = "AlpineN2"

    @classmethod
    def parse(cls, value) -> "ObjectiveName":
        if isinstance(value, cls):
            return value
        for member in cls:
            if str(value).lower() == member.value.lower():
                return member
        raise ValueError(f"unknown objective {value!r}")


def _alpine_1d_min() -> float:
    res = minimize_scalar(lambda x: -math.sqrt(x) * math.sin(x), bounds=(7.0, 9.0), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.fun)


@dataclass(frozen=True)
class SyntheticObjective:
    """Sphere on ``[-5, 5]^D`` or AlpineN2 (``-prod sqrt(x) sin(x)``) on ``[0, 10]^D``."""

    name: ObjectiveName
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "name", ObjectiveName.parse(self.name))
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def bounds(self) -> tuple[float, float]:
        return (-5.0, 5.0) if self.name is ObjectiveName.SPHERE else (0.0, 10.0)

    @property
    def label(self) -> str:
        return f"{self.name.value}-{self.dim}D"

    @cached_property
    def lower_bound(self) -> float:
        """Global minimum value, used as the offset that keeps incumbent curves positive."""
        if self.name is ObjectiveName.SPHERE:
            return 0.0
        # the product is maximal when every factor sits at the 1-D optimum
        return -((-_alpine_1d_min()) ** self.dim)

    def to_native(self, u) -> np.ndarray:
        lo, hi = self.bounds
        return lo + (hi - lo) * np.asarray(u, dtype=float)

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float).ravel()
        if u.size != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got {u.size}")
        x = self.to_native(u)
        if self.name is ObjectiveName.SPHERE:
            return float(np.sum(x * x))
        return float(-np.prod(np.sqrt(x) * np.sin(x)))


def objective_eval(obj: SyntheticObjective, u) -> float:
    return obj(u)


def initial_doe(objective, dim: int, n_init: int, offset: int) -> Doe:
    """Sobol' initial design starting at sequence index ``n_init * (offset + 1)``.

    Index 0 (the origin) and index 1 (the cube centre) are skipped for every
    offset, so no seed starts with the centre point already evaluated.

    Raises
    ------
    ObjectiveError
        If any initial point cannot be evaluated.
    """
    X = sobol_points(dim, n_init, n_init * (offset + 1))
    return Doe(X, np.array([_evaluate(objective, x) for x in X]))


def config_digest(config: OptimizerConfig) -> str:
    """SHA-256 of the canonical JSON form of ``config`` without its seed."""
    d = config.to_dict()
    d.pop("seed", None)
    return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


@dataclass
class RunEnsemble:
    """Histories of one configuration over several seeds."""

    config: OptimizerConfig
    seeds: list[int]
    histories: list[RunHistory]
    objective: str = ""

    @property
    def digest(self) -> str:
        return config_digest(self.config)

    @property
    def label(self) -> str:
        return self.config.label

    def incumbent_matrix(self) -> np.ndarray:
        """``seeds x I`` incumbents; aborted runs carry their last value forward."""
        n_iter = self.config.iterations
        rows = []
        for h in self.histories:
            inc = list(h.incumbents)
            last = inc[-1] if inc else float(np.min(h.initial.y))
            rows.append(inc + [last] * (n_iter - len(inc)))
        return np.array(rows, dtype=float).reshape(len(rows), n_iter)

    @property
    def quartiles(self) -> np.ndarray:
        return quartile_curves(self)


def quartile_curves(ensemble: RunEnsemble) -> np.ndarray:
    """Five-number summary ``(min, Q1, median, Q3, max)`` per iteration, shape ``(5, I)``."""
    if len(ensemble.histories) < 2:
        raise ValueError("quartile curves need at least two histories")
    M = ensemble.incumbent_matrix()
    return np.percentile(M, [0, 25, 50, 75, 100], axis=0, method="linear")


def _one_run(args):
    objective, config, initial = args
    try:
        return run(objective, initial, config)
    except Exception as exc:  # noqa: BLE001 - a failed run must not sink the ensemble
        return RunHistory(config, initial, status="failed", message=f"{type(exc).__name__}: {exc}")


def run_ensemble(
    objective,
    configs,
    seeds,
    n_init: int = 16,
    shared_init: bool = True,
    workers: int = 1,
    out_dir: str | os.PathLike | None = None,
) -> list[RunEnsemble]:
    """Run every ``(config, seed)`` pair and group the histories by config.

    With ``shared_init`` every config sees the same initial design for a
    given seed; otherwise each pair gets its own Sobol' offset. Results are
    ordered by ``(config, seed)`` whatever the completion order. When
    ``out_dir`` is given the histories and an index file are written there.
    A failing run is recorded with status ``failed`` or ``aborted``; a
    failing initial design raises :class:`ObjectiveError` since no run of
    that seed could start.
    """
    configs = list(configs)
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    if not configs:
        raise ValueError("need at least one configuration")
    dim = objective.dim
    designs: dict[int, Doe] = {}
    jobs = []
    for ci, config in enumerate(configs):
        for s in seeds:
            offset = s if shared_init else s * len(configs) + ci
            if offset not in designs:
                designs[offset] = initial_doe(objective, dim, n_init, offset)
            jobs.append((objective, replace(config, seed=s), designs[offset]))
    if workers > 1 and not getattr(objective, "serial", False):
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    name = getattr(objective, "label", type(objective).__name__)
    ensembles = []
    for ci, config in enumerate(configs):
        hs = results[ci * len(seeds) : (ci + 1) * len(seeds)]
        ensembles.append(RunEnsemble(replace(config, seed=seeds[0]), list(seeds), hs, name))
    if out_dir is not None:
        save_ensembles(ensembles, out_dir)
    return ensembles


def reference_configs(iterations: int = 50, **kwargs) -> list[OptimizerConfig]:
    """The nine standard-BO configurations: three kernels by three acquisitions."""
    from .acquisition import AcquisitionKind, AcquisitionTag
    from .kernels import KernelFamily, KernelSpec

    acqs = (AcquisitionKind(AcquisitionTag.LOG_EI), AcquisitionKind(AcquisitionTag.LOG_PI),
            AcquisitionKind(AcquisitionTag.UCB, 2.0))
    return [
        OptimizerConfig(kernel=KernelSpec(k), acquisition=a, iterations=iterations, **kwargs)
        for k in KernelFamily
        for a in acqs
    ]


def _fmt(v) -> str:
    return repr(float(v))


def history_to_text(history: RunHistory, objective: str = "") -> str:
    """Header lines (``# key: value``) followed by CSV records.

    Initial design rows have ``kind=init`` and iteration 0. Floats are
    written with ``repr`` so a load reproduces them exactly.
    """
    cfg = history.config
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    dim = history.initial.dim
    n_acq = len(cfg.acquisition_set)
    buf = io.StringIO()
    buf.write(HISTORY_MAGIC + "\n")
    buf.write(f"# config_digest: {config_digest(cfg)}\n")
    buf.write(f"# config: {cfg_json}\n")
    buf.write(f"# seed: {cfg.seed}\n")
    buf.write(f"# objective: {objective}\n")
    buf.write(f"# status: {history.status}\n")
    buf.write(f"# message: {history.message.replace(chr(10), ' ')}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "iteration", "y", "incumbent", "acquisition", "gpi_event", "improved",
                "es_threshold", "kernel"] + [f"x{j + 1}" for j in range(dim)]
               + [f"es{a + 1}" for a in range(n_acq)])
    for x, y in zip(history.initial.X, history.initial.y):
        w.writerow(["init", 0, _fmt(y), "", "", "", "", "", ""] + [_fmt(v) for v in x] + [""] * n_acq)
    for r in history.records:
        es = list(r.es_scores) + [math.nan] * (n_acq - len(r.es_scores))
        w.writerow(["iter", r.iteration, _fmt(r.y), _fmt(r.incumbent), r.acquisition, int(r.gpi_event),
                    int(r.improved), _fmt(r.es_threshold), r.kernel] + [_fmt(v) for v in r.x]
                   + [_fmt(v) for v in es])
    return buf.getvalue()


def history_from_text(text: str) -> tuple[RunHistory, dict]:
    """Inverse of :func:`history_to_text`; returns ``(history, header)``."""
    lines = text.splitlines()
    if not lines or lines[0] != HISTORY_MAGIC:
        raise ValueError("not a run-history file")
    header = {}
    i = 1
    while i < len(lines) and lines[i].startswith("# "):
        key, _, value = lines[i][2:].partition(": ")
        header[key] = value
        i += 1
    config = config_from_dict(json.loads(header["config"]))
    rows = list(csv.DictReader(lines[i:]))
    xcols = sorted((c for c in rows[0] if c.startswith("x")), key=lambda c: int(c[1:])) if rows else []
    escols = sorted((c for c in rows[0] if c.startswith("es") and c != "es_threshold"),
                    key=lambda c: int(c[2:])) if rows else []
    init = [r for r in rows if r["kind"] == "init"]
    X0 = np.array([[float(r[c]) for c in xcols] for r in init])
    y0 = np.array([float(r["y"]) for r in init])
    records = []
    for r in rows:
        if r["kind"] != "iter":
            continue
        records.append(IterationRecord(
            iteration=int(r["iteration"]),
            x=np.array([float(r[c]) for c in xcols]),
            y=float(r["y"]),
            incumbent=float(r["incumbent"]),
            acquisition=int(r["acquisition"]),
            gpi_event=bool(int(r["gpi_event"])),
            es_scores=tuple(float(r[c]) for c in escols),
            es_threshold=float(r["es_threshold"]),
            kernel=r["kernel"],
            improved=bool(int(r["improved"])),
        ))
    history = RunHistory(config, Doe(X0, y0), records, header.get("status", "ok"), header.get("message", ""))
    return history, header


def _run_file(ensemble: RunEnsemble, seed: int) -> str:
    return f"run_{ensemble.digest[:12]}_seed{seed}.csv"


def save_ensembles(ensembles: list[RunEnsemble], out_dir, index_name: str = "index.json") -> Path:
    """Write one history file per run plus an index mapping configs to files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for e in ensembles:
        runs = []
        for s, h in zip(e.seeds, e.histories):
            fname = _run_file(e, s)
            (out / fname).write_text(history_to_text(h, e.objective))
            runs.append({"seed": s, "file": fname, "status": h.status})
        entries.append({
            "label": e.label,
            "digest": e.digest,
            "objective": e.objective,
            "config": e.config.to_dict(),
            "runs": runs,
        })
    path = out / index_name
    path.write_text(json.dumps({"ensembles": entries}, sort_keys=True, indent=1) + "\n")
    return path


def load_ensembles(index_path) -> list[RunEnsemble]:
    index_path = Path(index_path)
    index = json.loads(index_path.read_text())
    out = []
    for entry in index["ensembles"]:
        hs, seeds = [], []
        for r in entry["runs"]:
            h, _ = history_from_text((index_path.parent / r["file"]).read_text())
            hs.append(h)
            seeds.append(int(r["seed"]))
        out.append(RunEnsemble(config_from_dict(entry["config"]), seeds, hs, entry["objective"]))
    return out
