"""Outer Bayesian-optimization loops.

One engine drives every variant:

* ``BO``: fixed kernel, one acquisition.
* ``BO_GPi``: kernel/RLD chosen by :func:`adabo.gpi.gpi_search`, one acquisition.
* ``BO_Ada`` / ``BO_GPi_Ada``: a candidate per acquisition, one chosen by ``Sel``.
* ``BO_iAda`` / ``BO_GPi_iAda``: as above, after the exploitation-score filter.

All randomness is drawn from named sub-streams of the run seed, so a
variant that degenerates to another (e.g. ``BO_Ada`` with one acquisition)
reproduces its trajectory exactly.
"""

from __future__ import annotations

import logging
import math
import os
import select
import subprocess
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .acquisition import AcquisitionKind, AcquisitionTag, acq_maximize
from .gpi import GpiConfig, SurrogateUnavailableError, gpi_search, split_train_test
from .gpr import Doe, IllConditionedError, fit_mle, posterior
from .kernels import KernelFamily, KernelSpec
from .selection import (
    CatState,
    EsSchedule,
    SelectionStrategy,
    cat_update,
    filter_candidates,
    mmd,
    exploitation_score,
    sel_cat,
    sel_uniform,
)

__all__ = [
    "Variant",
    "GpiCondition",
    "OptimizerConfig",
    "IterationRecord",
    "RunHistory",
    "ObjectiveError",
    "ExternalObjective",
    "substream",
    "run",
    "run_bo",
    "run_adaptive_bo",
    "recommend",
    "config_from_dict",
    "DEFAULT_ACQUISITIONS",
]

log = logging.getLogger(__name__)

DEFAULT_ACQUISITIONS = (
    AcquisitionKind(AcquisitionTag.LOG_EI),
    AcquisitionKind(AcquisitionTag.LOG_PI),
    AcquisitionKind(AcquisitionTag.UCB, 2.0),
)


class ObjectiveError(RuntimeError):
    """The objective could not be evaluated or returned a non-finite value."""


class Variant(str, Enum):
    BO = "BO"
    BO_GPI = "BO_GPi"
    BO_ADA = "BO_Ada"
    BO_IADA = "BO_iAda"
    BO_GPI_ADA = "BO_GPi_Ada"
    BO_GPI_IADA = "BO_GPi_iAda"

    @property
    def uses_gpi(self) -> bool:
        return self in (Variant.BO_GPI, Variant.BO_GPI_ADA, Variant.BO_GPI_IADA)

    @property
    def adaptive(self) -> bool:
        return self not in (Variant.BO, Variant.BO_GPI)

    @property
    def es_filter(self) -> bool:
        return self in (Variant.BO_IADA, Variant.BO_GPI_IADA)

    @property
    def adaptivity_label(self) -> str:
        if self.es_filter:
            return "iAda"
        return "Ada" if self.adaptive else "No Ada"

    @property
    def init_label(self) -> str:
        return "GPi" if self.uses_gpi else "No GPi"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "_").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown optimizer variant {value!r}")


@dataclass(frozen=True)
class GpiCondition:
    """When to rerun model selection after the first iteration.

    ``periodic`` fires at iterations ``1 + k * period``; ``stagnation`` fires
    when the incumbent has not improved for ``period`` iterations (and then
    waits another ``period``); ``never`` only runs it at iteration 1.
    """

    kind: str = "periodic"
    period: int = 25

    def __post_init__(self):
        if self.kind not in ("periodic", "stagnation", "never"):
            raise ValueError(f"unknown GPi condition {self.kind!r}")
        if self.period < 1:
            raise ValueError("period must be >= 1")

    def __call__(self, i: int, records: Sequence["IterationRecord"]) -> bool:
        if i == 1:
            return True
        if self.kind == "never":
            return False
        if self.kind == "periodic":
            return (i - 1) % self.period == 0
        if len(records) < self.period:
            return False
        return not any(r.improved or r.gpi_event for r in records[-self.period :])


@dataclass(frozen=True)
class OptimizerConfig:
    variant: Variant = Variant.BO
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec(KernelFamily.MATERN32))
    acquisition: AcquisitionKind = field(default_factory=lambda: AcquisitionKind(AcquisitionTag.LOG_EI))
    acquisitions: tuple[AcquisitionKind, ...] = DEFAULT_ACQUISITIONS
    selection: SelectionStrategy = SelectionStrategy.UNIFORM
    gpi: GpiConfig = field(default_factory=GpiConfig)
    gpi_condition: GpiCondition = field(default_factory=GpiCondition)
    es_schedule: EsSchedule = field(default_factory=EsSchedule)
    iterations: int = 50
    seed: int = 0
    restarts: int = 8
    warm_restarts: int = 2
    acq_budget: tuple[int, int] = (512, 100)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        object.__setattr__(self, "selection", SelectionStrategy.parse(self.selection))
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.restarts < 0 or self.warm_restarts < 0:
            raise ValueError("restarts must be >= 0")
        if self.variant.adaptive and not self.acquisitions:
            raise ValueError(f"{self.variant.value} needs a non-empty acquisition set")

    @property
    def acquisition_set(self) -> tuple[AcquisitionKind, ...]:
        return tuple(self.acquisitions) if self.variant.adaptive else (self.acquisition,)

    @property
    def label(self) -> str:
        v = self.variant
        parts = [v.value]
        if not v.uses_gpi:
            parts.append(self.kernel.describe())
        if not v.adaptive:
            parts.append(self.acquisition.name)
        else:
            parts.append(self.selection.label)
        return "/".join(parts)

    def to_dict(self) -> dict:
        """Plain description used for digests and persistence headers."""
        return {
            "variant": self.variant.value,
            "kernel": self.kernel.family.value if not self.variant.uses_gpi else None,
            "kernel_fixed": dict(self.kernel.fixed) if not self.variant.uses_gpi else None,
            "acquisition": self.acquisition.name if not self.variant.adaptive else None,
            "acquisitions": [a.name for a in self.acquisitions] if self.variant.adaptive else None,
            "selection": self.selection.value if self.variant.adaptive else None,
            "gpi": {
                "trial_threshold": self.gpi.trial_threshold,
                "relmse_threshold": self.gpi.relmse_threshold,
                "test_fraction": self.gpi.test_fraction,
                "kernel_set": [k.value for k in self.gpi.kernel_set],
                "max_depth": self.gpi.max_depth,
                "restarts": self.gpi.restarts,
                "condition": self.gpi_condition.kind,
                "period": self.gpi_condition.period,
            } if self.variant.uses_gpi else None,
            "es_schedule": {
                "start": self.es_schedule.start,
                "end": self.es_schedule.end,
                "length": self.es_schedule.length,
                "values": list(self.es_schedule.values) if self.es_schedule.values else None,
            } if self.variant.es_filter else None,
            "iterations": self.iterations,
            "seed": self.seed,
            "restarts": self.restarts,
            "warm_restarts": self.warm_restarts,
            "acq_budget": list(self.acq_budget),
        }


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    x: np.ndarray
    y: float
    incumbent: float
    acquisition: int
    gpi_event: bool
    es_scores: tuple[float, ...] = ()
    es_threshold: float = math.nan
    kernel: str = ""
    improved: bool = False


@dataclass
class RunHistory:
    config: OptimizerConfig
    initial: Doe
    records: list[IterationRecord] = field(default_factory=list)
    status: str = "ok"
    message: str = ""

    @property
    def doe(self) -> Doe:
        if not self.records:
            return self.initial
        X = np.vstack([self.initial.X] + [r.x[None, :] for r in self.records])
        y = np.concatenate([self.initial.y, [r.y for r in self.records]])
        return Doe(X, y)

    @property
    def incumbents(self) -> np.ndarray:
        return np.array([r.incumbent for r in self.records])

    @property
    def gpi_iterations(self) -> list[int]:
        return [r.iteration for r in self.records if r.gpi_event]

    @property
    def aborted(self) -> bool:
        return self.status != "ok"

    def recommendation(self):
        return recommend(self)


def _parse_acquisition(name: str) -> AcquisitionKind:
    if name.upper().startswith("UCB(") and name.endswith(")"):
        return AcquisitionKind(AcquisitionTag.UCB, float(name[4:-1]))
    return AcquisitionKind(AcquisitionTag.parse(name))


def config_from_dict(d: dict) -> OptimizerConfig:
    """Rebuild a config from :meth:`OptimizerConfig.to_dict` output."""
    kwargs = {
        "variant": Variant.parse(d["variant"]),
        "iterations": int(d["iterations"]),
        "seed": int(d["seed"]),
        "restarts": int(d["restarts"]),
        "warm_restarts": int(d.get("warm_restarts", 2)),
        "acq_budget": tuple(int(v) for v in d["acq_budget"]),
    }
    if d.get("kernel"):
        kwargs["kernel"] = KernelSpec(KernelFamily.parse(d["kernel"]), fixed=d.get("kernel_fixed") or {})
    if d.get("acquisition"):
        kwargs["acquisition"] = _parse_acquisition(d["acquisition"])
    if d.get("acquisitions"):
        kwargs["acquisitions"] = tuple(_parse_acquisition(a) for a in d["acquisitions"])
    if d.get("selection"):
        kwargs["selection"] = SelectionStrategy.parse(d["selection"])
    g = d.get("gpi")
    if g:
        kwargs["gpi"] = GpiConfig(
            kernel_set=tuple(g["kernel_set"]),
            max_depth=int(g.get("max_depth", 2)),
            trial_threshold=int(g["trial_threshold"]),
            relmse_threshold=float(g["relmse_threshold"]),
            test_fraction=float(g["test_fraction"]),
            restarts=int(g.get("restarts", 8)),
        )
        kwargs["gpi_condition"] = GpiCondition(g["condition"], int(g["period"]))
    es = d.get("es_schedule")
    if es:
        kwargs["es_schedule"] = EsSchedule(
            es["start"], es["end"], es["length"], tuple(es["values"]) if es["values"] else None
        )
    return OptimizerConfig(**kwargs)


def substream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Independent generator for one named use of a run seed."""
    entropy = [int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode()), *(int(k) for k in keys)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _evaluate(objective: Callable, x: np.ndarray) -> float:
    try:
        y = float(objective(x))
    except ObjectiveError:
        raise
    except Exception as exc:  # noqa: BLE001 - any failure aborts the run
        raise ObjectiveError(f"objective failed at {x.tolist()}: {exc}") from exc
    if not math.isfinite(y):
        raise ObjectiveError(f"objective returned non-finite value {y!r} at {x.tolist()}")
    return y


def run(objective: Callable, initial: Doe, config: OptimizerConfig, test: Doe | None = None) -> RunHistory:
    """Run ``config.iterations`` outer iterations of the configured variant.

    ``test`` is only used by GPi variants: when given it is the held-out set
    of the first model selection and is also added to the data. Later model
    selections re-split the full data.
    """
    variant = config.variant
    seed = config.seed
    acqs = config.acquisition_set
    data = initial if test is None or not variant.uses_gpi else initial.concat(test)
    history = RunHistory(config, data)
    state = CatState.uniform(len(acqs))
    gpi_spec: KernelSpec | None = None
    last_spec: KernelSpec | None = None
    n_iter = config.iterations

    for i in range(1, n_iter + 1):
        gpi_event = variant.uses_gpi and config.gpi_condition(i, history.records)
        try:
            if gpi_event:
                if i == 1 and test is not None:
                    train, held = initial, test
                else:
                    # RelMSE needs two held-out rows; small designs hold back at least that many
                    fraction = max(config.gpi.test_fraction, 2.0 / data.n)
                    train, held = split_train_test(data, fraction, substream(seed, "split", i))
                result = gpi_search(train, held, config.gpi, substream(seed, "gpi", i), previous=gpi_spec)
                gpi_spec = result.spec
                rpd = posterior(data, result.spec)
            else:
                base = gpi_spec if variant.uses_gpi else config.kernel
                if last_spec is not None:
                    base = KernelSpec(base.family, last_spec.params, base.fixed)
                warm = last_spec is not None
                n_starts = config.warm_restarts if warm else config.restarts
                rpd = fit_mle(data, base, n_starts, substream(seed, "mle", i), warm_start=warm)
        except (SurrogateUnavailableError, IllConditionedError, ValueError) as exc:
            history.status, history.message = "aborted", f"iteration {i}: {exc}"
            log.warning("run aborted: %s", history.message)
            return history
        last_spec = rpd.spec

        incumbent = float(np.min(data.y))
        cands = np.array([
            acq_maximize(kind, rpd, incumbent, config.acq_budget, substream(seed, "acq", i, a))
            for a, kind in enumerate(acqs)
        ])
        tags = np.arange(len(acqs))
        threshold = config.es_schedule.threshold(i, n_iter) if variant.es_filter else math.nan
        if data.n >= 2:
            if variant.es_filter:
                cands_kept, tags_kept, scores = filter_candidates(cands, tags, data.X, threshold)
            else:
                m = mmd(data.X)
                scores = np.array([exploitation_score(x, data.X, m) for x in cands])
                cands_kept, tags_kept = cands, tags
        else:
            scores = np.full(len(acqs), math.nan)
            cands_kept, tags_kept = cands, tags

        if len(acqs) == 1:
            x, a = cands_kept[0], int(tags_kept[0])
        elif config.selection is SelectionStrategy.CATEGORICAL:
            x, a = sel_cat(cands_kept, tags_kept, state, substream(seed, "select", i))
        else:
            x, a = sel_uniform(cands_kept, tags_kept, substream(seed, "select", i))

        try:
            y = _evaluate(objective, x)
        except ObjectiveError as exc:
            history.status, history.message = "aborted", f"iteration {i}: {exc}"
            log.warning("run aborted: %s", history.message)
            return history
        improved = y <= incumbent
        state = cat_update(state, a, improved)
        data = data.append(x, y)
        history.records.append(IterationRecord(
            iteration=i,
            x=np.array(x, dtype=float),
            y=y,
            incumbent=min(incumbent, y),
            acquisition=a,
            gpi_event=gpi_event,
            es_scores=tuple(float(s) for s in scores),
            es_threshold=threshold,
            kernel=rpd.spec.describe(),
            improved=improved,
        ))
    return history


def run_bo(objective: Callable, initial: Doe, config: OptimizerConfig) -> RunHistory:
    """Standard BO with ``config.kernel`` and ``config.acquisition``."""
    if config.variant is not Variant.BO:
        config = OptimizerConfig(**{**config.__dict__, "variant": Variant.BO})
    return run(objective, initial, config)


def run_adaptive_bo(
    objective: Callable, initial: Doe, config: OptimizerConfig, test: Doe | None = None
) -> RunHistory:
    """Any variant; GPi variants hold out part of the data for model selection."""
    return run(objective, initial, config, test)


def recommend(history: RunHistory):
    """Best observed ``(x, y)`` over the initial design and all iterations; earliest wins ties."""
    doe = history.doe
    if doe.n < 1:
        raise ValueError("history holds no evaluations")
    j = int(np.argmin(doe.y))
    return doe.X[j].copy(), float(doe.y[j])


class ExternalObjective:
    """Objective evaluated by a long-running child process.

    For each evaluation one line of space-separated unit-cube coordinates is
    written to the child's stdin and one line holding a decimal scalar is
    read back from its stdout.
    """

    serial = True

    def __init__(self, command: Sequence[str], timeout: float = 60.0, cwd: str | None = None,
                 dim: int | None = None):
        self.command = list(command)
        self.dim = dim
        self.label = f"external-{dim}D" if dim else "external"
        self.timeout = float(timeout)
        self.cwd = cwd
        self._proc: subprocess.Popen | None = None

    def _start(self):
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
                cwd=self.cwd,
            )
        except OSError as exc:
            raise ObjectiveError(f"cannot start {self.command[0]!r}: {exc}") from exc

    def __call__(self, x) -> float:
        if self._proc is None or self._proc.poll() is not None:
            self._start()
        proc = self._proc
        x = np.ravel(x)
        if self.dim is not None and x.size != self.dim:
            raise ObjectiveError(f"expected {self.dim} coordinates, got {x.size}")
        line = " ".join(repr(float(v)) for v in x)
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ObjectiveError(f"external objective closed its input: {exc}") from exc
        ready, _, _ = select.select([proc.stdout], [], [], self.timeout)
        if not ready:
            self.close()
            raise ObjectiveError(f"external objective timed out after {self.timeout:g} s")
        reply = proc.stdout.readline()
        if not reply:
            code = proc.poll()
            raise ObjectiveError(f"external objective exited (status {code}) without a reply")
        try:
            value = float(reply.strip())
        except ValueError as exc:
            raise ObjectiveError(f"external objective replied {reply.strip()!r}") from exc
        if not math.isfinite(value):
            raise ObjectiveError(f"external objective replied non-finite {reply.strip()!r}")
        return value

    def close(self):
        if self._proc is not None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except (subprocess.TimeoutExpired, OSError):
                self._proc.kill()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        if os is not None and getattr(self, "_proc", None) is not None:
            self.close()
