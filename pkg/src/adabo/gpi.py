"""Surrogate model selection by breadth-first search over kernels and restricted domains.

A restricted likelihood domain (RLD) freezes up to two kernel parameters at
nominal low/mid/high values and fits the rest by maximum likelihood. The
search visits unrestricted kernels first, then single fixtures, then pairs,
scoring each fit on held-out data and stopping early once the held-out
RelMSE drops below 0.05 or the trial budget is spent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .gpr import BOUNDS, Doe, IllConditionedError, Rpd, fit_mle
from .kernels import KernelFamily, KernelSpec
from .model_quality import DegenerateVarianceError, QualityScore, score

__all__ = [
    "GpiConfig",
    "GpiResult",
    "SurrogateUnavailableError",
    "default_nominal_values",
    "enumerate_rlds",
    "search_space_size",
    "gpi_search",
    "split_train_test",
]

LEVELS = ("low", "mid", "high")
ACCEPT_RELMSE = 0.05


class SurrogateUnavailableError(RuntimeError):
    """Every surrogate fit in a model-selection search failed."""


def default_nominal_values() -> dict[str, tuple[float, float, float]]:
    """Geometric low/mid/high points of each parameter's fitting bounds."""
    return {name: (lo, math.sqrt(lo * hi), hi) for name, (lo, hi) in BOUNDS.items()}


@dataclass(frozen=True)
class GpiConfig:
    kernel_set: tuple[KernelFamily, ...] = (KernelFamily.RBF, KernelFamily.MATERN32, KernelFamily.RQ)
    max_depth: int = 2
    nominal_values: dict = field(default_factory=default_nominal_values)
    trial_threshold: int = 20
    relmse_threshold: float = 0.05
    test_fraction: float = 0.2
    restarts: int = 8

    def __post_init__(self):
        object.__setattr__(self, "kernel_set", tuple(KernelFamily.parse(k) for k in self.kernel_set))
        if self.trial_threshold < 1:
            raise ValueError("trial_threshold must be >= 1")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.max_depth not in (0, 1, 2):
            raise ValueError("max_depth must be 0, 1 or 2")
        for name, values in self.nominal_values.items():
            lo, hi = BOUNDS[name]
            if len(values) != 3 or any(not lo <= v <= hi for v in values):
                raise ValueError(f"nominal values for {name!r} must be three values within {BOUNDS[name]}")


@dataclass(frozen=True)
class GpiResult:
    spec: KernelSpec
    score: QualityScore
    trials_used: int
    rpd: Rpd


def enumerate_rlds(config: GpiConfig = GpiConfig()) -> list[KernelSpec]:
    """All restricted domains in search order (unfitted kernel skeletons)."""
    nominal = config.nominal_values
    out = [KernelSpec(k) for k in config.kernel_set]
    if config.max_depth >= 1:
        for k in config.kernel_set:
            for name in k.param_names:
                for v in nominal[name]:
                    out.append(KernelSpec(k, fixed={name: v}))
    if config.max_depth >= 2:
        for k in config.kernel_set:
            for first, second in itertools.combinations(k.param_names, 2):
                for v2 in nominal[second]:
                    for v1 in nominal[first]:
                        out.append(KernelSpec(k, fixed={first: v1, second: v2}))
    return out


def search_space_size(config: GpiConfig = GpiConfig()) -> int:
    return len(enumerate_rlds(config))


def _accepts(best: QualityScore | None, new: QualityScore, threshold: float) -> bool:
    if best is None:
        return True
    if new.relmse < best.relmse:
        return True
    if new.tll > best.tll and (new.relmse == best.relmse or best.relmse < new.relmse < threshold):
        return True
    return False


def gpi_search(
    train: Doe,
    test: Doe,
    config: GpiConfig = GpiConfig(),
    rng: np.random.Generator | int | None = None,
    previous: KernelSpec | None = None,
) -> GpiResult:
    """Select a kernel and restricted domain by held-out RelMSE and TLL.

    ``previous`` (a winning spec from an earlier search) is tried first and
    ends the search on its own if it already meets the RelMSE acceptance
    level.

    Raises
    ------
    SurrogateUnavailableError
        If no trial produced a usable fit.
    """
    rng = np.random.default_rng(rng)
    trials = enumerate_rlds(config)
    if previous is not None:
        trials = [KernelSpec(previous.family, fixed=dict(previous.fixed))] + trials
    best: GpiResult | None = None
    q = 0
    for skeleton in trials:
        seed = int(rng.integers(2**63))
        q += 1
        try:
            rpd = fit_mle(train, skeleton, restarts=config.restarts, rng=seed)
            s = score(test, rpd)
        except (IllConditionedError, DegenerateVarianceError, np.linalg.LinAlgError):
            s = None
        if s is not None and np.isfinite(s.relmse) and _accepts(
            best.score if best else None, s, config.relmse_threshold
        ):
            best = GpiResult(rpd.spec, s, q, rpd)
        if (best is not None and best.score.relmse < ACCEPT_RELMSE) or q >= config.trial_threshold:
            break
    if best is None:
        raise SurrogateUnavailableError(f"all {q} surrogate fits failed")
    return GpiResult(best.spec, best.score, q, best.rpd)


def split_train_test(doe: Doe, fraction: float = 0.2, rng: np.random.Generator | int | None = None):
    """Random split holding back ``floor(fraction * N)`` rows for testing.

    Returns ``(train, test)`` with rows kept in their original order.
    """
    if doe.n < 5:
        raise ValueError(f"need at least 5 rows to split, got {doe.n}")
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(rng)
    n_test = math.floor(round(fraction * doe.n, 9))
    perm = rng.permutation(doe.n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return doe.subset(train_idx), doe.subset(test_idx)
