"""Choosing one design among per-acquisition candidates.

Provides uniform and count-weighted categorical selection, plus a filter
that rejects candidates crowding the already evaluated designs. Crowding is
measured by the exploitation score ``ln(MMD(X) / d_min(x, X))`` where MMD is
the median nearest-neighbour distance inside ``X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "SelectionStrategy",
    "CatState",
    "EsSchedule",
    "mmd",
    "d_min",
    "exploitation_score",
    "filter_candidates",
    "sel_uniform",
    "sel_cat",
    "cat_update",
]


class SelectionStrategy(str, Enum):
    UNIFORM = "Uniform"
    CATEGORICAL = "Categorical"

    @property
    def label(self) -> str:
        return "Sel_U" if self is SelectionStrategy.UNIFORM else "Sel_Cat"

    @classmethod
    def parse(cls, value) -> "SelectionStrategy":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"uniform": cls.UNIFORM, "u": cls.UNIFORM, "sel_u": cls.UNIFORM,
                   "categorical": cls.CATEGORICAL, "cat": cls.CATEGORICAL, "sel_cat": cls.CATEGORICAL}
        if key not in aliases:
            raise ValueError(f"unknown selection strategy {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class CatState:
    """Success counts per acquisition; probabilities are ``counts / counts.sum()``.

    ``last_selected`` is the acquisition credited most recently.
    """

    counts: tuple[int, ...]
    last_selected: int | None = None

    @classmethod
    def uniform(cls, n_acquisitions: int) -> "CatState":
        if n_acquisitions < 1:
            raise ValueError("need at least one acquisition")
        return cls((1,) * n_acquisitions)

    @property
    def probabilities(self) -> np.ndarray:
        c = np.asarray(self.counts, dtype=float)
        return c / c.sum()


@dataclass(frozen=True)
class EsSchedule:
    """Exploitation-score threshold per outer iteration.

    Either explicit ``values`` (iteration ``i`` uses ``values[i - 1]``, the
    last value repeating) or a linear ramp from ``start`` to ``end`` over
    ``length`` iterations. The default ramp is strict early and lenient late.
    """

    start: float = 0.5
    end: float = 2.0
    length: int | None = None
    values: tuple[float, ...] | None = field(default=None)

    def threshold(self, i: int, n_iterations: int | None = None) -> float:
        if self.values is not None:
            return float(self.values[min(i, len(self.values)) - 1])
        n = self.length or n_iterations or 1
        if n <= 1:
            return float(self.end)
        frac = min(max((i - 1) / (n - 1), 0.0), 1.0)
        return float(self.start + (self.end - self.start) * frac)

    @classmethod
    def constant(cls, t: float) -> "EsSchedule":
        return cls(start=t, end=t)


def _min_distances(U: np.ndarray) -> np.ndarray:
    D = cdist(U, U)
    np.fill_diagonal(D, np.inf)
    return D.min(axis=1)


def mmd(U) -> float:
    """Median over rows of the distance to the nearest other row."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[0] < 2:
        raise ValueError("mmd needs at least two rows")
    return float(np.median(_min_distances(U)))


def d_min(x, X) -> float:
    x = np.asarray(x, dtype=float).ravel()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 1:
        raise ValueError("X must not be empty")
    if X.shape[1] != x.size:
        raise ValueError(f"dimension mismatch: {x.size} vs {X.shape[1]}")
    return float(cdist(x[None, :], X).min())


def exploitation_score(x, X, mmd_value: float | None = None) -> float:
    """``ln(mmd(X) / d_min(x, X))``; ``+inf`` for a duplicate of a row of ``X``."""
    m = mmd(X) if mmd_value is None else mmd_value
    d = d_min(x, X)
    if d == 0.0:
        return float("inf")
    if m == 0.0:
        return float("-inf")
    return float(np.log(m / d))


def filter_candidates(candidates, tags, X_prev, t: float):
    """Keep candidates whose exploitation score is at most ``t``.

    Returns ``(kept, kept_tags, scores)`` where ``scores`` covers all input
    candidates. If nothing survives, every candidate is returned unchanged.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    tags = np.asarray(tags)
    if candidates.shape[0] < 1:
        raise ValueError("need at least one candidate")
    m = mmd(X_prev)
    scores = np.array([exploitation_score(x, X_prev, m) for x in candidates])
    keep = scores <= t
    if not keep.any():
        return candidates, tags, scores
    return candidates[keep], tags[keep], scores


def sel_uniform(candidates, tags, rng: np.random.Generator):
    """Pick one candidate uniformly at random; returns ``(x, tag)``."""
    candidates = np.atleast_2d(candidates)
    if candidates.shape[0] < 1:
        raise ValueError("need at least one candidate")
    j = int(rng.integers(candidates.shape[0]))
    return candidates[j], int(np.asarray(tags)[j])


def sel_cat(candidates, tags, state: CatState, rng: np.random.Generator):
    """Pick a candidate with probability proportional to its acquisition's count.

    ``tags`` index into ``state.counts``; probabilities are renormalized
    over the surviving candidates.
    """
    candidates = np.atleast_2d(candidates)
    tags = np.asarray(tags, dtype=int)
    if candidates.shape[0] < 1:
        raise ValueError("need at least one candidate")
    w = np.asarray(state.counts, dtype=float)[tags]
    j = int(rng.choice(len(tags), p=w / w.sum()))
    return candidates[j], int(tags[j])


def cat_update(state: CatState, selected: int, improved: bool) -> CatState:
    """Credit ``selected`` with one success if its design reached the running minimum.

    Without improvement the state is returned unchanged.
    """
    if not 0 <= selected < len(state.counts):
        raise ValueError(f"acquisition index {selected} out of range")
    if not improved:
        return state
    counts = list(state.counts)
    counts[selected] += 1
    return replace(state, counts=tuple(counts), last_selected=selected)
