"""Acquisition functions for minimization and their inner maximizer.

All acquisitions follow the "larger is better" convention. UCB is applied to
the negated mean, ``-mu + beta * sigma``, so that maximizing it seeks low
objective values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import erfcx, log_ndtr, ndtr

from .gpr import Rpd, predict
from .sampling import sobol_points

__all__ = [
    "AcquisitionTag",
    "AcquisitionKind",
    "acq_eval",
    "acq_values",
    "log_h",
    "acq_maximize",
]

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
ASYMPTOTIC_BELOW = -12.0
# Terms of the asymptotic series of 1 - t*R(t) with R the Mills ratio.
_ASYMPTOTIC_TERMS = 12


class AcquisitionTag(str, Enum):
    EI = "EI"
    LOG_EI = "LogEI"
    PI = "PI"
    LOG_PI = "LogPI"
    UCB = "UCB"

    @classmethod
    def parse(cls, value) -> "AcquisitionTag":
        if isinstance(value, cls):
            return value
        for member in cls:
            if str(value).lower() in (member.value.lower(), member.name.lower()):
                return member
        raise ValueError(f"unknown acquisition {value!r}")


@dataclass(frozen=True)
class AcquisitionKind:
    tag: AcquisitionTag
    beta: float | None = None

    def __post_init__(self):
        tag = AcquisitionTag.parse(self.tag)
        object.__setattr__(self, "tag", tag)
        beta = self.beta
        if tag is AcquisitionTag.UCB:
            beta = 2.0 if beta is None else float(beta)
            if not np.isfinite(beta) or beta < 0:
                raise ValueError(f"beta must be finite and >= 0, got {beta!r}")
        else:
            beta = None
        object.__setattr__(self, "beta", beta)

    @property
    def name(self) -> str:
        if self.tag is AcquisitionTag.UCB:
            return f"UCB({self.beta:g})"
        return self.tag.value


def log_h(z) -> np.ndarray:
    """``log(z * Phi(z) + phi(z))`` without cancellation or underflow.

    Uses the scaled complementary error function for moderate negative ``z``
    and the asymptotic expansion ``1/z^2 - 3/z^4 + 15/z^6 - ...`` of the
    bracket for ``z < -12``.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    zp = z[pos]
    out[pos] = np.log(zp * ndtr(zp) + np.exp(-0.5 * zp**2 - LOG_SQRT_2PI))
    mid = (z < 0) & (z >= ASYMPTOTIC_BELOW)
    t = -z[mid]
    out[mid] = -0.5 * t**2 - LOG_SQRT_2PI + np.log1p(-t * SQRT_HALF_PI * erfcx(t / math.sqrt(2.0)))
    low = z < ASYMPTOTIC_BELOW
    t = -z[low]
    inv2 = 1.0 / t**2
    series = np.zeros_like(t)
    coef, power = 1.0, inv2
    for k in range(_ASYMPTOTIC_TERMS):
        series += (-1) ** k * coef * power
        coef *= 2 * k + 3
        power = power * inv2
    out[low] = -0.5 * t**2 - LOG_SQRT_2PI + np.log(series)
    return out


def acq_values(kind: AcquisitionKind, mean, var, incumbent: float) -> np.ndarray:
    """Vectorized acquisition from posterior moments."""
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(var, dtype=float), 0.0))
    tag = kind.tag
    if tag is AcquisitionTag.UCB:
        return -mean + kind.beta * sigma
    gap = incumbent - mean
    ok = sigma > 0
    z = np.where(ok, gap / np.where(ok, sigma, 1.0), 0.0)
    with np.errstate(divide="ignore"):
        if tag is AcquisitionTag.EI:
            val = sigma * np.exp(log_h(z))
            return np.where(ok, val, np.maximum(gap, 0.0))
        if tag is AcquisitionTag.LOG_EI:
            val = np.log(np.where(ok, sigma, 1.0)) + log_h(z)
            return np.where(ok, val, np.log(np.maximum(gap, 0.0)))
        if tag is AcquisitionTag.PI:
            return np.where(ok, ndtr(z), (gap > 0).astype(float))
        val = log_ndtr(z)
        return np.where(ok, val, np.where(gap > 0, 0.0, -np.inf))


def acq_eval(kind: AcquisitionKind, rpd: Rpd, x, incumbent: float) -> float:
    mean, var = predict(rpd, np.asarray(x, dtype=float).ravel())
    return float(acq_values(kind, np.array([mean]), np.array([var]), incumbent)[0])


def _batch(kind, rpd, X, incumbent):
    mean, var = predict(rpd, X)
    return acq_values(kind, mean, var, incumbent)


def acq_maximize(
    kind: AcquisitionKind,
    rpd: Rpd,
    incumbent: float,
    budget: tuple[int, int] = (512, 100),
    rng: np.random.Generator | int | None = None,
    n_refine: int = 4,
    step: float = 1e-3,
    fd_step: float = 1e-6,
) -> np.ndarray:
    """Approximate ``argmax`` of an acquisition over the unit cube.

    Scores ``budget[0]`` Sobol' points at a random offset into the sequence,
    then refines the ``n_refine`` best by ``budget[1]`` steps of projected
    ascent along a central-difference gradient. Accepted steps double the
    step length and rejected ones halve it. Returns the best point seen.
    """
    rng = np.random.default_rng(rng)
    n_seed, n_steps = budget
    dim = rpd.dim
    skip = int(rng.integers(0, 2**20))
    seeds = sobol_points(dim, n_seed, skip)
    vals = _batch(kind, rpd, seeds, incumbent)
    order = np.argsort(-vals, kind="stable")
    best_x, best_v = seeds[order[0]].copy(), vals[order[0]]
    if not np.isfinite(best_v) and best_v < 0:
        return best_x

    X = seeds[order[:n_refine]].copy()
    V = vals[order[:n_refine]].copy()
    steps = np.full(len(X), step)
    eye = np.eye(dim) * fd_step
    active = np.isfinite(V)
    for _ in range(n_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        # central differences for all active points in one batch
        probes = np.concatenate([X[idx, None, :] + eye[None], X[idx, None, :] - eye[None]], axis=1)
        pv = _batch(kind, rpd, probes.reshape(-1, dim), incumbent).reshape(idx.size, 2 * dim)
        grad = (pv[:, :dim] - pv[:, dim:]) / (2 * fd_step)
        grad = np.where(np.isfinite(grad), grad, 0.0)
        norm = np.linalg.norm(grad, axis=1)
        moving = norm > 0
        active[idx[~moving]] = False
        idx, grad, norm = idx[moving], grad[moving], norm[moving]
        if idx.size == 0:
            break
        trial = np.clip(X[idx] + steps[idx, None] * grad / norm[:, None], 0.0, 1.0)
        tv = _batch(kind, rpd, trial, incumbent)
        better = tv > V[idx]
        X[idx[better]] = trial[better]
        V[idx[better]] = tv[better]
        steps[idx[better]] *= 2.0
        steps[idx[~better]] *= 0.5
        active[idx[steps[idx] < 1e-10]] = False
    k = int(np.argmax(V))
    if V[k] > best_v:
        best_x = X[k].copy()
    return best_x
