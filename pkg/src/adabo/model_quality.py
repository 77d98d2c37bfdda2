"""Surrogate quality scores: relative MSE, test log-likelihood and the mixed preference rule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gpr import Doe, Rpd, predict

__all__ = [
    "QualityScore",
    "DegenerateVarianceError",
    "DegenerateDensityError",
    "relmse",
    "tll",
    "tll_from_moments",
    "replicate_mean_relmse",
    "score",
    "prefer",
]

VARIANCE_FLOOR = 1e-12
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class DegenerateVarianceError(ValueError):
    """The reference outputs have zero variance."""


class DegenerateDensityError(ValueError):
    """Predictive variances are not usable as a density."""


@dataclass(frozen=True)
class QualityScore:
    relmse: float
    tll: float


def relmse(y_true, y_pred) -> float:
    """Squared prediction error normalized by the spread of ``y_true`` (= 1 - R^2)."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have equal length")
    if y_true.size < 2:
        raise DegenerateVarianceError("need at least two values")
    dev = y_true - y_true.mean()
    ss = float(dev @ dev)
    if ss == 0.0:
        raise DegenerateVarianceError("y_true is constant")
    err = y_true - y_pred
    return float(err @ err) / ss


def tll_from_moments(y, mean, var) -> float:
    """Average Gaussian log density of ``y`` under ``N(mean, var)``.

    Variances are floored at 1e-12 before taking logs.
    """
    y = np.asarray(y, dtype=float).ravel()
    mean = np.asarray(mean, dtype=float).ravel()
    var = np.asarray(var, dtype=float).ravel()
    if not np.all(np.isfinite(var)) or np.any(var < 0):
        raise DegenerateDensityError("predictive variances must be finite and non-negative")
    var = np.maximum(var, VARIANCE_FLOOR)
    terms = 0.5 * (np.log(var) + (y - mean) ** 2 / var)
    return float(-HALF_LOG_2PI - np.mean(terms))


def tll(test_doe: Doe, rpd: Rpd) -> float:
    mean, var = predict(rpd, test_doe.X)
    return tll_from_moments(test_doe.y, mean, var)


def replicate_mean_relmse(test_X, replicates, rpd: Rpd) -> float:
    """RelMSE between per-row replicate means and the posterior mean.

    ``replicates`` is a sequence with one array of repeated observations per
    row of ``test_X``; rows may have different replicate counts.
    """
    if any(np.size(r) < 1 for r in replicates):
        raise ValueError("each row needs at least one replicate")
    means = np.array([np.mean(np.asarray(r, dtype=float)) for r in replicates])
    mu, _ = predict(rpd, np.atleast_2d(np.asarray(test_X, dtype=float)))
    return relmse(means, mu)


def score(test_doe: Doe, rpd: Rpd) -> QualityScore:
    mean, var = predict(rpd, test_doe.X)
    return QualityScore(relmse(test_doe.y, mean), tll_from_moments(test_doe.y, mean, var))


def prefer(a: QualityScore, b: QualityScore, relmse_threshold: float = 0.05) -> QualityScore:
    """Pick the better of two scores.

    Lower RelMSE wins. When both RelMSE values are below the threshold, or
    they are equal, the higher TLL wins instead. Remaining ties go to ``a``.
    """
    both_accurate = a.relmse < relmse_threshold and b.relmse < relmse_threshold
    if both_accurate or a.relmse == b.relmse:
        return b if b.tll > a.tll else a
    return a if a.relmse < b.relmse else b
