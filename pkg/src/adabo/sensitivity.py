"""Variance-based sensitivity indices on Saltelli designs.

First-order indices use the Saltelli (2010) estimator and total-order
indices the Jansen estimator, both normalized by the output variance over
the ``A`` and ``B`` blocks. Outputs are centred on their ``A``/``B`` mean
first so the estimates do not depend on an additive offset. Confidence intervals come from a percentile
bootstrap that resamples base rows jointly across all blocks.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .model_quality import DegenerateVarianceError
from .sampling import SaltelliDesign, saltelli_design

__all__ = [
    "SensitivityReport",
    "ConfidenceBounds",
    "sobol_indices",
    "bootstrap_ci",
    "convergence_curve",
    "ishigami",
    "report_to_text",
    "report_from_text",
]

REPORT_COLUMNS = ("name", "S1", "S1_low", "S1_high", "ST", "ST_low", "ST_high")


@dataclass(frozen=True)
class ConfidenceBounds:
    level: float
    s1_low: np.ndarray
    s1_high: np.ndarray
    st_low: np.ndarray
    st_high: np.ndarray


@dataclass(frozen=True)
class SensitivityReport:
    """Per-parameter indices; ``ci`` is ``None`` until bootstrapped."""

    names: tuple[str, ...]
    s1: np.ndarray
    st: np.ndarray
    n_base: int
    ci: ConfidenceBounds | None = None

    def with_ci(self, ci: ConfidenceBounds) -> "SensitivityReport":
        return SensitivityReport(self.names, self.s1, self.st, self.n_base, ci)


def _estimate(yA, yB, yAB):
    """Vectorized estimators; leading axes of ``yA``/``yB`` are batch axes.

    ``yAB`` carries the parameter axis just before the sample axis.
    """
    pooled = np.concatenate([yA, yB], axis=-1)
    var = np.var(pooled, axis=-1)
    if np.any(var <= 0):
        raise DegenerateVarianceError("output variance over A and B is zero")
    # centring makes the first-order numerator exactly shift invariant
    mean = np.mean(pooled, axis=-1, keepdims=True)
    yA, yB = yA - mean, yB - mean
    yAB = yAB - mean[..., None, :]
    var = var[..., None]
    s1 = np.mean(yB[..., None, :] * (yAB - yA[..., None, :]), axis=-1) / var
    st = np.mean((yA[..., None, :] - yAB) ** 2, axis=-1) / (2.0 * var)
    return s1, st


def _names(dim, names):
    if names is None:
        return tuple(f"x{i + 1}" for i in range(dim))
    names = tuple(str(n) for n in names)
    if len(names) != dim:
        raise ValueError(f"expected {dim} parameter names, got {len(names)}")
    return names


def sobol_indices(design: SaltelliDesign, y, names=None) -> SensitivityReport:
    """First- and total-order indices from outputs over every design row.

    Raises
    ------
    DegenerateVarianceError
        If the outputs over ``A`` and ``B`` are constant.
    """
    yA, yB, yAB = design.split(y)
    s1, st = _estimate(yA, yB, yAB)
    return SensitivityReport(_names(design.dim, names), s1, st, design.n_base)


def bootstrap_ci(
    design: SaltelliDesign,
    y,
    level: float = 0.95,
    resamples: int = 1000,
    rng: np.random.Generator | int | None = None,
    chunk: int = 250,
) -> ConfidenceBounds:
    """Percentile bootstrap bounds for ``S1`` and ``ST``.

    Each resample draws ``n_base`` base indices with replacement and uses
    the same indices in ``A``, ``B`` and every ``AB_i`` block.
    """
    if resamples < 100:
        raise ValueError("resamples must be >= 100")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    rng = np.random.default_rng(rng)
    yA, yB, yAB = design.split(y)
    n = design.n_base
    s1s, sts = [], []
    done = 0
    while done < resamples:
        m = min(chunk, resamples - done)
        idx = rng.integers(0, n, size=(m, n))
        s1, st = _estimate(yA[idx], yB[idx], np.moveaxis(yAB[:, idx], 0, 1))
        s1s.append(s1)
        sts.append(st)
        done += m
    s1s = np.concatenate(s1s)
    sts = np.concatenate(sts)
    q = [50 * (1 - level), 50 * (1 + level)]
    s1_lo, s1_hi = np.percentile(s1s, q, axis=0)
    st_lo, st_hi = np.percentile(sts, q, axis=0)
    return ConfidenceBounds(level, s1_lo, s1_hi, st_lo, st_hi)


def convergence_curve(
    objective,
    dim: int,
    n_bases,
    rng: np.random.Generator | int | None = None,
    names=None,
    level: float = 0.95,
    resamples: int = 1000,
) -> list[SensitivityReport]:
    """One bootstrapped report per base-sample count.

    ``objective`` maps an ``(n, dim)`` array of unit-cube points to ``n``
    outputs. Each design starts at a fresh random offset into the Sobol'
    sequence, aligned to a multiple of its base count.
    """
    n_bases = [int(n) for n in n_bases]
    if not n_bases:
        raise ValueError("need at least one base-sample count")
    if any(b <= a for a, b in zip(n_bases, n_bases[1:])):
        raise ValueError("base-sample counts must be increasing")
    rng = np.random.default_rng(rng)
    out = []
    for n in n_bases:
        skip = int(rng.integers(0, 1024)) * n
        design = saltelli_design(dim, n, skip)
        y = np.asarray(objective(design.rows), dtype=float).ravel()
        rep = sobol_indices(design, y, names)
        out.append(rep.with_ci(bootstrap_ci(design, y, level, resamples, rng)))
    return out


def ishigami(u, a: float = 7.0, b: float = 0.1) -> np.ndarray:
    """Ishigami function on unit-cube rows mapped to ``[-pi, pi]^3``."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    x = -math.pi + 2 * math.pi * u
    return np.sin(x[:, 0]) + a * np.sin(x[:, 1]) ** 2 + b * x[:, 2] ** 4 * np.sin(x[:, 0])


def report_to_text(report: SensitivityReport, delimiter: str = ",") -> str:
    """One row per parameter; missing bounds are written as ``nan``."""
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    nan = np.full(len(report.names), np.nan)
    ci = report.ci
    cols = (
        report.s1,
        ci.s1_low if ci else nan,
        ci.s1_high if ci else nan,
        report.st,
        ci.st_low if ci else nan,
        ci.st_high if ci else nan,
    )
    for i, name in enumerate(report.names):
        w.writerow([name] + [repr(float(c[i])) for c in cols])
    return buf.getvalue()


def report_from_text(text: str, n_base: int = 0, level: float = 0.95, delimiter: str = ",") -> SensitivityReport:
    rows = list(csv.reader(io.StringIO(text), delimiter=delimiter))
    if not rows or tuple(rows[0]) != REPORT_COLUMNS:
        raise ValueError("missing or malformed report header")
    body = rows[1:]
    names = tuple(r[0] for r in body)
    vals = np.array([[float(v) for v in r[1:]] for r in body]).reshape(len(body), 6)
    ci = None
    if not np.isnan(vals[:, [1, 2, 4, 5]]).all():
        ci = ConfidenceBounds(level, vals[:, 1], vals[:, 2], vals[:, 4], vals[:, 5])
    return SensitivityReport(names, vals[:, 0], vals[:, 3], n_base, ci)
