"""Gaussian process regression with maximum-likelihood kernel fitting.

Outputs are standardized to zero mean and unit variance before fitting, so
the zero-mean prior is sensible for arbitrary objective offsets; predictions
are returned in the original units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dtrtri
from scipy.optimize import minimize

from .kernels import (
    SQRT3,
    KernelFamily,
    KernelSpec,
    _sqdist,
    kernel_cross,
    kernel_matrix,
)

__all__ = [
    "BOUNDS",
    "Doe",
    "Rpd",
    "IllConditionedError",
    "fit_mle",
    "posterior",
    "predict",
    "nll",
    "cholesky_with_jitter",
]

#: Free-parameter bounds in standardized-output, unit-cube-input units.
BOUNDS = {
    "c": (1e-3, 1e3),
    "lengthscale": (1e-3, 1e2),
    "s2": (1e-8, 1.0),
    "alpha": (1e-2, 1e2),
}

JITTER_FACTOR = 1e-10
JITTER_ESCALATIONS = 6
_FAILED_NLL = 1e25


class IllConditionedError(np.linalg.LinAlgError):
    """Cholesky factorization failed even after maximal jitter."""


@dataclass(frozen=True)
class Doe:
    """Design of experiments: ``N x D`` unit-cube designs and their objective values."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("X must be an N x D matrix with N, D >= 1")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("Doe entries must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def append(self, x, y: float) -> "Doe":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return Doe(np.vstack([self.X, x]), np.append(self.y, y))

    def subset(self, idx) -> "Doe":
        idx = np.asarray(idx, dtype=int)
        return Doe(self.X[idx], self.y[idx])

    def concat(self, other: "Doe") -> "Doe":
        return Doe(np.vstack([self.X, other.X]), np.concatenate([self.y, other.y]))


def cholesky_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K + jitter*I`` with escalating jitter.

    Starts at ``1e-10 * mean(diag K)`` and multiplies by ten on each failure,
    at most six times.
    """
    base = JITTER_FACTOR * max(float(np.trace(K)) / K.shape[0], np.finfo(float).tiny)
    jitter = base
    diag = np.diag_indices(K.shape[0])
    for _ in range(JITTER_ESCALATIONS + 1):
        Kj = K.copy()
        Kj[diag] += jitter
        try:
            return np.linalg.cholesky(Kj), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise IllConditionedError(
        f"Cholesky failed after {JITTER_ESCALATIONS} jitter escalations (last jitter {jitter / 10:.3g})"
    )


def _nll_terms(X, y, spec: KernelSpec):
    K = kernel_matrix(spec, X)
    L, jitter = cholesky_with_jitter(K)
    z = solve_triangular(L, y, lower=True)
    value = 2.0 * np.sum(np.log(np.diag(L))) + float(z @ z)
    return value, L, jitter


def nll(doe: Doe, spec: KernelSpec) -> float:
    """``ln det K + y^T K^-1 y`` evaluated through the Cholesky factor.

    The Doe is used as given; no standardization is applied here.
    """
    value, _, _ = _nll_terms(doe.X, doe.y, spec)
    return float(value)


@dataclass(frozen=True)
class Rpd:
    """Fitted posterior (regressive-predictive distribution).

    ``doe`` holds the standardized training data; ``chol`` and ``alpha_vec``
    cache the factorization of ``K + jitter*I`` and ``K^-1 y``.
    """

    doe: Doe
    spec: KernelSpec
    chol: np.ndarray
    alpha_vec: np.ndarray
    y_mean: float
    y_std: float
    jitter: float
    nll_value: float

    @property
    def dim(self) -> int:
        return self.doe.dim


def _standardize(y: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(np.mean(y))
    std = float(np.std(y))
    if not np.isfinite(std) or std <= 0:
        std = 1.0
    return (y - mean) / std, mean, std


def posterior(doe: Doe, spec: KernelSpec, y_mean: float | None = None, y_std: float | None = None) -> Rpd:
    """Condition a GP with fixed parameters on ``doe`` (no fitting).

    Standardization constants default to the sample mean and standard
    deviation of ``doe.y``.
    """
    spec.validate()
    ys, m, s = _standardize(doe.y)
    if y_mean is not None or y_std is not None:
        m = m if y_mean is None else float(y_mean)
        s = s if y_std is None else float(y_std)
        ys = (doe.y - m) / s
    value, L, jitter = _nll_terms(doe.X, ys, spec)
    alpha_vec = cho_solve((L, True), ys)
    return Rpd(Doe(doe.X, ys), spec, L, alpha_vec, m, s, jitter, float(value))


class _Likelihood:
    """``(value, gradient)`` of the doubled NLL in the log of the free parameters.

    Distances are computed once per fit; each call only rebuilds the
    covariance from them.
    """

    def __init__(self, X, y, spec: KernelSpec):
        self.y = y
        self.spec = spec
        self.names = spec.free_names
        self.fixed = {n: spec.params.get(n) for n in spec.family.param_names}
        self.r2 = _sqdist(X, X)
        self.r = np.sqrt(self.r2)
        self.n = X.shape[0]
        self.diag = np.diag_indices(self.n)

    def __call__(self, log_free):
        p = dict(self.fixed)
        p.update(zip(self.names, np.exp(log_free)))
        c, ell, s2 = p["c"], p["lengthscale"], p["s2"]
        family = self.spec.family
        r2 = self.r2
        if family is KernelFamily.RBF:
            corr = np.exp(-0.5 * r2 / ell**2)
        elif family is KernelFamily.MATERN32:
            a = SQRT3 * self.r / ell
            e = np.exp(-a)
            corr = (1.0 + a) * e
        else:
            alpha = p["alpha"]
            b = 0.5 * r2 / (alpha * ell**2)
            corr = (1.0 + b) ** (-alpha)
        corr[self.diag] = 1.0
        K = c * corr
        K[self.diag] += s2
        try:
            L, _ = cholesky_with_jitter(K)
        except np.linalg.LinAlgError:
            return _FAILED_NLL, np.zeros_like(log_free)
        Linv, info = dtrtri(L, lower=1)
        if info != 0:
            return _FAILED_NLL, np.zeros_like(log_free)
        Kinv = Linv.T @ Linv
        alpha_vec = Kinv @ self.y
        value = 2.0 * np.sum(np.log(np.diag(L))) + float(self.y @ alpha_vec)
        if not np.isfinite(value):
            return _FAILED_NLL, np.zeros_like(log_free)
        # trace(K^-1 dK) - alpha^T dK alpha == sum(W * dK) with W below
        W = Kinv - np.outer(alpha_vec, alpha_vec)
        g = np.empty(len(self.names))
        for k, name in enumerate(self.names):
            if name == "c":
                g[k] = c * np.sum(W * corr)
            elif name == "s2":
                g[k] = s2 * np.trace(W)
            elif name == "lengthscale":
                if family is KernelFamily.RBF:
                    dK = corr * r2 / ell**2
                elif family is KernelFamily.MATERN32:
                    dK = a * a * e
                else:
                    dK = (r2 / ell**2) * (1.0 + b) ** (-alpha - 1.0)
                g[k] = c * np.sum(W * dK)
            else:
                g[k] = c * alpha * np.sum(W * corr * (b / (1.0 + b) - np.log1p(b)))
        return value, g


def fit_mle(
    doe: Doe,
    spec: KernelSpec,
    restarts: int = 8,
    rng: np.random.Generator | int | None = None,
    warm_start: bool = False,
    maxiter: int = 200,
) -> Rpd:
    """Maximum-likelihood fit of the free kernel parameters.

    Free parameters are optimized in log space inside :data:`BOUNDS` with
    L-BFGS-B from ``restarts`` log-uniform starting points (plus the current
    parameter values when ``warm_start``). Fixed parameters are kept as is.

    Raises
    ------
    IllConditionedError
        If no restart yields a factorizable covariance matrix.
    """
    rng = np.random.default_rng(rng)
    spec.validate()
    ys, y_mean, y_std = _standardize(doe.y)
    names = spec.free_names
    best_spec, best_value = None, np.inf

    def consider(candidate: KernelSpec):
        nonlocal best_spec, best_value
        try:
            value, _, _ = _nll_terms(doe.X, ys, candidate)
        except np.linalg.LinAlgError:
            return
        if value < best_value:
            best_spec, best_value = candidate, value

    if not names:
        consider(spec)
    else:
        lo = np.log([BOUNDS[n][0] for n in names])
        hi = np.log([BOUNDS[n][1] for n in names])
        objective = _Likelihood(doe.X, ys, spec)
        starts = []
        if warm_start:
            starts.append(np.clip(np.log([spec.params.get(n) for n in names]), lo, hi))
        for _ in range(max(restarts, 0)):
            starts.append(rng.uniform(lo, hi))
        if not starts:
            starts.append(0.5 * (lo + hi))
        for x0 in starts:
            consider(spec.with_params(**dict(zip(names, np.exp(x0)))))
            res = minimize(
                objective,
                x0,
                jac=True,
                method="L-BFGS-B",
                bounds=list(zip(lo, hi)),
                options={"maxiter": maxiter, "ftol": 1e-9, "gtol": 1e-7},
            )
            if res.fun < _FAILED_NLL:
                consider(spec.with_params(**dict(zip(names, np.exp(np.clip(res.x, lo, hi))))))
    if best_spec is None:
        raise IllConditionedError("no restart produced a factorizable covariance matrix")
    return posterior(doe, best_spec, y_mean, y_std)


def refit(rpd: Rpd, doe: Doe) -> Rpd:
    """Condition ``rpd``'s kernel, parameters unchanged, on new data."""
    return posterior(doe, rpd.spec)


def predict(rpd: Rpd, x) -> tuple:
    """Posterior mean and variance in objective units.

    ``x`` may be a single point (returns two floats) or an ``M x D`` matrix
    (returns two arrays). Variances are clamped at zero.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Xq = x[None, :] if single else x
    if Xq.ndim != 2 or Xq.shape[1] != rpd.dim:
        raise ValueError(f"query dimension {Xq.shape[-1]} does not match model dimension {rpd.dim}")
    Ks = kernel_cross(rpd.spec, Xq, rpd.doe.X)
    mean = Ks @ rpd.alpha_vec
    v = solve_triangular(rpd.chol, Ks.T, lower=True)
    prior = rpd.spec.params.c + rpd.spec.params.s2
    var = np.maximum(prior - np.einsum("ij,ij->j", v, v), 0.0)
    mean = rpd.y_mean + rpd.y_std * mean
    var = var * rpd.y_std**2
    if single:
        return float(mean[0]), float(var[0])
    return mean, var
