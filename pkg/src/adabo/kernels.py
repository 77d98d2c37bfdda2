"""Stationary isotropic covariance functions: RBF, Matern 3/2 and rational quadratic.

Each kernel has an output scale ``c``, a length-scale ``lengthscale`` and a
noise variance ``s2`` that enters through a Kronecker/Dirac term; the rational
quadratic kernel adds a shape parameter ``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

import numpy as np

__all__ = [
    "KernelFamily",
    "KernelParams",
    "KernelSpec",
    "ParameterDomainError",
    "kernel_eval",
    "kernel_matrix",
    "kernel_vector",
    "kernel_cross",
    "kernel_matrix_gradients",
]

SQRT3 = math.sqrt(3.0)


class ParameterDomainError(ValueError):
    """A kernel parameter or fixture lies outside its admissible domain."""


class KernelFamily(str, Enum):
    RBF = "RBF"
    MATERN32 = "Matern32"
    RQ = "RQ"

    @property
    def param_names(self) -> tuple[str, ...]:
        """Parameter order used for vectors, fixtures and enumeration."""
        if self is KernelFamily.RQ:
            return ("c", "alpha", "lengthscale", "s2")
        return ("c", "lengthscale", "s2")

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @classmethod
    def parse(cls, value) -> "KernelFamily":
        if isinstance(value, cls):
            return value
        for member in cls:
            if str(value).lower() in (member.value.lower(), member.name.lower()):
                return member
        raise ValueError(f"unknown kernel family {value!r}")


@dataclass(frozen=True)
class KernelParams:
    c: float = 1.0
    lengthscale: float = 1.0
    s2: float = 0.0
    alpha: float | None = None

    def get(self, name: str) -> float:
        return getattr(self, name)

    def with_values(self, **values: float) -> "KernelParams":
        return replace(self, **{k: float(v) for k, v in values.items()})


def _check_param(name: str, value) -> None:
    if value is None or not np.isfinite(value):
        raise ParameterDomainError(f"parameter {name!r} must be finite, got {value!r}")
    if name == "s2":
        if value < 0:
            raise ParameterDomainError(f"parameter 's2' must be >= 0, got {value!r}")
    elif value <= 0:
        raise ParameterDomainError(f"parameter {name!r} must be > 0, got {value!r}")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, parameter values and the fixed coordinates of a restricted domain.

    ``fixed`` maps parameter names to fixture values. Fixed values override
    the corresponding entries of ``params`` everywhere the spec is used.
    """

    family: KernelFamily
    params: KernelParams = field(default_factory=KernelParams)
    fixed: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily.parse(self.family))
        names = self.family.param_names
        for name in self.fixed:
            if name not in names:
                raise ParameterDomainError(
                    f"cannot fix {name!r}: {self.family.value} has parameters {names}"
                )
        if len(self.fixed) > 2:
            raise ParameterDomainError("at most two parameters may be fixed")
        for name, value in self.fixed.items():
            _check_param(name, value)
        fixed = {k: float(v) for k, v in self.fixed.items()}
        object.__setattr__(self, "fixed", fixed)
        params = self.params
        if self.family is KernelFamily.RQ and params.alpha is None:
            params = replace(params, alpha=1.0)
        if self.family is not KernelFamily.RQ and params.alpha is not None:
            params = replace(params, alpha=None)
        if fixed:
            params = params.with_values(**fixed)
        object.__setattr__(self, "params", params)

    @property
    def free_names(self) -> tuple[str, ...]:
        return tuple(n for n in self.family.param_names if n not in self.fixed)

    def theta(self) -> np.ndarray:
        """All parameters as a vector in ``family.param_names`` order."""
        return np.array([self.params.get(n) for n in self.family.param_names], dtype=float)

    def with_params(self, **values: float) -> "KernelSpec":
        """Copy with updated parameter values; fixed entries cannot be changed."""
        clash = set(values) & set(self.fixed)
        if clash:
            raise ParameterDomainError(f"parameters {sorted(clash)} are fixed")
        return replace(self, params=self.params.with_values(**values))

    def validate(self) -> None:
        for name in self.family.param_names:
            _check_param(name, self.params.get(name))

    def describe(self) -> str:
        if not self.fixed:
            return self.family.value
        inner = ", ".join(f"{k}={v:.3g}" for k, v in self.fixed.items())
        return f"{self.family.value}({inner})"


def _correlation(spec: KernelSpec, r2: np.ndarray) -> np.ndarray:
    """Unit-scale kernel as a function of squared distance."""
    p = spec.params
    ell = p.lengthscale
    if spec.family is KernelFamily.RBF:
        return np.exp(-0.5 * r2 / ell**2)
    if spec.family is KernelFamily.MATERN32:
        a = SQRT3 * np.sqrt(r2) / ell
        return (1.0 + a) * np.exp(-a)
    return (1.0 + 0.5 * r2 / (p.alpha * ell**2)) ** (-p.alpha)


def _as_matrix(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError(f"{name} must be an N x D matrix with D >= 1")
    return X


def _sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kernel_cross(spec: KernelSpec, A, B) -> np.ndarray:
    """Cross-covariance between the rows of ``A`` and ``B``.

    The noise term is added for every pair of bitwise-identical rows.
    """
    spec.validate()
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    K = spec.params.c * _correlation(spec, _sqdist(A, B))
    if spec.params.s2 > 0:
        same = np.all(A[:, None, :] == B[None, :, :], axis=2)
        K = K + spec.params.s2 * same
    return K


def kernel_eval(spec: KernelSpec, u, v) -> float:
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape or u.size < 1:
        raise ValueError(f"dimension mismatch: {u.size} vs {v.size}")
    return float(kernel_cross(spec, u[None, :], v[None, :])[0, 0])


def kernel_vector(spec: KernelSpec, x, X) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    return kernel_cross(spec, x[None, :], X)[0]


def kernel_matrix(spec: KernelSpec, X) -> np.ndarray:
    """Covariance matrix of the rows of ``X``.

    Noise is attached per observation, i.e. only on the diagonal: duplicated
    rows are two noisy observations of the same latent value.
    """
    spec.validate()
    X = _as_matrix(X)
    K = spec.params.c * _correlation(spec, _sqdist(X, X))
    K = 0.5 * (K + K.T)
    K[np.diag_indices_from(K)] = spec.params.c + spec.params.s2
    return K


def kernel_matrix_gradients(spec: KernelSpec, X: np.ndarray) -> dict[str, np.ndarray]:
    """Derivatives of ``kernel_matrix`` with respect to each log-parameter.

    Returns ``{name: dK/dlog(theta_name)}`` for every free parameter.
    """
    X = _as_matrix(X)
    p = spec.params
    r2 = _sqdist(X, X)
    corr = _correlation(spec, r2)
    np.fill_diagonal(corr, 1.0)
    ell2 = p.lengthscale**2
    grads: dict[str, np.ndarray] = {}
    for name in spec.free_names:
        if name == "c":
            grads[name] = p.c * corr
        elif name == "s2":
            grads[name] = p.s2 * np.eye(X.shape[0])
        elif name == "lengthscale":
            if spec.family is KernelFamily.RBF:
                grads[name] = p.c * corr * r2 / ell2
            elif spec.family is KernelFamily.MATERN32:
                a = SQRT3 * np.sqrt(r2) / p.lengthscale
                grads[name] = p.c * a**2 * np.exp(-a)
            else:
                b = 0.5 * r2 / (p.alpha * ell2)
                grads[name] = p.c * (r2 / ell2) * (1.0 + b) ** (-p.alpha - 1.0)
        elif name == "alpha":
            b = 0.5 * r2 / (p.alpha * ell2)
            grads[name] = p.c * corr * p.alpha * (b / (1.0 + b) - np.log1p(b))
    return grads
