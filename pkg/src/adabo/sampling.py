"""Sobol' low-discrepancy points and Saltelli designs.

Direction numbers come from the Joe & Kuo table vendored in
``data/direction_numbers.txt`` (one dimension per line: index, polynomial
degree, polynomial coefficient, initial direction integers).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

__all__ = [
    "SobolStream",
    "SaltelliDesign",
    "sobol_points",
    "saltelli_design",
    "load_direction_numbers",
    "max_dimension",
]

BITS = 32
DIRECTION_TABLE = "direction_numbers.txt"
DIRECTION_TABLE_SHA256 = "b1c2852f072f626b0d4f1b5bfc988b1c7cf0e2791ca9fdd2297412cb74dcfddd"


def parse_direction_numbers(text: str) -> list[tuple[int, int, list[int]]]:
    """Parse a direction-number table into ``(degree, coefficient, m)`` rows."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [int(v) for v in line.split()]
        d, s, a, m = fields[0], fields[1], fields[2], fields[3:]
        if d != len(rows) + 1:
            raise ValueError(f"line {lineno}: expected dimension {len(rows) + 1}, got {d}")
        if len(m) != s:
            raise ValueError(f"line {lineno}: degree {s} but {len(m)} direction integers")
        rows.append((s, a, m))
    return rows


@lru_cache(maxsize=None)
def _table() -> tuple:
    text = resources.files("adabo").joinpath("data").joinpath(DIRECTION_TABLE).read_text()
    digest = hashlib.sha256(text.encode()).hexdigest()
    if digest != DIRECTION_TABLE_SHA256:
        raise RuntimeError(f"direction-number table checksum mismatch ({digest})")
    return tuple(parse_direction_numbers(text))


def load_direction_numbers() -> list[tuple[int, int, list[int]]]:
    return list(_table())


def max_dimension() -> int:
    return len(_table())


@lru_cache(maxsize=64)
def _directions(dim: int) -> np.ndarray:
    """``dim x BITS`` matrix of direction integers ``v_{j,k}`` scaled to ``BITS`` bits."""
    table = _table()
    if dim > len(table):
        raise ValueError(f"dimension {dim} exceeds the direction table ({len(table)})")
    V = np.zeros((dim, BITS), dtype=np.uint64)
    for j in range(dim):
        s, a, m = table[j]
        if s == 0:
            mk = [1] * BITS
        else:
            mk = list(m) + [0] * (BITS - s)
            for k in range(s, BITS):
                val = mk[k - s] ^ (mk[k - s] << s)
                for i in range(1, s):
                    if (a >> (s - 1 - i)) & 1:
                        val ^= mk[k - i] << i
                mk[k] = val
        for k in range(BITS):
            V[j, k] = mk[k] << (BITS - 1 - k)
    return V


def sobol_points(dim: int, count: int, skip: int = 0) -> np.ndarray:
    """Points ``skip, ..., skip + count - 1`` of the unscrambled Sobol' sequence.

    Point ``n`` is the XOR of the direction integers selected by the bits of
    the Gray code of ``n``, so any index range can be produced directly.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if count < 1:
        raise ValueError("count must be >= 1")
    if skip < 0 or skip + count > 2**BITS:
        raise ValueError("index range exceeds the sequence length")
    V = _directions(dim)
    n = np.arange(skip, skip + count, dtype=np.uint64)
    gray = n ^ (n >> np.uint64(1))
    acc = np.zeros((count, dim), dtype=np.uint64)
    for k in range(BITS):
        bit = ((gray >> np.uint64(k)) & np.uint64(1)).astype(bool)
        if not bit.any():
            continue
        acc[bit] ^= V[:, k]
    return acc.astype(float) / float(2**BITS)


class SobolStream:
    """Stateful cursor over one Sobol' sequence."""

    def __init__(self, dim: int, skip: int = 0):
        if dim > max_dimension():
            raise ValueError(f"dimension {dim} exceeds the direction table ({max_dimension()})")
        self.dim = dim
        self.index = skip
        self.table = DIRECTION_TABLE

    def draw(self, count: int) -> np.ndarray:
        pts = sobol_points(self.dim, count, self.index)
        self.index += count
        return pts


@dataclass(frozen=True)
class SaltelliDesign:
    """Saltelli sample layout: blocks ``A``, ``B`` and ``AB_i`` stacked row-wise.

    Rows ``[0, n_base)`` are ``A``, ``[n_base, 2 n_base)`` are ``B`` and
    block ``i`` of ``AB`` occupies ``[(2 + i) n_base, (3 + i) n_base)``.
    """

    n_base: int
    dim: int
    rows: np.ndarray

    @property
    def A(self) -> np.ndarray:
        return self.rows[: self.n_base]

    @property
    def B(self) -> np.ndarray:
        return self.rows[self.n_base : 2 * self.n_base]

    def AB(self, i: int) -> np.ndarray:
        start = (2 + i) * self.n_base
        return self.rows[start : start + self.n_base]

    def split(self, y):
        """Split outputs over all rows into ``(y_A, y_B, y_AB)`` with ``y_AB`` of shape (dim, n_base)."""
        y = np.asarray(y, dtype=float).ravel()
        if y.size != self.rows.shape[0]:
            raise ValueError(f"expected {self.rows.shape[0]} outputs, got {y.size}")
        n = self.n_base
        return y[:n], y[n : 2 * n], y[2 * n :].reshape(self.dim, n)


def saltelli_design(dim: int, n_base: int, skip: int = 0) -> SaltelliDesign:
    """Build the ``n_base * (dim + 2)`` row Saltelli design.

    A power-of-two ``n_base`` keeps the underlying Sobol' points balanced;
    other values are accepted.
    """
    if n_base < 4:
        raise ValueError("n_base must be >= 4")
    base = sobol_points(2 * dim, n_base, skip)
    A, B = base[:, :dim], base[:, dim:]
    blocks = [A, B]
    for i in range(dim):
        AB = A.copy()
        AB[:, i] = B[:, i]
        blocks.append(AB)
    return SaltelliDesign(n_base, dim, np.vstack(blocks))
