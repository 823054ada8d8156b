"""Frequency envelopes on the integer lattice and the discrete maximal function."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .lattice import DomainError, Field, UnitPartition

DEFAULT_BIG_C = 4.0
SERIES_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class Envelope:
    """Nonnegative sequence c_k on k = offset, ..., offset + len(values) - 1."""

    values: np.ndarray
    offset: int
    admissibility_constant: float | None = None
    degenerate: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("envelope values must be a non-empty 1-D sequence")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("envelope entries must be finite and nonnegative")
        object.__setattr__(self, "values", values)

    @classmethod
    def centered(cls, values, **kwargs) -> "Envelope":
        """Envelope on [-K, K] from 2K+1 values."""
        values = np.asarray(values, dtype=float)
        if values.size % 2 == 0:
            raise ValueError("a centred envelope needs an odd number of entries")
        return cls(values, -(values.size // 2), **kwargs)

    @property
    def k(self) -> np.ndarray:
        return self.offset + np.arange(self.values.size)

    @property
    def admissible(self) -> bool:
        return self.admissibility_constant is not None

    def __getitem__(self, k: int) -> float:
        i = k - self.offset
        if not 0 <= i < self.values.size:
            return 0.0
        return float(self.values[i])

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def with_values(self, values, **kwargs) -> "Envelope":
        return replace(self, values=np.asarray(values, dtype=float), **kwargs)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "c_k"])
            for k, c in zip(self.k, self.values):
                writer.writerow([int(k), repr(float(c))])

    @classmethod
    def from_csv(cls, path) -> "Envelope":
        with open(Path(path), newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no envelope rows")
        ks = np.array([int(r["k"]) for r in rows])
        if np.any(np.diff(ks) != 1):
            raise ValueError(f"{path}: bins must be consecutive integers")
        return cls(np.array([float(r["c_k"]) for r in rows]), int(ks[0]))


def _maximal_values(c: np.ndarray) -> np.ndarray:
    n = c.size
    prefix = np.concatenate(([0.0], np.cumsum(c)))
    idx = np.arange(n)
    best = c.copy()
    for j in range(1, n):
        lo = np.clip(idx - j, 0, n)
        hi = np.clip(idx + j + 1, 0, n)
        best = np.maximum(best, (prefix[hi] - prefix[lo]) / (2 * j + 1))
    return best


def maximal_function(c: Envelope) -> Envelope:
    """Centred discrete maximal function with zero padding outside the lattice."""
    return Envelope(_maximal_values(c.values), c.offset)


def admissibilize(c0: Envelope, big_c: float = DEFAULT_BIG_C, tol: float = SERIES_TOL) -> Envelope:
    """Place c0 under an envelope with the maximal property.

    Sums (2C)^-m M^m c0 until the term is below ``tol * |c0|``; the dropped
    tail is replaced by the constant majorant (2C)^-n * 2C/(2C-1) * max(M^n c0),
    which keeps Mc <= 2C c exact rather than approximate.
    """
    if big_c <= 1:
        raise ValueError(f"big_c must exceed 1, got {big_c}")
    base = c0.values
    scale = np.linalg.norm(base)
    if scale == 0:
        return c0.with_values(np.zeros_like(base), admissibility_constant=2 * big_c, degenerate=True)
    q = 1.0 / (2 * big_c)
    total = base.copy()
    term = base.copy()
    weight = 1.0
    for _ in range(10_000):
        term = _maximal_values(term)
        weight *= q
        if weight * np.linalg.norm(term) < tol * scale:
            break
        total += weight * term
    total += weight * term.max() / (1 - q)
    return c0.with_values(total, admissibility_constant=2 * big_c, degenerate=False)


def interval_mass(c: Envelope, a: int, b: int) -> float:
    """(sum of c_k^2 over k in [a, b])^(1/2)."""
    if a > b:
        raise DomainError(f"empty interval [{a}, {b}]")
    if a < c.k[0] or b > c.k[-1]:
        raise DomainError(f"interval [{a}, {b}] outside envelope range")
    i, j = a - c.offset, b - c.offset
    return float(np.sqrt(np.sum(c.values[i:j + 1] ** 2)))


def bin_masses(u: Field, partition: UnitPartition) -> np.ndarray:
    """||P_k u||_{L^2} for every bin of the partition."""
    coef = u.coefficients
    xi = u.grid.xi
    L = u.grid.circumference
    return np.array([np.sqrt(L * np.sum(np.abs(coef * partition(k, xi)) ** 2))
                     for k in partition.bins])


def envelope_of(u: Field, eps: float, partition: UnitPartition,
                big_c: float = DEFAULT_BIG_C) -> Envelope:
    """Admissible envelope with ||P_k u|| <= eps * c_k and |c| about 1 when |u| = eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    u.grid.check_lattice_range(partition.k_max)
    raw = bin_masses(u, partition) / eps
    if not np.any(raw > 0):
        return Envelope(np.zeros_like(raw), int(partition.bins[0]),
                        admissibility_constant=2 * big_c, degenerate=True)
    # the bins overlap, so |raw| <= |u|/eps; rescaling upward keeps the domination
    target = u.norm() / eps
    raw = raw * max(1.0, target / np.linalg.norm(raw))
    return admissibilize(Envelope(raw, int(partition.bins[0])), big_c)
