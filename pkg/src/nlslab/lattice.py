"""Periodic grids, the unit-scale frequency partition, and frequency localizers.

The real line is modelled by a large torus of length ``circumference``.
A function is stored by its samples on ``num_points`` equispaced nodes and
its Fourier coefficients follow the convention

    u(x) = sum_n uhat[n] * exp(i * xi_n * x),   xi_n = 2*pi*n / circumference,

so that ``uhat = fft(u) / num_points``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

MAX_SPACING = 0.1
_SPACING_SLACK = 1e-12


class DomainError(ValueError):
    """Raised when an index, interval or band falls outside the valid range."""


def mollifier(x):
    """Standard bump exp(-1/(1-x^2)) on (-1, 1), zero outside."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def unit_bump(x):
    """psi(x) = phi(x) / sum_j phi(x - j); integer translates of psi sum to one."""
    x = np.asarray(x, dtype=float)
    lo = np.floor(x)
    # only the two neighbouring translates can be nonzero
    denom = mollifier(x - lo) + mollifier(x - lo - 1.0)
    return mollifier(x) / denom


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    f0 = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    s = 1.0 - t
    f1 = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    return f0 / (f0 + f1)


def smooth_cutoff(s, radius):
    """Equal to 1 for |s| <= radius and 0 for |s| >= 2*radius, smooth between."""
    s = np.abs(np.asarray(s, dtype=float))
    return 1.0 - smooth_step((s - radius) / radius)


@dataclass(frozen=True)
class GridSpec:
    num_points: int = 16384
    circumference: float = 256.0
    dt: float = 1e-3
    horizon: float = 10.0

    def __post_init__(self):
        n = self.num_points
        if n < 2 or n & (n - 1):
            raise ValueError(f"num_points must be a power of two, got {n}")
        if self.circumference <= 0 or self.dt <= 0 or self.horizon <= 0:
            raise ValueError("circumference, dt and horizon must be positive")
        if self.spacing > MAX_SPACING + _SPACING_SLACK:
            raise ValueError(
                f"frequency spacing {self.spacing:.4g} exceeds {MAX_SPACING}; "
                "enlarge the circumference"
            )

    @property
    def spacing(self) -> float:
        """Frequency spacing 2*pi/L."""
        return 2 * np.pi / self.circumference

    @property
    def dx(self) -> float:
        return self.circumference / self.num_points

    @property
    def nyquist(self) -> float:
        return self.num_points * self.spacing / 2

    @property
    def x(self) -> np.ndarray:
        """Nodes on the centred window [-L/2, L/2)."""
        return -self.circumference / 2 + self.dx * np.arange(self.num_points)

    @property
    def modes(self) -> np.ndarray:
        """Integer mode index of every FFT slot."""
        return np.fft.fftfreq(self.num_points, d=1.0 / self.num_points).astype(int)

    @property
    def xi(self) -> np.ndarray:
        return self.spacing * self.modes

    def max_lattice_range(self) -> int:
        """Largest K such that the Nyquist band covers [-K-2, K+2]."""
        return int(np.floor(self.nyquist)) - 2

    def check_lattice_range(self, k_max: int):
        if self.nyquist < k_max + 2:
            raise DomainError(
                f"Nyquist frequency {self.nyquist:.3g} does not cover lattice range {k_max} + 2"
            )

    def band_modes(self, lo: float, hi: float) -> np.ndarray:
        """Sorted mode indices n with lo <= xi_n <= hi."""
        n_lo = int(np.ceil(lo / self.spacing - 1e-9))
        n_hi = int(np.floor(hi / self.spacing + 1e-9))
        half = self.num_points // 2
        if n_lo <= -half or n_hi >= half:
            raise DomainError(f"band [{lo}, {hi}] exceeds the Nyquist band")
        return np.arange(n_lo, n_hi + 1)

    def replace(self, **changes) -> "GridSpec":
        values = dict(num_points=self.num_points, circumference=self.circumference,
                      dt=self.dt, horizon=self.horizon)
        values.update(changes)
        return GridSpec(**values)


@dataclass(frozen=True, eq=False)
class Field:
    """Complex field on a grid; ``samples`` is the physical side."""

    grid: GridSpec
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.shape != (self.grid.num_points,):
            raise ValueError(
                f"expected {self.grid.num_points} samples, got shape {samples.shape}"
            )
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_coefficients(cls, grid: GridSpec, coefficients) -> "Field":
        coefficients = np.asarray(coefficients, dtype=complex)
        return cls(grid, np.fft.ifft(coefficients) * grid.num_points)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, np.zeros(grid.num_points, dtype=complex))

    @property
    def coefficients(self) -> np.ndarray:
        return np.fft.fft(self.samples) / self.grid.num_points

    def norm(self) -> float:
        """L^2 norm on the torus."""
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2) * self.grid.dx))

    def with_samples(self, samples) -> "Field":
        return Field(self.grid, samples)

    def with_coefficients(self, coefficients) -> "Field":
        return Field.from_coefficients(self.grid, coefficients)

    def shifted(self, x0: float) -> "Field":
        """Return x -> u(x + x0), exact for band-limited fields."""
        return self.with_coefficients(self.coefficients * np.exp(1j * self.grid.xi * x0))

    def modulated(self, k: float) -> "Field":
        """Return x -> exp(i k x) u(x); k must be a grid frequency."""
        ratio = k / self.grid.spacing
        if abs(ratio - round(ratio)) > 1e-9:
            raise DomainError(f"modulation {k} is not a grid frequency")
        return self.with_samples(self.samples * np.exp(1j * k * self.grid.x))

    def significant_band(self, rel_tol: float = 1e-10) -> tuple[float, float]:
        """Frequency interval carrying all coefficients above rel_tol * max."""
        c = np.abs(self.coefficients)
        top = c.max()
        if top == 0:
            return (0.0, 0.0)
        xi = self.grid.xi[c >= rel_tol * top]
        return float(xi.min()), float(xi.max())

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.samples + other.samples)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.samples - other.samples)

    def __mul__(self, scalar) -> "Field":
        return Field(self.grid, self.samples * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class UnitPartition:
    """Partition of unity p_k(xi) = psi(xi - k) for |k| <= k_max."""

    k_max: int
    bump: Callable = field(default=unit_bump, repr=False)

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")

    @property
    def bins(self) -> np.ndarray:
        return np.arange(-self.k_max, self.k_max + 1)

    def __call__(self, k: int, xi):
        return self.bump(np.asarray(xi, dtype=float) - k)

    def total(self, xi):
        xi = np.asarray(xi, dtype=float)
        return sum(self(k, xi) for k in self.bins)

    def check_bin(self, k: int):
        if not -self.k_max <= k <= self.k_max:
            raise DomainError(f"bin {k} outside lattice range [-{self.k_max}, {self.k_max}]")


def make_partition(k_max: int) -> UnitPartition:
    return UnitPartition(int(k_max))


def project(u: Field, k: int, partition: UnitPartition | None = None) -> Field:
    """u_k = P_k u, the Fourier multiplier p_k."""
    if partition is None:
        partition = make_partition(max(1, abs(int(k))))
    partition.check_bin(k)
    if abs(k) + 1 > u.grid.nyquist:
        raise DomainError(f"bin {k} lies outside the Nyquist band of the grid")
    return u.with_coefficients(u.coefficients * partition(k, u.grid.xi))


def project_interval(u: Field, a: int, b: int, partition: UnitPartition | None = None) -> Field:
    """u_A = sum of P_k u over k in [a, b]."""
    if a > b:
        raise DomainError(f"empty interval [{a}, {b}]")
    if partition is None:
        partition = make_partition(max(1, abs(int(a)), abs(int(b))))
    partition.check_bin(a)
    partition.check_bin(b)
    if max(abs(a), abs(b)) + 1 > u.grid.nyquist:
        raise DomainError(f"interval [{a}, {b}] exceeds the Nyquist band")
    xi = u.grid.xi
    mult = sum(partition(k, xi) for k in range(a, b + 1))
    return u.with_coefficients(u.coefficients * mult)


@dataclass(frozen=True)
class Localizer:
    """Separated frequency localizer a(xi, eta) = a0(xi) a0(eta).

    ``support`` is a closed interval containing supp a0, or None when a0 == 1.
    """

    center: float
    width: float
    profile: Callable = field(repr=False)
    support: tuple[float, float] | None = None
    label: str = ""

    @classmethod
    def identity(cls) -> "Localizer":
        return cls(0.0, np.inf, _ones, None, "identity")

    @classmethod
    def from_partition(cls, k: int, scale: float = 1.0) -> "Localizer":
        """Unit bump a0 = scale * p_k."""
        def profile(xi, _k=k, _s=scale):
            return _s * unit_bump(np.asarray(xi, dtype=float) - _k)
        return cls(float(k), 2.0, profile, (k - 1.0, k + 1.0), f"p_{k}")

    @classmethod
    def bump(cls, center: float, half_width: float) -> "Localizer":
        """Mollifier bump of given half width, normalized to 1 at the centre."""
        peak = float(np.exp(-1.0))
        def profile(xi, _c=center, _w=half_width):
            return mollifier((np.asarray(xi, dtype=float) - _c) / _w) / peak
        return cls(float(center), 2.0 * half_width, profile,
                   (center - half_width, center + half_width), f"bump({center},{half_width})")

    @property
    def is_identity(self) -> bool:
        return self.support is None

    def a0(self, xi):
        return self.profile(np.asarray(xi, dtype=float))

    def __call__(self, xi, eta):
        return self.a0(xi) * self.a0(eta)

    def apply(self, u: Field) -> Field:
        """A0 u."""
        if self.is_identity:
            return u
        return u.with_coefficients(u.coefficients * self.a0(u.grid.xi))

    def scaled(self, factor: float) -> "Localizer":
        profile = self.profile
        return Localizer(self.center, self.width,
                         lambda xi, _p=profile, _f=factor: _f * _p(xi),
                         self.support, f"{factor}*{self.label}")


def _ones(xi):
    return np.ones_like(np.asarray(xi, dtype=float))


def spatial_partition(grid: GridSpec, scale: float = 1.0) -> tuple[np.ndarray, float]:
    """Translates chi_j of a bump of unit scale covering the torus.

    Returns (centres, spacing); the spacing is adjusted so an integer number
    of translates tiles the circumference.
    """
    count = max(1, int(round(grid.circumference / scale)))
    h = grid.circumference / count
    centres = -grid.circumference / 2 + h * np.arange(count)
    return centres, h


def tube_profile(grid: GridSpec, centre: float, h: float, x=None) -> np.ndarray:
    """Sampled chi_j(x) = psi((x - centre)/h) wrapped onto the torus."""
    if x is None:
        x = grid.x
    L = grid.circumference
    d = (np.asarray(x) - centre + L / 2) % L - L / 2
    return unit_bump(d / h)
