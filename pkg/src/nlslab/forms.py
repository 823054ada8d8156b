"""Translation-invariant multilinear forms evaluated in frequency space.

A k-linear form with symbol l acts on alternating arguments (u1, conj u2, u3, ...):

    L(u1, ..., uk)(x) = sum l(xi1, ..., xik) uh1(xi1) conj(uh2(xi2)) ... exp(i x zeta),
    zeta = xi1 - xi2 + xi3 - ...,

with uh the Fourier coefficients of :class:`~nlslab.lattice.Field`. A constant
symbol 1 therefore gives the pointwise product u1 conj(u2) u3 ..., which pins
the normalization.

Three evaluation paths exist: pointwise products (constant symbols),
separable low-rank expansions, and the exact sum over the active band of modes.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .lattice import DomainError, Field, GridSpec

DIRECT_LIMIT = 40_000_000  # tensor entries allowed on the direct path
_CHUNK_ENTRIES = 4_000_000


# bands ------------------------------------------------------------------------

def active_modes(*fields: Field, rel_tol: float = 1e-14) -> np.ndarray:
    """Contiguous range of mode indices covering the coefficients above round-off."""
    grid = fields[0].grid
    idx = []
    for f in fields:
        c = np.abs(f.coefficients)
        top = c.max()
        if top > 0:
            idx.append(grid.modes[c > rel_tol * top])
    if not idx:
        return np.arange(0, 1)
    allidx = np.concatenate(idx)
    return np.arange(allidx.min(), allidx.max() + 1)


def check_dealiased(grid: GridSpec, modes: np.ndarray):
    """Inputs must sit in the central half of the spectral band."""
    quarter = grid.num_points // 4
    if modes.size and (modes.min() <= -quarter or modes.max() >= quarter):
        raise DomainError(
            f"input modes [{modes.min()}, {modes.max()}] leave the central half |n| < {quarter}"
        )


def band_values(f: Field, modes: np.ndarray) -> np.ndarray:
    return f.coefficients[np.mod(modes, f.grid.num_points)]


def _scatter(grid: GridSpec, lo: int, values: np.ndarray) -> np.ndarray:
    """Place output coefficients for modes lo, lo+1, ... into an FFT-ordered array.

    When the output range exceeds the Nyquist band only the central half is kept,
    where the values are exact; elsewhere they would alias.
    """
    n = grid.num_points
    modes = lo + np.arange(values.size)
    out = np.zeros(n, dtype=complex)
    if modes.min() >= -n // 2 and modes.max() < n // 2:
        out[np.mod(modes, n)] = values
        return out
    keep = np.abs(modes) < n // 4
    out[np.mod(modes[keep], n)] = values[keep]
    return out


# forms ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MultilinearForm:
    arity: int
    symbol: Callable = field(repr=False)
    label: str = ""
    constant: complex | None = None
    lowrank: "Decomposition | None" = field(default=None, repr=False)
    zero: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.arity not in (3, 4, 6):
            raise ValueError(f"arity must be 3, 4 or 6, got {self.arity}")

    @classmethod
    def from_trilinear(cls, c) -> "MultilinearForm":
        return cls(3, c, c.name, constant=c.constant, lowrank=c.lowrank, zero=c.is_zero)

    @classmethod
    def from_quartic(cls, q) -> "MultilinearForm":
        return cls(4, q, q.label or q.tag, zero=q.zero)

    @classmethod
    def constant_form(cls, arity: int, value: complex = 1.0) -> "MultilinearForm":
        value = complex(value)
        return cls(arity, lambda *x: np.full(np.broadcast(*x).shape, value), f"{value}",
                   constant=value, zero=value == 0)

    def tensor(self, grid: GridSpec, modes: np.ndarray) -> np.ndarray:
        """Symbol on the full product of the band, cached."""
        key = (grid.spacing, int(modes[0]), int(modes[-1]))
        if key not in self._cache:
            size = modes.size ** self.arity
            if size > DIRECT_LIMIT:
                raise DomainError(f"direct tensor with {size} entries exceeds the limit")
            xi = grid.spacing * modes
            grids = np.meshgrid(*([xi] * self.arity), indexing="ij", sparse=True)
            self._cache[key] = np.asarray(self.symbol(*grids), dtype=complex) * np.ones(
                (modes.size,) * self.arity)
        return self._cache[key]


@dataclass(frozen=True, eq=False)
class DensityField:
    grid: GridSpec
    samples: np.ndarray
    label: str = ""

    @classmethod
    def from_coefficients(cls, grid: GridSpec, coefficients, label: str = "") -> "DensityField":
        return cls(grid, np.fft.ifft(coefficients) * grid.num_points, label)

    @property
    def coefficients(self) -> np.ndarray:
        return np.fft.fft(self.samples) / self.grid.num_points

    def integral(self) -> complex:
        return complex(np.sum(self.samples) * self.grid.dx)

    @property
    def real(self) -> np.ndarray:
        return self.samples.real

    def imag_ratio(self) -> float:
        scale = np.max(np.abs(self.samples))
        return float(np.max(np.abs(self.samples.imag)) / scale) if scale > 0 else 0.0

    def dx(self) -> "DensityField":
        """Spectral x-derivative."""
        return DensityField.from_coefficients(self.grid, 1j * self.grid.xi * self.coefficients,
                                              f"d({self.label})")

    def shifted(self, x0: float) -> "DensityField":
        return DensityField.from_coefficients(
            self.grid, self.coefficients * np.exp(1j * self.grid.xi * x0), self.label)

    def __add__(self, other) -> "DensityField":
        return DensityField(self.grid, self.samples + _samples(other), self.label)

    def __sub__(self, other) -> "DensityField":
        return DensityField(self.grid, self.samples - _samples(other), self.label)

    def __mul__(self, scalar) -> "DensityField":
        return DensityField(self.grid, self.samples * scalar, self.label)

    __rmul__ = __mul__


def _samples(x):
    return x.samples if isinstance(x, DensityField) else x


# direct evaluation on a band -----------------------------------------------------

def _alternating(values: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [v if i % 2 == 0 else np.conj(v) for i, v in enumerate(values)]


def band_sum(tensor: np.ndarray, values: Sequence[np.ndarray]) -> np.ndarray:
    """Coefficients of the output at zeta = n1 - n2 + n3 - ... (offset by the minimum).

    ``values`` are band coefficients of the arguments (unconjugated).
    """
    k = tensor.ndim
    M = tensor.shape[0]
    vals = _alternating(values)
    signs = np.array([1 if i % 2 == 0 else -1 for i in range(k)])
    # index of zeta relative to its minimum
    idx_axes = []
    for i, s in enumerate(signs):
        shape = [1] * k
        shape[i] = M
        idx_axes.append((np.arange(M) if s > 0 else (M - 1 - np.arange(M))).reshape(shape))
    width = k * (M - 1) + 1
    out = np.zeros(width, dtype=complex)
    tail = tensor[0].size
    step = max(1, _CHUNK_ENTRIES // max(tail, 1))
    rest_weight = vals[1].reshape(-1, *([1] * (k - 2)))
    for i in range(2, k):
        shape = [1] * (k - 1)
        shape[i - 1] = M
        rest_weight = rest_weight * vals[i].reshape(shape)
    rest_index = sum(idx_axes[1:])[0] if k > 1 else 0
    for start in range(0, M, step):
        stop = min(M, start + step)
        w = tensor[start:stop] * rest_weight[None] * vals[0][start:stop].reshape(-1, *([1] * (k - 1)))
        index = (np.arange(start, stop).reshape(-1, *([1] * (k - 1))) + rest_index[None]).ravel()
        out += np.bincount(index, weights=w.real.ravel(), minlength=width)
        out += 1j * np.bincount(index, weights=w.imag.ravel(), minlength=width)
    return out


def zeta_offset(modes: np.ndarray, arity: int) -> int:
    """Smallest zeta index produced by band_sum."""
    lo, hi = int(modes[0]), int(modes[-1])
    n_plus = (arity + 1) // 2
    n_minus = arity // 2
    return n_plus * lo - n_minus * hi


def diagonal_sum(tensor: np.ndarray, values: Sequence[np.ndarray]) -> complex:
    """Fourier-side sum over zeta = 0 only (the integral of the density / L)."""
    k = tensor.ndim
    M = tensor.shape[0]
    vals = _alternating(values)
    # zeta = 0: last index fixed by the others (arity even)
    total = 0.0 + 0.0j
    grids = np.meshgrid(*([np.arange(M)] * (k - 1)), indexing="ij", sparse=True)
    partial = sum(g if i % 2 == 0 else -g for i, g in enumerate(grids))
    last = partial  # n_k = n1 - n2 + ... (last slot has sign -1)
    valid = (last >= 0) & (last < M)
    weight = np.ones(valid.shape, dtype=complex)
    for i in range(k - 1):
        shape = [1] * (k - 1)
        shape[i] = M
        weight = weight * vals[i].reshape(shape)
    idx = np.nonzero(valid)
    lidx = np.broadcast_to(last, valid.shape)[idx]
    total = np.sum(tensor[idx + (lidx,)] * weight[idx] * vals[k - 1][lidx])
    return complex(total)


# low-rank separable expansions ----------------------------------------------------

def _cheb_nodes(lo: float, hi: float, n: int) -> np.ndarray:
    t = np.cos(np.pi * np.arange(n) / (n - 1))
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * t


@dataclass(frozen=True, eq=False)
class Decomposition:
    """c(x1, ..., xd) ~ sum_r prod_j factor_j[r](x_j), factors interpolated from nodes."""

    box: tuple[float, float]
    nodes: np.ndarray = field(repr=False)
    factors: tuple[np.ndarray, ...] = field(repr=False)  # per axis: (n_nodes, rank)
    error: float = 0.0
    tol: float = 0.0
    status: str = "ok"
    offset: float = 0.0

    @property
    def rank(self) -> int:
        return int(self.factors[0].shape[1])

    @property
    def arity(self) -> int:
        return len(self.factors)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def factor_values(self, axis: int, xi) -> np.ndarray:
        """(len(xi), rank) matrix of the axis factors at frequencies xi."""
        xi = np.asarray(xi, dtype=float) - self.offset
        lo, hi = self.box
        if xi.size and (xi.min() < lo - 1e-9 or xi.max() > hi + 1e-9):
            raise DomainError(f"frequencies outside the decomposition box [{lo}, {hi}]")
        if self.nodes.size == 1:
            return np.broadcast_to(self.factors[axis][0], (xi.size, self.rank)).copy()
        interp = BarycentricInterpolator(self.nodes, self.factors[axis])
        return np.asarray(interp(np.clip(xi, lo, hi)), dtype=complex).reshape(xi.size, self.rank)

    def __call__(self, *xs) -> np.ndarray:
        xs = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in xs))
        shape = xs[0].shape
        prod = np.ones((xs[0].size, self.rank), dtype=complex)
        for axis, x in enumerate(xs):
            prod *= self.factor_values(axis, x.ravel())
        return prod.sum(axis=1).reshape(shape)

    def shifted(self, k: float) -> "Decomposition":
        return Decomposition(self.box, self.nodes, self.factors, self.error, self.tol,
                             self.status, self.offset + k)


def _split(tensor: np.ndarray, tol: float) -> list[tuple[np.ndarray, ...]]:
    """Sequential SVD expansion into rank-one terms, discarding at most ``tol`` in l2."""
    if tensor.ndim == 1:
        return [(tensor,)]
    n = tensor.shape[0]
    U, S, Vt = np.linalg.svd(tensor.reshape(n, -1), full_matrices=False)
    if S[0] == 0:
        return []
    # singular values below the round-off level of S[0] carry no structure
    keep = int(np.sum(S > max(tol, 64 * np.finfo(float).eps * S[0])))
    keep = max(keep, 1)
    terms = []
    sub_tol = tol / np.sqrt(keep)
    for j in range(keep):
        rest = (S[j] * Vt[j]).reshape(tensor.shape[1:])
        for tail in _split(rest, sub_tol):
            terms.append((U[:, j],) + tail)
    return terms


def lowrank_approximate(symbol: Callable, arity: int = 3, tol: float = 1e-8,
                        max_rank: int = 64, box: tuple[float, float] = (-10.0, 10.0),
                        n_check: int = 4000, seed: int = 0) -> Decomposition:
    """Separable expansion of ``symbol`` on box^arity by SVD on Chebyshev grids.

    The grid is refined until the sampled sup error drops below ``tol``; if the
    rank cap or the largest grid is reached first the status is 'warning' and
    callers should use the exact path.
    """
    lo, hi = box
    rng = np.random.default_rng(seed)
    check = rng.uniform(lo, hi, size=(arity, n_check))
    exact = np.asarray(symbol(*check), dtype=complex)
    max_nodes = 128 if arity <= 3 else 40
    best = None
    sizes = [2] + [n for n in (8, 16, 24, 32, 48, 64, 96, 128) if n <= max_nodes]
    for n in sizes:
        nodes = _cheb_nodes(lo, hi, n)
        grids = np.meshgrid(*([nodes] * arity), indexing="ij", sparse=True)
        T = np.asarray(symbol(*grids), dtype=complex) * np.ones((n,) * arity)
        terms = _split(T, tol * 1e-3)
        if not terms:
            terms = [tuple(np.zeros(n) for _ in range(arity))]
        factors = tuple(np.stack([t[a] for t in terms], axis=1) for a in range(arity))
        dec = Decomposition(box, nodes, factors, tol=tol)
        if dec.rank > max_rank:
            status = "warning"
            err = np.inf
        else:
            err = float(np.max(np.abs(dec(*check) - exact)))
            status = "ok" if err <= tol else "warning"
        dec = Decomposition(box, nodes, factors, err, tol, status)
        if best is None or err < best.error:
            best = dec
        if status == "ok":
            return dec
        if dec.rank > max_rank:
            break
    warnings.warn(f"low-rank expansion did not reach tol {tol} (error {best.error:.3g}); "
                  "use the exact path", stacklevel=2)
    return best


# public evaluation ----------------------------------------------------------------

def apply_trilinear(C: MultilinearForm, u: Field, path: str = "auto") -> Field:
    """C(u, conj u, u); exact on the central half of the band."""
    if C.arity != 3:
        raise ValueError("apply_trilinear needs an arity-3 form")
    grid = u.grid
    modes = active_modes(u)
    check_dealiased(grid, modes)
    if C.zero:
        return Field.zeros(grid)
    path = _choose_path(C, modes, path)
    if path == "pointwise":
        v = u.samples
        out = C.constant * v * np.conj(v) * v
        return Field.from_coefficients(grid, _central(grid, np.fft.fft(out) / grid.num_points))
    if path == "lowrank":
        return Field.from_coefficients(grid, _central(grid, lowrank_trilinear(C.lowrank, u)))
    vals = band_values(u, modes)
    out = band_sum(C.tensor(grid, modes), [vals, vals, vals])
    return Field.from_coefficients(grid, _scatter(grid, zeta_offset(modes, 3), out))


def _central(grid: GridSpec, coef: np.ndarray) -> np.ndarray:
    """Zero the outer half where pointwise products may have aliased."""
    coef = coef.copy()
    coef[np.abs(grid.modes) >= grid.num_points // 4] = 0
    return coef


def _choose_path(form: MultilinearForm, modes: np.ndarray, path: str) -> str:
    if path != "auto":
        if path == "pointwise" and form.constant is None:
            raise ValueError("pointwise path requires a constant symbol")
        if path == "lowrank" and form.lowrank is None:
            raise ValueError("no low-rank decomposition attached")
        return path
    if form.constant is not None:
        return "pointwise"
    if form.lowrank is not None and form.lowrank.ok and form.arity == 3:
        return "lowrank"
    return "direct"


def lowrank_trilinear(dec: Decomposition, u: Field) -> np.ndarray:
    """Coefficients of sum_r (F_r u) conj(G_r^* u) (H_r u) via pointwise products."""
    grid = u.grid
    modes = active_modes(u)
    idx = np.mod(modes, grid.num_points)
    xi = grid.spacing * modes
    vals = u.coefficients[idx]
    F = [dec.factor_values(a, xi) for a in range(3)]
    n = grid.num_points
    acc = np.zeros(n, dtype=complex)
    for r in range(dec.rank):
        parts = []
        for a in range(3):
            spec = np.zeros(n, dtype=complex)
            weight = F[a][:, r] if a != 1 else np.conj(F[a][:, r])
            spec[idx] = weight * vals
            phys = np.fft.ifft(spec) * n
            parts.append(phys if a != 1 else np.conj(phys))
        acc += parts[0] * parts[1] * parts[2]
    return np.fft.fft(acc) / n


def apply_even_density(L: MultilinearForm, args: Sequence[Field], path: str = "auto") -> DensityField:
    """x -> L(u1, conj u2, u3, ...)(x) for arity 4 or 6."""
    if L.arity not in (4, 6) or len(args) != L.arity:
        raise ValueError(f"form of arity {L.arity} given {len(args)} arguments")
    grid = args[0].grid
    if L.zero:
        return DensityField(grid, np.zeros(grid.num_points, dtype=complex), L.label)
    modes = active_modes(*args)
    _check_density_band(grid, modes, L.arity)
    path = _choose_path(L, modes, path)
    if path == "pointwise":
        prod = np.full(grid.num_points, L.constant, dtype=complex)
        for i, f in enumerate(args):
            prod = prod * (f.samples if i % 2 == 0 else np.conj(f.samples))
        return DensityField(grid, prod, L.label)
    vals = [band_values(f, modes) for f in args]
    spec = band_sum(L.tensor(grid, modes), vals)
    coef = np.zeros(grid.num_points, dtype=complex)
    coef[np.mod(zeta_offset(modes, L.arity) + np.arange(spec.size), grid.num_points)] = spec
    return DensityField.from_coefficients(grid, coef, L.label)


def even_functional(L: MultilinearForm, args: Sequence[Field]) -> complex:
    """Integral of the density through the zeta = 0 Fourier sum."""
    grid = args[0].grid
    if L.zero:
        return 0j
    modes = active_modes(*args)
    vals = [band_values(f, modes) for f in args]
    return grid.circumference * diagonal_sum(L.tensor(grid, modes), vals)


def _check_density_band(grid: GridSpec, modes: np.ndarray, arity: int):
    width = modes[-1] - modes[0]
    if (arity // 2) * width >= grid.num_points // 2:
        raise DomainError("density spectrum would alias; enlarge the grid or narrow the band")
