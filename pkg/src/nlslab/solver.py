"""Integrating-factor RK4 for i u_t + u_xx = C(u, conj u, u) on a Galerkin band.

The state is the vector of Fourier coefficients on a band S of modes; the
nonlinearity is projected onto S. Rewriting the equation as
u_t = i u_xx - i C(u, conj u, u) gives, per mode,

    d/dt uh(xi) = -i xi^2 uh(xi) - i [P_S C(u, conj u, u)]^(xi),

and the linear part is integrated exactly by the factor exp(-i xi^2 t).
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import forms
from .lattice import DomainError, Field, GridSpec
from .symbolic.symbols import TrilinearSymbol


class GuardError(RuntimeError):
    """A run would leave the regime where the diagnostics are meaningful."""


class SimulationError(RuntimeError):
    def __init__(self, message: str, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    horizon: float = 10.0
    band: tuple[float, float] | None = None  # frequency interval; None = central half
    snapshot_every: float = 0.1
    dense: bool | tuple[float, float] = False  # True, False or a time window
    enforce_guard: bool = True
    path: str = "auto"
    lowrank_tol: float = 1e-11
    scheme: str = "if-rk4"

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0 or self.snapshot_every <= 0:
            raise ValueError("dt, horizon and snapshot_every must be positive")
        if self.scheme != "if-rk4":
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        n = self.horizon / self.dt
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ValueError(f"horizon {self.horizon} is not a multiple of dt {self.dt}")
        return int(round(n))

    @property
    def snapshot_stride(self) -> int:
        s = self.snapshot_every / self.dt
        if abs(s - round(s)) > 1e-6 * max(1.0, s) or round(s) < 1:
            raise ValueError("snapshot_every must be a positive multiple of dt")
        return int(round(s))

    def replace(self, **changes) -> "SolverConfig":
        values = asdict(self)
        values.update(changes)
        return SolverConfig(**values)


def default_band(grid: GridSpec) -> np.ndarray:
    """Modes with |n| < N/4: the dealiased central half."""
    q = grid.num_points // 4
    return np.arange(-q + 1, q)


def band_for(grid: GridSpec, band: tuple[float, float] | None) -> np.ndarray:
    if band is None:
        return default_band(grid)
    modes = grid.band_modes(*band)
    forms.check_dealiased(grid, modes)
    return modes


# nonlinearity on a band --------------------------------------------------------

class BandNonlinearity:
    """v -> P_S C(u, conj u, u) on band coefficients, with the evaluation path fixed once."""

    def __init__(self, c: TrilinearSymbol, grid: GridSpec, modes: np.ndarray, path: str = "auto",
                 lowrank_tol: float = 1e-11):
        forms.check_dealiased(grid, modes)
        self.grid = grid
        self.modes = modes
        self.idx = np.mod(modes, grid.num_points)
        self.zero = c.is_zero
        xi = grid.spacing * modes
        if path == "auto":
            if c.is_constant:
                path = "pointwise"
            elif modes.size ** 3 <= 2_000_000:
                path = "direct"
            else:
                path = "lowrank"
        self.path = path
        if path == "pointwise":
            if not c.is_constant:
                raise ValueError("pointwise path needs a constant symbol")
            self.constant = c.constant
        elif path == "lowrank":
            dec = c.lowrank
            lo, hi = float(xi.min()), float(xi.max())
            if dec is None or dec.offset != 0 or dec.box[0] > lo or dec.box[1] < hi:
                # build in unshifted coordinates so Galilean shifts stay exact
                base = c if not c.shift else TrilinearSymbol(c.evaluator, c.spec, c.name, c.constant)
                dec = forms.lowrank_approximate(base, 3, tol=lowrank_tol,
                                                box=(lo - c.shift, hi - c.shift)).shifted(c.shift)
            if not dec.ok:
                raise DomainError("low-rank expansion failed; use a narrower band or the direct path")
            self.decomposition = dec
            self.factors = [dec.factor_values(a, xi) for a in range(3)]
            self.factors[1] = np.conj(self.factors[1])
        elif path == "direct":
            form = forms.MultilinearForm.from_trilinear(c)
            self.tensor = form.tensor(grid, modes)
            self.offset = forms.zeta_offset(modes, 3)
        else:
            raise ValueError(f"unknown path {path!r}")

    def __call__(self, v: np.ndarray) -> np.ndarray:
        if self.zero:
            return np.zeros_like(v)
        n = self.grid.num_points
        if self.path == "direct":
            out = forms.band_sum(self.tensor, [v, v, v])
            start = self.modes[0] - self.offset
            return out[start:start + self.modes.size]
        if self.path == "pointwise":
            spec = np.zeros(n, dtype=complex)
            spec[self.idx] = v
            u = np.fft.ifft(spec) * n
            res = np.fft.fft(self.constant * u * np.conj(u) * u) / n
            return res[self.idx]
        R = self.factors[0].shape[1]
        spec = np.zeros((3 * R, n), dtype=complex)
        for a in range(3):
            spec[a * R:(a + 1) * R, self.idx] = (self.factors[a] * v[:, None]).T
        phys = np.fft.ifft(spec, axis=1) * n
        prod = np.sum(phys[:R] * np.conj(phys[R:2 * R]) * phys[2 * R:], axis=0)
        return (np.fft.fft(prod) / n)[self.idx]


# trajectories --------------------------------------------------------------------

@dataclass(eq=False)
class Trajectory:
    grid: GridSpec
    modes: np.ndarray
    times: np.ndarray
    coefs: np.ndarray  # (n_snapshots, n_modes)
    dt: float
    eps: float
    dense_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dense_coefs: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=complex))
    symbol_spec: str = ""
    config: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def _field(self, coef_band: np.ndarray) -> Field:
        spec = np.zeros(self.grid.num_points, dtype=complex)
        spec[np.mod(self.modes, self.grid.num_points)] = coef_band
        return Field.from_coefficients(self.grid, spec)

    def field(self, i: int) -> Field:
        return self._field(self.coefs[i])

    def fields(self):
        for i in range(len(self.times)):
            yield self.field(i)

    def _find(self, times: np.ndarray, t: float) -> int | None:
        if times.size == 0:
            return None
        i = int(np.argmin(np.abs(times - t)))
        return i if abs(times[i] - t) <= 1e-9 * max(1.0, abs(t)) else None

    def at(self, t: float) -> Field:
        i = self._find(self.dense_times, t)
        if i is not None:
            return self._field(self.dense_coefs[i])
        i = self._find(self.times, t)
        if i is None:
            raise DomainError(f"no stored state at t = {t}")
        return self.field(i)

    def dense_index(self, t: float) -> int:
        i = self._find(self.dense_times, t)
        if i is None:
            raise DomainError(f"t = {t} is not a dense-cadence step")
        return i

    def dense_field(self, i: int) -> Field:
        return self._field(self.dense_coefs[i])

    def save(self, path) -> tuple[Path, Path]:
        """Binary snapshots (npz) plus a JSON manifest next to it."""
        path = Path(path)
        npz = path.with_suffix(".npz")
        np.savez(npz, modes=self.modes, times=self.times, coefs=self.coefs,
                 dense_times=self.dense_times, dense_coefs=self.dense_coefs)
        manifest = {
            "grid": asdict(self.grid),
            "dt": self.dt,
            "eps": self.eps,
            "symbol_spec": self.symbol_spec,
            "symbol_hash": hashlib.sha256(self.symbol_spec.encode()).hexdigest()[:16],
            "config": self.config,
            "snapshots": int(len(self.times)),
            "dense_steps": int(len(self.dense_times)),
            "warnings": list(self.warnings),
            "data": npz.name,
        }
        js = path.with_suffix(".json")
        js.write_text(json.dumps(manifest, indent=2, sort_keys=True))
        return npz, js

    @classmethod
    def load(cls, path) -> "Trajectory":
        path = Path(path)
        manifest = json.loads(path.with_suffix(".json").read_text())
        data = np.load(path.with_suffix(".npz"))
        return cls(GridSpec(**manifest["grid"]), data["modes"], data["times"], data["coefs"],
                   manifest["dt"], manifest["eps"], data["dense_times"], data["dense_coefs"],
                   manifest["symbol_spec"], manifest["config"], manifest["warnings"])


# propagation ------------------------------------------------------------------------

def linear_propagate(u0: Field, t: float) -> Field:
    """exp(i t d_xx) u0, exact in Fourier space."""
    return u0.with_coefficients(u0.coefficients * np.exp(-1j * u0.grid.xi ** 2 * t))


def galilean_transform(u: Field, k: float, t: float) -> Field:
    """x -> exp(-i(kx + k^2 t)) u(x + 2kt)."""
    shifted = u.shifted(2 * k * t)
    return shifted.modulated(-k) * np.exp(-1j * k * k * t)


def max_group_speed(u: Field, rel_tol: float = 1e-6) -> float:
    lo, hi = u.significant_band(rel_tol)
    return 2 * max(abs(lo), abs(hi))


def check_guards(u0: Field, cfg: SolverConfig) -> list[str]:
    """Raise GuardError on violated guards; return advisory messages."""
    grid = u0.grid
    notes = []
    speed = max_group_speed(u0)
    if speed * cfg.horizon >= grid.circumference / 4:
        msg = (f"group speed {speed:.3g} x horizon {cfg.horizon} exceeds circumference/4 = "
               f"{grid.circumference / 4:.3g}; shrink the horizon or enlarge the circumference")
        if cfg.enforce_guard:
            raise GuardError(msg)
        notes.append(msg)
    lo, hi = u0.significant_band()
    kmax = max(abs(lo), abs(hi))
    if cfg.dt * kmax ** 2 > 0.5:
        msg = f"dt * (max frequency)^2 = {cfg.dt * kmax ** 2:.3g} exceeds 0.5; reduce dt"
        if cfg.enforce_guard:
            raise GuardError(msg)
        notes.append(msg)
    return notes


def _dense_mask(cfg: SolverConfig, times: np.ndarray) -> np.ndarray:
    if cfg.dense is True:
        return np.ones(times.size, dtype=bool)
    if cfg.dense is False or cfg.dense is None:
        return np.zeros(times.size, dtype=bool)
    ta, tb = cfg.dense
    return (times >= ta - 1e-12) & (times <= tb + 1e-12)


def simulate(u0: Field, c: TrilinearSymbol, cfg: SolverConfig,
             nonlinearity: BandNonlinearity | None = None) -> Trajectory:
    grid = u0.grid
    modes = band_for(grid, cfg.band) if nonlinearity is None else nonlinearity.modes
    notes = check_guards(u0, cfg)
    eps = u0.norm()
    if eps > 0 and cfg.horizon > eps ** -2:
        msg = f"horizon {cfg.horizon} exceeds the local lifespan scale eps^-2 = {eps ** -2:.3g}"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    N = nonlinearity or BandNonlinearity(c, grid, modes, cfg.path, cfg.lowrank_tol)
    n_steps = cfg.n_steps
    stride = cfg.snapshot_stride
    dt = cfg.dt
    xi = grid.spacing * modes
    half = np.exp(-0.5j * xi ** 2 * dt)
    full = half * half

    def rhs(v):
        return -1j * N(v)

    v = forms.band_values(u0, modes).copy()
    step_times = dt * np.arange(n_steps + 1)
    dense = _dense_mask(cfg, step_times)
    snap_steps = list(range(0, n_steps + 1, stride))
    if snap_steps[-1] != n_steps:
        snap_steps.append(n_steps)
    snaps = np.empty((len(snap_steps), modes.size), dtype=complex)
    dense_store = np.empty((int(dense.sum()), modes.size), dtype=complex)
    si = di = 0
    config = {**asdict(cfg), "band_modes": [int(modes[0]), int(modes[-1])], "path": N.path}

    def record(n, state):
        nonlocal si, di
        if si < len(snap_steps) and snap_steps[si] == n:
            snaps[si] = state
            si += 1
        if dense[n]:
            dense_store[di] = state
            di += 1

    record(0, v)
    for n in range(1, n_steps + 1):
        k1 = rhs(v)
        k2 = rhs(half * (v + 0.5 * dt * k1))
        k3 = rhs(half * v + 0.5 * dt * k2)
        k4 = rhs(full * v + dt * half * k3)
        v = full * v + dt / 6 * (full * k1 + 2 * half * (k2 + k3) + k4)
        if not np.all(np.isfinite(v)):
            partial = Trajectory(grid, modes, dt * np.array(snap_steps[:si]), snaps[:si], dt, eps,
                                 step_times[dense][:di], dense_store[:di], c.spec, config, notes)
            raise SimulationError(f"non-finite state at t = {n * dt:.6g}", partial)
        record(n, v)
    return Trajectory(grid, modes, dt * np.array(snap_steps), snaps, dt, eps,
                      step_times[dense], dense_store, c.spec, config, notes)


# refinement study ---------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    temporal_errors: list[float]
    temporal_order: float
    spatial_difference: float
    spectral_tail: float
    flags: list[str]

    def as_dict(self) -> dict:
        return asdict(self)


def spectral_tail(coefs: np.ndarray, fraction: float = 0.1) -> float:
    """max |coef| over the outer ``fraction`` of the band, relative to the max."""
    a = np.abs(np.atleast_2d(coefs)).max(axis=0)
    m = max(1, int(round(fraction * a.size / 2)))
    top = a.max()
    return float(max(a[:m].max(), a[-m:].max()) / top) if top > 0 else 0.0


def convergence_test(u0: Field, c: TrilinearSymbol, cfg: SolverConfig,
                     tail_tol: float = 1e-12) -> ConvergenceReport:
    """Richardson study at (dt, dt/2, dt/4) and a spatial check at (N, 2N)."""
    runs = []
    for f in (1, 2, 4):
        sub = cfg.replace(dt=cfg.dt / f, snapshot_every=cfg.horizon, dense=False)
        runs.append(simulate(u0, c, sub).coefs[-1])
    e1 = float(np.linalg.norm(runs[0] - runs[1]))
    e2 = float(np.linalg.norm(runs[1] - runs[2]))
    order = float(np.log2(e1 / e2)) if e2 > 0 and e1 > 0 else float("nan")

    grid = u0.grid
    fine_grid = grid.replace(num_points=2 * grid.num_points)
    fine_spec = np.zeros(fine_grid.num_points, dtype=complex)
    fine_spec[np.mod(grid.modes, fine_grid.num_points)] = u0.coefficients
    u0_fine = Field.from_coefficients(fine_grid, fine_spec)
    band = cfg.band
    if band is None:
        modes = default_band(grid)
        band = (grid.spacing * modes[0], grid.spacing * modes[-1])
    coarse = simulate(u0, c, cfg.replace(band=band, snapshot_every=cfg.horizon))
    fine = simulate(u0_fine, c, cfg.replace(band=band, snapshot_every=cfg.horizon))
    spatial = float(np.linalg.norm(coarse.coefs[-1] - fine.coefs[-1]) /
                    max(np.linalg.norm(fine.coefs[-1]), 1e-300))
    tail = spectral_tail(coarse.coefs)
    flags = []
    if not 3.5 <= order <= 4.5:
        flags.append("order_degraded")
    if tail > tail_tol:
        flags.append("under_resolved")
    return ConvergenceReport([e1, e2], order, spatial, tail, flags)
