"""Mass and momentum densities, their quartic corrections and the density-flux identities.

Quadratic densities are evaluated exactly from filtered fields. Quartic and
sextic densities are band sums against symbol tensors precomputed on the
Galerkin band of a trajectory; on that band the localized identities are exact
whenever the localizer is supported inside the band.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import forms
from .forms import DensityField
from .lattice import DomainError, Field, GridSpec, Localizer
from .solver import BandNonlinearity, Trajectory
from .symbolic.division import DivisionPair, localized_division
from .symbolic.quartic import xi_avg
from .symbolic.resonance import DEFAULT_REGIONS, RegionParams
from .symbolic.symbols import TrilinearSymbol

KINDS = ("mass", "momentum")


def _filtered(u: Field, a: Localizer, xi0: float):
    """(A0 u, sum (xi - xi0) a0 uh e^{i xi x}, sum (xi - xi0)^2 a0 uh e^{i xi x})."""
    grid = u.grid
    coef = u.coefficients
    if not a.is_identity:
        coef = coef * a.a0(grid.xi)
    n = grid.num_points
    d = grid.xi - xi0
    w = np.fft.ifft(coef) * n
    z = np.fft.ifft(d * coef) * n
    z2 = np.fft.ifft(d * d * coef) * n
    return w, z, z2


def quadratic_densities(u: Field, a: Localizer | None = None, xi0: float = 0.0):
    """(M_a, P_{a,xi0}, E_{a,xi0}) as real DensityFields."""
    a = a or Localizer.identity()
    w, z, z2 = _filtered(u, a, xi0)
    mass = np.abs(w) ** 2
    momentum = -2 * np.real(z * np.conj(w))
    energy = 2 * np.real(z2 * np.conj(w)) + 2 * np.abs(z) ** 2
    g = u.grid
    return (DensityField(g, mass.astype(complex), "M"),
            DensityField(g, momentum.astype(complex), "P"),
            DensityField(g, energy.astype(complex), "E"))


# quartic corrections on a band ----------------------------------------------------

@dataclass(eq=False)
class _PairTensors:
    """b and rt of one division pair on band^4, or a shortcut."""

    mode: str  # "zero", "flux" (b = 0, R constant) or "tensor"
    b: np.ndarray | None = None
    r: np.ndarray | None = None
    flux_value: complex = 0j


def _pair_tensors(pair: DivisionPair, grid: GridSpec, modes: np.ndarray) -> _PairTensors:
    if pair.c4.zero and pair.exact_flux is None:
        return _PairTensors("zero")
    if pair.exact_flux is not None:
        return _PairTensors("flux", flux_value=complex(-1j * pair.exact_flux(np.zeros(1))[0]))
    size = modes.size ** 4
    if size > forms.DIRECT_LIMIT:
        raise DomainError(f"quartic tensor with {size} entries exceeds the limit; narrow the band")
    forms._check_density_band(grid, modes, 6)
    xi = grid.spacing * modes
    g = np.meshgrid(xi, xi, xi, xi, indexing="ij", sparse=True)
    b, r = pair(*g)
    return _PairTensors("tensor", b, r)


class CorrectionEngine:
    """Quartic corrections B4, fluxes R4 and sextic remainders R6 for one (c, a) on a band.

    The momentum symbols at any xi0 follow from the xi0 = 0 division by
    linearity: b_{p,xi0} = b_{p,0} + 2 xi0 b_m, and likewise for rt.
    """

    def __init__(self, c: TrilinearSymbol, a: Localizer | None, grid: GridSpec, modes: np.ndarray,
                 thresholds: RegionParams = DEFAULT_REGIONS, nonlinearity: BandNonlinearity | None = None):
        self.c = c
        self.a = a or Localizer.identity()
        self.grid = grid
        self.modes = np.asarray(modes)
        forms.check_dealiased(grid, self.modes)
        if not self.a.is_identity:
            lo, hi = self.a.support
            band_lo, band_hi = grid.spacing * self.modes[0], grid.spacing * self.modes[-1]
            if lo < band_lo or hi > band_hi:
                raise DomainError(f"localizer support [{lo}, {hi}] is not inside the band "
                                  f"[{band_lo:.4g}, {band_hi:.4g}]")
        self.thresholds = thresholds
        self.pairs = {"mass": localized_division(c, self.a, 0.0, "mass", thresholds),
                      "momentum": localized_division(c, self.a, 0.0, "momentum", thresholds)}
        self._tensors: dict[str, _PairTensors] = {}
        self._nonlinearity = nonlinearity
        xi = grid.spacing * self.modes
        g = np.meshgrid(xi, xi, xi, xi, indexing="ij", sparse=True)
        self._xavg = xi_avg(*g)
        self._offset = forms.zeta_offset(self.modes, 4)

    @classmethod
    def for_trajectory(cls, traj: Trajectory, c: TrilinearSymbol, a: Localizer | None,
                       thresholds: RegionParams = DEFAULT_REGIONS) -> "CorrectionEngine":
        path = traj.config.get("path", "auto") if traj.config else "auto"
        N = BandNonlinearity(c, traj.grid, traj.modes, path)
        return cls(c, a, traj.grid, traj.modes, thresholds, N)

    @property
    def nonlinearity(self) -> BandNonlinearity:
        if self._nonlinearity is None:
            self._nonlinearity = BandNonlinearity(self.c, self.grid, self.modes)
        return self._nonlinearity

    def tensors(self, kind: str) -> _PairTensors:
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if kind not in self._tensors:
            self._tensors[kind] = _pair_tensors(self.pairs[kind], self.grid, self.modes)
        return self._tensors[kind]

    def release(self, kind: str | None = None):
        """Drop cached tensors (all kinds by default)."""
        if kind is None:
            self._tensors.clear()
        else:
            self._tensors.pop(kind, None)

    def _stored_form(self, kind: str, xi0: float):
        """(mode, b, rt) for the requested kind at xi0."""
        t = self.tensors(kind)
        if kind == "mass" or xi0 == 0:
            return t.mode, t.b, t.r, t.flux_value
        m = self.tensors("mass")
        if m.mode == "zero":
            return t.mode, t.b, t.r, t.flux_value
        if t.mode == "flux":
            raise DomainError("flux shortcut cannot be recentred with a nonzero mass correction")
        b = t.b + 2 * xi0 * m.b if t.mode == "tensor" else 2 * xi0 * m.b
        r = t.r + 2 * xi0 * m.r if t.mode == "tensor" else 2 * xi0 * m.r
        return "tensor", b, r, 0j

    def symbols(self, kind: str, xi0: float = 0.0):
        """Tensors (B, R) of the conservation form, or None for an identically zero symbol.

        A constant flux is returned as a Python complex in place of R.
        """
        mode, b, r, value = self._stored_form(kind, xi0)
        if mode == "zero":
            return None, None
        if mode == "flux":
            return None, value
        B = 1j * b
        R = -1j * (r + 2 * (self._xavg - xi0) * b)
        return B, R

    # densities -------------------------------------------------------------------
    def _values(self, u: Field) -> np.ndarray:
        return forms.band_values(u, self.modes)

    def _density(self, tensor, vals, label) -> DensityField:
        spec = forms.band_sum(tensor, vals)
        n = self.grid.num_points
        coef = np.zeros(n, dtype=complex)
        coef[np.mod(self._offset + np.arange(spec.size), n)] = spec
        return DensityField.from_coefficients(self.grid, coef, label)

    def _zero(self, label) -> DensityField:
        return DensityField(self.grid, np.zeros(self.grid.num_points, dtype=complex), label)

    def _quartic(self, sym, u: Field, label: str) -> DensityField:
        if sym is None:
            return self._zero(label)
        if np.isscalar(sym):
            s = u.samples
            return DensityField(self.grid, sym * np.abs(s) ** 4 + 0j, label)
        v = self._values(u)
        return self._density(sym, [v, v, v, v], label)

    def correction(self, kind: str, u: Field, xi0: float = 0.0) -> DensityField:
        """B4 density."""
        B, _ = self.symbols(kind, xi0)
        return self._quartic(B, u, f"B4_{kind}")

    def flux(self, kind: str, u: Field, xi0: float = 0.0) -> DensityField:
        """R4 density."""
        _, R = self.symbols(kind, xi0)
        return self._quartic(R, u, f"R4_{kind}")

    def remainder(self, kind: str, u: Field, xi0: float = 0.0) -> DensityField:
        """R6: B4 with -i P_S C(u, conj u, u) inserted in each slot in turn."""
        B, _ = self.symbols(kind, xi0)
        label = f"R6_{kind}"
        if B is None:
            return self._zero(label)
        v = self._values(u)
        w = -1j * self.nonlinearity(v)
        spec = 0
        for slot in range(4):
            vals = [v, v, v, v]
            vals[slot] = w
            spec = spec + forms.band_sum(B, vals)
        n = self.grid.num_points
        coef = np.zeros(n, dtype=complex)
        coef[np.mod(self._offset + np.arange(spec.size), n)] = spec
        return DensityField.from_coefficients(self.grid, coef, label)

    def densities(self, u: Field, xi0: float = 0.0, remainders: bool = True) -> "DensitySet":
        M, P, E = quadratic_densities(u, self.a, xi0)
        Bm = self.correction("mass", u, xi0)
        Bp = self.correction("momentum", u, xi0)
        Rm = self.flux("mass", u, xi0)
        Rp = self.flux("momentum", u, xi0)
        R6m = self.remainder("mass", u, xi0) if remainders else None
        R6p = self.remainder("momentum", u, xi0) if remainders else None
        return DensitySet(self.a, xi0, M, P, E, Bm, Bp, Rm, Rp, R6m, R6p)


@dataclass(eq=False)
class DensitySet:
    localizer: Localizer
    xi0: float
    mass: DensityField
    momentum: DensityField
    energy: DensityField
    mass_correction: DensityField
    momentum_correction: DensityField
    mass_flux_correction: DensityField
    momentum_flux_correction: DensityField
    mass_remainder: DensityField | None = None
    momentum_remainder: DensityField | None = None

    @property
    def corrected_mass(self) -> DensityField:
        return self.mass + self.mass_correction

    @property
    def corrected_momentum(self) -> DensityField:
        return self.momentum + self.momentum_correction

    @property
    def mass_flux(self) -> DensityField:
        return self.momentum + self.mass_flux_correction

    @property
    def momentum_flux(self) -> DensityField:
        return self.energy + self.momentum_flux_correction

    def integrals(self) -> dict:
        out = {}
        for name in ("mass", "momentum", "energy", "mass_correction", "momentum_correction",
                     "mass_flux_correction", "momentum_flux_correction", "mass_remainder",
                     "momentum_remainder"):
            f = getattr(self, name)
            if f is not None:
                out[name] = f.integral().real
        return out

    def max_imag_ratio(self) -> float:
        """Largest relative imaginary part over the mass-type fields."""
        fields = [self.mass, self.corrected_mass, self.mass_flux, self.corrected_momentum,
                  self.momentum_flux]
        fields += [f for f in (self.mass_remainder, self.momentum_remainder) if f is not None]
        scale = max(np.max(np.abs(f.samples)) for f in fields)
        if scale == 0:
            return 0.0
        return float(max(np.max(np.abs(f.samples.imag)) for f in fields) / scale)


def densities(u: Field, a: Localizer | None = None, xi0: float = 0.0,
              c: TrilinearSymbol | None = None, modes: np.ndarray | None = None,
              thresholds: RegionParams = DEFAULT_REGIONS) -> DensitySet:
    """All densities of u; without c only the quadratic ones are nonzero."""
    a = a or Localizer.identity()
    if c is None:
        M, P, E = quadratic_densities(u, a, xi0)
        z = DensityField(u.grid, np.zeros(u.grid.num_points, dtype=complex))
        return DensitySet(a, xi0, M, P, E, z, z, z, z, z, z)
    if modes is None:
        modes = forms.active_modes(u)
    return CorrectionEngine(c, a, u.grid, modes, thresholds).densities(u, xi0)


def sextic_remainder(kind: str, c: TrilinearSymbol, u: Field, a: Localizer | None = None,
                     xi0: float = 0.0, modes: np.ndarray | None = None) -> DensityField:
    if modes is None:
        modes = forms.active_modes(u)
    return CorrectionEngine(c, a, u.grid, modes).remainder(kind, u, xi0)


# flux identities ------------------------------------------------------------------

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


@dataclass
class FluxResidual:
    t: float
    xi0: float
    label: str
    mass_residual: float  # L2 norm of LHS - RHS
    momentum_residual: float
    mass_scale: float
    momentum_scale: float
    mass_drift: float  # d/dt of the corrected mass integral
    mass_remainder_integral: float
    raw_mass_drift: float
    momentum_drift: float
    momentum_remainder_integral: float
    mass_pointwise: np.ndarray = field(default=None, repr=False)
    momentum_pointwise: np.ndarray = field(default=None, repr=False)

    @property
    def mass_relative(self) -> float:
        return self.mass_residual / self.mass_scale if self.mass_scale > 0 else self.mass_residual

    @property
    def momentum_relative(self) -> float:
        if self.momentum_scale > 0:
            return self.momentum_residual / self.momentum_scale
        return self.momentum_residual

    def row(self) -> dict:
        return {"t": self.t, "k": self.label, "xi0": self.xi0,
                "mass_residual_L2": self.mass_residual,
                "momentum_residual_L2": self.momentum_residual,
                "mass_relative": self.mass_relative,
                "momentum_relative": self.momentum_relative,
                "mass_drift": self.mass_drift,
                "mass_remainder_integral": self.mass_remainder_integral,
                "raw_mass_drift": self.raw_mass_drift,
                "momentum_drift": self.momentum_drift,
                "momentum_remainder_integral": self.momentum_remainder_integral}


def _l2(grid: GridSpec, f: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(f) ** 2) * grid.dx))


def flux_residual(traj: Trajectory, c: TrilinearSymbol, a: Localizer | None, xi0: float, t: float,
                  engine: CorrectionEngine | None = None) -> FluxResidual:
    """Residuals of the corrected mass and momentum density-flux identities at time t.

    The time derivative uses the five-point central stencil over dense steps.
    """
    i = traj.dense_index(t)
    if i < 2 or i + 2 >= len(traj.dense_times):
        raise DomainError(f"t = {t} needs two dense steps on each side")
    steps = np.diff(traj.dense_times[i - 2:i + 3])
    h = traj.dt
    if not np.allclose(steps, h, rtol=1e-9, atol=0):
        raise DomainError("dense steps around t are not contiguous")
    engine = engine or CorrectionEngine.for_trajectory(traj, c, a)
    grid = traj.grid

    sets = [engine.densities(traj.dense_field(j), xi0, remainders=(j == i))
            for j in range(i - 2, i + 3)]
    mid = sets[2]

    def dt_of(get):
        return sum(w * get(s).samples for w, s in zip(_D1, sets) if w != 0) / h

    def integral_dt(get):
        return float(sum(w * get(s).integral().real for w, s in zip(_D1, sets) if w != 0) / h)

    out = {}
    for kind, dens, flux, rem in (
            ("mass", "corrected_mass", "mass_flux", "mass_remainder"),
            ("momentum", "corrected_momentum", "momentum_flux", "momentum_remainder")):
        lhs_t = dt_of(lambda s: getattr(s, dens))
        lhs_x = 2 * xi0 * getattr(mid, dens).dx().samples
        rhs_flux = getattr(mid, flux).dx().samples
        rhs_rem = getattr(mid, rem).samples
        res = lhs_t + lhs_x - rhs_flux - rhs_rem
        scale = max(_l2(grid, lhs_t), _l2(grid, lhs_x), _l2(grid, rhs_flux), _l2(grid, rhs_rem))
        out[kind] = (res, _l2(grid, res), scale)

    return FluxResidual(
        t=float(traj.dense_times[i]), xi0=float(xi0), label=engine.a.label,
        mass_residual=out["mass"][1], momentum_residual=out["momentum"][1],
        mass_scale=out["mass"][2], momentum_scale=out["momentum"][2],
        mass_drift=integral_dt(lambda s: s.corrected_mass),
        mass_remainder_integral=mid.mass_remainder.integral().real,
        raw_mass_drift=integral_dt(lambda s: s.mass),
        momentum_drift=integral_dt(lambda s: s.corrected_momentum),
        momentum_remainder_integral=mid.momentum_remainder.integral().real,
        mass_pointwise=out["mass"][0], momentum_pointwise=out["momentum"][0])


def write_residual_csv(path, rows: list[FluxResidual]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = None
        for r in rows:
            d = r.row()
            if w is None:
                w = csv.DictWriter(fh, fieldnames=list(d))
                w.writeheader()
            w.writerow({k: (f"{v:.12e}" if isinstance(v, float) else v) for k, v in d.items()})
    return path


__all__ = ["DensitySet", "CorrectionEngine", "FluxResidual", "densities", "quadratic_densities",
           "sextic_remainder", "flux_residual", "write_residual_csv"]
