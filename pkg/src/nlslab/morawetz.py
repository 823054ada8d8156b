"""Interaction Morawetz functionals built from the corrected mass and momentum densities.

For densities of u (localizer a) and of v = u(. + x0) (localizer b),

    I = H(Ms(u), Ps(v)) - H(Ps(u), Ms(v)),     H(F, G) = iint_{x > y} F(x) G(y),

and the density-flux identities give dI/dt = J4 + J6 + J8 + K8 with local
terms J and the double integral K8 of the sextic sources. The derivative of
I is measured by differencing its time series, so the identity is checked
rather than assumed.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .conservation import CorrectionEngine, DensitySet
from .forms import DensityField
from .lattice import DomainError, Field, Localizer
from .solver import Trajectory
from .symbolic.division import localized_division
from .symbolic.quartic import energy_bilinear, mass_bilinear, momentum_bilinear
from .symbolic.symbols import TrilinearSymbol, parse_symbol

COMPONENTS = ("J4", "J6", "J8", "K8")


# the ordered double integral ------------------------------------------------------

def _window_check(F: DensityField, tol: float):
    """The ordering wraps at the window edge; the density must be negligible in the outer quarter."""
    grid = F.grid
    w = np.abs(F.samples)
    top = w.max()
    if top == 0:
        return
    outer = np.abs(grid.x) > 3 * grid.circumference / 8
    if w[outer].max() > tol * top:
        raise DomainError(
            "density leaves the central half of the window; the ordering x > y would wrap around. "
            "Enlarge the circumference or shorten the horizon")


def antiderivative(G: DensityField) -> np.ndarray:
    """y -> int_{x_start}^{y} G on the unwrapped window, from the Fourier series of G."""
    grid = G.grid
    x = grid.x
    xs = x[0]
    g = G.coefficients
    zeta = grid.xi
    out = g[0] * (x - xs)
    nz = zeta != 0
    coef = np.zeros_like(g)
    coef[nz] = g[nz] / (1j * zeta[nz])
    # sample j sits at xs + j dx, so the series is in powers of e^{i zeta (x - xs)}
    series = np.fft.ifft(coef) * grid.num_points
    return out + series - np.sum(coef)


def half_plane_pairing(F: DensityField, G: DensityField, rule: str = "spectral",
                       guard: bool = True, guard_tol: float = 1e-3) -> complex:
    """iint_{x > y} F(x) G(y) dx dy on the unwrapped central window."""
    if F.grid != G.grid:
        raise ValueError("densities live on different grids")
    if guard:
        _window_check(F, guard_tol)
        _window_check(G, guard_tol)
    dx = F.grid.dx
    if rule == "trapezoid":
        g = G.samples
        inner = (np.cumsum(g) - 0.5 * g) * dx
    elif rule == "spectral":
        inner = antiderivative(G)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return complex(np.sum(F.samples * inner) * dx)


def _integral(f: np.ndarray, dx: float) -> float:
    return float(np.real(np.sum(f) * dx))


# components ------------------------------------------------------------------------

def local_terms(su: DensitySet, sv: DensitySet) -> dict:
    """J4, J6, J8 from the densities of u and v (already translated)."""
    dx = su.mass.grid.dx
    M_u, P_u, E_u = su.mass.samples, su.momentum.samples, su.energy.samples
    M_v, P_v, E_v = sv.mass.samples, sv.momentum.samples, sv.energy.samples
    Bm_u, Bp_u = su.mass_correction.samples, su.momentum_correction.samples
    Bm_v, Bp_v = sv.mass_correction.samples, sv.momentum_correction.samples
    Rm_u, Rp_u = su.mass_flux_correction.samples, su.momentum_flux_correction.samples
    Rm_v, Rp_v = sv.mass_flux_correction.samples, sv.momentum_flux_correction.samples
    J4 = M_u * E_v + M_v * E_u - 2 * P_u * P_v
    J6 = (M_u * Rp_v + Bm_u * E_v - P_u * Bp_v - Rm_u * P_v
          + M_v * Rp_u + Bm_v * E_u - P_v * Bp_u - Rm_v * P_u)
    J8 = Bm_u * Rp_v - Rm_u * Bp_v + Bm_v * Rp_u - Rm_v * Bp_u
    return {"J4": _integral(J4, dx), "J6": _integral(J6, dx), "J8": _integral(J8, dx)}


def interaction_value(su: DensitySet, sv: DensitySet, rule: str = "spectral") -> float:
    I = (half_plane_pairing(su.corrected_mass, sv.corrected_momentum, rule)
         - half_plane_pairing(su.corrected_momentum, sv.corrected_mass, rule))
    return float(I.real)


def k8_term(su: DensitySet, sv: DensitySet, rule: str = "spectral") -> float:
    H = half_plane_pairing
    K = (H(su.mass_remainder, sv.corrected_momentum, rule)
         + H(su.corrected_mass, sv.momentum_remainder, rule)
         - H(su.momentum_remainder, sv.corrected_mass, rule)
         - H(su.corrected_momentum, sv.mass_remainder, rule))
    return float(K.real)


def _translate(s: DensitySet, x0: float) -> DensitySet:
    if x0 == 0:
        return s
    names = ("mass", "momentum", "energy", "mass_correction", "momentum_correction",
             "mass_flux_correction", "momentum_flux_correction", "mass_remainder",
             "momentum_remainder")
    moved = {n: (getattr(s, n).shifted(x0) if getattr(s, n) is not None else None) for n in names}
    return DensitySet(s.localizer, s.xi0, **moved)


# reports ------------------------------------------------------------------------------

@dataclass
class InteractionReport:
    times: np.ndarray
    I: np.ndarray
    dIdt: np.ndarray
    J4: np.ndarray
    J6: np.ndarray
    J8: np.ndarray
    K8: np.ndarray
    config: dict = field(default_factory=dict)
    xi0_deviation: float | None = None
    bilinear_ratio: float | None = None

    @property
    def total(self) -> np.ndarray:
        return self.J4 + self.J6 + self.J8 + self.K8

    @property
    def residual(self) -> np.ndarray:
        return self.dIdt - self.total

    @property
    def scale(self) -> float:
        return float(max(np.max(np.abs(self.J4)), np.max(np.abs(self.dIdt)), 1e-300))

    @property
    def relative_residual(self) -> float:
        return float(np.max(np.abs(self.residual)) / self.scale)

    def summary(self) -> dict:
        dt = np.diff(self.times)
        integrate = (lambda y: float(np.sum(0.5 * (y[1:] + y[:-1]) * dt))) if len(self.times) > 1 \
            else (lambda y: float("nan"))
        out = {"config": self.config,
               "samples": int(len(self.times)),
               "residual_max": float(np.max(np.abs(self.residual))),
               "relative_residual": self.relative_residual,
               "J4_min": float(np.min(self.J4)),
               "integrals": {name: integrate(getattr(self, name)) for name in COMPONENTS}}
        if self.xi0_deviation is not None:
            out["xi0_deviation"] = self.xi0_deviation
        if self.bilinear_ratio is not None:
            out["bilinear_ratio"] = self.bilinear_ratio
        return out

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "I", "dIdt", "J4", "J6", "J8", "K8", "residual"])
            for row in zip(self.times, self.I, self.dIdt, self.J4, self.J6, self.J8, self.K8,
                           self.residual):
                w.writerow([f"{v:.12e}" for v in row])
        return path

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True))
        return path


def _symbol_of(traj: Trajectory, c: TrilinearSymbol | None) -> TrilinearSymbol:
    if c is not None:
        return c
    spec = traj.symbol_spec
    if not spec or spec.startswith("table:"):
        raise ValueError("pass the symbol explicitly; the trajectory does not carry it")
    return parse_symbol(spec)


def _sample_indices(traj: Trajectory, times, stencil: int) -> list[int]:
    dense = traj.dense_times
    if dense.size < 2 * stencil + 1:
        raise DomainError("the trajectory needs a dense-cadence window for differencing")
    if times is None:
        return list(range(stencil, dense.size - stencil, max(1, (dense.size - 2 * stencil) // 5)))
    idx = [traj.dense_index(t) for t in np.atleast_1d(times)]
    for i in idx:
        if i < stencil or i + stencil >= dense.size:
            raise DomainError(f"t = {dense[i]} lacks {stencil} dense steps on each side")
    return idx


def interaction_transversal(traj: Trajectory, a: Localizer, b: Localizer, xi0: float = 0.0,
                            x0: float = 0.0, c: TrilinearSymbol | None = None, times=None,
                            stencil: int = 1, rule: str = "spectral", check_xi0: bool = False,
                            engines: tuple | None = None) -> InteractionReport:
    """I_AB, its measured derivative and the four components at dense times.

    dI/dt is the central difference over ``stencil`` dense steps on each side.
    """
    c = _symbol_of(traj, c)
    if a is not b and not (a.is_identity or b.is_identity):
        gap = max(b.support[0] - a.support[1], a.support[0] - b.support[1])
        width = max(a.support[1] - a.support[0], b.support[1] - b.support[0])
        if gap < width:
            warnings.warn("intervals are not separated by their size; the bilinear reading degenerates",
                          stacklevel=2)
    if engines is None:
        ea = CorrectionEngine.for_trajectory(traj, c, a)
        eb = ea if b is a else CorrectionEngine.for_trajectory(traj, c, b)
    else:
        ea, eb = engines
    idx = _sample_indices(traj, times, stencil)
    h = stencil * traj.dt

    def sets(j, x0_, xi0_, remainders):
        u = traj.dense_field(j)
        su = ea.densities(u, xi0_, remainders)
        sv = su if eb is ea else eb.densities(u, xi0_, remainders)
        return su, _translate(sv, x0_)

    def evaluate(xi0_):
        I, dI, comps = [], [], {k: [] for k in COMPONENTS}
        for i in idx:
            su, sv = sets(i, x0, xi0_, True)
            I.append(interaction_value(su, sv, rule))
            loc = local_terms(su, sv)
            for k in ("J4", "J6", "J8"):
                comps[k].append(loc[k])
            comps["K8"].append(k8_term(su, sv, rule))
            lo = interaction_value(*sets(i - stencil, x0, xi0_, False), rule)
            hi = interaction_value(*sets(i + stencil, x0, xi0_, False), rule)
            dI.append((hi - lo) / (2 * h))
        return np.array(I), np.array(dI), {k: np.array(v) for k, v in comps.items()}

    I, dI, comps = evaluate(xi0)
    deviation = None
    if check_xi0:
        I2, _, comps2 = evaluate(xi0 + 1.0)
        scale = max(np.max(np.abs(I)), np.max(np.abs(comps["J4"])), 1e-300)
        deviation = float(max(np.max(np.abs(I2 - I)),
                              *(np.max(np.abs(comps2[k] - comps[k])) for k in COMPONENTS)) / scale)
    config = {"a": a.label, "b": b.label, "xi0": xi0, "x0": x0, "stencil": stencil,
              "dt": traj.dt, "rule": rule, "symbol": c.spec}
    return InteractionReport(traj.dense_times[idx], I, dI, comps["J4"], comps["J6"], comps["J8"],
                             comps["K8"], config, deviation)


def interaction_diagonal(traj: Trajectory, a: Localizer, xi0: float = 0.0, x0: float = 0.0,
                         c: TrilinearSymbol | None = None, times=None, stencil: int = 1,
                         rule: str = "spectral", check_xi0: bool = False,
                         engine: CorrectionEngine | None = None) -> InteractionReport:
    engines = None if engine is None else (engine, engine)
    return interaction_transversal(traj, a, a, xi0, x0, c, times, stencil, rule, check_xi0, engines)


# quadratic checks --------------------------------------------------------------------------

def j4_positivity(u: Field, v: Field, a: Localizer | None = None,
                  b: Localizer | None = None) -> float:
    """4 int |d_x(A0 u conj(B0 v))|^2 dx (b defaults to a)."""
    a = a or Localizer.identity()
    b = b or a
    w = a.apply(u).samples * np.conj(b.apply(v).samples)
    grid = u.grid
    dw = np.fft.ifft(1j * grid.xi * np.fft.fft(w))
    return float(4 * np.sum(np.abs(dw) ** 2) * grid.dx)


def j4_symbol_side(u: Field, v: Field, a: Localizer | None = None, b: Localizer | None = None,
                   xi0: float = 0.0) -> float:
    """int M_a(u) E_b(v) + M_b(v) E_a(u) - 2 P_a(u) P_b(v) dx."""
    from .conservation import quadratic_densities
    a = a or Localizer.identity()
    b = b or a
    Mu, Pu, Eu = (d.samples.real for d in quadratic_densities(u, a, xi0))
    Mv, Pv, Ev = (d.samples.real for d in quadratic_densities(v, b, xi0))
    return float(np.sum(Mu * Ev + Mv * Eu - 2 * Pu * Pv) * u.grid.dx)


def j4_symbol(x1, x2, x3, x4):
    """Symbol 4 (xi1 - xi4)(xi2 - xi3) of the quartic term."""
    return 4 * (np.asarray(x1) - x4) * (np.asarray(x2) - x3)


def bilinear_reading(traj: Trajectory, a: Localizer, b: Localizer, report: InteractionReport
                     ) -> float:
    """int J4_AB dt / (4 sep^2 int ||A0 u conj(B0 u)||^2 dt) over the report's samples."""
    sep = abs(b.center - a.center)
    num, den = [], []
    t = report.times
    for i, ti in enumerate(t):
        u = traj.at(float(ti))
        w = a.apply(u).samples * np.conj(b.apply(u).samples)
        den.append(np.sum(np.abs(w) ** 2) * u.grid.dx)
        num.append(report.J4[i])
    num, den = np.array(num), np.array(den)
    if t.size > 1:
        dt = np.diff(t)
        num_i = np.sum(0.5 * (num[1:] + num[:-1]) * dt)
        den_i = np.sum(0.5 * (den[1:] + den[:-1]) * dt)
    else:
        num_i, den_i = num[0], den[0]
    return float(num_i / (4 * sep ** 2 * den_i))


# the diagonal trace -------------------------------------------------------------------------

def diagonal_trace(c: TrilinearSymbol, a: Localizer, xi0: float, xi) -> np.ndarray:
    """One (u, v) pattern of the sextic symbol of J6 at the six-fold diagonal."""
    xi = np.asarray(xi, dtype=float)
    pm = localized_division(c, a, xi0, "mass")
    pp = localized_division(c, a, xi0, "momentum")
    Bm, Rm = pm.conservation_symbols(xi, xi, xi, xi, xi0)
    Bp, Rp = pp.conservation_symbols(xi, xi, xi, xi, xi0)
    m = mass_bilinear(a)(xi, xi)
    p = momentum_bilinear(a, xi0)(xi, xi)
    e = energy_bilinear(a, xi0)(xi, xi)
    return m * Rp + Bm * e - p * Bp - Rm * p


def diagonal_trace_check(c: TrilinearSymbol, a: Localizer, xi0: float | None = None,
                         n: int = 101, core: float = 1.0) -> float:
    """max |j6_a(xi) - a0(xi)^4 c(xi, xi, xi)| over the support of a0 (scaled by ``core``)."""
    if xi0 is None:
        xi0 = a.center
    lo, hi = a.support
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * core
    xi = np.linspace(mid - half, mid + half, n)
    trace = diagonal_trace(c, a, xi0, xi)
    target = a.a0(xi) ** 4 * c(xi, xi, xi)
    return float(np.max(np.abs(trace - target)))


__all__ = ["InteractionReport", "half_plane_pairing", "antiderivative", "interaction_diagonal",
           "interaction_transversal", "j4_positivity", "j4_symbol_side", "j4_symbol",
           "bilinear_reading", "diagonal_trace", "diagonal_trace_check", "local_terms",
           "interaction_value", "k8_term"]
