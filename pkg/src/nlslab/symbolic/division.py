"""Constructive division c4 = Delta4 xi * rt - tilde Delta4 xi^2 * b.

The construction works in the eta coordinates of :mod:`.resonance`:

* Omega2 (|eta1| << |eta2|, |eta3|): b = -c4 / tilde Delta, rt = 0.
* Omega3 (the rest away from the resonant set): rt = c4 / eta1, b = 0.
* Omega1 (unit neighbourhood of the resonant set): the localized piece f is
  split by difference quotients along eta1, then eta2 or eta3, using that f
  vanishes on {eta1 = 0, eta2 * eta3 = 0}.

For the conservation layer the pair is converted to the correction symbol
B = i b and the flux symbol R = -i (rt + 2 (xi_avg - xi0) b), which satisfy

    c4 - i Delta4 (xi - xi0)^2 B = i Delta4 xi R.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..lattice import Localizer, smooth_cutoff
from .quartic import (QuarticSymbol, delta4, localized_quartic, mass_bilinear, momentum_bilinear,
                      quartic_mass_symbol, quartic_momentum_symbol, tilde_delta4_sq, xi_avg)
from .resonance import DEFAULT_REGIONS, RegionParams, d_hi_med, from_eta, region_weights, to_eta
from .symbols import TrilinearSymbol

CHUNK = 1 << 16
RESONANT_TOL = 1e-8

# 4th order central first-derivative stencil
_D1_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_D1_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0


class DivisionError(ValueError):
    def __init__(self, message: str, worst=None):
        super().__init__(message)
        self.worst = worst


def difference_quotient(F: Callable, s: np.ndarray, f_s=None, f_0=None,
                        params: RegionParams = DEFAULT_REGIONS, idx=None) -> np.ndarray:
    """(F(s) - F(0)) / s with the removable singularity at s = 0.

    F(values, idx) evaluates at the points with integer indices ``idx`` (one value
    per index). For |s| <= eps the quotient is replaced by F'(s/2) from a 4th
    order central stencil, evaluated on those points only.
    """
    s = np.asarray(s, dtype=float)
    if idx is None:
        idx = np.arange(s.size)
    out = np.empty(s.shape, dtype=complex)
    far = np.abs(s) > params.quotient_eps
    near = ~far
    if f_s is None:
        f_s = F(s, idx)
    if f_0 is None:
        f_0 = F(np.zeros_like(s), idx)
    out[far] = (f_s[far] - f_0[far]) / s[far]
    if np.any(near):
        h = params.stencil_step
        mid = 0.5 * s[near]
        sub = idx[near]
        acc = np.zeros(mid.shape, dtype=complex)
        for off, w in zip(_D1_OFFSETS, _D1_WEIGHTS):
            acc += w * F(mid + off * h, sub)
        out[near] = acc / h
    return out


@dataclass(frozen=True, eq=False)
class DivisionPair:
    """Lazily evaluated output (b, rt) of the division algorithm.

    ``cutoff`` is an optional factor Psi(xi) equal to one wherever c4 may be
    nonzero; it restricts the support of b and rt without changing the identity.
    """

    c4: QuarticSymbol
    params: RegionParams = DEFAULT_REGIONS
    cutoff: Callable | None = field(default=None, repr=False)
    kind: str = "generic"
    xi0: float = 0.0
    exact_flux: Callable | None = field(default=None, repr=False)

    def __call__(self, x1, x2, x3, x4):
        """Return (b, rt) at broadcast frequency arrays."""
        arrays = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, x3, x4)))
        shape = arrays[0].shape
        flat = [a.ravel() for a in arrays]
        b = np.zeros(flat[0].size, dtype=complex)
        r = np.zeros(flat[0].size, dtype=complex)
        if self.exact_flux is not None:
            r[:] = self.exact_flux(*flat)
        elif not self.c4.zero:
            for start in range(0, flat[0].size, CHUNK):
                sl = slice(start, start + CHUNK)
                b[sl], r[sl] = self._evaluate(*(f[sl] for f in flat))
        return b.reshape(shape), r.reshape(shape)

    # symbols in the stored (b, rt) form ----------------------------------------
    def b4(self, *xi):
        return self(*xi)[0]

    def r4_tilde(self, *xi):
        return self(*xi)[1]

    def r4(self, *xi):
        """Recentred flux rt + 2 xi_avg b."""
        b, r = self(*xi)
        return r + 2 * xi_avg(*xi) * b

    def residual(self, *xi):
        b, r = self(*xi)
        return self.c4(*xi) - (delta4(*xi) * r - tilde_delta4_sq(*xi) * b)

    # symbols in the conservation form -----------------------------------------
    def conservation_symbols(self, x1, x2, x3, x4, xi0: float | None = None):
        """(B, R) with c4 - i D4(xi - xi0)^2 B = i D4 xi R."""
        if xi0 is None:
            xi0 = self.xi0
        b, r = self(x1, x2, x3, x4)
        B = 1j * b
        R = -1j * (r + 2 * (xi_avg(x1, x2, x3, x4) - xi0) * b)
        return B, R

    def correction_symbol(self) -> QuarticSymbol:
        return QuarticSymbol(lambda *x: 1j * self(*x)[0], "correction_b", f"B4_{self.kind}",
                             zero=self.c4.zero)

    def flux_symbol(self, xi0: float | None = None) -> QuarticSymbol:
        x0 = self.xi0 if xi0 is None else xi0
        return QuarticSymbol(lambda *x: self.conservation_symbols(*x, xi0=x0)[1], "flux_r",
                             f"R4_{self.kind}", zero=self.c4.zero)

    # core ---------------------------------------------------------------------
    def _evaluate(self, x1, x2, x3, x4):
        p = self.params
        e1, e2, e3, e4 = to_eta(x1, x2, x3, x4)
        c4 = self.c4
        b = np.zeros(x1.shape, dtype=complex)
        r = np.zeros(x1.shape, dtype=complex)
        w1, w2, w3 = region_weights(e1, e2, e3, p)
        f = c4(x1, x2, x3, x4)

        m2 = w2 > 0
        b[m2] -= w2[m2] * f[m2] / (0.5 * e2[m2] * e3[m2])
        m3 = (w3 > 0) & (e1 != 0)
        r[m3] += w3[m3] * f[m3] / e1[m3]

        # Omega1: only where chi(eta1/2) or the restricted pieces can be nonzero
        sub = (np.abs(e1) < 4 * p.inner) & (np.minimum(np.abs(e2), np.abs(e3)) < 2 * p.inner)
        if np.any(sub):
            db, dr = _omega1(c4, e1[sub], e2[sub], e3[sub], e4[sub], f[sub], w1[sub], p)
            b[sub] += db
            r[sub] += dr

        if self.cutoff is not None:
            psi = self.cutoff(x1, x2, x3, x4)
            b *= psi
            r *= psi
        return b, r


def _omega1(c4, e1, e2, e3, e4, f, w1, p: RegionParams):
    """Difference-quotient construction on the Omega1 pieces."""
    r_ = p.inner
    chi_t = smooth_cutoff(e1, 2 * r_)  # equals 1 on supp chi(eta1)
    zeros = np.zeros_like(e1)

    def G(a1, a2, a3, j):
        return c4(*from_eta(a1, a2, a3, e4[j]))

    def w1_at(a1, a2, a3):
        return region_weights(a1, a2, a3, p)[0]

    def nu(a2, a3):
        c2 = smooth_cutoff(a2, r_)
        c3 = smooth_cutoff(a3, r_)
        return c2 * c3, c2 * (1 - c3), (1 - c2) * c3

    # eta1 quotient of the whole Omega1 piece w1 * c4
    everything = np.arange(e1.size)
    g0 = G(zeros, e2, e3, everything)
    w10 = w1_at(zeros, e2, e3)

    def piece(s, j):
        return w1_at(s, e2[j], e3[j]) * G(s, e2[j], e3[j], j)

    q1 = difference_quotient(piece, e1, f_s=w1 * f, f_0=w10 * g0, params=p)
    dr = chi_t * q1

    n11, n12, n13 = nu(e2, e3)
    db = np.zeros(e1.shape, dtype=complex)

    # Omega12: eta2 quotient; (1 - chi(eta3)) keeps |eta3| >= inner there
    m = np.nonzero(n12 > 0)[0]
    if m.size:
        def F2(s, j):
            return nu(s, e3[j])[1] * G(zeros[j], s, e3[j], j)

        q2 = difference_quotient(F2, e2[m], f_s=n12[m] * g0[m], params=p, idx=m)
        db[m] -= chi_t[m] * 2 * q2 / e3[m]

    m = np.nonzero(n13 > 0)[0]
    if m.size:
        def F3(s, j):
            return nu(e2[j], s)[2] * G(zeros[j], e2[j], s, j)

        q3 = difference_quotient(F3, e3[m], f_s=n13[m] * g0[m], params=p, idx=m)
        db[m] -= chi_t[m] * 2 * q3 / e2[m]

    # Omega11: mixed quotient g / (eta2 eta3) where g(eta2, eta3) = nu11 * c4(0, eta2, eta3)
    m = np.nonzero(n11 > 0)[0]
    if m.size:
        s3_at = np.zeros(e1.size)

        def g(s2, s3, j):
            return nu(s2, s3)[0] * G(zeros[j], s2, s3, j)

        def K(s3, j):
            s3_at[j] = s3
            return difference_quotient(lambda s2, jj: g(s2, s3_at[jj], jj), e2[j],
                                       params=p, idx=j)

        h = difference_quotient(K, e3[m], params=p, idx=m)
        db[m] -= chi_t[m] * 2 * h
    return db, dr


def check_resonant_vanishing(c4: QuarticSymbol, box: float = 20.0, n: int = 1000,
                             seed: int = 0, tol: float = RESONANT_TOL) -> float:
    """Max |c4| over sampled points of the resonant set; raises when above tol."""
    if c4.zero:
        return 0.0
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(-box, box, size=(2, n))
    v1 = np.abs(c4(a, a, b, b))
    v2 = np.abs(c4(a, b, b, a))
    worst = np.maximum(v1, v2)
    i = int(np.argmax(worst))
    if worst[i] > tol:
        point = (a[i], a[i], b[i], b[i]) if v1[i] >= v2[i] else (a[i], b[i], b[i], a[i])
        raise DivisionError(
            f"quartic symbol does not vanish on the resonant set: |c4| = {worst[i]:.3g} at {point}",
            worst=point)
    return float(worst[i])


def divide(c4: QuarticSymbol, thresholds: RegionParams = DEFAULT_REGIONS,
           validate: bool = True, cutoff: Callable | None = None,
           kind: str = "generic", xi0: float = 0.0) -> DivisionPair:
    """Split c4 = Delta4 xi * rt - tilde Delta4 xi^2 * b with smooth bounded (b, rt)."""
    if validate:
        check_resonant_vanishing(c4)
    return DivisionPair(c4, thresholds, cutoff, kind, xi0)


def support_cutoff(a: Localizer, margin: float = 0.5) -> Callable | None:
    """Psi(xi) = 1 - prod_i (1 - chi_J(xi_i)); chi_J = 1 on supp a0, 0 off J.

    J is supp a0 enlarged by ``margin`` on both sides.
    """
    if a.is_identity:
        return None
    lo, hi = a.support
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)

    def chi(x):
        d = np.maximum(np.abs(x - centre) - half, 0.0)
        return smooth_cutoff(d, margin / 2) if margin > 0 else (d == 0).astype(float)

    def psi(x1, x2, x3, x4):
        return 1 - (1 - chi(x1)) * (1 - chi(x2)) * (1 - chi(x3)) * (1 - chi(x4))

    return psi


def localized_division(c: TrilinearSymbol, a: Localizer | None = None, xi0: float = 0.0,
                       kind: str = "mass", thresholds: RegionParams = DEFAULT_REGIONS) -> DivisionPair:
    """Divide c4_{m,a} (kind='mass') or c4_{p,a,xi0} (kind='momentum')."""
    if a is None:
        a = Localizer.identity()
    if kind == "mass":
        c4 = quartic_mass_symbol(c, a)
    elif kind == "momentum":
        c4 = quartic_momentum_symbol(c, a, xi0)
    else:
        raise ValueError(f"kind must be 'mass' or 'momentum', got {kind!r}")
    if not a.is_identity:
        lo, hi = a.support
        width = hi - lo
        dist = max(lo - xi0, xi0 - hi, 0.0)
        if dist > width:
            warnings.warn(f"xi0 = {xi0} is far from the localizer support [{lo}, {hi}]",
                          stacklevel=2)
    pair = divide(c4, thresholds, cutoff=support_cutoff(a), kind=kind, xi0=xi0)
    if kind == "momentum" and a.is_identity and c.is_constant and np.imag(c.constant) == 0:
        # c4_p = i c Delta4 xi exactly: take the pure-flux gauge b = 0, R = c
        value = 1j * c.constant
        pair = DivisionPair(c4, thresholds, None, kind, xi0,
                            exact_flux=lambda *x: np.full(np.shape(x[0]), value))
    return pair


def size_constants(pair: DivisionPair, box: float = 20.0, n: int = 10_000, seed: int = 1,
                   r_scale: float = 1.0) -> dict[str, float]:
    """Fitted constants K_b, K_r in |b| <= K_b/(<hi><med>) and |rt| <= K_r/<med>.

    ``r_scale`` divides the samples by the momentum weight r when kind='momentum'.
    """
    rng = np.random.default_rng(seed)
    xi = rng.uniform(-box, box, size=(4, n))
    b, r = pair(*xi)
    hi, med = d_hi_med(*xi)
    jh = np.sqrt(1 + hi ** 2)
    jm = np.sqrt(1 + med ** 2)
    return {"K_b": float(np.max(np.abs(b) * jh * jm)) / r_scale,
            "K_r": float(np.max(np.abs(r) * jm)) / r_scale}


__all__ = ["DivisionPair", "DivisionError", "divide", "localized_division", "difference_quotient",
           "check_resonant_vanishing", "size_constants", "support_cutoff",
           "mass_bilinear", "momentum_bilinear", "localized_quartic"]
