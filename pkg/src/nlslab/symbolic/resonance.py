"""Resonance geometry of frequency quadruples and the smooth three-region partition.

Coordinates used throughout::

    eta1 = xi1 - xi2 + xi3 - xi4      (= Delta4 xi)
    eta2 = xi1 + xi2 - xi3 - xi4
    eta3 = xi1 - xi2 - xi3 + xi4
    eta4 = xi1 + xi2 + xi3 + xi4

so that tilde Delta4 xi^2 = eta2 * eta3 / 2 and the resonant set is
{eta1 = 0, eta2 * eta3 = 0}. The inverse map is xi = T^t eta / 4.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lattice import smooth_cutoff, smooth_step
from .quartic import delta4, delta4_sq, tilde_delta4_sq, xi_avg

ETA_MATRIX = np.array([[1, -1, 1, -1],
                       [1, 1, -1, -1],
                       [1, -1, -1, 1],
                       [1, 1, 1, 1]], dtype=float)


def to_eta(x1, x2, x3, x4):
    return (x1 - x2 + x3 - x4, x1 + x2 - x3 - x4, x1 - x2 - x3 + x4, x1 + x2 + x3 + x4)


def from_eta(e1, e2, e3, e4):
    return (0.25 * (e1 + e2 + e3 + e4), 0.25 * (-e1 + e2 - e3 + e4),
            0.25 * (e1 - e2 - e3 + e4), 0.25 * (-e1 - e2 + e3 + e4))


@dataclass(frozen=True)
class RegionParams:
    """Cutoff constants.

    ``inner``: "<~ 1" means <= inner with smooth falloff to 2*inner.
    ``theta``: "x << y" means x <= theta*y with smooth falloff to 2*theta*y.
    ``quotient_eps``/``stencil_step``: removable-singularity rule.
    """

    inner: float = 2.0
    theta: float = 0.125
    quotient_eps: float = 1e-4
    stencil_step: float = 1e-3


DEFAULT_REGIONS = RegionParams()


def ratio_cutoff(num, den, theta):
    """1 where |num| <= theta |den|, 0 where |num| >= 2 theta |den|."""
    num = np.abs(num)
    den = np.abs(den)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(den > 0, (num - theta * den) / (theta * den), np.inf)
    t = np.where((den == 0) & (num == 0), np.inf, t)
    return 1.0 - smooth_step(t)


def region_weights(e1, e2, e3, params: RegionParams = DEFAULT_REGIONS):
    """Smooth memberships (w1, w2, w3) in eta coordinates; they sum to one.

    Omega1 is a unit neighbourhood of the resonant set, Omega2 the part of its
    complement where |eta1| << min(|eta2|, |eta3|), Omega3 the rest.
    """
    r = params.inner
    chi1 = smooth_cutoff(e1, r)
    chi2 = smooth_cutoff(e2, r)
    chi3 = smooth_cutoff(e3, r)
    w1 = chi1 * (1 - (1 - chi2) * (1 - chi3))
    psi = ratio_cutoff(e1, e2, params.theta) * ratio_cutoff(e1, e3, params.theta)
    w2 = (1 - w1) * psi
    w3 = (1 - w1) * (1 - psi)
    return w1, w2, w3


def d_hi_med(x1, x2, x3, x4):
    a = np.abs(x1 - x2) + np.abs(x3 - x4)
    b = np.abs(x1 - x4) + np.abs(x3 - x2)
    return np.maximum(a, b), np.minimum(a, b)


@dataclass(frozen=True)
class ResonancePoint:
    xi: tuple[float, float, float, float]
    delta4: float
    delta4_sq: float
    tilde_delta4_sq: float
    d_hi: float
    d_med: float
    region_weights: tuple[float, float, float]

    @property
    def xi_avg(self) -> float:
        return float(np.mean(self.xi))

    @property
    def on_resonant_set(self) -> bool:
        x1, x2, x3, x4 = self.xi
        return sorted((x1, x3)) == sorted((x2, x4))

    @property
    def region(self) -> int:
        """Index (1, 2 or 3) of the dominant region."""
        return int(np.argmax(self.region_weights)) + 1


def resonance(xi, thresholds: RegionParams = DEFAULT_REGIONS) -> ResonancePoint:
    x = tuple(float(v) for v in xi)
    if len(x) != 4:
        raise ValueError("a frequency quadruple has four entries")
    hi, med = d_hi_med(*x)
    e1, e2, e3, _ = to_eta(*x)
    w = region_weights(np.float64(e1), np.float64(e2), np.float64(e3), thresholds)
    return ResonancePoint(x, float(delta4(*x)), float(delta4_sq(*x)), float(tilde_delta4_sq(*x)),
                          float(hi), float(med), tuple(float(v) for v in w))


__all__ = ["ETA_MATRIX", "RegionParams", "DEFAULT_REGIONS", "ResonancePoint", "resonance",
           "region_weights", "ratio_cutoff", "to_eta", "from_eta", "d_hi_med", "xi_avg"]
