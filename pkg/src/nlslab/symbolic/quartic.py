"""Quartic symbols generated by a trilinear nonlinearity acting on quadratic densities."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..lattice import Localizer
from .symbols import TrilinearSymbol

TAGS = ("mass", "momentum", "correction_b", "flux_r", "morawetz_j", "generic")


@dataclass(frozen=True, eq=False)
class QuarticSymbol:
    evaluator: Callable = field(repr=False)
    tag: str = "generic"
    label: str = ""
    zero: bool = False

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown quartic tag {self.tag!r}")

    def __call__(self, x1, x2, x3, x4) -> np.ndarray:
        x1, x2, x3, x4 = (np.asarray(v, dtype=float) for v in (x1, x2, x3, x4))
        if self.zero:
            return np.zeros(np.broadcast(x1, x2, x3, x4).shape, dtype=complex)
        return np.asarray(self.evaluator(x1, x2, x3, x4), dtype=complex)


def zero_quartic(tag: str = "generic") -> QuarticSymbol:
    return QuarticSymbol(lambda *x: 0.0, tag, "0", zero=True)


def mass_bilinear(a: Localizer | None = None) -> Callable:
    """m_a(xi, eta) = a(xi, eta)."""
    if a is None or a.is_identity:
        return lambda xi, eta: np.ones(np.broadcast(xi, eta).shape)
    return lambda xi, eta: a(xi, eta)


def momentum_bilinear(a: Localizer | None = None, xi0: float = 0.0) -> Callable:
    """p_{a,xi0}(xi, eta) = (-xi - eta + 2 xi0) a(xi, eta)."""
    m = mass_bilinear(a)
    return lambda xi, eta: (2 * xi0 - xi - eta) * m(xi, eta)


def energy_bilinear(a: Localizer | None = None, xi0: float = 0.0) -> Callable:
    """e_{a,xi0}(xi, eta) = (xi + eta - 2 xi0)^2 a(xi, eta)."""
    m = mass_bilinear(a)
    return lambda xi, eta: (xi + eta - 2 * xi0) ** 2 * m(xi, eta)


def localized_quartic(c: TrilinearSymbol, bilinear: Callable, tag: str, label: str = "") -> QuarticSymbol:
    """Symbol of the nonlinear part of d/dt L(u, conj u) for a bilinear density L.

    With u_t = i u_xx - i C(u, conj u, u) the nonlinear part is the
    symmetrized four-term expression

        -i/2 [ c(1,2,3) l(1-2+3, 4) + c(1,4,3) l(1-4+3, 2)
               - conj c(2,3,4) l(1, 2-3+4) - conj c(2,1,4) l(3, 2-1+4) ]

    where the integers abbreviate xi1, ..., xi4.
    """
    if c.is_zero:
        return zero_quartic(tag)

    def evaluator(x1, x2, x3, x4):
        t1 = c(x1, x2, x3) * bilinear(x1 - x2 + x3, x4)
        t2 = c(x1, x4, x3) * bilinear(x1 - x4 + x3, x2)
        t3 = np.conj(c(x2, x3, x4)) * bilinear(x1, x2 - x3 + x4)
        t4 = np.conj(c(x2, x1, x4)) * bilinear(x3, x2 - x1 + x4)
        return -0.5j * (t1 + t2 - t3 - t4)

    return QuarticSymbol(evaluator, tag, label)


def quartic_mass_symbol(c: TrilinearSymbol, a: Localizer | None = None) -> QuarticSymbol:
    """c^4_m (a = None) or its localized version c^4_{m,a}."""
    if c.is_constant and (a is None or a.is_identity):
        # the four terms cancel identically for a real constant
        if np.imag(c.constant) == 0:
            return zero_quartic("mass")
    return localized_quartic(c, mass_bilinear(a), "mass", "c4_m")


def quartic_momentum_symbol(c: TrilinearSymbol, a: Localizer | None = None,
                            xi0: float = 0.0) -> QuarticSymbol:
    """c^4_{p,a,xi0}, built from p_{a,xi0}."""
    return localized_quartic(c, momentum_bilinear(a, xi0), "momentum", "c4_p")


# frequency combinations ------------------------------------------------------

def delta4(x1, x2, x3, x4):
    return x1 - x2 + x3 - x4


def delta4_sq(x1, x2, x3, x4):
    return x1 ** 2 - x2 ** 2 + x3 ** 2 - x4 ** 2


def tilde_delta4_sq(x1, x2, x3, x4):
    return 0.5 * ((x1 - x3) ** 2 - (x2 - x4) ** 2)


def xi_avg(x1, x2, x3, x4):
    return 0.25 * (x1 + x2 + x3 + x4)
