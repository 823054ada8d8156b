import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlslab.lattice import Localizer
from nlslab.symbolic import (DivisionError, QuarticSymbol, check_resonant_vanishing, divide,
                             localized_division, parse_symbol, quartic_mass_symbol,
                             region_weights, size_constants)
from nlslab.symbolic.division import difference_quotient
from nlslab.symbolic.quartic import delta4, tilde_delta4_sq, xi_avg
from nlslab.symbolic.resonance import to_eta

SYMBOLS = ["1", "1+0.5*cos(x1-x3)", "exp(-(x1-x2)^2/50)*(1 + 0.3*sin(x2-x3))",
           "1/(1+0.01*(x1-x3)^2)"]


def cloud(n=10_000, box=20.0, seed=3):
    return np.random.default_rng(seed).uniform(-box, box, size=(4, n))


@pytest.mark.parametrize("text", SYMBOLS)
def test_mass_division_identity(text):
    pair = localized_division(parse_symbol(text))
    xi = cloud()
    scale = max(1.0, float(np.max(np.abs(pair.c4(*xi)))))
    assert np.max(np.abs(pair.residual(*xi))) / scale < 1e-6
    k = size_constants(pair)
    assert np.isfinite(k["K_b"]) and np.isfinite(k["K_r"])


@pytest.mark.parametrize("kind, xi0", [("mass", 0.0), ("momentum", 2.0)])
def test_localized_division_identity(kind, xi0):
    c = parse_symbol("1+0.5*cos(x1-x3)")
    pair = localized_division(c, Localizer.from_partition(2), xi0=xi0, kind=kind)
    xi = cloud(box=6.0) + 2.0
    scale = max(1.0, float(np.max(np.abs(pair.c4(*xi)))))
    assert np.max(np.abs(pair.residual(*xi))) / scale < 1e-6


def test_conservation_form_identity():
    c = parse_symbol("1+0.5*cos(x1-x3)")
    pair = localized_division(c, Localizer.from_partition(1), xi0=1.0, kind="momentum")
    xi = cloud(n=4000, box=5.0) + 1.0
    B, R = pair.conservation_symbols(*xi)
    d = delta4(*xi)
    shifted = tilde_delta4_sq(*xi) + 2 * (xi_avg(*xi) - 1.0) * d
    lhs = pair.c4(*xi) - 1j * shifted * B
    assert np.max(np.abs(lhs - 1j * d * R)) < 1e-10


def test_manufactured_omega2_piece():
    g = lambda x1, x2, x3, x4: 1 + 0.2 * np.cos(x1 + x4)
    c4 = QuarticSymbol(lambda *x: tilde_delta4_sq(*x) * g(*x), "generic", "manufactured")
    pair = divide(c4)
    xi = cloud(n=20_000, box=15.0)
    e1, e2, e3, _ = to_eta(*xi)
    full = region_weights(e1, e2, e3)[1] == 1
    assert full.sum() > 100
    b, r = pair(*xi[:, full])
    assert np.allclose(b, -g(*xi[:, full]), atol=1e-12)
    assert np.allclose(r, 0, atol=1e-12)


def test_constant_symbol_uses_exact_flux():
    pair = localized_division(parse_symbol("2"), kind="momentum", xi0=0.5)
    xi = cloud(n=100)
    B, R = pair.conservation_symbols(*xi)
    assert np.all(B == 0)
    assert np.allclose(R, 2.0)


def test_flux_on_the_diagonal_matches_derivative():
    # c4_p(xi0 + s, xi0, xi0, xi0) ~ i Delta4 R with Delta4 = s at first order
    c = parse_symbol("1+0.5*cos(x1-x3)")
    a = Localizer.from_partition(0)
    pair = localized_division(c, a, xi0=0.0, kind="momentum")
    z = np.zeros(1)
    _, R = pair.conservation_symbols(z, z, z, z)
    s = 1e-5
    fd = (pair.c4(z + s, z, z, z) - pair.c4(z - s, z, z, z)) / (2 * s)
    assert R[0] == pytest.approx(-1j * fd[0], abs=1e-6)
    assert R[0].real == pytest.approx(1.5 * a.a0(0.0) ** 2, rel=1e-6)


def test_localized_pair_vanishes_far_from_support():
    c = parse_symbol("1+0.5*cos(x1-x3)")
    pair = localized_division(c, Localizer.from_partition(0))
    xi = np.random.default_rng(0).uniform(5, 20, size=(4, 2000))
    b, r = pair(*xi)
    assert np.all(b == 0) and np.all(r == 0)


def test_non_resonant_symbol_is_rejected():
    c4 = QuarticSymbol(lambda *x: np.ones(np.shape(x[0])), "generic", "one")
    with pytest.raises(DivisionError) as err:
        check_resonant_vanishing(c4)
    assert err.value.worst is not None
    assert check_resonant_vanishing(quartic_mass_symbol(parse_symbol("1"))) == 0.0


@settings(max_examples=25)
@given(st.floats(-3, 3))
def test_difference_quotient_near_zero(centre):
    F = lambda s, idx: np.exp(1j * (s + centre))
    s = np.array([0.0, 1e-9, 0.3, -2.0])
    got = difference_quotient(F, s)
    exact = np.where(s == 0, 1j * np.exp(1j * centre),
                     (np.exp(1j * (s + centre)) - np.exp(1j * centre)) / np.where(s == 0, 1, s))
    assert np.allclose(got, exact, atol=1e-8)
