from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import GENERIC, random_band_field
from nlslab.forms import (MultilinearForm, active_modes, apply_even_density, apply_trilinear,
                          even_functional, lowrank_approximate)
from nlslab.lattice import DomainError, GridSpec
from nlslab.symbolic import parse_symbol, quartic_mass_symbol


def brute_trilinear(symbol, u):
    """Triple loop over the active modes; reference for the band sum."""
    grid = u.grid
    modes = active_modes(u)
    a = u.coefficients[np.mod(modes, grid.num_points)]
    out = np.zeros(grid.num_points, dtype=complex)
    for i, m1 in enumerate(modes):
        for j, m2 in enumerate(modes):
            for k, m3 in enumerate(modes):
                xs = grid.spacing * np.array([m1, m2, m3])
                out[(m1 - m2 + m3) % grid.num_points] += (
                    complex(symbol(*xs)) * a[i] * np.conj(a[j]) * a[k])
    return out


@pytest.fixture
def tiny():
    return GridSpec(num_points=128, circumference=20 * np.pi)


def test_direct_path_matches_brute_force(tiny):
    rng = np.random.default_rng(0)
    u = random_band_field(tiny, -0.4, 0.4, rng)
    c = parse_symbol("1 + 0.5*cos(x1 - x3) + 0.2*x2/(1 + x2^2)")
    got = apply_trilinear(MultilinearForm.from_trilinear(c), u, path="direct").coefficients
    assert np.allclose(got, brute_trilinear(c, u), atol=1e-12)


def test_constant_paths_agree(tiny):
    u = random_band_field(tiny, -0.5, 0.5, np.random.default_rng(1))
    form = MultilinearForm.constant_form(3, 1.0)
    a = apply_trilinear(form, u, path="pointwise")
    b = apply_trilinear(form, u, path="direct")
    assert np.allclose(a.coefficients, b.coefficients, atol=1e-12)
    assert np.allclose(a.samples, np.abs(u.samples) ** 2 * u.samples, atol=1e-12)


def test_lowrank_path_agrees_with_direct(small_grid):
    u = random_band_field(small_grid, -2, 2, np.random.default_rng(2), amp=0.1)
    c = parse_symbol(GENERIC)
    dec = lowrank_approximate(c, 3, tol=1e-10, box=(-3, 3))
    assert dec.ok and dec.rank <= 4
    form = replace(MultilinearForm.from_trilinear(c), lowrank=dec)
    a = apply_trilinear(form, u, path="lowrank").coefficients
    b = apply_trilinear(form, u, path="direct").coefficients
    assert np.max(np.abs(a - b)) < 1e-9 * np.max(np.abs(b))


def test_lowrank_rank_of_separable_symbol():
    dec = lowrank_approximate(lambda a, b, d: np.exp(-a ** 2) * (1 + b) * np.cos(d), 3, tol=1e-9,
                              box=(-2, 2))
    assert dec.rank == 1 and dec.error < 1e-9
    x = np.linspace(-2, 2, 5)
    assert np.allclose(dec(x, x, x), np.exp(-x ** 2) * (1 + x) * np.cos(x), atol=1e-9)


def test_even_density_integral_matches_functional(tiny):
    rng = np.random.default_rng(3)
    args = [random_band_field(tiny, -0.3, 0.3, rng) for _ in range(4)]
    q = MultilinearForm.from_quartic(quartic_mass_symbol(parse_symbol(GENERIC)))
    dens = apply_even_density(q, args)
    assert dens.integral() == pytest.approx(even_functional(q, args), rel=1e-11, abs=1e-11)


@settings(max_examples=20)
@given(st.integers(0, 1000))
def test_constant_quartic_density_is_pointwise(seed):
    grid = GridSpec(num_points=128, circumference=20 * np.pi)
    rng = np.random.default_rng(seed)
    u, v = (random_band_field(grid, -0.3, 0.3, rng) for _ in range(2))
    dens = apply_even_density(MultilinearForm.constant_form(4, 2.0), [u, v, u, v])
    want = 2 * u.samples * np.conj(v.samples) * u.samples * np.conj(v.samples)
    assert np.allclose(dens.samples, want, atol=1e-10)


def test_wide_band_is_rejected(tiny):
    u = random_band_field(tiny, -4, 4, np.random.default_rng(4))
    with pytest.raises(DomainError):
        apply_trilinear(MultilinearForm.constant_form(3), u)
    with pytest.raises(ValueError):
        apply_trilinear(MultilinearForm.constant_form(4), u)
