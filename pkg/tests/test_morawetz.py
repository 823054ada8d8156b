import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from conftest import GENERIC, packet, random_band_field
from nlslab.conservation import CorrectionEngine
from nlslab.forms import DensityField
from nlslab.lattice import DomainError, GridSpec, Localizer
from nlslab.morawetz import (diagonal_trace_check, half_plane_pairing, interaction_diagonal,
                             j4_positivity, j4_symbol, j4_symbol_side)
from nlslab.solver import SolverConfig, simulate
from nlslab.symbolic import parse_symbol


@pytest.fixture(scope="module")
def grid():
    return GridSpec(num_points=512, circumference=20 * np.pi)


def gauss(grid, centre, w):
    return DensityField(grid, np.exp(-(grid.x - centre) ** 2 / w ** 2) + 0j)


@pytest.mark.parametrize("rule, tol", [("spectral", 1e-12), ("trapezoid", 1e-3)])
def test_half_plane_pairing_of_gaussians(grid, rule, tol):
    F, G = gauss(grid, 1.0, 2.0), gauss(grid, -0.5, 1.5)
    # int F(x) int_{-inf}^x G = int F(x) (sqrt(pi) 1.5 / 2)(1 + erf((x + 0.5) / 1.5))
    x = np.linspace(-40, 40, 200_001)
    inner = np.sqrt(np.pi) * 1.5 / 2 * (1 + erf((x + 0.5) / 1.5))
    exact = np.trapezoid(np.exp(-(x - 1) ** 2 / 4) * inner, x)
    assert half_plane_pairing(F, G, rule).real == pytest.approx(exact, rel=tol)


def test_pairing_guard(grid):
    wide = gauss(grid, 0.0, 20.0)
    with pytest.raises(DomainError):
        half_plane_pairing(wide, gauss(grid, 0.0, 1.0))
    with pytest.raises(ValueError):
        half_plane_pairing(gauss(grid, 0, 1), gauss(grid, 0, 1), rule="midpoint")


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.floats(-1, 1))
def test_j4_quadratic_identity(seed, xi0):
    # the symbol side of J4 is the positive square 4 int |d_x(A0 u conj(A0 v))|^2
    grid = GridSpec(num_points=256, circumference=20 * np.pi)
    rng = np.random.default_rng(seed)
    u, v = (random_band_field(grid, -2, 2, rng, 0.1) for _ in range(2))
    a = Localizer.from_partition(1)
    pos = j4_positivity(u, v, a)
    assert pos >= 0
    assert j4_symbol_side(u, v, a, xi0=xi0) == pytest.approx(pos, rel=1e-10, abs=1e-18)


def test_j4_symbol():
    assert j4_symbol(3.0, 1.0, 0.0, 1.0) == 8.0
    assert j4_symbol(1.0, 2.0, 2.0, 5.0) == 0.0


@pytest.mark.parametrize("k", [-1, 0, 2])
def test_diagonal_trace(k):
    a = Localizer.from_partition(k)
    assert diagonal_trace_check(parse_symbol(GENERIC), a) < 1e-6
    assert diagonal_trace_check(parse_symbol("1"), a) < 1e-6


@pytest.fixture(scope="module")
def report(grid):
    c = parse_symbol(GENERIC)
    u0 = packet(grid, amp=0.4)
    cfg = SolverConfig(dt=0.002, horizon=0.02, snapshot_every=0.01, band=(-1.5, 1.5),
                       dense=True, enforce_guard=False)
    traj = simulate(u0, c, cfg)
    a = Localizer.from_partition(0)
    eng = CorrectionEngine.for_trajectory(traj, c, a)
    return interaction_diagonal(traj, a, 0.0, 2.0, c, times=[0.008, 0.01, 0.012], engine=eng,
                                check_xi0=True)


def test_interaction_report(report):
    assert report.xi0_deviation < 1e-9
    assert np.all(report.J4 >= -1e-12 * report.scale)
    # the compact localizer leaves spatial tails of ~1e-5 at the window edge
    assert report.relative_residual < 2e-3
    s = report.summary()
    assert s["samples"] == 3 and set(s["integrals"]) == {"J4", "J6", "J8", "K8"}


def test_interaction_needs_dense_window(grid):
    c = parse_symbol("1")
    traj = simulate(packet(grid), c, SolverConfig(dt=0.01, horizon=0.02, snapshot_every=0.01,
                                                  band=(-1.5, 1.5), enforce_guard=False))
    with pytest.raises(DomainError):
        interaction_diagonal(traj, Localizer.from_partition(0), c=c)
