import json

import numpy as np
import pytest

from nlslab.envelope import Envelope
from nlslab.lattice import DomainError, Field, GridSpec, make_partition, spatial_partition
from nlslab.metrics import (NormReport, bilinear_density, global_bounds, norms,
                            scaling_study, separation_profile, time_weights, x_norm)
from nlslab.solver import SolverConfig, simulate
from nlslab.symbolic import parse_symbol

A = 0.1


@pytest.fixture(scope="module")
def grid():
    return GridSpec(num_points=256, circumference=20 * np.pi)


@pytest.fixture(scope="module")
def two_modes(grid):
    """Linear flow of A(1 + e^{2ix}): one plane wave in bin 0 and one in bin 2."""
    u0 = Field(grid, A * (1 + np.exp(2j * grid.x)))
    cfg = SolverConfig(dt=0.01, horizon=1.0, snapshot_every=0.05, band=(-3, 3))
    return simulate(u0, parse_symbol("0"), cfg)


def test_time_weights():
    t = np.linspace(0, 1, 11)
    w = time_weights(t)
    assert w.sum() == pytest.approx(1.0) and w[0] == pytest.approx(0.05)
    with pytest.raises(DomainError):
        time_weights(np.array([0.0, 0.5]))
    with pytest.raises(DomainError):
        time_weights(np.array([0.0]))


def test_bilinear_density_of_plane_waves(grid):
    u1, u2 = np.exp(1j * grid.x), np.exp(2j * grid.x)
    d = bilinear_density(u1, u2, grid, 0.3)
    assert np.allclose(d, -1j * np.exp(-1j * grid.x - 0.6j), atol=1e-12)


def test_norms_of_plane_waves(two_modes, grid):
    T, L = 1.0, grid.circumference
    rep = norms(two_modes, make_partition(3), pairs=[(0, 0), (0, 2)], x0_list=[0.0, 1.0])
    assert rep.linf_l2[0] == pytest.approx(A * np.sqrt(L), rel=1e-12)
    assert rep.linf_l2[1] < 1e-12
    assert rep.l6[2] == pytest.approx((T * L * A ** 6) ** (1 / 6), rel=1e-12)
    assert rep.bilinear[(0, 0, 0.0)] < 1e-12
    for x0 in (0.0, 1.0):
        assert rep.bilinear[(0, 2, x0)] == pytest.approx(2 * A * A * np.sqrt(T * L), rel=1e-12)
    # constant densities fill every tube equally, moving or not
    assert rep.x_bins[0] == pytest.approx(rep.x_bins[2], rel=1e-9)
    assert rep.ratios == {}


def test_ratio_tables(two_modes, tmp_path):
    env = Envelope.centered([0.0, 0.5, 1.0, 0.5, 1.0, 0.5, 0.0])
    rep = norms(two_modes, make_partition(3), env, eps=0.5, pairs=[(0, 2)], x0_list=[0.0],
                with_x=False)
    assert rep.excluded == [-3, 3]
    assert rep.ratios["uk-ee"][0] == pytest.approx(rep.linf_l2[0] / 0.25)
    assert rep.ratios["uab-bi"][(0, 2, 0.0)] == pytest.approx(
        rep.bilinear[(0, 2, 0.0)] / (0.0625 * 5 ** 0.25))
    s = rep.summary()
    assert s["uk-se"]["finite"] and s["uk-se"]["entries"] == 5
    paths = rep.write(tmp_path)
    assert json.loads(paths[-1].read_text())["eps"] == 0.5
    assert (tmp_path / "norms_pairs.csv").read_text().startswith("k1,k2,x0,bilinear,ratio")


def test_x_norm_shift_invariance(grid):
    _, h = spatial_partition(grid)
    cfg = SolverConfig(dt=0.01, horizon=1.0, snapshot_every=0.1, band=(-2, 2))
    c = parse_symbol("0")
    base = Field(grid, 0.2 * np.exp(-grid.x ** 2 / 4))
    values = {}
    for name, x0 in (("0", 0.0), ("h", h), ("3h", 3 * h), ("h/2", h / 2)):
        traj = simulate(base.shifted(x0), c, cfg)
        values[name] = x_norm(traj, make_partition(2))[0]
    assert values["h"] == pytest.approx(values["0"], rel=1e-9)
    assert values["3h"] == pytest.approx(values["0"], rel=1e-9)
    assert values["h/2"] != pytest.approx(values["0"], rel=1e-5)
    with pytest.raises(DomainError):
        x_norm(traj, make_partition(2), window=(0.5, 1.5))


def test_global_bounds(two_modes, grid):
    gb = global_bounds(two_modes, eps=1.0, x0_list=[0.0])
    assert gb.linf_l2 == pytest.approx(A * np.sqrt(2 * grid.circumference), rel=1e-12)
    # d_x(u conj u) = 2i A^2 (e^{2ix - 4it} - c.c.) weighted by (1 + 4)^{-1/4}
    want = np.sqrt(8 * A ** 4 * grid.circumference) * 5 ** -0.25
    assert gb.bilinear[0.0] == pytest.approx(want, rel=1e-12)
    assert set(gb.summary()) == {"eps", "main-L2", "main-Str", "main-bi"}


def test_separation_profile():
    def report(table):
        return NormReport([], 0.1, {}, {}, {}, None, {}, None, {"uab-bi": table})

    r1 = report({(0, 4, 0.0): 1.0, (0, 8, 0.0): 2.0, (0, 16, 0.0): 3.0})
    r2 = report({(1, 5, 0.0): 1.5, (0, 8, 1.0): 50.0})
    prof = separation_profile([r1, r2], [4, 8, 16])
    assert prof["ratios"] == {4: 1.5, 8: 2.0, 16: 3.0}
    assert prof["spread"] == pytest.approx(2.0)
    assert prof["power"] == pytest.approx(np.log(2) / np.log(4))
    assert prof["monotone_growth"]
    slight = separation_profile([report({(0, 4, 0.0): 1.0, (0, 8, 0.0): 1.01,
                                         (0, 16, 0.0): 1.02})], [4, 8, 16])
    assert not slight["monotone_growth"]
    flat = separation_profile([report({(0, 4, 0.0): 2.0, (0, 8, 0.0): 1.0})], [4, 8])
    assert not flat["monotone_growth"]


def test_scaling_needs_three_rungs():
    with pytest.raises(ValueError):
        scaling_study(parse_symbol("1"), lambda e: None, [0.1, 0.2], SolverConfig())
