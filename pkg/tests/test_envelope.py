import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nlslab.envelope import (Envelope, admissibilize, envelope_of, interval_mass,
                             maximal_function)
from nlslab.lattice import DomainError, Field, GridSpec, make_partition


def brute_maximal(c):
    n = len(c)
    out = np.zeros(n)
    for k in range(n):
        for j in range(n):
            window = [c[l] for l in range(k - j, k + j + 1) if 0 <= l < n]
            out[k] = max(out[k], sum(window) / (2 * j + 1))
    return out


def indicator(n=17):
    v = np.zeros(n)
    v[n // 2] = 1
    return Envelope.centered(v)


envelopes = arrays(np.float64, st.integers(3, 15), elements=st.floats(0, 10))


def test_maximal_function_of_indicator():
    Mc = maximal_function(indicator())
    assert Mc[0] == 1.0
    assert Mc[1] == pytest.approx(1 / 3)
    assert Mc[2] == pytest.approx(1 / 5)


def test_maximal_function_of_constant():
    Mc = maximal_function(Envelope.centered(np.ones(21)))
    assert np.allclose(Mc.values, 1.0)  # the j = 0 window already attains 1
    assert Mc.values.max() <= 1.0 + 1e-15


@given(envelopes)
def test_maximal_function_matches_brute_force(v):
    Mc = maximal_function(Envelope(v, 0)).values
    assert np.allclose(Mc, brute_maximal(v), rtol=1e-12, atol=1e-12)
    assert np.all(Mc >= v - 1e-12)


@given(envelopes, envelopes)
def test_maximal_function_sublinear(f, g):
    n = min(f.size, g.size)
    f, g = f[:n], g[:n]
    lhs = maximal_function(Envelope(f + g, 0)).values
    rhs = maximal_function(Envelope(f, 0)).values + maximal_function(Envelope(g, 0)).values
    assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-12)


def test_admissibilize_indicator_frozen():
    c = admissibilize(indicator(), 4.0)
    # Neumann series summed with a brute-force maximal function, 40 terms
    assert c[0] == pytest.approx(1.1428571428571428, rel=1e-12)
    assert c[1] == pytest.approx(0.051066599315463215, rel=1e-10)
    assert c[8] == pytest.approx(0.009764161406826653, rel=1e-10)
    assert 1 <= c[0] <= 2
    assert c.norm() <= 2


def test_admissibilize_of_maximal_input_is_at_most_double():
    c0 = Envelope.centered(np.ones(11))
    c = admissibilize(c0, 4.0)
    assert np.all(c.values <= 2 * c0.values)


def test_admissibilize_rejects_small_constant():
    with pytest.raises(ValueError):
        admissibilize(indicator(), 1.0)


@given(envelopes)
def test_admissibilize_properties(v):
    c0 = Envelope(v, -3)
    c = admissibilize(c0, 4.0)
    assert np.all(c.values >= c0.values)
    assert c.norm() <= 2 * c0.norm() + 1e-300
    Mc = brute_maximal(c.values)
    assert np.all(Mc <= 8.0 * c.values * (1 + 1e-12) + 1e-300)


def test_envelope_of_two_packets():
    g = GridSpec(num_points=2048, circumference=64 * np.pi)
    x = g.x
    s = np.exp(-x ** 2 / 50 - 3j * x) + np.exp(-x ** 2 / 50 + 4j * x)
    u = Field(g, s)
    eps = u.norm()
    P = make_partition(8)
    c = envelope_of(u, eps, P)
    from nlslab.envelope import bin_masses
    raw = bin_masses(u, P) / eps
    assert np.all(c.values * eps >= raw * eps - 1e-15)
    assert 1 <= c.norm() <= 2
    # between the packets the envelope has the maximal-function tail
    for k in (-1, 0, 1):
        dist = min(abs(k + 3), abs(k - 4))
        assert c[k] >= raw.max() / (2 * dist + 1) / 8 * 0.999


def test_envelope_of_zero_field_is_degenerate():
    g = GridSpec(num_points=256, circumference=20 * np.pi)
    c = envelope_of(Field.zeros(g), 0.1, make_partition(4))
    assert c.degenerate and np.all(c.values == 0)


def test_interval_mass():
    c = Envelope.centered(np.arange(1.0, 8.0))
    assert interval_mass(c, 1, 1) == c[1]
    assert interval_mass(c, -3, 3) == pytest.approx(c.norm())
    assert interval_mass(c, -3, 0) ** 2 + interval_mass(c, 1, 3) ** 2 == pytest.approx(c.norm() ** 2)
    with pytest.raises(DomainError):
        interval_mass(c, 2, 1)


def test_envelope_csv_round_trip(tmp_path):
    c = admissibilize(indicator(9), 4.0)
    c.to_csv(tmp_path / "c.csv")
    back = Envelope.from_csv(tmp_path / "c.csv")
    assert np.array_equal(back.values, c.values) and back.offset == c.offset
