import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlslab.lattice import Field, GridSpec

settings.register_profile("nlslab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nlslab")

GENERIC = "1 + 0.5*cos(x1 - x3)"


@pytest.fixture
def small_grid():
    return GridSpec(num_points=256, circumference=20 * np.pi)


@pytest.fixture
def packet_grid():
    return GridSpec(num_points=1024, circumference=20 * np.pi)


def packet(grid, amp=0.3, k=0.0, width2=8.0, centre=0.0):
    x = grid.x
    s = amp * np.exp(-(x - centre) ** 2 / width2 + 1j * k * x) * (1 + 0.3 * np.exp(0.7j * x))
    return Field(grid, s)


def random_band_field(grid, lo, hi, rng, amp=1.0):
    """Random coefficients on the modes with lo <= xi <= hi."""
    modes = grid.band_modes(lo, hi)
    coef = np.zeros(grid.num_points, dtype=complex)
    coef[np.mod(modes, grid.num_points)] = amp * (rng.standard_normal(modes.size)
                                                  + 1j * rng.standard_normal(modes.size))
    return Field.from_coefficients(grid, coef)


# acceptance verdicts, printed once at the end of the session
VERDICTS: dict[int, tuple[str, bool, str]] = {}


def record(n: int, name: str, ok: bool, detail: str):
    VERDICTS[n] = (name, bool(ok), detail)
    assert ok, f"criterion {n} ({name}): {detail}"


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        name, ok, detail = VERDICTS[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d} {name}: {detail}")
