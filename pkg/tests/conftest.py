"""Shared fixtures and independent oracles for the test suite."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fracp import Lattice, box_region
from fracp import farfield as ff
from fracp.lattice import GridFunction

settings.register_profile("ci", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("ci")

ACCEPTANCE_LINES: list[str] = []

M64 = (1 << 64) - 1


def splitmix_py(z: int) -> int:
    """Reference splitmix64 finaliser on Python ints."""
    z = (z + 0x9E3779B97F4A7C15) & M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return z ^ (z >> 31)


def hash_uniform_py(seed: int, ix: tuple[int, ...], iy: tuple[int, ...]) -> float:
    """Scalar re-implementation of the modulated-kernel coefficient hash."""
    h = splitmix_py(seed & M64)
    for c in ix:
        h = splitmix_py(h ^ (int(c) & M64))
    for c in iy:
        h = splitmix_py(h ^ (int(c) & M64))
    return (h >> 11) * 2.0**-53


def model_operator_py(lat: Lattice, u: np.ndarray, i: int, s: float, p: float, far_weight: float,
                      far_value: float) -> float:
    """Plain double loop for L u(x_i) with a constant far field (1D or 2D model kernel)."""
    X = lat.coords
    acc = 0.0
    for j in range(lat.size):
        if j == i:
            continue
        d = float(np.sqrt(np.sum((X[i] - X[j]) ** 2)))
        diff = u[i] - u[j]
        acc += 2 * d ** (-(lat.dim + s * p)) * np.sign(diff) * abs(diff) ** (p - 1)
    farterm = far_weight * np.sign(u[i] - far_value) * abs(u[i] - far_value) ** (p - 1)
    return 0.5 * lat.cell_volume * acc + farterm


def acceptance_line(n: int, ok: bool, detail: str) -> str:
    line = f"ACCEPTANCE {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def lat1():
    return Lattice((-2.0,), (2.0,), 0.125)


@pytest.fixture
def omega1(lat1):
    return box_region(lat1, [-1.0], [1.0])


def const_gf(lat: Lattice, c: float) -> GridFunction:
    return GridFunction(lat, np.full(lat.size, float(c)), ff.affine(ff.ZeroFarField(), 1.0, c))


def random_data(lat: Lattice, seed: int, low: float = -1.0, high: float = 1.0) -> GridFunction:
    rng = np.random.default_rng(seed)
    return GridFunction(lat, rng.uniform(low, high, lat.size), ff.ZeroFarField())
