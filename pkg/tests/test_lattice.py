import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracp import Ball, GridFunction, Lattice
from fracp.errors import ValidationError
from fracp.lattice import (ball_nodes, box_region, constant_function, cutoff, extremum, level_set, omega_region,
                           set_measure, t_mean, truncation)


def test_lattice_shape_and_errors():
    lat = Lattice((-2.0,), (2.0,), 0.5)
    assert lat.shape == (9,) and lat.size == 9
    with pytest.raises(ValidationError):
        Lattice((0.0,), (1.0,), 0.3)
    with pytest.raises(ValidationError):
        Lattice((0.0,), (1.0,), -1.0)


def test_ball_nodes_examples():
    lat = Lattice((-2.0,), (2.0,), 1.0)
    assert lat.coords[ball_nodes(lat, Ball((0.0,), 1.5)), 0].tolist() == [-1.0, 0.0, 1.0]
    assert ball_nodes(lat, Ball((1.0,), 0.2)).tolist() == [int(lat.index_of([1.0])[0])]


@given(r=st.floats(0.05, 1.5), cx=st.floats(-0.5, 0.5), cy=st.floats(-0.5, 0.5))
def test_ball_nodes_2d_brute_force(r, cx, cy):
    lat = Lattice((-1.0, -1.0), (1.0, 1.0), 0.125)
    fast = set(ball_nodes(lat, Ball((cx, cy), r)).tolist())
    slow = {i for i, (a, b) in enumerate(lat.coords) if (a - cx) ** 2 + (b - cy) ** 2 < r * r}
    assert fast == slow


def test_set_measure():
    lat = Lattice((0.0,), (2.0,), 0.5)
    assert set_measure(lat, []) == 0.0
    assert set_measure(lat, [0, 1, 2]) == 1.5
    lat2 = Lattice((-1.0, 0.0), (1.0, 3.0), 0.25)
    vol = 2.0 * 3.0
    assert abs(set_measure(lat2, lat2.all_nodes()) - vol) <= (2 + 3) * 0.25 * 2 + 0.25 ** 2 * 4


def test_extremum():
    lat = Lattice((0.0,), (2.0,), 1.0)
    u = GridFunction(lat, [1.0, -2.0, 5.0])
    assert extremum(u, lat.all_nodes(), "sup") == 5.0
    assert extremum(u, lat.all_nodes(), "inf") == -2.0
    c = constant_function(lat, 3.0)
    assert extremum(c, [0, 2], "sup") == extremum(c, [0, 2], "inf") == 3.0


@given(seed=st.integers(0, 1000), r=st.floats(0.1, 1.0), dr=st.floats(0.0, 1.0))
def test_extremum_monotone_in_radius(seed, r, dr):
    lat = Lattice((-2.0,), (2.0,), 0.125)
    u = GridFunction(lat, np.random.default_rng(seed).normal(size=lat.size))
    small, big = ball_nodes(lat, Ball((0.0,), r)), ball_nodes(lat, Ball((0.0,), r + dr))
    assert extremum(u, small, "sup") <= extremum(u, big, "sup")
    assert extremum(u, small, "inf") >= extremum(u, big, "inf")


def test_t_mean_examples():
    lat = Lattice((0.0,), (1.0,), 1.0)
    ball = Ball((0.5,), 1.0)
    assert t_mean(GridFunction(lat, [1.0, 2.0]), ball, 1.0) == pytest.approx(1.5)
    assert t_mean(GridFunction(lat, [1.0, 4.0]), ball, 0.5) == pytest.approx(2.25)
    assert t_mean(constant_function(lat, 0.7), ball, 3.3) == pytest.approx(0.7)
    with pytest.raises(ValidationError):
        t_mean(GridFunction(lat, [-1.0, 4.0]), ball, 1.0)


@given(seed=st.integers(0, 1000), t1=st.floats(0.1, 3.0), t2=st.floats(0.1, 3.0))
def test_t_mean_monotone(seed, t1, t2):
    lat = Lattice((-1.0,), (1.0,), 0.125)
    u = GridFunction(lat, np.random.default_rng(seed).uniform(0.0, 2.0, lat.size))
    ball = Ball((0.0,), 0.8)
    lo, hi = sorted((t1, t2))
    assert t_mean(u, ball, lo) <= t_mean(u, ball, hi) * (1 + 1e-12)


@given(seed=st.integers(0, 1000), k=st.floats(-1, 1))
def test_level_sets_partition(seed, k):
    lat = Lattice((-1.0,), (1.0,), 0.125)
    u = GridFunction(lat, np.random.default_rng(seed).normal(size=lat.size))
    nodes = lat.all_nodes()
    a, b = level_set(u, nodes, k, ">="), level_set(u, nodes, k, "<")
    assert np.intersect1d(a, b).size == 0 and np.union1d(a, b).tolist() == nodes.tolist()


def test_level_set_examples():
    lat = Lattice((0.0,), (1.0,), 0.25)
    assert level_set(constant_function(lat, 0.0), lat.all_nodes(), 1.0, ">=").size == 0
    assert level_set(constant_function(lat, 2.0), lat.all_nodes(), 1.0, ">=").size == lat.size


@given(seed=st.integers(0, 1000), k=st.floats(-2, 2))
def test_truncation_identity(seed, k):
    lat = Lattice((-1.0,), (1.0,), 0.125)
    u = GridFunction(lat, np.random.default_rng(seed).normal(size=lat.size))
    wp, wm = truncation(u, k, "plus"), truncation(u, k, "minus")
    assert np.allclose(k + wp.values - wm.values, u.values, atol=1e-14)
    assert np.all(wp.values >= 0) and np.all(wm.values >= 0)


def test_truncation_examples():
    lat = Lattice((0.0,), (1.0,), 0.5)
    c = constant_function(lat, 3.0)
    assert np.all(truncation(c, 3.0, "plus").values == 0) and np.all(truncation(c, 3.0, "minus").values == 0)
    u = GridFunction(lat, [5.0, 5.0, 5.0])
    assert truncation(u, 3.0, "plus").values[0] == 2.0 and truncation(u, 3.0, "minus").values[0] == 0.0


@given(rs=st.floats(0.3, 1.5), frac=st.floats(0.1, 0.9))
def test_cutoff_slope(rs, frac):
    lat = Lattice((-2.0,), (2.0,), 1 / 16)
    rp = frac * rs
    phi = cutoff(lat, Ball((0.0,), rs), Ball((0.0,), rp))
    assert phi.values[lat.index_of([0.0])[0]] == 1.0
    x = lat.coords[:, 0]
    assert np.all(phi.values[np.abs(x) >= rs] == 0.0)
    slope = np.max(np.abs(np.diff(phi.values))) / lat.h
    assert slope <= (1 + 2 * lat.h / (rs - rp)) / (rs - rp) + 1e-12


def test_omega_needs_collar():
    lat = Lattice((-1.0,), (1.0,), 0.25)
    with pytest.raises(ValidationError):
        omega_region(box_region(lat, [-2.0], [0.0]))
    with pytest.raises(ValidationError):
        omega_region(box_region(lat, [0.01], [0.02]))
    assert omega_region(box_region(lat, [-0.5], [0.5])).nodes.size == 3
