import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import const_gf, random_data
from fracp import GridFunction, Lattice, tail, tail_offset_d
from fracp import farfield as ff
from fracp.errors import ValidationError
from fracp.tail import tail_weight

LAT = Lattice((-4.0,), (4.0,), 1 / 32)


def test_zero_function_has_zero_tail():
    t = tail(const_gf(LAT, 0.0), (0.0,), 1.0, 0.5, 2.0)
    assert t.value == 0.0 and t.grid_part == 0.0 and t.farfield_part == 0.0


@pytest.mark.parametrize("x0", [0.0, 0.3, -0.6])
def test_constant_closed_form_1d(x0):
    t = tail(const_gf(Lattice((-4.0,), (4.0,), 1 / 64), 1.0), (x0,), 1.0, 0.5, 2.0)
    assert t.value == pytest.approx(2.0, rel=0.01)


@pytest.mark.parametrize("s,p", [(0.5, 3.0), (0.3, 1.5), (0.8, 2.5)])
def test_constant_closed_form_other_exponents(s, p):
    # int_{|y|>R} |y|^(-1-sp) dy = 2 R^(-sp) / (sp), so the tail of 1 is (2/(sp))^(1/(p-1))
    t = tail(const_gf(Lattice((-4.0,), (4.0,), 1 / 64), 1.0), (0.3,), 1.0, s, p)
    assert t.value == pytest.approx((2 / (s * p)) ** (1 / (p - 1)), rel=0.01)


def test_constant_closed_form_2d():
    lat = Lattice((-2.0, -2.0), (2.0, 2.0), 1 / 16)
    t = tail(const_gf(lat, 1.0), (0.3, -0.2), 0.7, 0.5, 2.0)
    assert t.value == pytest.approx(2 * math.pi, rel=0.01)


def test_parts_and_invariant():
    v = random_data(LAT, 3)
    v = GridFunction(LAT, v.values, ff.ConstantFarField(0.5))
    t = tail(v, (0.2,), 0.9, 0.6, 2.5)
    assert t.grid_part >= 0 and t.farfield_part > 0
    assert t.value == pytest.approx((0.9 ** (0.6 * 2.5) * (t.grid_part + t.farfield_part)) ** (1 / 1.5), rel=1e-14)
    d = t.to_dict()
    assert d["R"] == 0.9 and d["x0"] == [0.2] and d["n"] == 1


def test_far_field_part_is_the_radial_integral():
    # beyond the cell box [-4-h/2, 4+h/2] the constant 1 contributes 2 b^(-sp)/(sp) for x0 = 0
    t = tail(const_gf(LAT, 1.0), (0.0,), 1.0, 0.5, 2.0)
    b = 4 + LAT.h / 2
    assert t.farfield_part == pytest.approx(2 * b ** -1.0, rel=1e-10)


@given(seed=st.integers(0, 1000), c=st.floats(-5, 5), p=st.floats(1.2, 4.0))
def test_homogeneity(seed, c, p):
    v = random_data(LAT, seed)
    v = GridFunction(LAT, v.values, ff.ConstantFarField(0.4))
    base = tail(v, (0.1,), 1.2, 0.5, p).value
    assert tail(v.scaled(c), (0.1,), 1.2, 0.5, p).value == pytest.approx(abs(c) * base, rel=1e-9, abs=1e-300)


def test_tiny_and_huge_data_scale_exactly():
    v = GridFunction(LAT, random_data(LAT, 0).values, ff.ConstantFarField(0.4))
    base = tail(v, (0.1,), 1.2, 0.5, 3.0).value
    for c in (6.863782599703776e-202, 1e250):
        assert tail(v.scaled(c), (0.1,), 1.2, 0.5, 3.0).value == pytest.approx(c * base, rel=1e-12)


@given(seed=st.integers(0, 1000), p=st.floats(1.2, 4.0), c1=st.floats(0, 1), c2=st.floats(0, 1))
def test_monotone_in_absolute_value(seed, p, c1, c2):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, LAT.size)
    b = np.sign(rng.uniform(-1, 1, LAT.size)) * (np.abs(a) + rng.uniform(0, 0.5, LAT.size))
    lo, hi = sorted((c1, c2))
    t1 = tail(GridFunction(LAT, a, ff.ConstantFarField(lo)), (0.0,), 1.0, 0.5, p).value
    t2 = tail(GridFunction(LAT, b, ff.ConstantFarField(-hi)), (0.0,), 1.0, 0.5, p).value
    assert t1 <= t2 * (1 + 1e-12)


@given(seed=st.integers(0, 1000), R1=st.floats(0.2, 3.0), R2=st.floats(0.2, 3.0))
def test_raw_integral_nonincreasing_in_radius(seed, R1, R2):
    v = GridFunction(LAT, random_data(LAT, seed).values, ff.ConstantFarField(0.3))
    lo, hi = sorted((R1, R2))
    assert tail(v, (0.0,), hi, 0.5, 2.0).integral <= tail(v, (0.0,), lo, 0.5, 2.0).integral * (1 + 1e-12)


def test_refinement_stability():
    a = tail(const_gf(Lattice((-4.0,), (4.0,), 1 / 32), 1.0), (0.0,), 1.0, 0.5, 2.0).value
    b = tail(const_gf(Lattice((-4.0,), (4.0,), 1 / 64), 1.0), (0.0,), 1.0, 0.5, 2.0).value
    assert abs(a - b) <= 0.01 * b


def test_strict_exclusion_on_the_sphere():
    lat = Lattice((-2.0,), (2.0,), 0.5)
    v = GridFunction(lat, np.where(np.abs(lat.coords[:, 0]) == 1.0, 7.0, 0.0))
    assert tail(v, (0.0,), 1.0, 0.5, 2.0).value == 0.0


def test_radial_far_field_matches_quadrature():
    from scipy.integrate import quad
    far = ff.RadialPowerFarField(1.0, -0.25, (0.0,), halfspace=True)
    v = GridFunction(LAT, np.maximum(LAT.coords[:, 0], 0.0) ** 0.25, far)
    t = tail(v, (0.0,), 1.0, 0.5, 2.0)
    b = 4 + LAT.h / 2
    exact = quad(lambda y: y ** 0.25 * y ** -2.0, b, np.inf, epsrel=1e-12)[0]
    assert t.farfield_part == pytest.approx(exact, rel=1e-8)


def test_errors():
    with pytest.raises(ValidationError):
        tail(const_gf(LAT, 1.0), (0.0,), 0.0, 0.5, 2.0)
    with pytest.raises(ValidationError):
        tail(const_gf(LAT, 1.0), (0.0, 0.0), 1.0, 0.5, 2.0)
    with pytest.raises(ValidationError):
        tail_offset_d(const_gf(LAT, -1.0), (0.0,), 1.0, 1.0, 0.5, 2.0)


def test_offset_of_nonnegative_function_is_zero():
    u = GridFunction(LAT, np.abs(random_data(LAT, 2).values), ff.ConstantFarField(1.0))
    assert tail_offset_d(u, (0.0,), 0.5, 1.0, 0.5, 2.0) == 0.0


def test_offset_doubles_with_negative_far_field_at_p2():
    vals = np.abs(random_data(LAT, 4).values)
    d1 = tail_offset_d(GridFunction(LAT, vals, ff.ConstantFarField(-1.0)), (0.0,), 0.5, 1.0, 0.5, 2.0)
    d2 = tail_offset_d(GridFunction(LAT, vals, ff.ConstantFarField(-2.0)), (0.0,), 0.5, 1.0, 0.5, 2.0)
    assert d1 > 0 and d2 == pytest.approx(2 * d1, rel=1e-12)


def test_offset_tends_to_half_tail_as_r_approaches_R():
    u = GridFunction(LAT, random_data(LAT, 6).values, ff.ConstantFarField(-0.5))
    from fracp.lattice import negative_part
    half = 0.5 * tail(negative_part(u), (0.0,), 1.0, 0.5, 2.0).value
    for e in (1e-1, 1e-2, 1e-3):
        # sp/(p-1) = 1 here, so the weight is exactly r/R
        assert half - tail_offset_d(u, (0.0,), 1.0 - e, 1.0, 0.5, 2.0) == pytest.approx(e * half, rel=1e-9)
    assert tail_weight(0.5, 1.0, 0.5, 2.0) == pytest.approx(0.5)
