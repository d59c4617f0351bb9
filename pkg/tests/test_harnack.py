import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import const_gf
from fracp import Ball, GridFunction, KernelSpec, Lattice, box_region, solve_dirichlet, tail
from fracp import farfield as ff
from fracp.errors import PreconditionError, ValidationError
from fracp.harnack import (DELTA_GRID, caccioppoli_report, expansion_report, harnack_report, implied_constant,
                           inf_estimate_report, power_caccioppoli_report, sup_bound_report, sup_exponent,
                           tail_control_report, weak_harnack_bound, weak_harnack_report)
from fracp.harnack.reports import _layer_cake_mean
from fracp.lattice import cutoff

LAT = Lattice((-2.0,), (2.0,), 1 / 16)
OMEGA = box_region(LAT, [-1.0], [1.0])
X = LAT.coords[:, 0]


def spec_for(p=2.0, seed=0, s=0.5):
    return KernelSpec(dim=1, s=s, p=p, lam=1.0, Lam=2.0, family="modulated", seed=seed)


def positive_data(shift=0.0, far=1.0, scale=1.0):
    vals = scale * (1.0 + 0.6 * np.sin(3.0 * (X - shift)) + 0.3 * np.cos(5.0 * (X - shift)))
    return GridFunction(LAT, vals, ff.ConstantFarField(scale * far))


def solved(p=2.0, seed=0, far=1.0, scale=1.0):
    return solve_dirichlet(spec_for(p, seed), LAT, OMEGA, positive_data(far=far, scale=scale))


@pytest.fixture(scope="module")
def sol2():
    return solved()


def test_implied_constant_conventions():
    assert implied_constant(0.0, 0.0) == 0.0
    assert implied_constant(1.0, 0.0) == math.inf
    assert implied_constant(3.0, 2.0) == 1.5


@pytest.mark.parametrize("c", [0.3, 2.0])
def test_constant_function_gives_constant_one(c):
    u, spec = const_gf(LAT, c), spec_for()
    assert harnack_report(u, (0.0,), 0.4, 0.8, spec=spec, omega=OMEGA).implied_constant == pytest.approx(1.0)
    assert weak_harnack_report(u, (0.0,), 0.4, 0.8, 1.0, spec=spec, omega=OMEGA).implied_constant == \
        pytest.approx(1.0)
    assert inf_estimate_report(u, (0.0,), 0.4, 0.8, 0.5, spec=spec, omega=OMEGA).implied_constant == \
        pytest.approx(1.0)


def test_harnack_on_nonnegative_solution(sol2):
    rep = harnack_report(sol2, (0.0,), 0.45, 0.9, candidate_c=10.0)
    assert rep.rhs_terms["tail"] == 0.0 and rep.passed
    vals = sol2.u.values[np.abs(X) < 0.45]
    assert rep.implied_constant == pytest.approx(vals.max() / vals.min(), rel=1e-12)
    assert "classified solution" in rep.context["checked"]
    d = rep.to_dict()
    assert d["name"] == "harnack" and d["context"]["seed"] == 0 and d["pass"] is True


def test_tail_weight_exponent_is_one_at_p2_s_half():
    u = GridFunction(LAT, positive_data().values, ff.ConstantFarField(-1.0))
    spec = spec_for()
    for r in (0.2, 0.4):
        rep = harnack_report(u, (0.0,), r, 0.8, spec=spec)
        from fracp.lattice import negative_part
        full = tail(negative_part(u), (0.0,), 0.8, 0.5, 2.0).value
        assert rep.rhs_terms["tail"] == pytest.approx(r / 0.8 * full, rel=1e-12)


def test_harnack_errors(sol2):
    with pytest.raises(ValidationError):
        harnack_report(sol2, (0.0,), 0.5, 0.9)
    neg = GridFunction(LAT, positive_data().values - 2.0 * (np.abs(X - 0.25) < 0.01))
    k = int(LAT.index_of([0.25])[0])
    with pytest.raises(PreconditionError) as info:
        harnack_report(neg, (0.0,), 0.3, 0.8, spec=spec_for())
    assert info.value.node == k and f"node {k}" in str(info.value)
    with pytest.raises(PreconditionError):
        harnack_report(sol2, (0.0,), 0.6, 1.2)  # B_R leaves omega
    bumpy = sol2.u.with_values(sol2.u.values + 0.2 * OMEGA.mask * (np.arange(LAT.size) % 2))
    with pytest.raises(PreconditionError):
        harnack_report(bumpy, (0.0,), 0.4, 0.8, spec=spec_for(), omega=OMEGA)


def test_weak_harnack_bound_values():
    assert weak_harnack_bound(1, 1.5, 0.5) == pytest.approx(2.0)
    assert weak_harnack_bound(1, 2.0, 0.5) == math.inf  # sp = n: no Sobolev restriction
    assert weak_harnack_bound(1, 2.0, 0.6) == math.inf
    assert weak_harnack_bound(2, 3.0, 0.5) == pytest.approx(8.0)


def test_weak_harnack_range_and_ordering(sol2):
    low = solved(p=1.5)
    with pytest.raises(ValidationError, match=r"\(p-1\)n/\(n-sp\)"):
        weak_harnack_report(low, (0.0,), 0.45, 0.9, 2.0)
    assert weak_harnack_report(low, (0.0,), 0.45, 0.9, 1.9, 10.0).passed
    lhs = [weak_harnack_report(sol2, (0.0,), 0.45, 0.9, t, 10.0).lhs for t in (0.5, 1.0, 1.5)]
    assert lhs[0] <= lhs[1] <= lhs[2]


def test_sp_at_least_n_reports_outside_theorem_range():
    spec = KernelSpec(dim=1, s=0.6, p=2.0)
    rep = weak_harnack_report(const_gf(LAT, 1.0), (0.0,), 0.4, 0.8, 3.0, spec=spec)
    assert rep.context["in_theorem_range"] is False and rep.context["t_bound"] == math.inf


def test_caccioppoli_constant_above_level_vanishes():
    ball = Ball((0.0,), 0.6)
    phi = cutoff(LAT, ball, ball.scaled(0.5))
    rep = caccioppoli_report(const_gf(LAT, 0.7), 0.9, "plus", ball, phi, spec=spec_for(), omega=OMEGA)
    assert rep.lhs == 0.0 and rep.passed and rep.implied_constant == 0.0


@pytest.mark.parametrize("sign", ["plus", "minus"])
def test_caccioppoli_on_solution_and_scaling(sol2, sign):
    ball = Ball((0.0,), 0.6)
    phi = cutoff(LAT, ball, ball.scaled(0.5))
    k = float(np.median(sol2.u.values[np.abs(X) < 0.6]))
    rep = caccioppoli_report(sol2, k, sign, ball, phi, 10.0)
    assert rep.lhs > 0 and np.isfinite(rep.implied_constant) and rep.passed
    twice = caccioppoli_report(sol2.u.scaled(2.0), 2 * k, sign, ball, phi, 10.0, spec=spec_for(), omega=OMEGA)
    assert twice.lhs == pytest.approx(4 * rep.lhs, rel=1e-12)
    assert twice.implied_constant == pytest.approx(rep.implied_constant, rel=1e-12)


def test_caccioppoli_checks_cutoff_and_sign(sol2):
    ball = Ball((0.0,), 0.6)
    with pytest.raises(ValidationError):
        caccioppoli_report(sol2, 1.0, "up", ball, cutoff(LAT, ball, ball.scaled(0.5)))
    wide = cutoff(LAT, Ball((0.0,), 0.9), Ball((0.0,), 0.3))
    with pytest.raises(ValidationError):
        caccioppoli_report(sol2, 1.0, "plus", ball, wide)


def test_power_caccioppoli(sol2):
    ball = Ball((0.0,), 0.5)
    phi = cutoff(LAT, ball, ball.scaled(0.5))
    # constant u: w is constant, so with the model kernel (Kbar = K) lhs equals the energy term
    model = KernelSpec(dim=1, s=0.5, p=2.0)
    const = power_caccioppoli_report(const_gf(LAT, 0.5), 0.1, 1.5, ball, phi, 0.8, spec=model, omega=OMEGA)
    assert const.lhs > 0 and const.lhs == pytest.approx(const.rhs_terms["energy"], rel=1e-12)
    w = 0.6 ** 0.25
    bare = power_caccioppoli_report(const_gf(LAT, 0.0), w ** 4, 1.5, ball, phi, 0.8, spec=model, omega=OMEGA)
    assert bare.lhs == pytest.approx(const.lhs, rel=1e-12)
    rep = power_caccioppoli_report(sol2, 0.05, 1.5, ball, phi, 0.8, 10.0)
    assert rep.extras["neg_tail"] == 0.0 and np.isfinite(rep.implied_constant) and rep.passed
    for q in (1.0, 2.0):
        with pytest.raises(ValidationError):
            power_caccioppoli_report(sol2, 0.05, q, ball, phi, 0.8)
    with pytest.raises(ValidationError):
        power_caccioppoli_report(sol2, 0.0, 1.5, ball, phi, 0.8)
    with pytest.raises(ValidationError):
        power_caccioppoli_report(sol2, 0.05, 1.5, ball, phi, 0.6)


def test_sup_bound(sol2):
    assert sup_exponent(1, 2.0, 0.5) == 0.5
    assert sup_exponent(2, 3.0, 0.5) == pytest.approx(8 / 9)
    u = const_gf(LAT, 0.8)
    rep = sup_bound_report(u, (0.0,), 0.6, 1.0, spec=spec_for(), omega=OMEGA)
    assert rep.lhs == pytest.approx(0.8) and rep.rhs_terms["mean"] == pytest.approx(0.8)
    small = sup_bound_report(u, (0.0,), 0.6, 1e-3, spec=spec_for(), omega=OMEGA)
    assert small.rhs_terms["mean"] == pytest.approx(0.8 * 1e3 ** 0.5, rel=1e-12)
    neg = sup_bound_report(const_gf(LAT, -1.0), (0.0,), 0.6, 0.5, spec=spec_for(), omega=OMEGA)
    assert neg.passed and neg.implied_constant == 0.0
    for dl in (0.0, 1.5):
        with pytest.raises(ValidationError):
            sup_bound_report(sol2, (0.0,), 0.6, dl)
    assert len(DELTA_GRID) == 55 and DELTA_GRID[0] == 1e-4 and DELTA_GRID[-1] < 0.25


def test_tail_control_closed_form():
    lat = Lattice((-4.0,), (4.0,), 1 / 64)
    omega = box_region(lat, [-1.5], [1.5])
    u = const_gf(lat, 3.0)
    rep = tail_control_report(u, (0.0,), 1.0, 1.4, spec=KernelSpec(dim=1, s=0.5, p=2.0), omega=omega)
    assert rep.rhs_terms["sup"] == 3.0 and rep.lhs == pytest.approx(6.0, rel=0.01)
    assert rep.implied_constant == pytest.approx(2.0, rel=0.01)
    zero = tail_control_report(const_gf(lat, 0.0), (0.0,), 1.0, 1.4, spec=KernelSpec(dim=1, s=0.5, p=2.0))
    assert zero.lhs == 0.0 and zero.rhs_sum == 0.0 and zero.implied_constant == 0.0


def test_tail_control_rejects_supersolution_only():
    s1, s2 = solved(seed=1), solve_dirichlet(spec_for(2.0, 1), LAT, OMEGA, positive_data(0.4))
    lo = s1.u.with_values(np.minimum(s1.u.values, s2.u.values))
    with pytest.raises(PreconditionError):
        tail_control_report(lo, (0.0,), 0.4, 0.9, spec=spec_for(2.0, 1), omega=OMEGA)


@given(seed=st.integers(0, 1000), eps=st.floats(0.05, 0.95))
def test_layer_cake_matches_power_mean(seed, eps):
    v = np.random.default_rng(seed).uniform(0.0, 3.0, 40)
    direct = np.mean(v ** eps)
    assert _layer_cake_mean(v, eps) == pytest.approx(direct, rel=1e-10)


def test_inf_estimate(sol2):
    reps = [inf_estimate_report(sol2, (0.0,), 0.45, 0.9, e, 10.0) for e in (0.25, 0.75)]
    assert all(r.extras["cavalieri_agrees"] for r in reps)
    assert reps[0].lhs <= reps[1].lhs
    for e in (0.0, 1.0):
        with pytest.raises(ValidationError):
            inf_estimate_report(sol2, (0.0,), 0.45, 0.9, e)


def test_expansion_degenerate_cases():
    lat = Lattice((-4.0,), (4.0,), 1 / 16)
    omega = box_region(lat, [-3.5], [3.5])
    spec = KernelSpec(dim=1, s=0.5, p=2.0)
    rep = expansion_report(const_gf(lat, 2.0), (0.0,), 2.0, 1.0, 0.1, 2.0, spec=spec, omega=omega)
    assert all(rep.conclusion_holds) and rep.delta_fit == max(DELTA_GRID) and rep.fitted
    zero = expansion_report(const_gf(lat, 0.0), (0.0,), 0.0, 1.0, 0.1, 2.0, spec=spec, omega=omega)
    assert all(zero.conclusion_holds)
    with pytest.raises(PreconditionError, match="below sigma"):
        expansion_report(const_gf(lat, 1.0), (0.0,), 2.0, 0.5, 0.1, 2.0, spec=spec, omega=omega)
    with pytest.raises(ValidationError):
        expansion_report(const_gf(lat, 1.0), (0.0,), 1.0, 0.5, 0.2, 2.0, spec=spec, omega=omega)


def test_expansion_on_solution(sol2):
    k = float(np.median(sol2.u.values[np.abs(X) < 0.05]))
    rep = expansion_report(sol2, (0.0,), k, 0.5, 0.05, 0.9)
    assert rep.fitted and rep.delta_fit > 0 and np.isfinite(rep.C_fit)
    assert rep.to_dict()["sigma"] == 0.5


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_constants_homogeneous_and_translation_invariant(p):
    base = solved(p)
    big = solved(p, scale=2.0)
    a = harnack_report(base, (0.0,), 0.45, 0.9).implied_constant
    assert harnack_report(big, (0.0,), 0.45, 0.9).implied_constant == pytest.approx(a, rel=1e-6)
    shift = 0.5
    lat2 = Lattice((-2.0 + shift,), (2.0 + shift,), 1 / 16)
    om2 = box_region(lat2, [-1.0 + shift], [1.0 + shift])
    g2 = GridFunction(lat2, positive_data().values, ff.ConstantFarField(1.0))
    moved = solve_dirichlet(KernelSpec(dim=1, s=0.5, p=p), lat2, om2, g2)
    still = solve_dirichlet(KernelSpec(dim=1, s=0.5, p=p), LAT, OMEGA, positive_data())
    b = harnack_report(still, (0.0,), 0.45, 0.9).implied_constant
    assert harnack_report(moved, (shift,), 0.45, 0.9).implied_constant == pytest.approx(b, rel=1e-9)
