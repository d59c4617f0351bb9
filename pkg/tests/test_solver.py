import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import const_gf, random_data
from fracp import KernelSpec, Lattice, box_region, solve_dirichlet, solve_linear_p2
from fracp.errors import ValidationError
from fracp.solver import LineSearch, SolverConfig, _pow_change, p2_system

LAT = Lattice((-2.0,), (2.0,), 1 / 16)
OMEGA = box_region(LAT, [-1.0], [1.0])


def spec_for(p, seed=0, s=0.5):
    return KernelSpec(dim=1, s=s, p=p, lam=1.0, Lam=2.0, family="modulated", seed=seed)


@pytest.mark.parametrize("p", [1.3, 2.0, 4.0])
def test_constant_data_gives_constant_solution(p):
    sol = solve_dirichlet(spec_for(p), LAT, OMEGA, const_gf(LAT, 0.7))
    assert sol.converged and np.allclose(sol.u.values, 0.7, atol=1e-12)
    assert np.allclose(solve_linear_p2(spec_for(2.0), LAT, OMEGA, const_gf(LAT, 0.7)).values, 0.7, atol=1e-12)


def test_p2_system_is_spd():
    A, b, I = p2_system(spec_for(2.0, 3), LAT, OMEGA, random_data(LAT, 1))
    assert np.allclose(A, A.T, rtol=0, atol=1e-14 * np.abs(A).max())
    assert np.linalg.eigvalsh(A).min() > 0


@given(seed=st.integers(0, 10_000))
@settings(max_examples=8)
def test_p2_matches_direct_solve(seed):
    spec = spec_for(2.0, seed)
    g = random_data(LAT, seed)
    sol = solve_dirichlet(spec, LAT, OMEGA, g)
    assert sol.converged
    assert np.max(np.abs(sol.u.values - solve_linear_p2(spec, LAT, OMEGA, g).values)) <= 1e-8


def test_linear_oracle_rejects_other_p():
    with pytest.raises(ValidationError):
        solve_linear_p2(spec_for(3.0), LAT, OMEGA, const_gf(LAT, 1.0))


@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.5, 2.0, 3.0]))
@settings(max_examples=8)
def test_energy_trace_and_convergence(seed, p):
    sol = solve_dirichlet(spec_for(p, seed), LAT, OMEGA, random_data(LAT, seed))
    tr = np.array(sol.energy_trace)
    assert np.all(np.diff(tr) <= 0)
    assert sol.converged and sol.final_grad_norm <= 1e-10 * sol.grad_scale


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_uniqueness_across_initialisations(p):
    spec, g = spec_for(p, 5), random_data(LAT, 6)
    runs = [solve_dirichlet(spec, LAT, OMEGA, g, SolverConfig(init=i)).u.values for i in ("mean", "zero", "g")]
    for other in runs[1:]:
        assert np.max(np.abs(runs[0] - other)) <= 1e-7


@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.5, 2.0, 3.0]))
@settings(max_examples=8)
def test_comparison_and_maximum_principle(seed, p):
    rng = np.random.default_rng(seed)
    spec = spec_for(p, seed)
    g1 = random_data(LAT, seed, -1.0, 1.0)
    g2 = g1.with_values(g1.values + rng.uniform(0, 0.1, LAT.size) * (rng.random(LAT.size) < 0.5))
    u1 = solve_dirichlet(spec, LAT, OMEGA, g1).u.values
    u2 = solve_dirichlet(spec, LAT, OMEGA, g2).u.values
    assert np.all(u1[OMEGA.nodes] <= u2[OMEGA.nodes] + 1e-6)
    ext = np.append(g1.values[OMEGA.exterior], 0.0)
    assert np.all(u1[OMEGA.nodes] >= ext.min() - 1e-9) and np.all(u1[OMEGA.nodes] <= ext.max() + 1e-9)


@given(seed=st.integers(0, 10_000), c=st.floats(0.1, 10.0), p=st.sampled_from([1.5, 3.0]))
@settings(max_examples=6)
def test_homogeneity(seed, c, p):
    spec, g = spec_for(p, seed), random_data(LAT, seed)
    a = solve_dirichlet(spec, LAT, OMEGA, g).u.values
    b = solve_dirichlet(spec, LAT, OMEGA, g.scaled(c)).u.values
    assert np.max(np.abs(b - c * a)) <= 1e-7 * max(1.0, c)


def test_non_convergence_is_flagged():
    sol = solve_dirichlet(spec_for(3.0), LAT, OMEGA, random_data(LAT, 2), SolverConfig(max_iters=2))
    assert not sol.converged and sol.iterations == 2
    rep = sol.run_report()
    assert rep["converged"] is False and rep["config"]["max_iters"] == 2 and rep["kernel_seed"] == 0


@given(a=st.floats(-1e3, 1e3), b=st.floats(-1e3, 1e3), p=st.floats(1.1, 5.0))
def test_pow_change(a, b, p):
    got = float(_pow_change(np.array([a]), np.array([b]), p)[0])
    exact = abs(a + b) ** p - abs(a) ** p
    assert got == pytest.approx(exact, rel=1e-9, abs=1e-9 * max(abs(a), abs(b), 1.0) ** p)


def test_config_validation():
    with pytest.raises(ValidationError):
        SolverConfig(grad_tol=0.0)
    with pytest.raises(ValidationError):
        LineSearch(shrink=1.0)
    with pytest.raises(ValidationError):
        SolverConfig(preconditioner="newton")
    with pytest.raises(ValidationError):
        KernelSpec(dim=1, s=0.5, p=1.0)


def test_sharmonic_data_solve_residual_shrinks():
    from fracp import apply_operator
    from fracp import farfield as ff
    res = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        lat = Lattice((-4.0,), (4.0,), h)
        omega = box_region(lat, [0.0], [1.0])
        x = lat.coords[:, 0]
        far = ff.RadialPowerFarField(1.0, -0.5, (0.0,), halfspace=True)
        g = const_gf(lat, 0.0).with_values(np.maximum(x, 0.0) ** 0.5)
        g = type(g)(lat, g.values, far)
        spec = KernelSpec(dim=1, s=0.5, p=2.0)
        sol = solve_dirichlet(spec, lat, omega, g)
        res.append(np.max(np.abs(sol.u.values - np.maximum(x, 0.0) ** 0.5)))
        assert abs(apply_operator(spec, sol.u, int(lat.index_of([0.5])[0]))) <= 1e-8
    assert res[-1] < res[0]


def test_stall_is_reported_for_p_near_one():
    sol = solve_dirichlet(spec_for(1.05, 1), LAT, OMEGA, random_data(LAT, 1), SolverConfig(stall_window=50))
    assert not sol.converged and sol.stop_reason == "stalled" and sol.iterations < 5000
    assert sol.run_report()["stop_reason"] == "stalled"
    assert np.all(np.diff(sol.energy_trace) <= 0)


def test_stop_reasons():
    assert solve_dirichlet(spec_for(2.0), LAT, OMEGA, random_data(LAT, 3)).stop_reason == "gradient"
    short = solve_dirichlet(spec_for(3.0), LAT, OMEGA, random_data(LAT, 2), SolverConfig(max_iters=2))
    assert short.stop_reason == "max_iters"
    with pytest.raises(ValidationError):
        SolverConfig(stall_window=0)
