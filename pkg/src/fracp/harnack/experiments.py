"""Pipelines that solve and then report: single runs, constant sweeps, the counterexample."""
from __future__ import annotations

import copy
import math
import statistics
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from ..config import ExperimentConfig, ReportConfig
from ..errors import FracpError, PreconditionError, ValidationError
from ..lattice import Ball, GridFunction, ball_nodes, cutoff, extremum
from ..parallel import map_items
from ..solver import SolveResult, solve_dirichlet
from ..tail import tail_offset_d
from . import reports as rp


@dataclass
class Problem:
    cfg: ExperimentConfig
    spec: object
    lattice: object
    omega: object
    g: GridFunction


def build_problem(cfg: ExperimentConfig) -> Problem:
    lat = cfg.lattice_obj()
    return Problem(cfg, cfg.kernel_spec(lat), lat, cfg.omega(lat), cfg.exterior_data(lat))


def solve_problem(prob: Problem) -> SolveResult:
    return solve_dirichlet(prob.spec, prob.lattice, prob.omega, prob.g, prob.cfg.solver_config())


# -- report dispatch -------------------------------------------------------------

def _need(rc: ReportConfig, *names):
    missing = [n for n in names if getattr(rc, n) is None]
    if missing:
        raise ValidationError(f"report block is missing {', '.join(missing)}")


def _values(v, default=None) -> list:
    if v is None:
        return [default] if default is not None else []
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _levels_k(u: GridFunction, nodes: np.ndarray, k) -> list[float]:
    vals = u.values[nodes]
    if k == "median":
        return [float(np.median(vals))]
    if isinstance(k, dict) and "quantiles" in k:
        m = int(k["quantiles"])
        return [float(np.quantile(vals, (j + 0.5) / m)) for j in range(m)]
    return [float(x) for x in _values(k)]


def _auto_d(sol: SolveResult, x0, r: float, R: float) -> float:
    """tail_offset_d when positive, else 5% of sup over B_R (both 1-homogeneous in u)."""
    spec = sol.spec
    d = tail_offset_d(sol.u, x0, r, R, spec.s, spec.p)
    if d > 0:
        return d
    top = extremum(sol.u, ball_nodes(sol.u.lattice, Ball(x0, R)), "sup")
    return 0.05 * top if top > 0 else 1e-12


def evaluate_reports(name: str, sol: SolveResult, rc: ReportConfig) -> list:
    """Run report ``name`` with parameters from the report block; one object per parameter value."""
    c = rc.candidate_c
    x0 = rc.x0
    if name == "harnack":
        _need(rc, "x0", "r", "R")
        return [rp.harnack_report(sol, x0, rc.r, rc.R, c)]
    if name == "weak-harnack":
        _need(rc, "x0", "r", "R", "t")
        return [rp.weak_harnack_report(sol, x0, rc.r, rc.R, float(t), c) for t in _values(rc.t)]
    if name == "caccioppoli":
        _need(rc, "x0", "r", "k")
        ball = Ball(tuple(x0), rc.r)
        phi = cutoff(sol.u.lattice, ball, ball.scaled(rc.plateau))
        signs = ["plus", "minus"] if rc.sign == "both" else [rc.sign]
        ks = _levels_k(sol.u, ball_nodes(sol.u.lattice, ball), rc.k)
        return [rp.caccioppoli_report(sol, k, sg, ball, phi, c) for sg in signs for k in ks]
    if name == "power-caccioppoli":
        _need(rc, "x0", "r", "R")
        ball = Ball(tuple(x0), rc.r)
        phi = cutoff(sol.u.lattice, ball, ball.scaled(rc.plateau))
        d = _auto_d(sol, x0, rc.r, rc.R) if rc.d == "auto" else float(rc.d)
        qs = _values(rc.q, 0.5 * (1 + sol.spec.p))
        return [rp.power_caccioppoli_report(sol, d, float(q), ball, phi, rc.R, c) for q in qs]
    if name == "sup-bound":
        _need(rc, "x0", "r", "delta")
        deltas = rp.DELTA_GRID if rc.delta == "sweep" else _values(rc.delta)
        return [rp.sup_bound_report(sol, x0, rc.r, float(dl), c) for dl in deltas]
    if name == "tail-control":
        _need(rc, "x0", "r", "R")
        return [rp.tail_control_report(sol, x0, rc.r, rc.R, c)]
    if name == "inf-estimate":
        _need(rc, "x0", "r", "R", "eps")
        return [rp.inf_estimate_report(sol, x0, rc.r, rc.R, float(e), c) for e in _values(rc.eps)]
    if name == "expansion":
        _need(rc, "x0", "r", "R", "k", "sigma")
        k = rc.k
        if k == "median":
            k = _levels_k(sol.u, ball_nodes(sol.u.lattice, Ball(tuple(x0), rc.r)), "median")[0]
        return [rp.expansion_report(sol, x0, float(k), rc.sigma, rc.r, rc.R)]
    raise ValidationError(f"unknown report {name!r}")


def headline_constant(reports: list) -> float:
    """The largest implied constant among a run's reports (C_fit for expansion reports)."""
    vals = [r.C_fit if isinstance(r, rp.ExpansionReport) else r.implied_constant for r in reports]
    return max(vals) if vals else math.nan


# -- constant sweep ----------------------------------------------------------------

SWEEP_COLUMNS = ["case", "family", "seed", "p", "s", "h", "report", "m", "implied_constant", "classical_ratio",
                 "lhs", "rhs_sum", "passed", "converged", "iterations", "error"]


@dataclass
class SweepSummary:
    rows: list[dict]
    per_mesh: list[dict]
    growth: list[float]
    unstable: bool
    n_failed: int

    def to_dict(self) -> dict:
        return {"per_mesh": self.per_mesh, "growth": self.growth, "unstable": self.unstable,
                "n_failed": self.n_failed, "n_cases": len(self.rows)}


def sweep_cases(cfg: ExperimentConfig) -> list[dict]:
    sw = cfg.sweep
    hs = sw.h or [cfg.lattice.h]
    ps = sw.p or [cfg.kernel.p]
    ss = sw.s or [cfg.kernel.s]
    cases = []
    for h in hs:
        for p in ps:
            for s in ss:
                for seed in sw.seeds:
                    cases.append({"case": len(cases), "seed": int(seed), "p": float(p), "s": float(s),
                                  "h": float(h)})
    return cases


def _case_config(cfg: ExperimentConfig, case: dict) -> ExperimentConfig:
    c = copy.deepcopy(cfg)
    c.kernel.seed, c.kernel.p, c.kernel.s = case["seed"], case["p"], case["s"]
    c.lattice.h = case["h"]
    c.subcommand = cfg.sweep.report
    return c


def _run_case(cfg: ExperimentConfig, case: dict) -> list[dict]:
    base = {"family": cfg.sweep.family, "report": cfg.sweep.report, **case}
    ccfg = _case_config(cfg, case)
    try:
        if cfg.sweep.family == "counterexample":
            res = counterexample_run(ccfg.counterexample.m, ccfg)
            return [{**base, "m": row["m"], "implied_constant": row["implied_constant"],
                     "classical_ratio": row["classical_ratio"], "lhs": row["sup"], "rhs_sum": row["rhs_sum"],
                     "passed": row["passed"], "converged": row["converged"], "iterations": row["iterations"],
                     "error": row.get("error", "")} for row in res.rows]
        prob = build_problem(ccfg)
        sol = solve_problem(prob)
        reps = evaluate_reports(cfg.sweep.report, sol, ccfg.report)
        first = reps[0]
        lhs = getattr(first, "lhs", math.nan)
        rsum = getattr(first, "rhs_sum", math.nan)
        return [{**base, "implied_constant": headline_constant(reps), "lhs": lhs, "rhs_sum": rsum,
                 "passed": all(getattr(r, "passed", True) for r in reps), "converged": sol.converged,
                 "iterations": sol.iterations, "error": ""}]
    except FracpError as exc:
        return [{**base, "implied_constant": math.nan, "passed": False, "error": f"{type(exc).__name__}: {exc}"}]


def summarize(rows: list[dict]) -> SweepSummary:
    per_mesh = []
    for h in sorted({r["h"] for r in rows}, reverse=True):
        vals = [r["implied_constant"] for r in rows if r["h"] == h and not r.get("error")]
        finite = [v for v in vals if np.isfinite(v)]
        per_mesh.append({"h": h, "max": max(finite) if finite else math.nan,
                         "median": statistics.median(finite) if finite else math.nan,
                         "n": len(vals), "n_infinite": len(vals) - len(finite)})
    growth = [b["max"] / a["max"] if a["max"] > 0 else math.nan for a, b in zip(per_mesh, per_mesh[1:])]
    unstable = any(g > 2 for g in growth if np.isfinite(g)) or any(m["n_infinite"] for m in per_mesh)
    failed = sum(1 for r in rows if r.get("error"))
    return SweepSummary(rows, per_mesh, growth, bool(unstable), failed)


def constant_sweep(cfg: ExperimentConfig) -> SweepSummary:
    """Solve and report every (mesh, p, s, seed) case; aggregate implied constants per mesh.

    Failures are recorded in the row's ``error`` column and the sweep goes on.
    """
    if cfg.sweep.report not in rp.REPORTS:
        raise ValidationError(f"sweep.report must be one of {sorted(rp.REPORTS)}")
    if cfg.sweep.family not in ("base", "counterexample"):
        raise ValidationError("sweep.family must be base or counterexample")
    cases = sweep_cases(cfg)
    results = map_items(lambda case: _run_case(cfg, case), cases)
    rows = [row for rs in results for row in rs]
    return summarize(rows)


# -- counterexample -----------------------------------------------------------------

def counterexample_base() -> ExperimentConfig:
    """Default setting: g = 1 off (-1, 1) except a negative bump on [1.25, 2.25]."""
    cfg = ExperimentConfig(subcommand="counterexample")
    cfg.kernel.s, cfg.kernel.p = 0.75, 2.0
    cfg.lattice.h = 1.0 / 32
    cfg.problem.g = {"kind": "constant", "value": 1.0}
    cfg.report.x0, cfg.report.r, cfg.report.R = [0.0], 0.45, 0.9
    return cfg


@dataclass
class CounterexampleResult:
    rows: list[dict]
    amplitude: float
    m_crit: float
    stopped_at: float | None
    context: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rows": self.rows, "amplitude": self.amplitude, "m_crit": self.m_crit,
                "stopped_at": self.stopped_at, "context": self.context}


def _bump_data(prob: Problem, bump, depth: float) -> GridFunction:
    x = prob.lattice.coords[:, 0]
    inb = (x >= bump[0] - 1e-12) & (x <= bump[1] + 1e-12) & ~prob.omega.mask
    return prob.g.with_values(np.where(inb, -depth, prob.g.values))


def counterexample_run(m_values, base: ExperimentConfig | None = None) -> CounterexampleResult:
    """Harnack ratios with and without the tail as a negative exterior bump deepens.

    The bump sets g to ``-m * a`` on the bump interval (off the domain). The
    unit ``a`` is calibrated so that nonnegativity on B_R is lost exactly at
    ``m_crit = margin * max(m_values)``.
    """
    cfg = base or counterexample_base()
    ce = cfg.counterexample
    m_values = [float(m) for m in m_values]
    if not m_values or min(m_values) < 0:
        raise ValidationError("m values must be nonnegative and nonempty")
    if len(ce.bump) != 2 or not ce.bump[0] < ce.bump[1]:
        raise ValidationError("counterexample.bump must be an interval [a, b]")
    if not ce.margin > 1:
        raise ValidationError("counterexample.margin must exceed 1")
    rc = cfg.report
    _need(rc, "x0", "r", "R")
    prob = build_problem(cfg)
    if np.any(prob.g.values[~prob.omega.mask] < 0):
        raise ValidationError("base data must be nonnegative before the bump is added")
    BR = ball_nodes(prob.lattice, Ball(tuple(rc.x0), rc.R))
    scfg = cfg.solver_config()

    def solve(depth):
        g = _bump_data(prob, ce.bump, depth)
        return solve_dirichlet(prob.spec, prob.lattice, prob.omega, g, scfg)

    def min_on_BR(depth):
        return float(solve(depth).u.values[BR].min())

    hi = 1.0
    while min_on_BR(hi) >= 0:
        hi *= 2.0
        if hi > 1e12:
            raise ValidationError("the bump never removes positivity on B_R")
    root = scipy.optimize.brentq(min_on_BR, 0.0, hi, xtol=1e-14, rtol=1e-12)
    m_crit = ce.margin * max(m_values) if max(m_values) > 0 else 1.0
    a = root / m_crit
    rows, stopped = [], None
    for m in m_values:
        sol = solve(m * a)
        row = {"m": m, "depth": m * a, "converged": sol.converged, "iterations": sol.iterations}
        try:
            rep = rp.harnack_report(sol, rc.x0, rc.r, rc.R, rc.candidate_c)
        except PreconditionError as exc:
            stopped = m
            rows.append({**row, "error": str(exc), "implied_constant": math.nan, "classical_ratio": math.nan,
                         "sup": math.nan, "inf": math.nan, "tail_term": math.nan, "rhs_sum": math.nan,
                         "passed": False})
            break
        sup, inf = rep.lhs, rep.rhs_terms["inf"]
        row.update({"sup": sup, "inf": inf, "tail_term": rep.rhs_terms["tail"],
                    "classical_ratio": sup / max(inf, 1e-12 * abs(sup), 1e-300),
                    "implied_constant": rep.implied_constant, "rhs_sum": rep.rhs_sum, "passed": rep.passed})
        rows.append(row)
    ctx = {"x0": rc.x0, "r": rc.r, "R": rc.R, "bump": list(ce.bump), "margin": ce.margin,
           "p": prob.spec.p, "s": prob.spec.s, "h": prob.lattice.h}
    return CounterexampleResult(rows, a, m_crit, stopped, ctx)
