"""Minimiser of the discrete energy with prescribed exterior values.

The energy is strictly convex in the interior values for every p > 1, so
its unique minimiser is the discrete weak solution. We use preconditioned
nonlinear conjugate gradients (Polak-Ribiere+, restarted) with a
backtracking Armijo line search. Energy changes along a search direction
are evaluated from the differences themselves (``|a+b|^p - |a|^p`` through
``expm1``/``log1p``) instead of subtracting two energies, which keeps the
sufficient-decrease test meaningful far below the rounding level of the
energy itself.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .energy import DEFAULT_QUAD, DiscreteEnergy, QuadratureScheme, phi
from .errors import ValidationError
from .kernel import KernelSpec
from .lattice import GridFunction, Lattice, Region

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LineSearch:
    initial_step: float = 1.0
    shrink: float = 0.5
    c1: float = 1e-4
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValidationError(f"shrink factor must lie in (0, 1), got {self.shrink}")
        if not 0 < self.c1 < 0.5:
            raise ValidationError(f"sufficient-decrease constant must lie in (0, 1/2), got {self.c1}")
        if not self.initial_step > 0:
            raise ValidationError("initial step must be positive")


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 5000
    grad_tol: float = 1e-10
    line_search: LineSearch = field(default_factory=LineSearch)
    preconditioner: str = "diagonal"
    restart_every: int = 0
    stall_window: int = 400
    init: str = "mean"
    quad: QuadratureScheme = DEFAULT_QUAD

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValidationError("grad_tol must be positive")
        if self.preconditioner not in ("none", "diagonal"):
            raise ValidationError(f"unknown preconditioner {self.preconditioner!r}")
        if self.init not in ("mean", "zero", "g"):
            raise ValidationError(f"unknown initialisation {self.init!r}")
        if self.max_iters < 0:
            raise ValidationError("max_iters must be nonnegative")
        if self.stall_window < 1:
            raise ValidationError("stall_window must be positive")


@dataclass
class SolveResult:
    u: GridFunction
    iterations: int
    final_grad_norm: float
    energy_trace: list[float]
    converged: bool
    grad_scale: float
    spec: KernelSpec | None = None
    omega: Region | None = None
    config: SolverConfig | None = None
    stop_reason: str = "gradient"

    def run_report(self) -> dict:
        cfg = self.config or SolverConfig()
        return {
            "iterations": self.iterations,
            "final_grad_norm": self.final_grad_norm,
            "grad_scale": self.grad_scale,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "energy_trace": list(self.energy_trace),
            "tolerances": {"grad_tol": cfg.grad_tol, "ftol": cfg.quad.ftol},
            "config": {
                "max_iters": cfg.max_iters, "grad_tol": cfg.grad_tol, "preconditioner": cfg.preconditioner,
                "restart_every": cfg.restart_every, "stall_window": cfg.stall_window, "init": cfg.init,
                "line_search": {"initial_step": cfg.line_search.initial_step, "shrink": cfg.line_search.shrink,
                                "c1": cfg.line_search.c1, "max_backtracks": cfg.line_search.max_backtracks},
            },
            "kernel_seed": self.spec.seed if self.spec is not None else None,
        }


def _pow_change(a: np.ndarray, b: np.ndarray, p: float) -> np.ndarray:
    """``|a + b|^p - |a|^p`` without cancellation when ``|b| << |a|``."""
    if p == 2:
        return b * (2.0 * a + b)
    out = np.abs(a + b) ** p - np.abs(a) ** p
    small = np.abs(b) < 0.5 * np.abs(a)
    if small.any():
        r = b[small] / a[small]
        out[small] = np.abs(a[small]) ** p * np.expm1(p * np.log1p(r))
    return out


class _Interior:
    """The energy as a function of interior values, everything else frozen."""

    def __init__(self, system: DiscreteEnergy, omega: Region, g: GridFunction):
        self.system = system
        self.p = system.spec.p
        self.I = omega.nodes
        self.base = g.values.copy()
        self.far = g.far_field
        hn = system.hn
        S = system.sym_rows(self.I)
        self.S = S * hn ** 2
        M = self.S.copy()
        M[:, self.I] *= 0.5
        self.M = M
        rule = system.far_rule(g.far_field)
        self.W = 2.0 * hn * rule.weights[self.I]
        self.Fq = rule.values(g.far_field)[self.I]

    def full(self, uI: np.ndarray) -> np.ndarray:
        v = self.base.copy()
        v[self.I] = uI
        return v

    def grad(self, uI: np.ndarray) -> np.ndarray:
        v = self.full(uI)
        D = uI[:, None] - v[None, :]
        return self.p * (np.sum(self.S * phi(D, self.p), axis=1)
                         + np.sum(self.W * phi(uI[:, None] - self.Fq, self.p), axis=1))

    def change(self, uI: np.ndarray, dI: np.ndarray) -> float:
        """F(u + d) - F(u) for an interior perturbation d."""
        v = self.full(uI)
        dv = np.zeros_like(v)
        dv[self.I] = dI
        D = uI[:, None] - v[None, :]
        dD = dI[:, None] - dv[None, :]
        pair = np.sum(self.M * _pow_change(D, dD, self.p))
        far = np.sum(self.W * _pow_change(uI[:, None] - self.Fq, np.broadcast_to(dI[:, None], self.Fq.shape),
                                          self.p))
        return float(pair + far)

    def diag(self, uI: np.ndarray, eps: float) -> np.ndarray:
        p = self.p
        if p == 2:
            return 2.0 * (np.sum(self.S, axis=1) + np.sum(self.W, axis=1))
        v = self.full(uI)
        D = np.abs(uI[:, None] - v[None, :]) + eps
        Df = np.abs(uI[:, None] - self.Fq) + eps
        return p * (p - 1) * (np.sum(self.S * D ** (p - 2), axis=1) + np.sum(self.W * Df ** (p - 2), axis=1))


def _data_sup(g: GridFunction, omega: Region) -> float:
    ext = g.values[omega.exterior]
    sup = float(np.max(np.abs(ext))) if ext.size else 0.0
    c = g.far_field.constant
    if c is not None:
        sup = max(sup, abs(c))
    return sup


def _check_inputs(spec: KernelSpec, lattice: Lattice, omega: Region, g: GridFunction):
    if g.lattice != lattice or omega.lattice != lattice:
        raise ValidationError("g, omega and the lattice must agree")
    if spec.dim != lattice.dim:
        raise ValidationError("kernel and lattice dimensions differ")
    if omega.nodes.size == 0:
        raise ValidationError("omega has no nodes")
    if not omega.has_collar():
        raise ValidationError("omega must lie strictly inside the lattice box")


def solve_dirichlet(spec: KernelSpec, lattice: Lattice, omega: Region, g: GridFunction,
                    cfg: SolverConfig | None = None, system: DiscreteEnergy | None = None) -> SolveResult:
    """Minimise the discrete energy over u with u = g off omega."""
    cfg = cfg or SolverConfig()
    _check_inputs(spec, lattice, omega, g)
    system = system or DiscreteEnergy(spec, lattice, cfg.quad)
    prob = _Interior(system, omega, g)
    p = spec.p
    ext = g.values[omega.exterior]
    if cfg.init == "mean":
        uI = np.full(prob.I.size, float(np.mean(ext)) if ext.size else 0.0)
    elif cfg.init == "zero":
        uI = np.zeros(prob.I.size)
    else:
        uI = g.values[prob.I].copy()

    data_sup = _data_sup(g, omega)
    scale = max(1.0, data_sup) ** (p - 1)
    tol = cfg.grad_tol * scale
    osc = float(np.ptp(ext)) if ext.size else 0.0
    # p > 2: the curvature vanishes where differences do, so it is floored.
    # p < 2: the exact curvature is what keeps steps short near coincident values.
    eps = (1e-2 if p > 2 else 1e-12) * max(osc, data_sup, 1e-12)

    try:
        F = system.energy(g.with_values(prob.full(uI)))
    except ValidationError:
        F = 0.0  # far field not integrable at power p; trace is relative
    trace = [F]
    ls = cfg.line_search
    restart = cfg.restart_every or max(prob.I.size, 1)

    def precond(gr, x):
        if cfg.preconditioner == "none":
            return gr
        return gr / prob.diag(x, eps)

    gr = prob.grad(uI)
    z = precond(gr, uI)
    d = -z
    t_prev, gd_prev = ls.initial_step, None
    it = 0
    converged = bool(np.max(np.abs(gr), initial=0.0) <= tol)
    since_restart = 0
    fails = 0
    best, best_it = float(np.max(np.abs(gr), initial=0.0)), 0
    reason = "gradient" if converged else "max_iters"
    while not converged and it < cfg.max_iters:
        gd = float(gr @ d)
        if gd >= 0 or since_restart >= restart:
            d, gd, since_restart = -z, float(-(gr @ z)), 0
            gd_prev = None
        t = ls.initial_step if gd_prev is None else min(10.0, t_prev * gd_prev / gd)
        t = t if t > 0 and np.isfinite(t) else ls.initial_step
        accepted = None
        for _ in range(ls.max_backtracks):
            dF = prob.change(uI, t * d)
            if np.isfinite(dF) and dF <= ls.c1 * t * gd and dF < 0:
                accepted = (t, dF)
                break
            # safeguarded quadratic fit along the line
            denom = 2.0 * (dF - gd * t)
            tq = -gd * t * t / denom if np.isfinite(dF) and denom > 0 else ls.shrink * t
            t = min(max(tq, 0.1 * t), ls.shrink * t)
        if accepted is None:
            fails += 1
            if fails >= 2 or since_restart == 0:
                log.debug("line search failed at iteration %d", it)
                reason = "line_search"
                break
            since_restart = restart
            continue
        fails = 0
        t, dF = accepted
        # one refinement from the quadratic model through (0, 0), slope gd and (t, dF)
        denom = 2.0 * (dF - gd * t)
        if denom > 0:
            tq = -gd * t * t / denom
            if 0.1 * t < tq <= 10.0 * t and abs(tq - t) > 1e-3 * t:
                dFq = prob.change(uI, tq * d)
                if np.isfinite(dFq) and dFq < dF:
                    t, dF = tq, dFq
        uI = uI + t * d
        trace.append(trace[-1] + dF)
        gr_new = prob.grad(uI)
        z_new = precond(gr_new, uI)
        beta = max(0.0, float(gr_new @ (z_new - z)) / float(gr @ z)) if float(gr @ z) != 0 else 0.0
        d = -z_new + beta * d
        gr, z = gr_new, z_new
        t_prev, gd_prev = t, gd
        it += 1
        since_restart += 1
        gmax = float(np.max(np.abs(gr)))
        converged = gmax <= tol
        if converged:
            reason = "gradient"
        elif gmax < 0.99 * best:
            best, best_it = gmax, it
        elif it - best_it >= cfg.stall_window:
            # the gradient has stopped improving; for p near 1 it is limited by rounding
            log.debug("stalled at iteration %d with gradient %.3e", it, gmax)
            reason = "stalled"
            break

    u = g.with_values(prob.full(uI))
    return SolveResult(u, it, float(np.max(np.abs(gr), initial=0.0)), trace, converged, scale,
                       spec=spec, omega=omega, config=cfg, stop_reason=reason)


def solve_linear_p2(spec: KernelSpec, lattice: Lattice, omega: Region, g: GridFunction,
                    quad: QuadratureScheme = DEFAULT_QUAD, system: DiscreteEnergy | None = None) -> GridFunction:
    """Direct solve of the p = 2 stationarity system by Cholesky factorisation."""
    if spec.p != 2:
        raise ValidationError(f"the linear oracle needs p = 2, got p = {spec.p}")
    _check_inputs(spec, lattice, omega, g)
    A, b, I = p2_system(spec, lattice, omega, g, quad, system)
    uI = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A), b)
    v = g.values.copy()
    v[I] = uI
    return g.with_values(v)


def p2_system(spec: KernelSpec, lattice: Lattice, omega: Region, g: GridFunction,
              quad: QuadratureScheme = DEFAULT_QUAD, system: DiscreteEnergy | None = None):
    """Matrix, right-hand side and interior nodes of the p = 2 system."""
    system = system or DiscreteEnergy(spec, lattice, quad)
    I, E = omega.nodes, omega.exterior
    hn = system.hn
    S = system.sym_rows(I) * hn ** 2
    rule = system.far_rule(g.far_field)
    W = 2.0 * hn * rule.weights[I]
    Fq = rule.values(g.far_field)[I]
    A = -S[:, I]
    A[np.diag_indices_from(A)] += np.sum(S, axis=1) + np.sum(W, axis=1)
    b = S[:, E] @ g.values[E] + np.sum(W * Fq, axis=1)
    return A, b, I
