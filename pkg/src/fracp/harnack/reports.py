"""Empirical evaluation of the Harnack-type inequalities on lattice functions.

Every report computes the left-hand side and the named right-hand terms of
one inequality and the smallest single constant ``c`` with
``lhs <= c * sum(rhs terms)``. Hypotheses are checked on the data first and
a :class:`PreconditionError` is raised when one fails.

Reports accept either a :class:`SolveResult` (kernel and domain come along)
or a bare :class:`GridFunction` plus ``spec=`` and optionally ``omega=``.
With no domain the solution-class and ball-inclusion checks are skipped and
the report records that in ``context["checked"]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import farfield as ff
from ..energy import classify_solution
from ..errors import PreconditionError, ValidationError
from ..kernel import KernelSpec, kernel_matrix, upper_envelope
from ..lattice import (Ball, GridFunction, Region, ball_nodes, extremum, level_set, negative_part,
                       positive_part, power_mean, t_mean, truncation)
from ..solver import SolveResult
from ..tail import tail, tail_weight

# logarithmic, 16 points per decade, from 1e-4 up to (not including) 1/4
DELTA_GRID = tuple(10.0 ** (-4 + j / 16) for j in range(55))


def implied_constant(lhs: float, rhs_sum: float) -> float:
    """Smallest c >= 0 with lhs <= c * rhs_sum (0 if lhs <= 0, inf if rhs_sum is 0)."""
    if lhs <= 0:
        return 0.0
    if rhs_sum <= 0:
        return math.inf
    return lhs / rhs_sum


def _holds(lhs: float, c: float, rhs_sum: float) -> bool:
    if lhs <= 0:
        return True
    return bool(np.isfinite(c) and lhs <= c * rhs_sum * (1 + 1e-12))


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs_terms: dict[str, float]
    implied_constant: float
    candidate_c: float
    passed: bool
    context: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def rhs_sum(self) -> float:
        return float(sum(self.rhs_terms.values()))

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs_terms": dict(self.rhs_terms),
                "implied_constant": self.implied_constant, "candidate_c": self.candidate_c,
                "pass": self.passed, "context": dict(self.context), "extras": dict(self.extras)}


def _make(name, lhs, rhs_terms, candidate_c, context, extras=None) -> InequalityReport:
    if not all(np.isfinite(v) for v in [lhs, *rhs_terms.values()]):
        raise ValidationError(f"{name}: non-finite terms {lhs}, {rhs_terms}")
    total = float(sum(rhs_terms.values()))
    c = implied_constant(lhs, total)
    return InequalityReport(name, float(lhs), {k: float(v) for k, v in rhs_terms.items()}, c,
                            float(candidate_c), _holds(lhs, candidate_c, total), context, extras or {})


# -- shared checks -------------------------------------------------------------

@dataclass
class _Input:
    u: GridFunction
    spec: KernelSpec
    omega: Region | None


def _unpack(u, spec: KernelSpec | None, omega: Region | None) -> _Input:
    if isinstance(u, SolveResult):
        spec = spec or u.spec
        omega = omega if omega is not None else u.omega
        u = u.u
    if spec is None:
        raise ValidationError("a kernel spec is needed (pass spec= or a SolveResult)")
    if spec.dim != u.lattice.dim:
        raise ValidationError("kernel and grid function dimensions differ")
    return _Input(u, spec, omega)


def _point(x0, dim: int) -> tuple[float, ...]:
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.size != dim:
        raise ValidationError(f"center must have {dim} coordinates")
    return tuple(float(a) for a in x)


def _nodes(inp: _Input, ball: Ball) -> np.ndarray:
    nodes = ball_nodes(inp.u.lattice, ball)
    if nodes.size == 0:
        raise ValidationError(f"ball of radius {ball.radius:g} contains no lattice nodes")
    return nodes


def _require_nonneg(inp: _Input, ball: Ball) -> None:
    nodes = ball_nodes(inp.u.lattice, ball)
    v = inp.u.values[nodes]
    if v.size and v.min() < 0:
        k = int(nodes[np.argmin(v)])
        raise PreconditionError(f"u must be >= 0 on B_{ball.radius:g}; u = {v.min():.6g} at node {k}", node=k)


def _require_inside(inp: _Input, ball: Ball, checked: list) -> None:
    if inp.omega is None:
        return
    nodes = ball_nodes(inp.u.lattice, ball)
    out = nodes[~inp.omega.mask[nodes]]
    if out.size:
        raise PreconditionError(f"B_{ball.radius:g} is not inside the domain (node {int(out[0])})",
                                node=int(out[0]))
    checked.append(f"B_{ball.radius:g} in omega")


def _require_class(inp: _Input, need: str, checked: list, tol: float) -> None:
    if inp.omega is None:
        return
    cls = classify_solution(inp.spec, inp.u, inp.omega, tol=tol)
    ok = {"solution": cls.label == "solution", "sub": cls.is_sub, "super": cls.is_super}[need]
    if not ok:
        tag = cls.witness.split(":")[1]
        kind = "" if need == "solution" else need
        raise PreconditionError(f"u must be a {kind}solution; classifier says {cls.label} "
                                f"(worst violation {cls.worst_violation:.3g} at {cls.witness})",
                                node=int(tag) if tag.isdigit() else None)
    checked.append(f"classified {cls.label}")


def _context(inp: _Input, x0, r=None, R=None, checked=None, **more) -> dict:
    spec = inp.spec
    ctx = {"x0": list(x0) if x0 is not None else None, "r": r, "R": R, "p": spec.p, "s": spec.s,
           "n": spec.dim, "lam": spec.lam, "Lam": spec.Lam, "h": inp.u.lattice.h, "seed": spec.seed,
           "family": spec.family, "checked": list(checked or [])}
    ctx.update(more)
    return ctx


def _neg_tail_term(inp: _Input, x0, r: float, R: float) -> float:
    s, p = inp.spec.s, inp.spec.p
    return tail_weight(r, R, s, p) * tail(negative_part(inp.u), x0, R, s, p).value


# -- theorem reports -------------------------------------------------------------

def harnack_report(u, x0, r: float, R: float, candidate_c: float = 1.0, *, spec: KernelSpec | None = None,
                   omega: Region | None = None, tol: float = 1e-8) -> InequalityReport:
    """sup_{B_r} u <= c inf_{B_r} u + c (r/R)^(sp/(p-1)) Tail(u_-; x0, R)."""
    inp = _unpack(u, spec, omega)
    x0 = _point(x0, inp.u.lattice.dim)
    if not 0 < r <= R / 2:
        raise ValidationError(f"need 0 < r <= R/2, got r={r}, R={R}")
    checked: list = []
    _require_nonneg(inp, Ball(x0, R))
    _require_inside(inp, Ball(x0, R), checked)
    _require_class(inp, "solution", checked, tol)
    nodes = _nodes(inp, Ball(x0, r))
    lhs = extremum(inp.u, nodes, "sup")
    terms = {"inf": extremum(inp.u, nodes, "inf"), "tail": _neg_tail_term(inp, x0, r, R)}
    return _make("harnack", lhs, terms, candidate_c, _context(inp, x0, r, R, checked))


def weak_harnack_bound(n: int, p: float, s: float) -> float:
    """Upper end of the admissible exponents t; +inf when sp >= n."""
    if s * p >= n:
        return math.inf
    return (p - 1) * n / (n - s * p)


def weak_harnack_report(u, x0, r: float, R: float, t: float, candidate_c: float = 1.0, *,
                        spec: KernelSpec | None = None, omega: Region | None = None,
                        tol: float = 1e-8) -> InequalityReport:
    """(avg_{B_r} u^t)^(1/t) <= c inf_{B_2r} u + c (r/R)^(sp/(p-1)) Tail(u_-; x0, R)."""
    inp = _unpack(u, spec, omega)
    x0 = _point(x0, inp.u.lattice.dim)
    sp_, n = inp.spec.sp, inp.spec.dim
    bound = weak_harnack_bound(n, inp.spec.p, inp.spec.s)
    if not 0 < t < bound:
        raise ValidationError(f"t must lie in (0, {bound:g}) = (0, (p-1)n/(n-sp)), got t={t}")
    if not 0 < r <= R / 2:
        raise ValidationError(f"need 0 < r <= R/2, got r={r}, R={R}")
    checked: list = []
    _require_nonneg(inp, Ball(x0, R))
    _require_inside(inp, Ball(x0, R), checked)
    _require_class(inp, "super", checked, tol)
    lhs = t_mean(inp.u, Ball(x0, r), t)
    terms = {"inf": extremum(inp.u, _nodes(inp, Ball(x0, 2 * r)), "inf"),
             "tail": _neg_tail_term(inp, x0, r, R)}
    ctx = _context(inp, x0, r, R, checked, t=t, t_bound=bound, in_theorem_range=bool(sp_ < n))
    return _make("weak-harnack", lhs, terms, candidate_c, ctx)


def _check_cutoff(inp: _Input, cutoff: GridFunction, nodes: np.ndarray) -> np.ndarray:
    if cutoff.lattice != inp.u.lattice:
        raise ValidationError("cutoff lives on a different lattice")
    phi = cutoff.values
    if np.any(phi < 0):
        raise ValidationError("cutoff must be nonnegative")
    outside = np.ones(phi.size, dtype=bool)
    outside[nodes] = False
    if np.any(phi[outside] != 0) or cutoff.far_field.constant != 0.0:
        raise ValidationError("cutoff must vanish off the ball")
    return phi[nodes]


def _outer_integral(inp: _Input, ball: Ball, centers: np.ndarray, inner: np.ndarray, weight: GridFunction,
                    power: float) -> np.ndarray:
    """``int_{R^n minus B_r} Kbar(z, y) |weight(y)|^power dy`` for each center node z."""
    lat = inp.u.lattice
    spec = inp.spec
    outer = np.setdiff1d(lat.all_nodes(), inner)
    X = lat.coords
    Kb = kernel_matrix(upper_envelope(spec), X[centers], X[outer])
    grid = Kb @ (np.abs(weight.values[outer]) ** power) * lat.cell_volume
    far_f = weight.far_field
    ff.check_integrable(far_f, power, spec.sp)
    c = far_f.constant
    if c is not None:
        far = abs(c) ** power * ff.exterior_weight(lat, X[centers], spec.sp) if c else np.zeros(len(centers))
    else:
        far = np.array([ff.adaptive_exterior_integral(lat, z, lambda y: np.abs(far_f(y)) ** power, spec.sp)
                        for z in X[centers]])
    return grid + spec.far_factor * far


def _pair_terms(inp: _Input, nodes: np.ndarray, w: np.ndarray, phi: np.ndarray) -> tuple[float, float]:
    p = inp.spec.p
    X = inp.u.lattice.coords[nodes]
    K = kernel_matrix(inp.spec, X, X)
    Kb = kernel_matrix(upper_envelope(inp.spec), X, X)
    h2n = inp.u.lattice.cell_volume ** 2
    wp = w * phi
    lhs = h2n * float(np.sum(K * np.abs(wp[:, None] - wp[None, :]) ** p))
    big = np.maximum(w[:, None], w[None, :]) ** p
    rhs1 = h2n * float(np.sum(Kb * big * np.abs(phi[:, None] - phi[None, :]) ** p))
    return lhs, rhs1


def caccioppoli_report(u, k: float, sign: str, ball: Ball, cutoff: GridFunction, candidate_c: float = 1.0, *,
                       spec: KernelSpec | None = None, omega: Region | None = None,
                       tol: float = 1e-8) -> InequalityReport:
    """Energy of w_(+/-) phi on B_r against the cutoff-gradient and tail terms, w_(+/-) = (u - k)_(+/-)."""
    inp = _unpack(u, spec, omega)
    if sign not in ("plus", "minus"):
        raise ValidationError(f"sign must be plus or minus, got {sign!r}")
    checked: list = []
    _require_inside(inp, ball, checked)
    _require_class(inp, "sub" if sign == "plus" else "super", checked, tol)
    nodes = _nodes(inp, ball)
    phi = _check_cutoff(inp, cutoff, nodes)
    p = inp.spec.p
    wfun = truncation(inp.u, k, sign)
    w = wfun.values[nodes]
    lhs, rhs1 = _pair_terms(inp, nodes, w, phi)
    local = float(np.sum(w * phi ** p)) * inp.u.lattice.cell_volume
    supp = nodes[phi > 0]
    sup_ext = float(_outer_integral(inp, ball, supp, nodes, wfun, p - 1).max()) if supp.size else 0.0
    terms = {"energy": rhs1, "tail": local * sup_ext}
    ctx = _context(inp, ball.center, ball.radius, None, checked, k=k, sign=sign)
    return _make("caccioppoli", lhs, terms, candidate_c, ctx, {"sup_exterior": sup_ext, "local": local})


def power_caccioppoli_report(u, d: float, q: float, ball: Ball, cutoff: GridFunction, R: float,
                             candidate_c: float = 1.0, *, spec: KernelSpec | None = None,
                             omega: Region | None = None, tol: float = 1e-8) -> InequalityReport:
    """Caccioppoli estimate for w = (u + d)^((p-q)/p) with the d^(1-p) R^(-sp) Tail^(p-1) factor."""
    inp = _unpack(u, spec, omega)
    p, sp = inp.spec.p, inp.spec.sp
    if not 1 < q < p:
        raise ValidationError(f"q must lie in (1, p) = (1, {p:g}), got {q}")
    if not d > 0:
        raise ValidationError(f"d must be positive, got {d}")
    x0 = ball.center
    if not ball.radius <= 0.75 * R:
        raise ValidationError(f"ball radius {ball.radius:g} exceeds 3R/4 = {0.75 * R:g}")
    checked: list = []
    _require_nonneg(inp, Ball(x0, R))
    _require_inside(inp, Ball(x0, R), checked)
    _require_class(inp, "super", checked, tol)
    nodes = _nodes(inp, ball)
    phi = _check_cutoff(inp, cutoff, nodes)
    w = (inp.u.values[nodes] + d) ** ((p - q) / p)
    lhs, rhs1 = _pair_terms(inp, nodes, w, phi)
    supp = nodes[phi > 0]
    ones = GridFunction(inp.u.lattice, np.ones(inp.u.lattice.size), ff.ConstantFarField(1.0))
    sup_k = float(_outer_integral(inp, ball, supp, nodes, ones, 1.0).max()) if supp.size else 0.0
    tl = tail(negative_part(inp.u), x0, R, inp.spec.s, p).value
    factor = sup_k + d ** (1 - p) * R ** (-sp) * tl ** (p - 1)
    local = float(np.sum(w ** p * phi ** p)) * inp.u.lattice.cell_volume
    terms = {"energy": rhs1, "tail": factor * local}
    ctx = _context(inp, x0, ball.radius, R, checked, d=d, q=q)
    return _make("power-caccioppoli", lhs, terms, candidate_c, ctx,
                 {"sup_kernel_exterior": sup_k, "neg_tail": tl, "local": local})


def sup_exponent(n: int, p: float, s: float) -> float:
    """gamma = (p-1) n / (s p^2)."""
    return (p - 1) * n / (s * p * p)


def sup_bound_report(u, x0, r: float, delta: float, candidate_c: float = 1.0, *,
                     spec: KernelSpec | None = None, omega: Region | None = None,
                     tol: float = 1e-8) -> InequalityReport:
    """sup_{B_r/2} u <= c delta Tail(u_+; x0, r/2) + c delta^(-gamma) (avg_{B_r} u_+^p)^(1/p)."""
    inp = _unpack(u, spec, omega)
    x0 = _point(x0, inp.u.lattice.dim)
    if not 0 < delta <= 1:
        raise ValidationError(f"delta must lie in (0, 1], got {delta}")
    if not r > 0:
        raise ValidationError("r must be positive")
    checked: list = []
    _require_inside(inp, Ball(x0, r), checked)
    _require_class(inp, "sub", checked, tol)
    s, p = inp.spec.s, inp.spec.p
    gamma = sup_exponent(inp.spec.dim, p, s)
    lhs = extremum(inp.u, _nodes(inp, Ball(x0, r / 2)), "sup")
    up = positive_part(inp.u)
    pmean = power_mean(up.values[_nodes(inp, Ball(x0, r))], p)
    terms = {"tail": delta * tail(up, x0, r / 2, s, p).value, "mean": delta ** (-gamma) * pmean}
    return _make("sup-bound", lhs, terms, candidate_c,
                 _context(inp, x0, r, None, checked, delta=delta, gamma=gamma))


def sup_bound_sweep(u, x0, r: float, candidate_c: float = 1.0, deltas=DELTA_GRID, **kw) -> list[InequalityReport]:
    return [sup_bound_report(u, x0, r, d, candidate_c, **kw) for d in deltas]


def tail_control_report(u, x0, r: float, R: float, candidate_c: float = 1.0, *,
                        spec: KernelSpec | None = None, omega: Region | None = None,
                        tol: float = 1e-8) -> InequalityReport:
    """Tail(u_+; x0, r) <= c sup_{B_r} u + c (r/R)^(sp/(p-1)) Tail(u_-; x0, R)."""
    inp = _unpack(u, spec, omega)
    x0 = _point(x0, inp.u.lattice.dim)
    if not 0 < r < R:
        raise ValidationError(f"need 0 < r < R, got r={r}, R={R}")
    checked: list = []
    _require_nonneg(inp, Ball(x0, R))
    _require_inside(inp, Ball(x0, R), checked)
    _require_class(inp, "solution", checked, tol)
    s, p = inp.spec.s, inp.spec.p
    lhs = tail(positive_part(inp.u), x0, r, s, p).value
    terms = {"sup": extremum(inp.u, _nodes(inp, Ball(x0, r)), "sup"), "tail": _neg_tail_term(inp, x0, r, R)}
    return _make("tail-control", lhs, terms, candidate_c, _context(inp, x0, r, R, checked))


def _layer_cake_mean(values: np.ndarray, eps: float) -> float:
    """``eps * int_0^inf t^(eps-1) |{v > t}| / N dt`` integrated exactly over the step distribution."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    levels = np.concatenate([[0.0], v])
    frac = (n - np.arange(n)) / n  # fraction of values above t for t in (levels[i], levels[i+1])
    return float(np.sum(frac * (levels[1:] ** eps - levels[:-1] ** eps)))


def inf_estimate_report(u, x0, r: float, R: float, eps: float, candidate_c: float = 1.0, *,
                        spec: KernelSpec | None = None, omega: Region | None = None,
                        tol: float = 1e-8) -> InequalityReport:
    """(avg_{B_r} u^eps)^(1/eps) <= c inf_{B_r} u + c (r/R)^(sp/(p-1)) Tail(u_-; x0, R)."""
    inp = _unpack(u, spec, omega)
    x0 = _point(x0, inp.u.lattice.dim)
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    if not 0 < r < R:
        raise ValidationError(f"need 0 < r < R, got r={r}, R={R}")
    checked: list = []
    _require_nonneg(inp, Ball(x0, R))
    _require_inside(inp, Ball(x0, R), checked)
    _require_class(inp, "super", checked, tol)
    nodes = _nodes(inp, Ball(x0, r))
    lhs = t_mean(inp.u, Ball(x0, r), eps)
    cav = _layer_cake_mean(inp.u.values[nodes], eps) ** (1.0 / eps)
    agree = abs(cav - lhs) <= 1e-6 * max(abs(lhs), 1e-300) or cav == lhs
    terms = {"inf": extremum(inp.u, nodes, "inf"), "tail": _neg_tail_term(inp, x0, r, R)}
    return _make("inf-estimate", lhs, terms, candidate_c, _context(inp, x0, r, R, checked, eps=eps),
                 {"cavalieri_lhs": cav, "cavalieri_agrees": bool(agree)})


# -- expansion of positivity --------------------------------------------------------

@dataclass
class ExpansionReport:
    k: float
    sigma: float
    delta_fit: float
    level_measure_fraction: float
    inf_B4r: float
    tail_term: float
    fitted: bool
    C_fit: float
    deltas: list[float]
    fractions: list[float]
    conclusion_holds: list[bool]
    context: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"k": self.k, "sigma": self.sigma, "delta_fit": self.delta_fit,
                "level_measure_fraction": self.level_measure_fraction, "inf_B4r": self.inf_B4r,
                "tail_term": self.tail_term, "fitted": self.fitted, "C_fit": self.C_fit,
                "deltas": list(self.deltas), "fractions": list(self.fractions),
                "conclusion_holds": list(self.conclusion_holds), "context": dict(self.context)}


def expansion_report(u, x0, k: float, sigma: float, r: float, R: float, *, spec: KernelSpec | None = None,
                     omega: Region | None = None, deltas=DELTA_GRID, tol: float = 1e-8) -> ExpansionReport:
    """Level-set shrinking on B_6r and the pointwise lower bound on B_4r over a grid of delta.

    ``C_fit`` is the smallest C with fraction(delta) <= C / (sigma log(1/(2 delta))) on the
    grid. ``delta_fit`` is the largest grid delta with inf_{B_4r} u >= delta k - tail term.
    """
    inp = _unpack(u, spec, omega)
    x0 = _point(x0, inp.u.lattice.dim)
    if not 0 < sigma <= 1:
        raise ValidationError(f"sigma must lie in (0, 1], got {sigma}")
    if not (r > 0 and 16 * r < R):
        raise ValidationError(f"need 0 < 16 r < R, got r={r}, R={R}")
    if k < 0:
        raise ValidationError("level k must be nonnegative")
    checked: list = []
    _require_nonneg(inp, Ball(x0, R))
    _require_inside(inp, Ball(x0, R), checked)
    _require_class(inp, "super", checked, tol)
    br = _nodes(inp, Ball(x0, r))
    frac_k = level_set(inp.u, br, k, ">=").size / br.size
    if frac_k < sigma:
        raise PreconditionError(f"|B_r and {{u >= k}}| / |B_r| = {frac_k:.6g} is below sigma = {sigma:g}")
    s, p = inp.spec.s, inp.spec.p
    neg_tail = tail(negative_part(inp.u), x0, R, s, p).value
    wt = tail_weight(r, R, s, p)
    tail_term = wt * neg_tail
    b6 = _nodes(inp, Ball(x0, 6 * r))
    inf4 = extremum(inp.u, _nodes(inp, Ball(x0, 4 * r)), "inf")
    deltas = [float(d) for d in deltas]
    fractions, holds, cs = [], [], []
    for dl in deltas:
        f = level_set(inp.u, b6, 2 * dl * k - 0.5 * wt * neg_tail, "<=").size / b6.size
        fractions.append(f)
        cs.append(f * sigma * math.log(1 / (2 * dl)))
        holds.append(bool(inf4 >= dl * k - tail_term))
    good = [dl for dl, ok in zip(deltas, holds) if ok]
    fitted = bool(good)
    delta_fit = max(good) if fitted else 0.0
    at = deltas.index(delta_fit) if fitted else 0
    ctx = _context(inp, x0, r, R, checked, level_fraction_at_k=frac_k)
    return ExpansionReport(float(k), float(sigma), delta_fit, fractions[at], inf4, tail_term, fitted,
                           float(max(cs)), deltas, fractions, holds, ctx)


REPORTS = {
    "harnack": harnack_report,
    "weak-harnack": weak_harnack_report,
    "caccioppoli": caccioppoli_report,
    "power-caccioppoli": power_caccioppoli_report,
    "sup-bound": sup_bound_report,
    "tail-control": tail_control_report,
    "inf-estimate": inf_estimate_report,
    "expansion": expansion_report,
}
