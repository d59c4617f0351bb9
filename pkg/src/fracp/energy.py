"""Discrete nonlocal energy, its form, the pointwise operator and the classifier.

Pairs of lattice nodes carry weight ``h^(2n)``, the diagonal ``x = y`` is
skipped, and pairs with one point beyond the lattice box are integrated
with the exterior rules of :mod:`fracp.farfield`. Pairs with both points
beyond the box do not depend on the node values and are left out.

With ``S = K + K^T`` and ``phi(t) = |t|^(p-2) t`` the first variation at a
node is::

    dF/du(x) = p * h^(2n) * sum_y S(x,y) phi(u(x)-u(y)) + far-field term
             = p * E(u, hat_x)
             = 2 p h^n * L u(x)

so the gradient, the form against nodal hats and the operator are the
same vector up to fixed factors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import farfield as ff
from .errors import ValidationError
from .kernel import KernelSpec, kernel_matrix
from .lattice import GridFunction, Lattice, Region
from .parallel import map_chunks


@dataclass(frozen=True)
class QuadratureScheme:
    diagonal_policy: str = "exclude"
    farfield_policy: str = "radial"
    ftol: float = 1e-8
    dense_limit: int = 4_000_000

    def __post_init__(self):
        if self.diagonal_policy != "exclude":
            raise ValidationError("only the 'exclude' diagonal policy is implemented")
        if self.farfield_policy not in ("radial", "none"):
            raise ValidationError(f"unknown far-field policy {self.farfield_policy!r}")
        if not 0 < self.ftol <= 1e-3:
            raise ValidationError(f"ftol must lie in (0, 1e-3], got {self.ftol}")


DEFAULT_QUAD = QuadratureScheme()


def phi(t: np.ndarray, p: float) -> np.ndarray:
    """``|t|^(p-2) t``, continuous at 0 for every p > 1."""
    if p == 2:
        return t
    return np.sign(t) * np.abs(t) ** (p - 1)


@dataclass
class FarRule:
    """Per-node exterior quadrature: ``weights`` and evaluation ``points``.

    ``points`` is None for the collapsed rule used with constant far fields;
    ``weights`` then holds the total exterior weight per node.
    """

    weights: np.ndarray
    points: np.ndarray | None

    def values(self, far: ff.FarField) -> np.ndarray:
        if self.points is None:
            c = far.constant
            if c is None:
                raise ValidationError("collapsed far rule used with a non-constant far field")
            return np.full(self.weights.shape, c)
        return far(self.points)


class DiscreteEnergy:
    """Pair sums for one (kernel, lattice, quadrature) triple.

    Kernel rows are generated on demand; when the full matrix has at most
    ``quad.dense_limit`` entries it is built once and reused.
    """

    def __init__(self, spec: KernelSpec, lattice: Lattice, quad: QuadratureScheme = DEFAULT_QUAD):
        if spec.dim != lattice.dim:
            raise ValidationError(f"kernel dim {spec.dim} != lattice dim {lattice.dim}")
        self.spec = spec
        self.lattice = lattice
        self.quad = quad
        self.X = lattice.coords
        self.N = lattice.size
        self.hn = lattice.cell_volume
        self._K: np.ndarray | None = None
        self._rules: dict = {}
        if self.N * self.N <= quad.dense_limit:
            self._K = self._build_dense()

    def _build_dense(self) -> np.ndarray:
        blocks = map_chunks(lambda sl: kernel_matrix(self.spec, self.X[sl], self.X), self.N)
        return np.vstack(blocks)

    # -- kernel access ----------------------------------------------------------
    def kernel_rows(self, rows) -> np.ndarray:
        """``K(x, y)`` for x in ``rows`` and every node y."""
        if self._K is not None:
            return self._K[rows]
        return kernel_matrix(self.spec, self.X[rows], self.X)

    def sym_rows(self, rows) -> np.ndarray:
        """``K(x, y) + K(y, x)`` for x in ``rows``."""
        if self._K is not None:
            return self._K[rows] + self._K[:, rows].T
        Kxy = kernel_matrix(self.spec, self.X[rows], self.X)
        if self.spec.is_symmetric:
            return 2.0 * Kxy
        return Kxy + kernel_matrix(self.spec, self.X, self.X[rows]).T

    # -- far field ----------------------------------------------------------------
    def far_rule(self, *fars: ff.FarField) -> FarRule:
        """Exterior rule for all nodes, good for the given far fields."""
        if self.quad.farfield_policy == "none":
            return FarRule(np.zeros((self.N, 1)), None)
        if all(f.constant is not None for f in fars):
            key = "constant"
            if key not in self._rules:
                w = ff.exterior_weight(self.lattice, self.X, self.spec.sp, ftol=self.quad.ftol)
                self._rules[key] = FarRule(self.spec.far_factor * w[:, None], None)
            return self._rules[key]
        key = tuple(fars)
        if key not in self._rules:
            probe = [f for f in fars if f.constant is None][0]
            res = ff.pick_resolution(self.lattice, self.X, lambda y: np.abs(probe(y)) + 1.0,
                                     self.spec.sp, self.quad.ftol)
            pts, wts = [], []
            for c in self.X:
                r = ff.exterior_rule(self.lattice, c, self.spec.sp, 0.0, *res)
                pts.append(r.points)
                wts.append(r.weights)
            self._rules[key] = FarRule(self.spec.far_factor * np.array(wts), np.array(pts))
        return self._rules[key]

    # -- sums -----------------------------------------------------------------
    def _pair_sum(self, fn) -> float:
        def chunk(sl):
            return float(np.sum(fn(self.kernel_rows(sl), sl)))
        return float(np.sum(map_chunks(chunk, self.N)))

    def energy(self, u: GridFunction) -> float:
        p = self.spec.p
        ff.check_integrable(u.far_field, p, self.spec.sp)
        v = u.values
        pair = self._pair_sum(lambda K, sl: K * np.abs(v[sl, None] - v[None, :]) ** p)
        rule = self.far_rule(u.far_field)
        far = np.sum(rule.weights * np.abs(v[:, None] - rule.values(u.far_field)) ** p)
        return pair * self.hn ** 2 + 2.0 * self.hn * float(far)

    def form(self, u: GridFunction, v: GridFunction) -> float:
        if u.lattice != self.lattice or v.lattice != self.lattice:
            raise ValidationError("grid functions and energy live on different lattices")
        p = self.spec.p
        a, b = u.values, v.values
        pair = self._pair_sum(lambda K, sl: K * phi(a[sl, None] - a[None, :], p) * (b[sl, None] - b[None, :]))
        rule = self.far_rule(u.far_field, v.far_field)
        far = np.sum(rule.weights * phi(a[:, None] - rule.values(u.far_field), p)
                     * (b[:, None] - rule.values(v.far_field)))
        return pair * self.hn ** 2 + 2.0 * self.hn * float(far)

    def operator(self, u: GridFunction, nodes=None) -> np.ndarray:
        """``L u(x)`` at the given nodes (all nodes by default)."""
        p = self.spec.p
        v = u.values
        nodes = np.arange(self.N) if nodes is None else np.asarray(nodes, dtype=np.int64)

        def chunk(sl):
            rows = nodes[sl]
            return np.sum(self.sym_rows(rows) * phi(v[rows, None] - v[None, :], p), axis=1)

        pair = np.concatenate(map_chunks(chunk, len(nodes))) if len(nodes) else np.zeros(0)
        rule = self.far_rule(u.far_field)
        W = rule.weights[nodes]
        F = rule.values(u.far_field)[nodes]
        far = np.sum(W * phi(v[nodes, None] - F, p), axis=1)
        return 0.5 * self.hn * pair + far

    def gradient(self, u: GridFunction, nodes) -> np.ndarray:
        return 2.0 * self.spec.p * self.hn * self.operator(u, nodes)


# -- module-level operations ------------------------------------------------------

def energy(spec: KernelSpec, u: GridFunction, quad: QuadratureScheme = DEFAULT_QUAD) -> float:
    """Discrete ``sum K(x,y)|u(x)-u(y)|^p dx dy`` including the far field."""
    return DiscreteEnergy(spec, u.lattice, quad).energy(u)


def form(spec: KernelSpec, u: GridFunction, v: GridFunction, quad: QuadratureScheme = DEFAULT_QUAD) -> float:
    """Discrete ``E(u, v) = sum K |u(x)-u(y)|^(p-2)(u(x)-u(y))(v(x)-v(y))``."""
    if u.lattice != v.lattice:
        raise ValidationError("grid functions live on different lattices")
    return DiscreteEnergy(spec, u.lattice, quad).form(u, v)


def apply_operator(spec: KernelSpec, u: GridFunction, x: int, quad: QuadratureScheme = DEFAULT_QUAD) -> float:
    """Principal-value operator at node ``x`` with the symmetric part of the kernel."""
    if not 0 <= int(x) < u.lattice.size:
        raise ValidationError(f"node {x} is not on the lattice")
    return float(DiscreteEnergy(spec, u.lattice, quad).operator(u, [int(x)])[0])


def seminorm(u: GridFunction, s: float, p: float, quad: QuadratureScheme = DEFAULT_QUAD) -> float:
    """Gagliardo seminorm: the model-kernel energy to the power 1/p."""
    spec = KernelSpec(dim=u.lattice.dim, s=s, p=p)
    return energy(spec, u, quad) ** (1.0 / p)


def energy_gradient(spec: KernelSpec, u: GridFunction, interior: Region,
                    quad: QuadratureScheme = DEFAULT_QUAD) -> np.ndarray:
    """Derivative of :func:`energy` with respect to the values at interior nodes."""
    return DiscreteEnergy(spec, u.lattice, quad).gradient(u, interior.nodes)


@dataclass
class SolutionClass:
    label: str
    worst_violation: float
    witness: str
    sub_violation: float
    super_violation: float
    scale: float

    @property
    def is_sub(self) -> bool:
        return self.label in ("subsolution", "solution")

    @property
    def is_super(self) -> bool:
        return self.label in ("supersolution", "solution")

    def to_dict(self) -> dict:
        return {"label": self.label, "worst_violation": self.worst_violation, "witness": self.witness,
                "sub_violation": self.sub_violation, "super_violation": self.super_violation,
                "scale": self.scale}


def classify_solution(spec: KernelSpec, u: GridFunction, interior: Region, tol: float = 1e-8,
                      quad: QuadratureScheme = DEFAULT_QUAD, system: DiscreteEnergy | None = None) -> SolutionClass:
    """Sub/super/solution test against the nodal hats of the interior.

    Any nonnegative test function on the lattice is a nonnegative combination
    of nodal hats and the form is linear in its second slot, so the hats are
    a complete test family for the discrete problem.
    """
    system = system or DiscreteEnergy(spec, u.lattice, quad)
    nodes = interior.nodes
    forms = system.gradient(u, nodes) / spec.p
    try:
        scale = max(1.0, system.energy(u))
    except ValidationError:
        scale = 1.0
    e = forms / scale
    sub_v = float(max(e.max(initial=0.0), 0.0))
    sup_v = float(max((-e).max(initial=0.0), 0.0))
    is_sub, is_sup = sub_v <= tol, sup_v <= tol
    if is_sub and is_sup:
        label, worst = "solution", max(sub_v, sup_v)
        k = int(np.argmax(np.abs(e))) if e.size else 0
    elif is_sub:
        label, worst = "subsolution", sub_v
        k = int(np.argmax(e))
    elif is_sup:
        label, worst = "supersolution", sup_v
        k = int(np.argmin(e))
    else:
        label, worst = "neither", max(sub_v, sup_v)
        k = int(np.argmax(np.abs(e)))
    witness = f"hat:{int(nodes[k])}" if nodes.size else "hat:none"
    return SolutionClass(label, worst, witness, sub_v, sup_v, scale)
