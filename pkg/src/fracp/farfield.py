"""Values of grid functions beyond the lattice box, and quadrature over that region.

Every node of a lattice stands for a cell of side ``h``, so the box covered
by the lattice is the node box grown by ``h/2``. Integrals over the
exterior of that cell box are written in polar coordinates about a center
``c``::

    int_{y outside box, |y-c| >= rmin} F(y) |y - c|^(-n-decay) dy
        = int_dirs int_{rho_lo}^inf F(c + rho theta) rho^(-1-decay) drho dtheta

and the radial part is mapped to ``t = (rho_lo/rho)^(decay/2)`` on (0, 1],
which turns bounded integrands into ``t * F`` and keeps integrands that
grow like ``rho^(decay/2)`` bounded. The t-interval is split into
geometrically graded Gauss-Legendre panels.

In 2D the angular integral is split at the box corners (and where the box
edge crosses ``rmin``) so every arc carries a smooth integrand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, Union

import numpy as np

from .errors import ValidationError

if TYPE_CHECKING:
    from .lattice import Lattice


# -- descriptors -------------------------------------------------------------

@dataclass(frozen=True)
class ZeroFarField:
    kind = "zero"

    @property
    def constant(self) -> float | None:
        return 0.0

    def growth(self) -> float:
        return -math.inf

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(pts)[:-1])

    def to_dict(self) -> dict:
        return {"kind": "zero"}


@dataclass(frozen=True)
class ConstantFarField:
    value: float
    kind = "constant"

    @property
    def constant(self) -> float | None:
        return float(self.value)

    def growth(self) -> float:
        return 0.0 if self.value != 0 else -math.inf

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return np.full(np.shape(pts)[:-1], float(self.value))

    def to_dict(self) -> dict:
        return {"kind": "constant", "value": float(self.value)}


@dataclass(frozen=True)
class RadialPowerFarField:
    """``A |y - center|^(-q)``; with ``halfspace`` only where y_0 > center_0.

    Negative ``q`` gives growing data such as ``max(y, 0)^s``.
    """

    A: float
    q: float
    center: tuple[float, ...]
    halfspace: bool = False
    kind = "radial-power"

    @property
    def constant(self) -> float | None:
        if self.A == 0:
            return 0.0
        if self.q == 0 and not self.halfspace:
            return float(self.A)
        return None

    def growth(self) -> float:
        return -float(self.q) if self.A != 0 else -math.inf

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        c = np.asarray(self.center, dtype=float)
        r = np.sqrt(np.sum((pts - c) ** 2, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.A * r ** (-float(self.q))
        if self.halfspace:
            v = np.where(pts[..., 0] > c[0], v, 0.0)
        return v

    def to_dict(self) -> dict:
        return {"kind": "radial-power", "A": float(self.A), "q": float(self.q),
                "center": [float(c) for c in self.center], "halfspace": bool(self.halfspace)}


@dataclass(frozen=True)
class AffineFarField:
    base: "FarField"
    scale: float = 1.0
    shift: float = 0.0
    kind = "affine"

    @property
    def constant(self) -> float | None:
        c = self.base.constant
        return None if c is None else self.scale * c + self.shift

    def growth(self) -> float:
        g = self.base.growth() if self.scale != 0 else -math.inf
        return max(g, 0.0) if self.shift != 0 else g

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.scale * self.base(pts) + self.shift

    def to_dict(self) -> dict:
        return {"kind": "affine", "base": self.base.to_dict(), "scale": float(self.scale),
                "shift": float(self.shift)}


@dataclass(frozen=True)
class TruncatedFarField:
    """``(base - level)_+`` for sign plus, ``(level - base)_+`` for minus."""

    base: "FarField"
    level: float
    sign: str
    kind = "truncated"

    @property
    def constant(self) -> float | None:
        c = self.base.constant
        if c is None:
            return None
        return max(c - self.level, 0.0) if self.sign == "plus" else max(self.level - c, 0.0)

    def growth(self) -> float:
        return self.base.growth()

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        v = self.base(pts)
        return np.maximum(v - self.level, 0.0) if self.sign == "plus" else np.maximum(self.level - v, 0.0)

    def to_dict(self) -> dict:
        return {"kind": "truncated", "base": self.base.to_dict(), "level": float(self.level),
                "sign": self.sign}


FarField = Union[ZeroFarField, ConstantFarField, RadialPowerFarField, AffineFarField, TruncatedFarField]


def affine(f: FarField, scale: float = 1.0, shift: float = 0.0) -> FarField:
    c = f.constant
    if c is not None:
        v = scale * c + shift
        return ZeroFarField() if v == 0 else ConstantFarField(v)
    if scale == 1.0 and shift == 0.0:
        return f
    return AffineFarField(f, scale, shift)


def truncate(f: FarField, level: float, sign: str) -> FarField:
    if sign not in ("plus", "minus"):
        raise ValidationError(f"truncation sign must be plus or minus, got {sign!r}")
    c = f.constant
    if c is not None:
        v = max(c - level, 0.0) if sign == "plus" else max(level - c, 0.0)
        return ZeroFarField() if v == 0 else ConstantFarField(v)
    return TruncatedFarField(f, level, sign)


def far_field_from_dict(d: dict) -> FarField:
    kind = d.get("kind", "zero")
    if kind == "zero":
        return ZeroFarField()
    if kind == "constant":
        return ConstantFarField(float(d["value"]))
    if kind == "radial-power":
        return RadialPowerFarField(float(d["A"]), float(d["q"]), tuple(float(c) for c in d["center"]),
                                   bool(d.get("halfspace", False)))
    if kind == "affine":
        return AffineFarField(far_field_from_dict(d["base"]), float(d["scale"]), float(d["shift"]))
    if kind == "truncated":
        return TruncatedFarField(far_field_from_dict(d["base"]), float(d["level"]), d["sign"])
    raise ValidationError(f"unknown far field kind {kind!r}")


def check_integrable(f: FarField, power: float, decay: float) -> None:
    """Raise unless ``|f|^power |y|^(-n-decay)`` is integrable at infinity."""
    g = f.growth()
    if g > -math.inf and g * power >= decay:
        raise ValidationError(
            f"far field grows like |y|^{g:g}; |f|^{power:g} is not integrable against |y|^(-n-{decay:g})")


# -- quadrature ----------------------------------------------------------------

@lru_cache(maxsize=64)
def _radial_rule(levels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on (0, 1] for int_0^1 G(t) dt, graded toward t = 0."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = [0.0] + [2.0 ** -k for k in range(levels, -1, -1)]
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        ts.append(0.5 * (b - a) * x + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(ts), np.concatenate(ws)


def cell_box(lattice: "Lattice") -> tuple[np.ndarray, np.ndarray]:
    h = lattice.h
    return np.asarray(lattice.lo) - 0.5 * h, np.asarray(lattice.hi) + 0.5 * h


def _ray_exit(center: np.ndarray, lo: np.ndarray, hi: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Distance from ``center`` to the box boundary along unit ``dirs`` (M, n)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(dirs > 0, (hi - center) / dirs, np.inf)
        tn = np.where(dirs < 0, (lo - center) / dirs, np.inf)
    return np.min(np.minimum(tp, tn), axis=-1)


def _arc_breaks(center: np.ndarray, lo: np.ndarray, hi: np.ndarray, rmin: float) -> np.ndarray:
    """Angles splitting [0, 2 pi) into arcs where rho_lo(theta) is smooth."""
    cx, cy = center
    br = [math.atan2(y - cy, x - cx) for x in (lo[0], hi[0]) for y in (lo[1], hi[1])]
    # edge normals: +x, +y, -x, -y with distances
    edges = [(0.0, hi[0] - cx), (0.5 * math.pi, hi[1] - cy), (math.pi, cx - lo[0]), (-0.5 * math.pi, cy - lo[1])]
    for th, d in edges:
        if 0 < d < rmin:
            a = math.acos(d / rmin)
            br += [th - a, th + a]
    br = np.mod(np.array(br), 2 * math.pi)
    br = np.unique(np.round(br, 15))
    return np.concatenate([br, [br[0] + 2 * math.pi]])


def _angular_rule(center, lo, hi, rmin, n_per_arc):
    br = _arc_breaks(center, lo, hi, rmin)
    x, w = np.polynomial.legendre.leggauss(n_per_arc)
    th, wt = [], []
    for a, b in zip(br[:-1], br[1:]):
        if b - a < 1e-14:
            continue
        th.append(0.5 * (b - a) * x + 0.5 * (a + b))
        wt.append(0.5 * (b - a) * w)
    return np.concatenate(th), np.concatenate(wt)


def _directions(dim, center, lo, hi, rmin, n_per_arc):
    if dim == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    th, wt = _angular_rule(center, lo, hi, rmin, n_per_arc)
    return np.stack([np.cos(th), np.sin(th)], axis=-1), wt


def exterior_weight(lattice: "Lattice", centers, decay: float, rmin: float = 0.0,
                    ftol: float = 1e-10) -> np.ndarray:
    """``int_{outside box, |y-c|>=rmin} |y-c|^(-n-decay) dy`` for every center.

    Exact in 1D; in 2D the angular integral is refined until the relative
    change drops below ``ftol``.
    """
    lo, hi = cell_box(lattice)
    centers = np.asarray(centers, dtype=float).reshape(-1, lattice.dim)
    out = np.empty(len(centers))
    for i, c in enumerate(centers):
        if lattice.dim == 1:
            rho = np.array([c[0] - lo[0], hi[0] - c[0]])
            out[i] = np.sum(np.maximum(rho, rmin) ** (-decay)) / decay
            continue
        prev = None
        for m in (8, 16, 32, 64, 128, 256):
            dirs, wt = _directions(2, c, lo, hi, rmin, m)
            rho = np.maximum(_ray_exit(c, lo, hi, dirs), rmin)
            val = float(np.sum(wt * rho ** (-decay))) / decay
            if prev is not None and abs(val - prev) <= ftol * abs(val):
                break
            prev = val
        out[i] = val
    return out


@dataclass
class ExteriorRule:
    """Quadrature points/weights for one center: sum(w * F(pts)) ~ the exterior integral."""

    points: np.ndarray
    weights: np.ndarray

    def integrate(self, F: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.sum(self.weights * F(self.points)))


def exterior_rule(lattice: "Lattice", center, decay: float, rmin: float = 0.0,
                  levels: int = 14, order: int = 8, n_per_arc: int = 16) -> ExteriorRule:
    lo, hi = cell_box(lattice)
    c = np.asarray(center, dtype=float).reshape(lattice.dim)
    dirs, wang = _directions(lattice.dim, c, lo, hi, rmin, n_per_arc)
    rho_lo = np.maximum(_ray_exit(c, lo, hi, dirs), rmin)
    t, wt = _radial_rule(levels, order)
    beta = 0.5 * decay
    rho = rho_lo[:, None] * t[None, :] ** (-1.0 / beta)
    w = wang[:, None] * (rho_lo[:, None] ** (-decay) / beta) * (t * wt)[None, :]
    pts = c + rho[..., None] * dirs[:, None, :]
    return ExteriorRule(pts.reshape(-1, lattice.dim), w.reshape(-1))


_RESOLUTIONS = ((10, 6, 8), (14, 8, 16), (20, 10, 24), (28, 12, 32), (40, 16, 48))


def adaptive_exterior_integral(lattice: "Lattice", center, F: Callable[[np.ndarray], np.ndarray],
                               decay: float, rmin: float = 0.0, ftol: float = 1e-8) -> float:
    """Exterior integral of ``F(y)|y-c|^(-n-decay)``, refined until two
    successive resolutions agree to ``ftol`` (relative, absolute floor 1e-300).
    """
    prev = None
    for levels, order, arc in _RESOLUTIONS:
        val = exterior_rule(lattice, center, decay, rmin, levels, order, arc).integrate(F)
        if prev is not None and abs(val - prev) <= ftol * max(abs(val), 1e-300):
            return val
        prev = val
    return val


def pick_resolution(lattice: "Lattice", centers: np.ndarray, F, decay: float,
                    ftol: float) -> tuple[int, int, int]:
    """Smallest resolution that converges to ``ftol`` at a few probe centers."""
    centers = np.asarray(centers, dtype=float).reshape(-1, lattice.dim)
    probes = centers[np.unique(np.linspace(0, len(centers) - 1, min(5, len(centers))).astype(int))]
    best = 0
    for c in probes:
        prev = None
        for k, (levels, order, arc) in enumerate(_RESOLUTIONS):
            val = exterior_rule(lattice, c, decay, 0.0, levels, order, arc).integrate(F)
            if prev is not None and abs(val - prev) <= ftol * max(abs(val), 1e-300):
                best = max(best, k)
                break
            prev = val
        else:
            best = len(_RESOLUTIONS) - 1
    return _RESOLUTIONS[best]
