"""Uniform lattices, node sets and grid functions.

Node sets are sorted ``int64`` arrays of flat node indices (C order over
the axes). Measures are counting measure times ``h^n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import farfield as ff
from .errors import ValidationError


@dataclass(frozen=True)
class Lattice:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    h: float

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(a) for a in np.atleast_1d(self.lo)))
        object.__setattr__(self, "hi", tuple(float(b) for b in np.atleast_1d(self.hi)))
        if len(self.lo) != len(self.hi) or len(self.lo) not in (1, 2):
            raise ValidationError("lattice box must have 1 or 2 axes")
        if not self.h > 0:
            raise ValidationError(f"spacing h must be positive, got {self.h}")
        for a, b in zip(self.lo, self.hi):
            m = (b - a) / self.h
            if m < 1 - 1e-9 or abs(m - round(m)) > 1e-9 * max(1.0, m):
                raise ValidationError(f"(b - a)/h must be a positive integer, got {m}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(round((b - a) / self.h)) + 1 for a, b in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @cached_property
    def coords(self) -> np.ndarray:
        axes = [a + self.h * np.arange(m) for a, m in zip(self.lo, self.shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        c = np.stack([g.reshape(-1) for g in mesh], axis=-1)
        c.setflags(write=False)
        return c

    def index_of(self, pts, atol: float = 1e-9) -> np.ndarray:
        """Flat index of each point, or -1 when the point is not a lattice node."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        k = np.rint((pts - np.asarray(self.lo)) / self.h)
        ok = np.all(np.abs(pts - (np.asarray(self.lo) + k * self.h)) <= atol * max(1.0, self.h), axis=1)
        ok &= np.all((k >= 0) & (k < np.asarray(self.shape)), axis=1)
        flat = np.ravel_multi_index(tuple(np.clip(k, 0, np.asarray(self.shape) - 1).astype(int).T),
                                    self.shape)
        return np.where(ok, flat, -1).astype(np.int64)

    def all_nodes(self) -> np.ndarray:
        return np.arange(self.size, dtype=np.int64)

    def translated(self, shift) -> "Lattice":
        shift = np.broadcast_to(np.asarray(shift, dtype=float), (self.dim,))
        return Lattice(tuple(np.asarray(self.lo) + shift), tuple(np.asarray(self.hi) + shift), self.h)

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "h": self.h}


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise ValidationError(f"ball radius must be positive, got {self.radius}")

    def scaled(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)


@dataclass(frozen=True, eq=False)
class Region:
    """A node subset given by a boolean mask."""

    lattice: Lattice
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool).reshape(-1)
        if m.size != self.lattice.size:
            raise ValidationError("region mask length must equal the node count")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def nodes(self) -> np.ndarray:
        return np.flatnonzero(self.mask).astype(np.int64)

    @property
    def exterior(self) -> np.ndarray:
        return np.flatnonzero(~self.mask).astype(np.int64)

    def has_collar(self) -> bool:
        """True when no node of the region lies on the lattice boundary."""
        idx = np.array(np.unravel_index(self.nodes, self.lattice.shape)).T
        if idx.size == 0:
            return True
        return bool(np.all((idx > 0) & (idx < np.asarray(self.lattice.shape) - 1)))


def ball_region(lattice: Lattice, ball: Ball) -> Region:
    mask = np.zeros(lattice.size, dtype=bool)
    mask[ball_nodes(lattice, ball)] = True
    return Region(lattice, mask)


def box_region(lattice: Lattice, lo, hi) -> Region:
    """Nodes strictly inside the open box (lo, hi)."""
    c = lattice.coords
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    return Region(lattice, np.all((c > lo) & (c < hi), axis=1))


def omega_region(region: Region) -> Region:
    """Validate a region for use as the solution domain (nonempty, with a collar)."""
    if region.nodes.size == 0:
        raise ValidationError("domain contains no lattice nodes")
    if not region.has_collar():
        raise ValidationError("domain must lie strictly inside the lattice box")
    return region


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Node values plus a descriptor of the values outside the lattice box."""

    lattice: Lattice
    values: np.ndarray
    far_field: ff.FarField = field(default_factory=ff.ZeroFarField)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.lattice.size:
            raise ValidationError(f"expected {self.lattice.size} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.lattice, values, self.far_field)

    def scaled(self, c: float) -> "GridFunction":
        return GridFunction(self.lattice, c * self.values, ff.affine(self.far_field, c, 0.0))

    def shifted(self, d: float) -> "GridFunction":
        return GridFunction(self.lattice, self.values + d, ff.affine(self.far_field, 1.0, d))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        if other.lattice != self.lattice:
            raise ValidationError("grid functions live on different lattices")
        fa, fb = self.far_field.constant, other.far_field.constant
        if fa is None or fb is None:
            raise ValidationError("only constant far fields can be added")
        return GridFunction(self.lattice, self.values + other.values, ff.affine(ff.ZeroFarField(), 1.0, fa + fb))

    def translated(self, shift) -> "GridFunction":
        if self.far_field.constant is None:
            raise ValidationError("only constant far fields can be translated")
        return GridFunction(self.lattice.translated(shift), self.values, self.far_field)


def constant_function(lattice: Lattice, c: float) -> GridFunction:
    return GridFunction(lattice, np.full(lattice.size, float(c)), ff.affine(ff.ZeroFarField(), 1.0, c))


def indicator(lattice: Lattice, nodes, value: float = 1.0) -> GridFunction:
    v = np.zeros(lattice.size)
    v[np.asarray(nodes, dtype=np.int64)] = value
    return GridFunction(lattice, v, ff.ZeroFarField())


# -- operations ----------------------------------------------------------------

def ball_nodes(lattice: Lattice, ball: Ball) -> np.ndarray:
    """Nodes with |x - x0| < r (open ball, ties excluded)."""
    c = np.asarray(ball.center, dtype=float)
    if c.size != lattice.dim:
        raise ValidationError("ball center has the wrong dimension")
    d2 = np.sum((lattice.coords - c) ** 2, axis=1)
    return np.flatnonzero(d2 < ball.radius ** 2).astype(np.int64)


def set_measure(lattice: Lattice, nodes) -> float:
    return float(len(np.asarray(nodes))) * lattice.cell_volume


def _node_values(u: GridFunction, nodes) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=np.int64)
    if nodes.size == 0:
        raise ValidationError("node set is empty")
    return u.values[nodes]


def extremum(u: GridFunction, nodes, which: str) -> float:
    v = _node_values(u, nodes)
    if which == "sup":
        return float(v.max())
    if which == "inf":
        return float(v.min())
    raise ValidationError(f"which must be 'sup' or 'inf', got {which!r}")


def power_mean(values: np.ndarray, t: float) -> float:
    """``(mean v^t)^(1/t)`` of nonnegative values."""
    if not t > 0:
        raise ValidationError(f"mean exponent must be positive, got {t}")
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise ValidationError("power mean needs nonnegative values")
    top = values.max()
    if top == 0:
        return 0.0
    # normalised to keep v^t in range for large t
    return float(top * np.mean((values / top) ** t) ** (1.0 / t))


def t_mean(u: GridFunction, ball: Ball, t: float) -> float:
    """``(average of u^t over the ball nodes)^(1/t)``."""
    nodes = ball_nodes(u.lattice, ball)
    v = _node_values(u, nodes)
    if np.any(v < 0):
        bad = int(nodes[np.argmin(v)])
        raise ValidationError(f"t-mean needs u >= 0 on the ball; u = {v.min():g} at node {bad}")
    return power_mean(v, t)


_COMPARE = {
    ">=": np.greater_equal, "≥": np.greater_equal,
    ">": np.greater,
    "<=": np.less_equal, "≤": np.less_equal,
    "<": np.less,
}


def level_set(u: GridFunction, nodes, k: float, direction: str) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=np.int64)
    try:
        op = _COMPARE[direction]
    except KeyError:
        raise ValidationError(f"unknown comparison {direction!r}") from None
    return nodes[op(u.values[nodes], k)]


def truncation(u: GridFunction, k: float, sign: str) -> GridFunction:
    """``(u - k)_+`` for sign plus, ``(u - k)_- = (k - u)_+`` for minus."""
    if sign == "plus":
        v = np.maximum(u.values - k, 0.0)
    elif sign == "minus":
        v = np.maximum(k - u.values, 0.0)
    else:
        raise ValidationError(f"truncation sign must be plus or minus, got {sign!r}")
    return GridFunction(u.lattice, v, ff.truncate(u.far_field, k, sign))


def positive_part(u: GridFunction) -> GridFunction:
    return truncation(u, 0.0, "plus")


def negative_part(u: GridFunction) -> GridFunction:
    return truncation(u, 0.0, "minus")


def cutoff(lattice: Lattice, support_ball: Ball, plateau_ball: Ball) -> GridFunction:
    """Radial piecewise-linear bump: 1 on the plateau, 0 off the support."""
    if support_ball.center != plateau_ball.center:
        raise ValidationError("cutoff balls must share a center")
    rs, rp = support_ball.radius, plateau_ball.radius
    if not rp < rs:
        raise ValidationError("plateau ball must be strictly smaller than the support ball")
    dist = np.sqrt(np.sum((lattice.coords - np.asarray(support_ball.center)) ** 2, axis=1))
    phi = np.clip((rs - dist) / (rs - rp), 0.0, 1.0)
    return GridFunction(lattice, phi, ff.ZeroFarField())


def region_from_nodes(lattice: Lattice, nodes) -> Region:
    mask = np.zeros(lattice.size, dtype=bool)
    mask[np.asarray(nodes, dtype=np.int64)] = True
    return Region(lattice, mask)


def replace_far_field(u: GridFunction, far: ff.FarField) -> GridFunction:
    return replace(u, far_field=far)
