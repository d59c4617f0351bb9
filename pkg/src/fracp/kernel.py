"""Kernels of order (s, p) and their ellipticity bounds.

A kernel is described by an immutable :class:`KernelSpec`. Three families
are supported:

``model``
    ``K(x, y) = |x - y|^(-n - s p)``.
``modulated``
    ``a(x, y) |x - y|^(-n - s p)`` where the coefficient ``a`` lies in
    ``[lam, Lam]``, is piecewise constant on cells of side ``cell`` and is
    generally not symmetric. The value on a cell pair is drawn from a
    counter-based hash of ``(seed, cell indices)``, so it is reproducible
    and never needs to be stored.
``custom-table``
    explicit values on lattice node pairs, read from CSV; pairs not in the
    table fall back to the model kernel.

Kernel matrices are built on demand from point arrays; nothing here caches
an N x N matrix.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import SingularityError, ValidationError

if TYPE_CHECKING:
    from .lattice import Lattice

FAMILIES = ("model", "modulated", "custom-table")
TRANSFORMS = ("none", "sym", "max")

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def hash_uniform(seed: int, ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) variates for every (row of ix, row of iy) cell pair.

    ``ix`` is (Nx, n) and ``iy`` is (Ny, n), integer cell indices. The result
    is (Nx, Ny). Order matters: the pair (a, b) and (b, a) get independent
    values.
    """
    ix = np.asarray(ix, dtype=np.int64)
    iy = np.asarray(iy, dtype=np.int64)
    h = _splitmix(np.array([seed & _MASK64], dtype=np.uint64))
    hx = np.broadcast_to(h, (ix.shape[0],)).copy()
    for k in range(ix.shape[1]):
        hx = _splitmix(hx ^ ix[:, k].astype(np.uint64))
    hxy = np.broadcast_to(hx[:, None], (ix.shape[0], iy.shape[0])).copy()
    for k in range(iy.shape[1]):
        hxy = _splitmix(hxy ^ iy[None, :, k].astype(np.uint64))
    return (hxy >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True, eq=False)
class CustomTable:
    """Kernel values on ordered node pairs of a lattice (flat indices)."""

    lattice: "Lattice"
    i: np.ndarray
    j: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        n = self.lattice.size
        keys = np.asarray(self.i, dtype=np.int64) * n + np.asarray(self.j, dtype=np.int64)
        order = np.argsort(keys, kind="stable")
        object.__setattr__(self, "_keys", keys[order])
        object.__setattr__(self, "_vals", np.asarray(self.value, dtype=float)[order])

    def lookup(self, ix: np.ndarray, iy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (values, found-mask) for the broadcast pair grid ix x iy."""
        n = self.lattice.size
        keys = ix[:, None].astype(np.int64) * n + iy[None, :].astype(np.int64)
        pos = np.searchsorted(self._keys, keys)
        pos = np.clip(pos, 0, max(len(self._keys) - 1, 0))
        if len(self._keys) == 0:
            return np.zeros(keys.shape), np.zeros(keys.shape, dtype=bool)
        found = (self._keys[pos] == keys) & (ix[:, None] >= 0) & (iy[None, :] >= 0)
        return np.where(found, self._vals[pos], 0.0), found


def load_custom_table(path: str | Path, lattice: "Lattice") -> CustomTable:
    """Read a CSV with columns ``i, j, value`` (flat node indices)."""
    ii, jj, vv = [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ii.append(int(row["i"]))
            jj.append(int(row["j"]))
            vv.append(float(row["value"]))
    n = lattice.size
    for a, b in zip(ii, jj):
        if not (0 <= a < n and 0 <= b < n):
            raise ValidationError(f"custom table pair ({a}, {b}) outside lattice of {n} nodes")
    return CustomTable(lattice, np.array(ii, dtype=np.int64), np.array(jj, dtype=np.int64),
                       np.array(vv, dtype=float))


@dataclass(frozen=True)
class KernelSpec:
    """Immutable kernel description.

    ``lam`` and ``Lam`` are the lower and upper ellipticity constants.
    ``transform`` records whether the kernel is the symmetric part (``sym``)
    or the upper envelope (``max``) of the raw family.
    """

    dim: int
    s: float
    p: float
    lam: float = 1.0
    Lam: float = 1.0
    family: str = "model"
    seed: int = 0
    cell: float = 1.0 / 16
    table: CustomTable | None = field(default=None, compare=True)
    transform: str = "none"

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim}")
        if not 0.0 < self.s < 1.0:
            raise ValidationError(f"s must lie in (0, 1), got {self.s}")
        if not self.p > 1.0 or not np.isfinite(self.p):
            raise ValidationError(f"p must lie in (1, inf), got {self.p}")
        if not 0.0 < self.lam <= self.Lam:
            raise ValidationError(f"need 0 < lam <= Lam, got lam={self.lam}, Lam={self.Lam}")
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}")
        if self.transform not in TRANSFORMS:
            raise ValidationError(f"unknown transform {self.transform!r}")
        if self.family == "modulated" and not self.cell > 0:
            raise ValidationError("modulated kernels need cell > 0")
        if self.family == "custom-table" and self.table is None:
            raise ValidationError("custom-table kernels need a table")

    @property
    def order(self) -> float:
        """Exponent n + s p of the power law."""
        return self.dim + self.s * self.p

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def is_symmetric(self) -> bool:
        return self.family == "model" or self.transform != "none"

    @property
    def far_factor(self) -> float:
        """Coefficient used for pairs with one point outside the lattice box.

        Modulated coefficients are only defined near the lattice, so the far
        field uses the midpoint of the sandwich.
        """
        if self.family == "modulated":
            return 0.5 * (self.lam + self.Lam)
        return 1.0


def _as_points(x, dim: int) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.size % dim:
        raise ValidationError(f"points must have {dim} coordinates")
    return a.reshape(-1, dim)


def cell_index(spec: KernelSpec, pts: np.ndarray) -> np.ndarray:
    return np.floor(pts / spec.cell + 0.5).astype(np.int64)


def _raw_matrix(spec: KernelSpec, X: np.ndarray, Y: np.ndarray, dist: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        base = dist ** (-spec.order)
    if spec.family == "model":
        return base
    if spec.family == "modulated":
        u = hash_uniform(spec.seed, cell_index(spec, X), cell_index(spec, Y))
        return (spec.lam + (spec.Lam - spec.lam) * u) * base
    table = spec.table
    vals, found = table.lookup(table.lattice.index_of(X), table.lattice.index_of(Y))
    return np.where(found, vals, base)


def kernel_matrix(spec: KernelSpec, X, Y) -> np.ndarray:
    """``K(X[i], Y[j])`` for all pairs; coincident pairs are set to 0.

    Callers that need the diagonal excluded get that for free; callers that
    must not hit it should use :func:`eval_kernel`.
    """
    X = _as_points(X, spec.dim)
    Y = _as_points(Y, spec.dim)
    diff = X[:, None, :] - Y[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    K = _raw_matrix(spec, X, Y, dist)
    if spec.transform != "none" and spec.family != "model":
        Kt = _raw_matrix(spec, Y, X, dist.T).T
        K = 0.5 * (K + Kt) if spec.transform == "sym" else np.maximum(K, Kt)
    K[dist == 0.0] = 0.0
    return K


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Kernel value at a single pair of distinct points."""
    x = _as_points(x, spec.dim)
    y = _as_points(y, spec.dim)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("kernel points must be finite")
    if np.array_equal(x, y):
        raise SingularityError("kernel is singular at x == y")
    return float(kernel_matrix(spec, x, y)[0, 0])


def symmetric_part(spec: KernelSpec) -> KernelSpec:
    """Kernel with values (K(x,y) + K(y,x)) / 2."""
    if spec.is_symmetric:
        return spec
    return replace(spec, transform="sym")


def upper_envelope(spec: KernelSpec) -> KernelSpec:
    """Kernel with values max{K(x,y), K(y,x)}."""
    if spec.is_symmetric:
        return spec
    return replace(spec, transform="max")


@dataclass
class BoundsReport:
    min_ratio: float
    max_ratio: float
    lam: float
    Lam: float
    pairs_checked: int
    passed: bool
    violations: list[tuple[int, int, float]]
    n_violations: int

    def to_dict(self) -> dict:
        return {
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "lam": self.lam,
            "Lam": self.Lam,
            "pairs_checked": self.pairs_checked,
            "passed": self.passed,
            "n_violations": self.n_violations,
            "violations": [list(v) for v in self.violations],
        }


def validate_bounds(spec: KernelSpec, lattice: "Lattice", max_pairs: int | None = None,
                    rng_seed: int = 0, rtol: float = 1e-12, list_limit: int = 100) -> BoundsReport:
    """Check ``lam <= K(x,y)|x-y|^(n+sp) <= Lam`` over lattice node pairs.

    All ordered pairs are scanned unless there are more than ``max_pairs``,
    in which case a seeded subsample of rows is used. Violations are listed
    (up to ``list_limit``), never raised.
    """
    X = lattice.coords
    n = X.shape[0]
    if n == 0:
        raise ValidationError("lattice has no nodes")
    rows = np.arange(n)
    if max_pairs is not None and n * n > max_pairs:
        rng = np.random.default_rng(rng_seed)
        rows = np.sort(rng.choice(n, size=max(1, max_pairs // n), replace=False))
    lo, hi = np.inf, -np.inf
    bad: list[tuple[int, int, float]] = []
    n_bad = 0
    lo_tol = spec.lam * (1 - rtol)
    hi_tol = spec.Lam * (1 + rtol)
    for start in range(0, len(rows), 256):
        r = rows[start:start + 256]
        K = kernel_matrix(spec, X[r], X)
        diff = X[r][:, None, :] - X[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        off = dist > 0
        ratio = np.where(off, K * dist ** spec.order, np.nan)
        lo = min(lo, float(np.nanmin(ratio)) if off.any() else lo)
        hi = max(hi, float(np.nanmax(ratio)) if off.any() else hi)
        viol = off & ((ratio < lo_tol) | (ratio > hi_tol))
        if viol.any():
            a, b = np.nonzero(viol)
            n_bad += len(a)
            for ia, ib in zip(a, b):
                if len(bad) < list_limit:
                    bad.append((int(r[ia]), int(ib), float(ratio[ia, ib])))
    return BoundsReport(lo, hi, spec.lam, spec.Lam, int(len(rows) * (n - 1)), n_bad == 0, bad, n_bad)
