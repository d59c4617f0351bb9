"""Nonlocal tail ``Tail(v; x0, R)`` split into a lattice part and a far-field part."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import farfield as ff
from .errors import ValidationError
from .lattice import GridFunction, negative_part


@dataclass
class TailValue:
    value: float
    grid_part: float
    farfield_part: float
    R: float
    x0: tuple[float, ...]
    p: float
    s: float
    n: int

    @property
    def integral(self) -> float:
        """The bracketed integral before the ``R^(sp)`` weight."""
        return self.grid_part + self.farfield_part

    def to_dict(self) -> dict:
        return {"value": self.value, "grid_part": self.grid_part, "farfield_part": self.farfield_part,
                "R": self.R, "x0": list(self.x0), "p": self.p, "s": self.s, "n": self.n}


def tail(v: GridFunction, x0, R: float, s: float, p: float, ftol: float = 1e-10) -> TailValue:
    """``[R^(sp) int_{|y-x0|>=R} |v|^(p-1) |y-x0|^(-n-sp) dy]^(1/(p-1))``.

    Nodes enter with weight ``h^n`` when ``|y - x0| > R`` (strictly), the
    region beyond the lattice box by adaptive exterior quadrature of the
    far-field descriptor.
    """
    if not R > 0:
        raise ValidationError(f"tail radius must be positive, got {R}")
    lat = v.lattice
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.size != lat.dim:
        raise ValidationError("tail center has the wrong dimension")
    sp = s * p
    ff.check_integrable(v.far_field, p - 1, sp)
    dist = np.sqrt(np.sum((lat.coords - x0) ** 2, axis=1))
    out = dist > R
    c = v.far_field.constant
    # integrate |v/M|^(p-1) so tiny or huge data neither underflow nor overflow
    M = max(float(np.max(np.abs(v.values), initial=0.0)), abs(c) if c is not None else 0.0)
    M = M if 0 < M < np.inf else 1.0
    grid = float(np.sum(np.abs(v.values[out] / M) ** (p - 1) * dist[out] ** (-(lat.dim + sp)))) * lat.cell_volume
    if c is not None:
        far = abs(c / M) ** (p - 1) * float(ff.exterior_weight(lat, x0, sp, rmin=R, ftol=ftol)[0]) if c else 0.0
    else:
        far = ff.adaptive_exterior_integral(lat, x0, lambda y: np.abs(v.far_field(y) / M) ** (p - 1), sp,
                                            rmin=R, ftol=ftol)
    value = M * (R ** sp * (grid + far)) ** (1.0 / (p - 1))
    with np.errstate(over="ignore", under="ignore"):
        scale = np.float64(M) ** (p - 1)
        grid, far = float(grid * scale), float(far * scale)
    return TailValue(float(value), grid, float(far), float(R), tuple(float(a) for a in x0), p, s, lat.dim)


def tail_weight(r: float, R: float, s: float, p: float) -> float:
    """``(r/R)^(sp/(p-1))``, the factor in front of the tail in the Harnack-type bounds."""
    return (r / R) ** (s * p / (p - 1))


def tail_offset_d(u: GridFunction, x0, r: float, R: float, s: float, p: float) -> float:
    """``d = 1/2 (r/R)^(sp/(p-1)) Tail(u_-; x0, R)``."""
    if not 0 < r < R:
        raise ValidationError(f"need 0 < r < R, got r={r}, R={R}")
    return 0.5 * tail_weight(r, R, s, p) * tail(negative_part(u), x0, R, s, p).value
