"""Discrete versions of the covering and iteration lemmata used in the proofs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..lattice import Ball, Lattice, ball_nodes


@dataclass
class CoveringResult:
    nodes: np.ndarray
    case: str  # "i", "ii" or "empty"
    c3_fit: float
    ball_size: int
    set_size: int
    best_radius: np.ndarray  # largest successful rho per ball node, 0 where none

    def to_dict(self) -> dict:
        return {"case": self.case, "c3_fit": self.c3_fit, "ball_size": self.ball_size,
                "set_size": self.set_size, "dilated_size": int(self.nodes.size),
                "nodes": [int(i) for i in self.nodes]}


def covering_dilate(lattice: Lattice, E, ball: Ball, delta_bar: float) -> CoveringResult:
    """Dilation [E] of a node set E inside a ball and the covering dichotomy.

    A ball node x with radius rho in {h, 2h, ..., 2r} contributes
    B_3rho(x) intersected with the ball whenever ``#(E in B_3rho(x)) >
    delta_bar * #(lattice nodes in B_rho(x))``. Case ii is [E] equal to the
    ball nodes; otherwise case i with ``c3_fit = delta_bar |[E]| / |E|``.
    """
    if not 0 < delta_bar < 1:
        raise ValidationError(f"delta_bar must lie in (0, 1), got {delta_bar}")
    B = ball_nodes(lattice, ball)
    E = np.unique(np.asarray(E, dtype=np.int64))
    if not np.all(np.isin(E, B)):
        raise ValidationError("E must be a subset of the ball nodes")
    if E.size == 0:
        return CoveringResult(E, "empty", math.inf, int(B.size), 0, np.zeros(B.size))
    X = lattice.coords
    D_all = np.sqrt(np.sum((X[B][:, None, :] - X[None, :, :]) ** 2, axis=-1))
    D_ball = D_all[:, B]
    in_E = np.isin(B, E)
    hit = np.zeros(B.size, dtype=bool)
    best = np.zeros(B.size)
    m = int(math.floor(2 * ball.radius / lattice.h + 1e-9))
    for j in range(1, max(m, 1) + 1):
        rho = j * lattice.h
        count_B = np.sum(D_all < rho, axis=1)
        count_E = np.sum((D_ball < 3 * rho) & in_E[None, :], axis=1)
        ok = count_E > delta_bar * count_B
        if ok.any():
            best[ok] = rho
            hit |= np.any(D_ball[ok] < 3 * rho, axis=0)
    dil = B[hit]
    case = "ii" if dil.size == B.size else "i"
    return CoveringResult(dil, case, delta_bar * dil.size / E.size, int(B.size), int(E.size), best)


@dataclass
class DeGiorgiSequence:
    A0: float
    c0: float
    b: float
    beta: float
    trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not (self.c0 > 0 and self.b > 1 and self.beta > 0 and self.A0 >= 0):
            raise ValidationError("need c0 > 0, b > 1, beta > 0 and A0 >= 0")

    @property
    def threshold(self) -> float:
        """Smallness level c0^(-1/beta) b^(-1/beta^2)."""
        return self.c0 ** (-1 / self.beta) * self.b ** (-1 / self.beta ** 2)


@dataclass
class IterationResult:
    trace: list[float]
    threshold: float
    smallness_met: bool
    bound_holds: bool | None
    tends_to_zero: bool
    slack: list[float] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if not self.smallness_met:
            return "bound not guaranteed"
        return "bound verified" if self.bound_holds else "bound violated"

    def to_dict(self) -> dict:
        return {"trace": list(self.trace), "threshold": self.threshold, "smallness_met": self.smallness_met,
                "bound_holds": self.bound_holds, "tends_to_zero": self.tends_to_zero, "verdict": self.verdict,
                "slack": list(self.slack)}


def geometric_iteration(seq: DeGiorgiSequence, jmax: int, rtol: float = 1e-12) -> IterationResult:
    """Run A_(j+1) = c0 b^j A_j^(1+beta) and check A_j <= b^(-j/beta) A0 under the smallness condition."""
    if jmax < 0:
        raise ValidationError("jmax must be nonnegative")
    A = [float(seq.A0)]
    for j in range(jmax):
        try:
            nxt = seq.c0 * seq.b ** j * A[-1] ** (1 + seq.beta)
        except OverflowError:
            nxt = math.inf
        A.append(float(nxt))
    seq.trace = A
    thr = seq.threshold
    small = seq.A0 <= thr * (1 + rtol)
    bounds = [seq.b ** (-j / seq.beta) * seq.A0 for j in range(jmax + 1)]
    # A_j / bound_j has the repelling fixed point 1 at the threshold, so a relative
    # error in A0 (admitted slack or rounding) is amplified by (1 + beta)^j
    slack = [(1 + seq.beta) ** j * (rtol + 8 * np.finfo(float).eps) for j in range(jmax + 1)]
    holds = all(a <= bd * (1 + sl) for a, bd, sl in zip(A, bounds, slack)) if small else None
    zero = A[-1] == 0 or (np.isfinite(A[-1]) and A[-1] <= bounds[-1] * (1 + slack[-1]) and A[-1] < A[0])
    return IterationResult(A, thr, bool(small), holds, bool(zero), slack)


@dataclass
class AbsorbResult:
    hypothesis_holds: bool
    worst_hypothesis_gap: float
    c_fit: float
    passed: bool

    def to_dict(self) -> dict:
        return {"hypothesis_holds": self.hypothesis_holds, "worst_hypothesis_gap": self.worst_hypothesis_gap,
                "c_fit": self.c_fit, "pass": self.passed}


def absorb_bound_check(t, f, c1: float, c2: float, theta: float, zeta: float,
                       rtol: float = 1e-12) -> AbsorbResult:
    """Check f(t) <= c1 (tau - t)^(-theta) + c2 + zeta f(tau) on all sampled t < tau, then fit
    the smallest c with f(rho) <= c [c1 (R - rho)^(-theta) + c2] over sampled rho < R.
    """
    if not 0 <= zeta < 1:
        raise ValidationError(f"zeta must lie in [0, 1), got {zeta}")
    if min(c1, c2, theta) < 0:
        raise ValidationError("c1, c2 and theta must be nonnegative")
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if t.shape != f.shape or t.ndim != 1 or t.size < 2:
        raise ValidationError("t and f must be 1D arrays of equal length >= 2")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("sample points must be increasing")
    if not np.all(np.isfinite(f)) or np.any(f < 0):
        raise ValidationError("f must be finite and nonnegative on the samples")
    i, j = np.triu_indices(t.size, k=1)
    gap = t[j] - t[i]
    base = c1 * gap ** (-theta) + c2 if c1 else np.full(gap.shape, c2)
    rhs = base + zeta * f[j]
    excess = f[i] - rhs
    worst = float(np.max(excess / np.maximum(np.abs(rhs), 1e-300)))
    ok = bool(np.all(excess <= rtol * np.maximum(np.abs(rhs), 1e-300)))
    lhs = f[i]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lhs == 0, 0.0, np.where(base > 0, lhs / base, np.inf))
    c_fit = float(ratio.max()) if ratio.size else 0.0
    return AbsorbResult(ok, worst, c_fit, bool(ok and np.isfinite(c_fit)))
