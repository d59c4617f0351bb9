"""Experiment configuration: a single JSON document parsed into dataclasses.

``parse_config`` validates every block before anything is computed, and
``ExperimentConfig.to_dict`` gives the canonical echo written into every
artifact.
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import farfield as ff
from .energy import QuadratureScheme
from .errors import ValidationError
from .kernel import KernelSpec, load_custom_table
from .lattice import Ball, GridFunction, Lattice, Region, ball_region, box_region, omega_region
from .solver import LineSearch, SolverConfig

SUBCOMMANDS = ("solve", "harnack", "weak-harnack", "caccioppoli", "power-caccioppoli", "sup-bound",
               "tail-control", "expansion", "inf-estimate", "covering", "iterate", "absorb", "sweep",
               "counterexample")


@dataclass
class KernelConfig:
    family: str = "model"
    n: int = 1
    s: float = 0.5
    p: float = 2.0
    lam: float = 1.0
    Lam: float = 1.0
    seed: int = 0
    cell: float = 1.0 / 16
    transform: str = "none"
    table: str | None = None


@dataclass
class LatticeConfig:
    lo: list[float] = field(default_factory=lambda: [-4.0])
    hi: list[float] = field(default_factory=lambda: [4.0])
    h: float = 1.0 / 16


@dataclass
class ProblemConfig:
    omega: dict = field(default_factory=lambda: {"kind": "box", "lo": [-1.0], "hi": [1.0]})
    g: dict = field(default_factory=lambda: {"kind": "constant", "value": 1.0})
    far_field: Any = "auto"


@dataclass
class ReportConfig:
    x0: list[float] | None = None
    r: float | None = None
    R: float | None = None
    t: Any = None
    eps: Any = None
    q: Any = None
    d: Any = "auto"
    k: Any = None
    sign: str = "plus"
    sigma: float | None = None
    delta: Any = None
    delta_bar: float | None = None
    plateau: float = 0.5
    candidate_c: float = 10.0
    set: dict | None = None
    iterate: dict | None = None
    absorb: dict | None = None


@dataclass
class SweepConfig:
    seeds: list[int] = field(default_factory=lambda: [0])
    p: list[float] | None = None
    s: list[float] | None = None
    h: list[float] | None = None
    report: str = "harnack"
    family: str = "base"


@dataclass
class CounterexampleConfig:
    m: list[float] = field(default_factory=lambda: [1.0, 10.0, 100.0])
    bump: list[float] = field(default_factory=lambda: [1.25, 2.25])
    margin: float = 1.01


@dataclass
class OutputConfig:
    dir: str = "out"
    prefix: str = "run"
    svg: bool = True


@dataclass
class ExperimentConfig:
    subcommand: str = "solve"
    kernel: KernelConfig = field(default_factory=KernelConfig)
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    report: ReportConfig = field(default_factory=ReportConfig)
    solver: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    counterexample: CounterexampleConfig = field(default_factory=CounterexampleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: str = "."

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    # -- builders -------------------------------------------------------------
    def lattice_obj(self) -> Lattice:
        return Lattice(tuple(self.lattice.lo), tuple(self.lattice.hi), float(self.lattice.h))

    def kernel_spec(self, lattice: Lattice | None = None) -> KernelSpec:
        k = self.kernel
        table = None
        if k.family == "custom-table":
            if not k.table:
                raise ValidationError("kernel.table must name a CSV file for the custom-table family")
            table = load_custom_table(self._path(k.table), lattice or self.lattice_obj())
        return KernelSpec(dim=int(k.n), s=float(k.s), p=float(k.p), lam=float(k.lam), Lam=float(k.Lam),
                          family=k.family, seed=int(k.seed), cell=float(k.cell), table=table,
                          transform=k.transform)

    def solver_config(self) -> SolverConfig:
        raw = dict(self.solver)
        ls = LineSearch(**raw.pop("line_search", {}))
        return SolverConfig(line_search=ls, quad=self.quad(), **raw)

    def quad(self) -> QuadratureScheme:
        return QuadratureScheme(**self.quadrature)

    def omega(self, lattice: Lattice) -> Region:
        o = self.problem.omega
        kind = o.get("kind")
        if kind == "box":
            reg = box_region(lattice, o["lo"], o["hi"])
        elif kind == "ball":
            reg = ball_region(lattice, Ball(tuple(o["center"]), float(o["radius"])))
        else:
            raise ValidationError(f"problem.omega.kind must be box or ball, got {kind!r}")
        return omega_region(reg)

    def exterior_data(self, lattice: Lattice) -> GridFunction:
        return build_g(self.problem.g, self.problem.far_field, lattice, self._path)

    def _path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path


# -- exterior data --------------------------------------------------------------------

def _smooth_random(coords: np.ndarray, seed: int, modes: int, offset: float, amp: float) -> np.ndarray:
    """Seeded trigonometric sum with values in [offset - amp, offset + amp]."""
    rng = np.random.default_rng(seed)
    k = rng.normal(size=(modes, coords.shape[1])) * 2.0
    phase = rng.uniform(0, 2 * np.pi, modes)
    a = rng.uniform(-1, 1, modes)
    total = np.cos(coords @ k.T + phase) @ a
    return offset + amp * total / np.sum(np.abs(a))


def build_g(g: dict, far: Any, lattice: Lattice, resolve=Path) -> GridFunction:
    kind = g.get("kind")
    X = lattice.coords
    auto = None
    if kind == "constant":
        c = float(g["value"])
        vals = np.full(lattice.size, c)
        auto = ff.affine(ff.ZeroFarField(), 1.0, c)
    elif kind == "radial-power":
        auto = ff.RadialPowerFarField(float(g["A"]), float(g["q"]), tuple(float(c) for c in g["center"]),
                                      bool(g.get("halfspace", False)))
        vals = auto(X)
    elif kind == "random":
        rng = np.random.default_rng(int(g.get("seed", 0)))
        vals = rng.uniform(float(g.get("low", 0.0)), float(g.get("high", 1.0)), lattice.size)
    elif kind == "smooth-random":
        vals = _smooth_random(X, int(g.get("seed", 0)), int(g.get("modes", 6)), float(g.get("offset", 1.0)),
                              float(g.get("amp", 0.5)))
    elif kind == "piecewise":
        vals = np.full(lattice.size, float(g.get("default", 0.0)))
        for piece in g.get("pieces", []):
            lo = np.asarray(piece["lo"], dtype=float)
            hi = np.asarray(piece["hi"], dtype=float)
            inside = np.all((X >= lo - 1e-12) & (X <= hi + 1e-12), axis=1)
            vals[inside] = float(piece["value"])
        auto = ff.affine(ff.ZeroFarField(), 1.0, float(g.get("default", 0.0)))
    elif kind == "csv":
        from .io import read_grid_csv
        vals = read_grid_csv(resolve(g["path"]), lattice)
    else:
        raise ValidationError(f"unknown g kind {kind!r}")
    if far == "auto" or far is None:
        far_f = auto if auto is not None else ff.ZeroFarField()
    else:
        far_f = ff.far_field_from_dict(far)
    return GridFunction(lattice, vals, far_f)


# -- parsing ----------------------------------------------------------------------

def _block(cls, raw: dict | None, name: str):
    raw = dict(raw or {})
    names = set(cls.__dataclass_fields__)
    extra = set(raw) - names
    if extra:
        raise ValidationError(f"unknown keys in {name}: {sorted(extra)}")
    return cls(**raw)


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``key.sub=value`` overrides; values parse as JSON when they can."""
    out = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override must look like key=value, got {item!r}")
        key, val = item.split("=", 1)
        try:
            value = json.loads(val)
        except json.JSONDecodeError:
            value = val
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ValidationError(f"cannot override inside non-object at {key!r}")
        node[parts[-1]] = value
    return out


def parse_config(raw: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__) - {"base_dir"}
    extra = set(raw) - known - {"schema_version"}
    if extra:
        raise ValidationError(f"unknown top-level keys: {sorted(extra)}")
    cfg = ExperimentConfig(
        subcommand=raw.get("subcommand", "solve"),
        kernel=_block(KernelConfig, raw.get("kernel"), "kernel"),
        lattice=_block(LatticeConfig, raw.get("lattice"), "lattice"),
        problem=_block(ProblemConfig, raw.get("problem"), "problem"),
        report=_block(ReportConfig, raw.get("report"), "report"),
        solver=dict(raw.get("solver") or {}),
        quadrature=dict(raw.get("quadrature") or {}),
        sweep=_block(SweepConfig, raw.get("sweep"), "sweep"),
        counterexample=_block(CounterexampleConfig, raw.get("counterexample"), "counterexample"),
        output=_block(OutputConfig, raw.get("output"), "output"),
        base_dir=str(base_dir),
    )
    validate(cfg)
    return cfg


def load_config(path: str | Path, overrides: list[str] | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from None
    return parse_config(apply_overrides(raw, overrides or []), base_dir=path.parent)


def validate(cfg: ExperimentConfig) -> None:
    """Build every object the run will need, so bad values fail before compute."""
    if cfg.subcommand not in SUBCOMMANDS:
        raise ValidationError(f"unknown subcommand {cfg.subcommand!r}")
    try:
        if cfg.subcommand in ("iterate", "absorb"):
            return
        lat = cfg.lattice_obj()
        spec = cfg.kernel_spec(lat)
        if spec.dim != lat.dim:
            raise ValidationError("kernel.n does not match the lattice dimension")
        cfg.solver_config()
        if cfg.subcommand == "covering":
            return
        cfg.omega(lat)
        g = cfg.problem.g
        if g.get("kind") == "csv" and not cfg._path(g["path"]).exists():
            raise ValidationError(f"g file {g['path']} does not exist")
        cfg.exterior_data(lat)
    except TypeError as exc:
        raise ValidationError(f"bad config field: {exc}") from None
    except KeyError as exc:
        raise ValidationError(f"missing config field {exc}") from None
