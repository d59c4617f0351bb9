"""Command line front end: ``fracp [subcommand] --config run.json --set key=value``.

Exit codes: 0 success, 2 invalid input, 3 solver did not converge,
4 a report hypothesis failed on the data. Errors are also written to
standard error as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import SUBCOMMANDS, ExperimentConfig, load_config, parse_config, apply_overrides
from .errors import FracpError, PreconditionError, SingularityError, ValidationError
from .harnack import (DeGiorgiSequence, absorb_bound_check, build_problem, constant_sweep, counterexample_run,
                      covering_dilate, evaluate_reports, geometric_iteration, solve_problem)
from .harnack.experiments import SWEEP_COLUMNS
from .lattice import Ball, ball_nodes
from .svg import write_plot

log = logging.getLogger("fracp")

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_PRECONDITION = 0, 2, 3, 4


class NotConverged(FracpError):
    pass


def _artifact(cfg: ExperimentConfig, **body) -> dict:
    return {"schema_version": io.SCHEMA_VERSION, "subcommand": cfg.subcommand, "config": cfg.to_dict(), **body}


def _out(cfg: ExperimentConfig, suffix: str) -> Path:
    return Path(cfg.output.dir) / f"{cfg.output.prefix}_{suffix}"


def _write_solution(cfg: ExperimentConfig, prob, sol) -> None:
    io.write_grid(_out(cfg, "u.csv"), sol.u, cfg.to_dict())
    io.write_json(_out(cfg, "run.json"), _artifact(cfg, run=sol.run_report()))
    if prob.lattice.dim == 1 and cfg.output.svg:
        rc = cfg.report
        radii = {k: v for k, v in (("B_r", rc.r), ("B_R", rc.R)) if v is not None}
        x0 = rc.x0[0] if rc.x0 else None
        write_plot(_out(cfg, "u.svg"), sol.u, prob.omega, x0, radii, title=f"{cfg.subcommand}: u")


def _solve(cfg: ExperimentConfig):
    prob = build_problem(cfg)
    sol = solve_problem(prob)
    _write_solution(cfg, prob, sol)
    if not sol.converged:
        raise NotConverged(f"solver stopped ({sol.stop_reason}) after {sol.iterations} iterations with gradient "
                           f"{sol.final_grad_norm:.3e} (scale {sol.grad_scale:.3g})")
    return prob, sol


def _covering(cfg: ExperimentConfig) -> dict:
    rc = cfg.report
    if rc.x0 is None or rc.r is None or rc.delta_bar is None:
        raise ValidationError("covering needs report.x0, report.r and report.delta_bar")
    lat = cfg.lattice_obj()
    ball = Ball(tuple(rc.x0), rc.r)
    B = ball_nodes(lat, ball)
    spec = rc.set or {"kind": "random", "fraction": 0.3, "seed": 0}
    kind = spec.get("kind")
    if kind == "random":
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        E = B[rng.random(B.size) < float(spec.get("fraction", 0.3))]
    elif kind == "nodes":
        E = np.asarray(spec["nodes"], dtype=np.int64)
    elif kind == "all":
        E = B
    else:
        raise ValidationError(f"unknown report.set kind {kind!r}")
    res = covering_dilate(lat, E, ball, float(rc.delta_bar))
    return {"covering": res.to_dict(), "E": [int(i) for i in E]}


def _iterate(cfg: ExperimentConfig) -> dict:
    it = dict(cfg.report.iterate or {})
    try:
        seq = DeGiorgiSequence(float(it["A0"]), float(it["c0"]), float(it["b"]), float(it["beta"]))
    except KeyError as exc:
        raise ValidationError(f"report.iterate is missing {exc}") from None
    return {"iteration": geometric_iteration(seq, int(it.get("jmax", 20))).to_dict()}


def _absorb(cfg: ExperimentConfig) -> dict:
    a = dict(cfg.report.absorb or {})
    try:
        T0, T1, n = float(a.get("T0", 0.0)), float(a.get("T1", 1.0)), int(a.get("n", 64))
        c1, c2, theta, zeta = (float(a[k]) for k in ("c1", "c2", "theta", "zeta"))
    except KeyError as exc:
        raise ValidationError(f"report.absorb is missing {exc}") from None
    t = np.linspace(T0, T1, n, endpoint=False)
    f = a.get("f", "zero")
    if f == "zero":
        fv = np.zeros(n)
    elif f == "constant":
        fv = np.full(n, float(a.get("value", c2)))
    elif f == "power":
        fv = (T1 - t) ** (-theta)
    elif isinstance(f, list):
        fv = np.asarray(f, dtype=float)
    else:
        raise ValidationError(f"unknown report.absorb.f {f!r}")
    return {"absorb": absorb_bound_check(t, fv, c1, c2, theta, zeta).to_dict(), "t": t, "f": fv}


def execute(cfg: ExperimentConfig) -> int:
    sub = cfg.subcommand
    if sub == "solve":
        _solve(cfg)
        return EXIT_OK
    if sub in ("covering", "iterate", "absorb"):
        body = {"covering": _covering, "iterate": _iterate, "absorb": _absorb}[sub](cfg)
        io.write_json(_out(cfg, f"{sub}.json"), _artifact(cfg, **body))
        return EXIT_OK
    if sub == "sweep":
        summary = constant_sweep(cfg)
        io.write_rows(_out(cfg, "sweep.csv"), summary.rows, SWEEP_COLUMNS)
        io.write_json(_out(cfg, "sweep.json"), _artifact(cfg, summary=summary.to_dict()))
        return EXIT_OK
    if sub == "counterexample":
        res = counterexample_run(cfg.counterexample.m, cfg)
        cols = ["m", "depth", "sup", "inf", "tail_term", "classical_ratio", "implied_constant", "passed",
                "converged", "iterations", "error"]
        io.write_rows(_out(cfg, "counterexample.csv"), res.rows, cols)
        io.write_json(_out(cfg, "counterexample.json"), _artifact(cfg, counterexample=res.to_dict()))
        return EXIT_OK
    prob, sol = _solve(cfg)
    reps = evaluate_reports(sub, sol, cfg.report)
    io.write_json(_out(cfg, "report.json"),
                  _artifact(cfg, run=sol.run_report(), reports=[r.to_dict() for r in reps]))
    return EXIT_OK


def _fail(code: int, exc: Exception) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    node = getattr(exc, "node", None)
    if node is not None:
        err["node"] = node
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracp", description="Lattice experiments for nonlocal p-Laplace equations.")
    ap.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS, help="overrides the config's subcommand")
    ap.add_argument("--config", help="JSON config file (defaults are used when omitted)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted-path override, e.g. kernel.p=3 (repeatable)")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    overrides = list(args.set)
    if args.subcommand:
        overrides.append(f"subcommand={args.subcommand}")
    if args.out:
        overrides.append(f"output.dir={json.dumps(args.out)}")
    try:
        if args.config:
            cfg = load_config(args.config, overrides)
        else:
            cfg = parse_config(apply_overrides({}, overrides))
        return execute(cfg)
    except (ValidationError, SingularityError) as exc:
        return _fail(EXIT_INVALID, exc)
    except NotConverged as exc:
        return _fail(EXIT_NOT_CONVERGED, exc)
    except PreconditionError as exc:
        return _fail(EXIT_PRECONDITION, exc)
    except FracpError as exc:
        return _fail(EXIT_INVALID, exc)


if __name__ == "__main__":
    sys.exit(main())
