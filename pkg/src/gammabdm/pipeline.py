"""Orchestration shared by the command line and the scripts.

Builds sampling plans from a configuration, runs the checker and the dense
oracle, and writes JSON reports and CSV curves.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, Problem, boundary_variables, interior_variables, parse_point
from .expr import Expression
from .fredholm import EllipticityReport, SamplingPlan, check_ellipticity, default_plan
from .geometry import CospherePoint
from .oracle import Comparison, DenseProblem, DenseTerm, compare, oracle_curve, shift_unitarity

__all__ = [
    "build_plan",
    "run_check",
    "oracle_problem",
    "run_oracle",
    "write_report",
    "write_sigma_csv",
    "write_oracle_csv",
    "OracleRun",
]


def _random_points(problem: Problem, count: int, seed: int) -> list[CospherePoint]:
    rng = np.random.default_rng(seed)
    geo, P = problem.geometry, problem.P1
    lo = P.lo if math.isfinite(P.lo) else 0.0
    hi = P.hi if math.isfinite(P.hi) else 1.0
    pts = []
    for _ in range(count):
        lev = float(rng.uniform(lo, hi))
        ang = float(rng.uniform(0, 2 * math.pi))
        phi = float(rng.uniform(0, 2 * math.pi))
        xi = (math.cos(phi), math.sin(phi))
        if geo.base == "cylinder":
            pts.append(CospherePoint((ang, lev), xi))
        else:
            pts.append(CospherePoint((lev * math.cos(ang), lev * math.sin(ang)), xi))
    return pts


def build_plan(problem: Problem, seed: int | None = None) -> SamplingPlan:
    """Default tensor plan plus explicit and seeded random points."""
    cfg = problem.config
    s = cfg.sweep
    extra_i, extra_b = [], []
    for spec in s.points:
        p = parse_point(spec, problem.geometry)
        (extra_i if isinstance(p, CospherePoint) else extra_b).append(p)
    seed = cfg.seed if seed is None else seed
    extra_i += _random_points(problem, s.random_points, seed)
    plan = default_plan(problem.triple, s.interior_count, s.boundary_count, s.directions, extra_i, extra_b)
    plan.description.update(explicit_points=len(s.points), random_points=s.random_points, seed=seed)
    return plan


def run_check(problem: Problem, jobs: int = 1, seed: int | None = None) -> EllipticityReport:
    plan = build_plan(problem, seed)
    cfg = problem.config
    params = {"config": cfg.to_dict()}
    if seed is not None:
        params["config"]["seed"] = seed
    return check_ellipticity(problem.triple, plan, problem.grid, cfg.fredholm, jobs, cfg.fiber.kappa_mode, params)


# ---------------------------------------------------------------- oracle
_COVECTOR = {"xi", "tau", "absxi", "xi1", "xi2", "side"}


def oracle_problem(problem: Problem) -> DenseProblem:
    """Dense counterpart of a demo-class configuration.

    Requires a dilation by ``q`` on the cylinder or the plane, ``P1 = P2``
    equal to the band ``[0, 1]`` and covector-free multiplication terms.
    """
    cfg, geo = problem.config, problem.geometry
    if geo.group.action != "dilate" or geo.dim != 2:
        raise ConfigError("oracle: only planar dilation geometries are supported")
    if problem.P1.describe() != problem.P2.describe():
        raise ConfigError("oracle: P1 and P2 must coincide")
    P = problem.P1
    if (P.lo, P.hi) != (0.0, 1.0):
        raise ConfigError("oracle: the projection band must be [0, 1]")
    if cfg.operator.matrix_size != 1:
        raise ConfigError("oracle: scalar operators only")
    ivars, bvars = interior_variables(geo), boundary_variables(geo)
    terms = {}
    for k, t in cfg.operator.terms.items():
        if t.multiply is None:
            raise ConfigError(f"oracle: term {k} is not a multiplication")
        ex = Expression.parse(t.multiply, ivars)
        if ex.names & _COVECTOR:
            raise ConfigError(f"oracle: term {k} depends on the covector")
        dex = Expression.parse(t.d, bvars) if t.d is not None else None
        if dex is not None and dex.names & {"xip", "xin", "eta"}:
            raise ConfigError(f"oracle: boundary value of term {k} depends on the covector")
        terms[k] = DenseTerm(_coord_fn(geo.base, ex, ivars), None if dex is None else _coord_fn(geo.base, dex, bvars))
    W = P.W if isinstance(P.W, str) else tuple(P.W)
    if W not in ("inside",) and not isinstance(W, tuple):
        raise ConfigError(f"oracle: unsupported W {W!r}")
    o = cfg.oracle
    return DenseProblem("cylinder" if geo.base == "cylinder" else "disc", terms, geo.group.parameter,
                        o.n_angle, o.cells_per_level, o.depth, W)


def _coord_fn(base: str, ex: Expression, names):
    def f(theta, rho):
        theta, rho = np.broadcast_arrays(np.asarray(theta, float), np.asarray(rho, float))
        if base == "cylinder":
            vals = {"x": theta, "t": rho}
        else:
            vals = {"x1": rho * np.cos(theta), "x2": rho * np.sin(theta), "r": rho}
        vals.update({n: 0.0 for n in names if n not in vals})
        vals["side"] = 1.0 if "side" in names else 0.0
        return np.asarray(ex(**{n: vals[n] for n in names}), dtype=complex) * np.ones(theta.shape)
    return f


@dataclass
class OracleRun:
    curve: list
    comparison: Comparison
    shift: dict
    depth: int

    def to_json_dict(self) -> dict:
        out = self.comparison.to_json_dict()
        out.update({"curve": self.curve, "shift_unitarity": self.shift, "retained_depth": self.depth})
        return out


def run_oracle(problem: Problem, overall: str) -> OracleRun:
    dp = oracle_problem(problem)
    curve = oracle_curve(dp, problem.config.oracle.refinements)
    return OracleRun(curve, compare(overall, curve), shift_unitarity(dp), dp.depth)


# ---------------------------------------------------------------- output
def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def write_report(data: dict, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default, allow_nan=False)
        fh.write("\n")


def write_sigma_csv(report: EllipticityReport, path: str) -> None:
    """One row per (point, window) pair of the finite-section sequences."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["point", "kind", "path", "status", "window", "sigma_min"])
        for r in report.per_point:
            for K, s in r.verdict.sigma_min_sequence:
                w.writerow([r.label, r.kind, r.path, r.verdict.status, int(K),
                            "inf" if not math.isfinite(s) else repr(float(s))])


def write_oracle_csv(run: OracleRun, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "n_angle", "cells_per_level", "sigma_min", "sigma_min_normalized"])
        for c in run.curve:
            w.writerow([c["level"], c["n_angle"], c["cells_per_level"], repr(c["sigma_min"]), repr(c["sigma_min_normalized"])])
