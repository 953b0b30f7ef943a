"""Command line entry point.

Exit codes: 0 elliptic, 2 not elliptic, 3 inconclusive, 1 error.  For
``oracle-compare`` and ``demo`` a FLAGGED comparison also yields 3.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .config import DEMOS, ConfigError, build_problem, load_config, loads_config, parse_point
from .fiber import FiberOperator, gaussian_probes, isometry_defect, kappa_xi
from .fredholm import fixedpoint_sigma, laurent_symbol, winding_number
from .geometry import BoundaryCospherePoint
from .pipeline import run_check, run_oracle, write_oracle_csv, write_report, write_sigma_csv

log = logging.getLogger("gammabdm")

EXIT = {"elliptic": 0, "not_elliptic": 2, "inconclusive": 3}


def _load(args):
    if getattr(args, "demo_name", None):
        cfg = loads_config(DEMOS[args.demo_name], f"<demo {args.demo_name}>")
    elif args.config:
        cfg = load_config(args.config)
    else:
        raise ConfigError("--config is required")
    if args.seed is not None:
        cfg.seed = args.seed
    return build_problem(cfg)


def _out_dir(args, problem) -> str:
    return args.out or problem.config.output.dir


def _check(args, verbose: bool) -> int:
    problem = _load(args)
    report = run_check(problem, args.jobs, args.seed)
    out = _out_dir(args, problem)
    data = report.to_json_dict()
    write_report(data, os.path.join(out, problem.config.output.report))
    write_sigma_csv(report, os.path.join(out, problem.config.output.csv))
    if verbose:
        for r in report.per_point:
            s = r.verdict.sigma_min
            print(f"{r.label:40s} {r.kind:8s} {r.path:10s} {r.verdict.status:15s} {s:.6g}")
    print(f"overall: {report.overall} counts={data['counts']}")
    return EXIT[report.overall]


def cmd_check(args) -> int:
    return _check(args, False)


def cmd_sweep(args) -> int:
    return _check(args, True)


def cmd_oracle_compare(args) -> int:
    problem = _load(args)
    if not problem.config.oracle.enabled:
        raise ConfigError("oracle.enabled is false")
    report = run_check(problem, args.jobs, args.seed)
    run = run_oracle(problem, report.overall)
    out = _out_dir(args, problem)
    data = report.to_json_dict()
    data["oracle"] = run.to_json_dict()
    write_report(data, os.path.join(out, problem.config.output.report))
    write_sigma_csv(report, os.path.join(out, problem.config.output.csv))
    write_oracle_csv(run, os.path.join(out, "oracle_curve.csv"))
    curve = ", ".join(f"{c['sigma_min']:.4g}" for c in run.curve)
    print(f"checker: {report.overall}")
    print(f"oracle sigma_min across refinements: [{curve}]")
    print(f"comparison: {run.comparison.verdict} ({run.comparison.reason})")
    if run.comparison.verdict != "CONSISTENT":
        return 3
    return EXIT[report.overall]


def cmd_demo(args) -> int:
    args.demo_name = args.which if args.variant is None else f"{args.which}-{args.variant}"
    if args.demo_name not in DEMOS:
        raise ConfigError(f"unknown demo {args.demo_name!r}")
    return cmd_oracle_compare(args)


def cmd_symbol_eval(args) -> int:
    problem = _load(args)
    geo, grid = problem.geometry, problem.grid
    p = parse_point(args.point, geo)
    tr = problem.triple
    K = args.window
    out: dict = {"point": args.point}
    if isinstance(p, BoundaryCospherePoint):
        if not geo.fixed_point_data(p).topologically_free:
            c = tr.fixedpoint(p, grid, problem.config.fiber.kappa_mode)
            M = c.op.matrix
            out.update(path="fixedpoint", shape=list(M.shape))
            if M.shape == c.full.matrix.shape:
                op = FiberOperator(grid, M)
                mu = geo.fixed_multiplier_scale(p)
                out["unitarity_defect"] = isometry_defect(op, gaussian_probes(grid))
                out["distance_to_kappa"] = float(np.abs(M - kappa_xi(grid, mu).matrix).max())
                out["kappa_scale"] = mu
        else:
            c = tr.boundary(p, (-K, K), grid)
            M = c.op.matrix
            d = c.op.slot_dim
            out.update(path="orbit", shape=list(M.shape))
            full = c.full.matrix
            n = full.shape[0] // d
            out["block_norms"] = {str(i - K): float(np.linalg.norm(full[i * d:(i + 1) * d, :], 2)) for i in range(n)}
        if out["path"] == "fixedpoint":
            out["sigma_min"] = float(np.linalg.svd(M, compute_uv=False).min()) if M.size else None
            out["resolved_sigma_min"], out["resolved_window"] = fixedpoint_sigma(
                c, grid, geo.fixed_multiplier_scale(p), tr.D.band)
        else:
            out["sigma_min"] = float(np.linalg.svd(M, compute_uv=False).min()) if M.size else None
        if args.full:
            out["matrix"] = _mat(M)
    else:
        c = tr.interior(p, (-K, K))
        M = c.op.matrix
        out.update(path="orbit", shape=list(M.shape), matrix=_mat(M), laurent=bool(c.op.laurent))
        out["sigma_min"] = float(np.linalg.svd(M, compute_uv=False).min()) if M.size else None
        if c.op.laurent and problem.config.operator.matrix_size == 1 and M.size:
            mid = M.shape[0] // 2
            coeffs = {int(j - mid): complex(M[mid, j]) for j in range(M.shape[1]) if abs(M[mid, j]) > 0}
            theta = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
            out["laurent_coefficients"] = {str(k): [v.real, v.imag] for k, v in coeffs.items()}
            out["winding_number"] = winding_number(laurent_symbol(coeffs, theta))
    print(json.dumps(out, indent=2))
    return 0


def _mat(M):
    M = np.asarray(M)
    if np.allclose(M.imag, 0):
        return np.round(M.real, 12).tolist()
    return [[[z.real, z.imag] for z in row] for row in M]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML problem configuration")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for the point sweep")
    common.add_argument("--out", help="output directory (default: output.dir of the config)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="gammabdm", description="Trajectory ellipticity checker for shift-perturbed transmission problems.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="run the ellipticity check").set_defaults(func=cmd_check)
    sub.add_parser("sweep", parents=[common], help="check and print every sampled point").set_defaults(func=cmd_sweep)
    p = sub.add_parser("symbol-eval", parents=[common], help="print the trajectory symbol at one point")
    p.add_argument("--point", required=True, help="YAML mapping, e.g. '{kind: boundary, level: 0, angle: 0.3}'")
    p.add_argument("--window", type=int, default=4, help="half-width of the slot window")
    p.add_argument("--full", action="store_true", help="include boundary matrices in the output")
    p.set_defaults(func=cmd_symbol_eval)
    sub.add_parser("oracle-compare", parents=[common], help="check plus dense oracle comparison").set_defaults(func=cmd_oracle_compare)
    p = sub.add_parser("demo", parents=[common], help="built-in demos")
    p.add_argument("which", choices=["disc", "cylinder"])
    p.add_argument("--variant", choices=["sin"], default=None, help="cylinder only: multiplication by sin(x)")
    p.set_defaults(func=cmd_demo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
