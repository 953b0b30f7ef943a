"""Run the built-in demos and print checker verdicts next to the oracle curves.

Usage: python3 scripts/run_demos.py [--out DIR] [--jobs N]
"""
import argparse
import os
import time

from gammabdm.config import DEMOS, build_problem, loads_config
from gammabdm.pipeline import run_check, run_oracle, write_oracle_csv, write_report, write_sigma_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="demo_out")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    for name, text in DEMOS.items():
        t0 = time.perf_counter()
        problem = build_problem(loads_config(text, f"<demo {name}>"))
        report = run_check(problem, args.jobs)
        run = run_oracle(problem, report.overall)
        out = os.path.join(args.out, name)
        data = report.to_json_dict()
        data["oracle"] = run.to_json_dict()
        write_report(data, os.path.join(out, "report.json"))
        write_sigma_csv(report, os.path.join(out, "sigma_min.csv"))
        write_oracle_csv(run, os.path.join(out, "oracle_curve.csv"))
        curve = ", ".join(f"{c['sigma_min']:.4g}" for c in run.curve)
        print(f"{name:14s} {report.overall:13s} oracle [{curve}] {run.comparison.verdict:10s} "
              f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
