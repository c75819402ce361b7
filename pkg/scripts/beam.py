"""Pencil beam through the z = 0 face on polar-banded angular meshes.

Compares the sweep preconditioner with V(1,0) and V(1,1) for each l_max.
"""
import argparse
from dataclasses import replace
from pathlib import Path

from angmg.config import RunConfig
from angmg.harness import build_problem, solve, write_summary


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lmax", type=int, nargs="+", default=[2, 3])
    ap.add_argument("-N", type=int, default=8)
    ap.add_argument("--out", type=Path, default=Path("out/beam"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    results = []
    for l_max in args.lmax:
        cfg = RunConfig(basis="lin", angular="banded", l_max=l_max, N=args.N, source="beam", max_iter=2000)
        prob = build_problem(cfg)
        runs = [
            solve(prob, replace(cfg, preconditioner="sweep"), label="sweep"),
            solve(prob, replace(cfg, cycle="v10"), label="v10"),
            solve(prob, replace(cfg, cycle="v11"), label="v11"),
        ]
        print(f"l_max={l_max} patches={len(prob.ops.mesh)} " + " ".join(f"{r.label}={r.report.iterations}" for r in runs), flush=True)
        results += runs
    write_summary(args.out / "summary.csv", results)


if __name__ == "__main__":
    main()
