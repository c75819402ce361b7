"""Single-grid and V(1,1) iteration counts on the uniform-source cube.

Scans basis x angular level x N and writes one summary.csv. Defaults to the
10^3 desk grid; pass --cells 30 for the full-size grid (slow).
"""
import argparse
from dataclasses import replace
from pathlib import Path

from angmg.config import RunConfig
from angmg.harness import build_problem, solve, write_summary


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, default=10)
    ap.add_argument("--orders", type=int, nargs="+", default=[4, 8, 16])
    ap.add_argument("--levels", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--out", type=Path, default=Path("out/iteration_table"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    results = []
    print(f"{'basis':>5} {'level':>5} {'N':>3} {'sweep':>6} {'V(1,1)':>7}")
    for basis in ("const", "lin"):
        for level in args.levels:
            for N in args.orders:
                cfg = RunConfig(nx=args.cells, ny=args.cells, nz=args.cells, basis=basis, level=level, N=N, max_iter=2000)
                prob = build_problem(cfg)
                sg = solve(prob, replace(cfg, preconditioner="sweep"), label="sweep")
                mg = solve(prob, replace(cfg, preconditioner="mg", cycle="v11"), label="v11")
                results += [sg, mg]
                print(f"{basis:>5} {level:>5} {N:>3} {sg.report.iterations:>6} {mg.report.iterations:>7}", flush=True)
    write_summary(args.out / "summary.csv", results)


if __name__ == "__main__":
    main()
