"""Iteration count against the reduced scatter order used inside the V-cycle."""
import argparse
from pathlib import Path

from angmg.config import RunConfig
from angmg.harness import study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--basis", choices=["const", "lin"], default="const")
    ap.add_argument("--level", type=int, default=1)
    ap.add_argument("-N", type=int, default=8)
    ap.add_argument("--orders", type=int, nargs="*", default=None, help="default: 0..N")
    ap.add_argument("--out", type=Path, default=Path("out/nr_study"))
    args = ap.parse_args()
    cfg = RunConfig(basis=args.basis, level=args.level, N=args.N, study_nr=tuple(args.orders or ()), max_iter=2000)
    study(cfg, args.out)


if __name__ == "__main__":
    main()
