"""Command line: ``python -m angmg solve|study <config> [--out DIR]``."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="angmg", description="Angular multigrid transport solver")
    ap.add_argument("mode", choices=["solve", "study"])
    ap.add_argument("config", type=Path)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--dump-mesh", action="store_true", help="write the angular mesh patch list")
    ap.add_argument("--dump-scalar-flux", action="store_true", help="write element scalar fluxes (debugging)")
    args = ap.parse_args(argv)

    from .config import ConfigError, parse_config

    try:
        cfg = parse_config(args.config.read_text())
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    threads = args.threads or cfg.threads
    if threads:
        cfg.threads = threads
        # BLAS reads these when it is first loaded
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)
    if cfg.unknowns > 2_000_000 and not cfg.allow_large:
        print(
            f"config error: {cfg.unknowns} unknowns (~{cfg.memory_estimate_mb():.0f} MB); "
            "set allow_large = true to run it",
            file=sys.stderr,
        )
        return 1

    from .harness import run, study

    if args.mode == "solve":
        res = run(cfg, args.out, dump_mesh=args.dump_mesh, dump_flux=args.dump_scalar_flux)
        return 0 if res.report.converged else 2
    results = study(cfg, args.out)
    return 0 if all(r.report.converged for r in results) else 2


if __name__ == "__main__":
    sys.exit(main())
