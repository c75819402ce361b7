"""Experiment runner: build a problem from a RunConfig, solve, write CSVs."""
from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import RunConfig, format_config, format_value
from .krylov import SolveReport, bicgstab
from .multigrid import CycleSpec, MultigridPreconditioner, build_hierarchy
from .scatter import fp_equivalent_moments
from .spatial import build_hex_mesh
from .sphere_mesh import build_banded_mesh, build_uniform_mesh
from .sweeps import build_sweep_plan, standard_sweep
from .transport import (
    BeamSource,
    ProblemOperators,
    UniformSource,
    apply_A,
    assemble_rhs,
    build_operators,
    particle_balance,
    scalar_flux,
)

__all__ = ["Problem", "RunResult", "build_problem", "solve", "run", "study", "run_header"]


@dataclass
class Problem:
    cfg: RunConfig
    ops: ProblemOperators
    rhs: np.ndarray
    setup_seconds: float


@dataclass
class RunResult:
    cfg: RunConfig
    report: SolveReport
    phi: np.ndarray = field(repr=False)
    balance: dict
    label: str = ""


def build_problem(cfg: RunConfig) -> Problem:
    t0 = time.perf_counter()
    hexmesh = build_hex_mesh(cfg.nx, cfg.ny, cfg.nz, cfg.box_cm)
    mesh = build_uniform_mesh(cfg.level) if cfg.angular == "uniform" else build_banded_mesh(cfg.l_max)
    kernel = fp_equivalent_moments(cfg.N, cfg.alpha, cfg.sigma_a, cfg.transport_correction)
    ops = build_operators(hexmesh, mesh, cfg.basis, kernel, spatial_order=cfg.spatial_order)
    if cfg.source == "uniform":
        src = UniformSource(cfg.source_strength)
    else:
        src = BeamSource(tuple(cfg.beam_footprint_cm))
    rhs = assemble_rhs(ops, src)
    return Problem(cfg, ops, rhs, time.perf_counter() - t0)


def _preconditioner(prob: Problem, cfg: RunConfig):
    ops = prob.ops
    if cfg.preconditioner == "sweep":
        plan = build_sweep_plan(ops)
        return lambda v: standard_sweep(plan, ops, v)
    cycle = CycleSpec.parse(cfg.cycle, nr=cfg.nr, coarse_sweeps=cfg.coarse_sweeps, coarse_tol=cfg.coarse_tol)
    return MultigridPreconditioner(build_hierarchy(ops, cycle))


def solve(prob: Problem, cfg: RunConfig | None = None, label: str = "") -> RunResult:
    """Solve the problem with the solver settings of ``cfg`` (default: its own)."""
    cfg = cfg or prob.cfg
    ops = prob.ops
    M = _preconditioner(prob, cfg)
    phi, rep = bicgstab(lambda v: apply_A(ops, v), M, prob.rhs, tol=cfg.tol, max_iter=cfg.max_iter)
    return RunResult(cfg, rep, phi, particle_balance(ops, phi, prob.rhs), label)


def run_header(cfg: RunConfig) -> str:
    lines = ["# effective configuration"] + format_config(cfg).splitlines()
    lines.append(f"# unknowns = {cfg.unknowns}")
    lines.append(f"# estimated peak memory = {cfg.memory_estimate_mb():.0f} MB")
    return "\n".join(lines) + "\n"


def write_convergence(path: Path, rep: SolveReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "rel_residual", "cumulative_seconds"])
        for k, (r, t) in enumerate(zip(rep.residual_history, rep.time_history), start=1):
            w.writerow([k, f"{r:.12e}", f"{t:.4f}"])


def write_summary(path: Path, results: list[RunResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        keys = list(asdict(results[0].cfg))
        w.writerow(keys + ["label", "iterations", "wall_seconds", "converged", "final_residual", "imbalance"])
        for res in results:
            echo = [format_value(v) for v in asdict(res.cfg).values()]
            rep = res.report
            w.writerow(
                echo
                + [
                    res.label,
                    rep.iterations,
                    f"{rep.wall_time:.3f}",
                    int(rep.converged),
                    f"{rep.final_residual:.3e}",
                    f"{res.balance['imbalance']:.3e}",
                ]
            )


def _dump_scalar_flux(path: Path, prob: Problem, phi: np.ndarray) -> None:
    hm = prob.ops.hexmesh
    flux = scalar_flux(prob.ops, phi)
    with open(path, "w") as fh:
        fh.write("# x y z scalar_flux (element centres, cm)\n")
        for c, v in zip(hm.centers(), flux):
            fh.write(f"{c[0]:.6g} {c[1]:.6g} {c[2]:.6g} {v:.10e}\n")


def _dump_mesh(path: Path, prob: Problem) -> None:
    from .sphere_mesh import dump_mesh

    path.write_text(dump_mesh(prob.ops.mesh))


def run(cfg: RunConfig, out: Path, dump_mesh: bool = False, dump_flux: bool = False, log=print) -> RunResult:
    """Single solve; writes run_header.txt, convergence.csv and summary.csv."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    header = run_header(cfg)
    log(header, end="")
    (out / "run_header.txt").write_text(header)
    prob = build_problem(cfg)
    if dump_mesh:
        _dump_mesh(out / "angular_mesh.txt", prob)
    res = solve(prob, label=cfg.preconditioner)
    write_convergence(out / "convergence.csv", res.report)
    write_summary(out / "summary.csv", [res])
    if dump_flux:
        _dump_scalar_flux(out / "scalar_flux.txt", prob, res.phi)
    rep = res.report
    log(f"{cfg.preconditioner}: {rep.iterations} iterations, converged={rep.converged}, {rep.wall_time:.1f} s")
    return res


def study(cfg: RunConfig, out: Path, log=print) -> list[RunResult]:
    """Single-grid solve plus one multigrid solve per reduced order."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    header = run_header(cfg)
    log(header, end="")
    (out / "run_header.txt").write_text(header)
    prob = build_problem(cfg)
    orders = cfg.study_nr or tuple(range(cfg.N + 1))
    results = [solve(prob, replace(cfg, preconditioner="sweep"), label="sweep")]
    log(f"sweep: {results[0].report.iterations} iterations")
    for nr in orders:
        res = solve(prob, replace(cfg, preconditioner="mg", nr=nr), label=f"mg_nr{nr}")
        write_convergence(out / f"convergence_nr{nr}.csv", res.report)
        log(f"mg nr={nr}: {res.report.iterations} iterations")
        results.append(res)
    write_convergence(out / "convergence.csv", results[0].report)
    write_summary(out / "summary.csv", results)
    return results
