"""Right-preconditioned BiCGSTAB."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["SolveReport", "KrylovBreakdown", "bicgstab"]

Operator = Callable[[np.ndarray], np.ndarray]


class KrylovBreakdown(ArithmeticError):
    pass


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)  # ||r|| / ||b|| per iteration
    time_history: list = field(default_factory=list)  # cumulative seconds per iteration
    converged: bool = False
    breakdown: bool = False
    wall_time: float = 0.0
    preconditioner_applications: int = 0
    operator_applications: int = 0
    final_residual: float = float("nan")  # recomputed from scratch at exit
    # one iteration = one full BiCGSTAB step (2 operator + 2 preconditioner calls)
    iteration_convention: str = "full-step"


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b))


def bicgstab(
    apply_A: Operator,
    precond: Operator | None,
    b: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 500,
    x0: np.ndarray | None = None,
    callback: Callable[[int, float], None] | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Solve A x = b with BiCGSTAB, preconditioned on the right.

    The monitored residual is the unpreconditioned ``||b - A x|| / ||b||``.
    When the recursion claims convergence the true residual is recomputed;
    if it disagrees the iteration restarts from the current iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    shape = b.shape
    b = np.asarray(b, dtype=float).ravel()
    M = precond or (lambda v: v)
    rep = SolveReport()
    t0 = time.perf_counter()

    def A(v):
        rep.operator_applications += 1
        return np.asarray(apply_A(v.reshape(shape)), dtype=float).ravel()

    def P(v):
        rep.preconditioner_applications += 1
        return np.asarray(M(v.reshape(shape)), dtype=float).ravel()

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        rep.converged = True
        rep.final_residual = 0.0
        return np.zeros(shape), rep

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float).ravel()
    r = b - A(x) if x0 is not None else b.copy()

    def record(res):
        rep.iterations += 1
        rep.residual_history.append(res)
        rep.time_history.append(time.perf_counter() - t0)
        if callback is not None:
            callback(rep.iterations, res)

    while True:
        r_hat = r.copy()
        rho = alpha = omega = 1.0
        v = np.zeros_like(b)
        p = np.zeros_like(b)
        converged = False
        while rep.iterations < max_iter:
            rho_new = _dot(r_hat, r)
            if rho_new == 0.0 or omega == 0.0:
                rep.breakdown = True
                break
            beta = (rho_new / rho) * (alpha / omega)
            rho = rho_new
            p = r + beta * (p - omega * v)
            p_hat = P(p)
            v = A(p_hat)
            denom = _dot(r_hat, v)
            if denom == 0.0:
                rep.breakdown = True
                break
            alpha = rho / denom
            s = r - alpha * v
            snorm = np.linalg.norm(s) / bnorm
            if snorm < tol:
                x += alpha * p_hat
                r = s
                record(snorm)
                converged = True
                break
            s_hat = P(s)
            t = A(s_hat)
            tt = _dot(t, t)
            omega = _dot(t, s) / tt if tt > 0.0 else 0.0
            x += alpha * p_hat + omega * s_hat
            r = s - omega * t
            res = np.linalg.norm(r) / bnorm
            if not np.isfinite(res):
                raise FloatingPointError("BiCGSTAB produced a non-finite residual")
            record(res)
            if res < tol:
                converged = True
                break
        true_res = np.linalg.norm(b - A(x)) / bnorm
        rep.final_residual = float(true_res)
        if converged and true_res < tol:
            rep.converged = True
            break
        if not converged or rep.iterations >= max_iter or rep.breakdown:
            break
        r = b - A(x)  # recursion drifted: restart from the current iterate

    rep.wall_time = time.perf_counter() - t0
    return x.reshape(shape), rep
