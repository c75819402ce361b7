"""Angular multigrid preconditioner (linear V-cycle over nested angular meshes).

Coarse levels are rediscretized on coarsened angular meshes; the spatial mesh
is shared by every level. Prolongation is exact interpolation between the
nested patch spaces and restriction is its transpose.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .angular import BasisKind
from .krylov import bicgstab
from .sphere_mesh import AngularMesh, coarsen_to_level
from .sweeps import SweepPlan, build_sweep_plan, coarse_scatter_sweep, standard_sweep
from .transport import ProblemOperators, apply_A, apply_S, build_operators

__all__ = [
    "CycleSpec",
    "MgHierarchy",
    "default_nr",
    "transfer_blocks",
    "build_hierarchy",
    "prolongate",
    "restrict",
    "lmg_vcycle",
    "MultigridPreconditioner",
]

_NR_TABLE = {4: 2, 8: 4, 12: 6, 16: 7, 20: 8, 24: 9}


def default_nr(N: int) -> int:
    """Reduced scatter order used inside the preconditioner for order N."""
    return _NR_TABLE.get(N, min(int(np.floor(N / 2 + 0.5)), 9))


@dataclass(frozen=True)
class CycleSpec:
    nu_pre: int = 1
    nu_post: int = 1
    nr: int | None = None  # None: full order
    coarse_sweeps: int = 10
    coarse_tol: float | None = None  # tolerance-driven coarse solve (study mode)

    @classmethod
    def parse(cls, kind: str, **kw) -> "CycleSpec":
        table = {"v10": (1, 0), "v11": (1, 1), "v21": (2, 1)}
        try:
            pre, post = table[kind.lower().replace("(", "").replace(")", "").replace(",", "")]
        except KeyError:
            raise ValueError(f"unknown cycle {kind!r}") from None
        return cls(pre, post, **kw)

    @property
    def name(self) -> str:
        return f"V({self.nu_pre},{self.nu_post})"


@dataclass
class MgHierarchy:
    meshes: list[AngularMesh]
    ops: list[ProblemOperators]
    plans: list[SweepPlan]
    parents: list  # parents[l]: coarse leaf position of every level-l leaf (l >= 1)
    blocks: list  # blocks[l]: (np_l, da, da) interpolation from the parent patch
    cycle: CycleSpec
    stats: dict = field(default_factory=lambda: {"vcycles": 0, "sweeps": 0, "coarse_sweeps": 0})

    @property
    def L(self) -> int:
        return len(self.meshes) - 1


def transfer_blocks(fine: AngularMesh, coarse: AngularMesh, kind: BasisKind) -> tuple[np.ndarray, np.ndarray]:
    """Parent positions and per-patch interpolation blocks T (fine dof x coarse dof)."""
    kind = BasisKind.parse(kind)
    tree = fine.tree
    coarse_level = coarse.max_level
    parents = np.empty(len(fine), dtype=np.int64)
    T = np.empty((len(fine), kind.dofs, kind.dofs))
    for k, pid in enumerate(fine.leaves):
        anc = tree.ancestor(pid, coarse_level)
        parents[k] = coarse.index(anc)
        if kind is BasisKind.CONST:
            T[k] = 1.0
        else:
            cp, fp = tree[anc], tree[pid]
            T[k] = np.linalg.solve(cp.flat_vertices.T, fp.flat_vertices.T).T
    return parents, T


def build_hierarchy(
    fine_ops: ProblemOperators,
    cycle: CycleSpec,
    kind: BasisKind | str | None = None,
) -> MgHierarchy:
    """Per-level operators discretized directly on T_l at order N_r."""
    kind = BasisKind.parse(kind or fine_ops.ang.kind)
    nr = fine_ops.kernel.N if cycle.nr is None else cycle.nr
    if nr > fine_ops.kernel.N:
        raise ValueError(f"nr = {nr} exceeds N = {fine_ops.kernel.N}")
    fine = fine_ops.mesh
    L = fine.max_level
    meshes = [coarsen_to_level(fine, l) for l in range(L)] + [fine]
    ops = []
    for l, mesh in enumerate(meshes):
        if l == L:
            ops.append(replace(fine_ops, scatter_order=nr, _dense={}))
        else:
            ops.append(
                build_operators(
                    fine_ops.hexmesh,
                    mesh,
                    kind,
                    fine_ops.kernel,
                    scatter_order=nr,
                    spatial_order=fine_ops.sbasis.order,
                    quad_order=fine_ops.ang.order,
                )
            )
    plans = [build_sweep_plan(o) for o in ops]
    parents, blocks = [None], [None]
    for l in range(1, L + 1):
        p, T = transfer_blocks(meshes[l], meshes[l - 1], kind)
        parents.append(p)
        blocks.append(T)
    return MgHierarchy(meshes, ops, plans, parents, blocks, cycle)


def _check_level(h: MgHierarchy, l: int):
    if not 1 <= l <= h.L:
        raise IndexError(f"transfer level {l} outside 1..{h.L}")


def prolongate(h: MgHierarchy, l: int, coarse: np.ndarray) -> np.ndarray:
    """Level l-1 -> level l."""
    _check_level(h, l)
    coarse = coarse.reshape(h.ops[l - 1].shape)
    return np.einsum("fmd,fjid->fjim", h.blocks[l], coarse[h.parents[l]], optimize=True)


def restrict(h: MgHierarchy, l: int, fine: np.ndarray) -> np.ndarray:
    """Level l -> level l-1, the exact transpose of :func:`prolongate`."""
    _check_level(h, l)
    fine = fine.reshape(h.ops[l].shape)
    tmp = np.einsum("fmd,fjim->fjid", h.blocks[l], fine, optimize=True)
    out = np.zeros(h.ops[l - 1].shape)
    np.add.at(out, h.parents[l], tmp)
    return out


def _smooth(h: MgHierarchy, l: int, phi: np.ndarray, f: np.ndarray, nu: int, zero_guess: bool) -> np.ndarray:
    ops, plan = h.ops[l], h.plans[l]
    for k in range(nu):
        src = f if (zero_guess and k == 0) else f + apply_S(ops, phi)
        phi = standard_sweep(plan, ops, src)
        h.stats["sweeps"] += 1
    return phi


def _coarse_solve(h: MgHierarchy, phi: np.ndarray, f: np.ndarray) -> np.ndarray:
    ops, plan = h.ops[0], h.plans[0]
    if h.cycle.coarse_tol is None:
        h.stats["coarse_sweeps"] += h.cycle.coarse_sweeps
        return coarse_scatter_sweep(plan, ops, f, h.cycle.coarse_sweeps, phi)
    x, _ = bicgstab(
        lambda v: apply_A(ops, v),
        lambda v: standard_sweep(plan, ops, v),
        f,
        tol=h.cycle.coarse_tol,
        max_iter=1000,
        x0=phi if np.any(phi) else None,
    )
    return x


def lmg_vcycle(h: MgHierarchy, l: int, f: np.ndarray, phi: np.ndarray | None = None) -> np.ndarray:
    """One recursive V-cycle on level ``l``; returns the updated iterate."""
    if l == h.L:
        h.stats["vcycles"] += 1
    ops = h.ops[l]
    f = f.reshape(ops.shape)
    zero = phi is None
    phi = ops.zeros() if zero else phi.reshape(ops.shape).copy()
    if l == 0:
        return _coarse_solve(h, phi, f)
    if h.cycle.nu_pre > 0:
        phi = _smooth(h, l, phi, f, h.cycle.nu_pre, zero)
        zero = False
    r = f - apply_A(ops, phi) if not zero else f
    fc = restrict(h, l, r)
    phic = lmg_vcycle(h, l - 1, fc, None)
    phi = phi + prolongate(h, l, phic)
    if h.cycle.nu_post > 0:
        phi = _smooth(h, l, phi, f, h.cycle.nu_post, False)
    return phi


class MultigridPreconditioner:
    """Fixed linear map r -> LMG(0, r, L) for use inside a Krylov solver."""

    def __init__(self, hierarchy: MgHierarchy):
        self.h = hierarchy

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return lmg_vcycle(self.h, self.h.L, r, None)
