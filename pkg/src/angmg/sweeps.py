"""Block Gauss-Seidel transport sweeps.

Every leaf patch sits inside one octant, so on an axis-aligned grid each patch
is either purely incoming or purely outgoing through each element face. The
(element, patch) blocks are then visited in the upwind order of the patch's
octant and all inflow comes from blocks that are already updated: one
standard sweep applies L^-1 exactly.

Elements on one wavefront (same distance from the upwind corner) share no
face and are solved together; the arithmetic per block does not depend on
this batching.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scatter import angular_scatter_matrix
from .spatial import wavefronts
from .transport import ProblemOperators, apply_A

__all__ = ["SweepPlan", "SingularBlockError", "build_sweep_plan", "standard_sweep", "coarse_scatter_sweep"]


class SingularBlockError(np.linalg.LinAlgError):
    """A diagonal block could not be inverted (check that sigma_t > 0)."""


@dataclass(frozen=True)
class SweepPlan:
    patches: list  # per octant: leaf positions owned by that octant
    fronts: list  # per octant: list of element index arrays
    faces: list  # per octant: faces that carry inflow for its patches
    binv: np.ndarray  # (np, nb, nb) inverse of the implicit block L_I(j, q)


def _invert(blocks: np.ndarray) -> np.ndarray:
    sv = np.linalg.svd(blocks, compute_uv=False)
    if np.any(sv[:, -1] <= 1e-13 * sv[:, 0]):
        raise SingularBlockError("singular transport block; is sigma_t > 0?")
    return np.linalg.inv(blocks)


def build_sweep_plan(ops: ProblemOperators) -> SweepPlan:
    octs = ops.mesh.octants
    patches, fronts, faces = [], [], []
    for o in range(8):
        qs = np.flatnonzero(octs == o)
        patches.append(qs)
        fronts.append(wavefronts(ops.hexmesh, o))
        faces.append([f for f in range(6) if np.intersect1d(ops.incoming[f], qs).size])
    return SweepPlan(patches, fronts, faces, _invert(ops.B))


def standard_sweep(plan: SweepPlan, ops: ProblemOperators, rhs: np.ndarray) -> np.ndarray:
    """One pass of L_I phi = rhs; returns phi in the operator layout."""
    npatch, nel = ops.shape[:2]
    nb = ops.block
    rhs = rhs.reshape(npatch, nel, nb)
    out = np.empty((npatch, nel, nb))
    nbr = ops.hexmesh.neighbors
    for o in range(8):
        qs = plan.patches[o]
        if qs.size == 0:
            continue
        work = np.zeros((qs.size, nel + 1, nb))  # last slot: vacuum ghost
        src = rhs[qs]
        binv_t = plan.binv[qs].transpose(0, 2, 1)
        inflow = [(ops.C[f, qs].transpose(0, 2, 1), nbr[:, f]) for f in plan.faces[o]]
        for front in plan.fronts[o]:
            acc = src[:, front]
            for ct, up in inflow:
                acc = acc - np.matmul(work[:, up[front]], ct)
            work[:, front] = np.matmul(acc, binv_t)
        out[qs] = work[:, :nel]
    return out.reshape(ops.shape)


class _ScatterBlocks:
    """Per-patch pieces of the scatter operator used inside the coarse sweep."""

    def __init__(self, ops: ProblemOperators):
        sig = ops.kernel.effective_moments(ops.scatter_order)
        nh = len(sig) ** 2
        self.X = ops.couplings.X[:, :, :nh]  # (np, da, nh)
        self.sX = self.X * sig[ops.couplings.degree[:nh]]
        S = angular_scatter_matrix(ops.kernel, ops.couplings, ops.scatter_order)
        da = ops.ang.dofs
        npatch = ops.ang.n_patches
        S = S.reshape(npatch, da, npatch, da)
        self.self_blocks = np.stack([np.kron(ops.em.N, S[q, :, q, :]) for q in range(npatch)])


def coarse_scatter_sweep(
    plan: SweepPlan,
    ops: ProblemOperators,
    rhs: np.ndarray,
    nu: int = 10,
    phi: np.ndarray | None = None,
    history: list | None = None,
) -> np.ndarray:
    """``nu`` block Gauss-Seidel passes on (L - S) phi = rhs.

    Each (element, patch) block solve keeps that patch's own scatter
    self-coupling on the implicit side; scatter from other patches and
    upwind inflow use the latest values. ``history``, when given, receives
    the residual norm after every pass.
    """
    npatch, nel, ns, da = ops.shape
    nb = ops.block
    phi = ops.zeros() if phi is None else np.array(phi, dtype=float).reshape(ops.shape)
    if nu <= 0:
        return phi
    cache = ops._dense.setdefault("coarse_sweep", {})
    key = ops.scatter_order
    if key not in cache:
        blocks = _ScatterBlocks(ops)
        cache[key] = (blocks, _invert(ops.B - blocks.self_blocks))
    blocks, binv = cache[key]
    binv_t = binv.transpose(0, 2, 1)
    self_t = blocks.self_blocks.transpose(0, 2, 1)
    Nmat = ops.em.N

    rhs = rhs.reshape(npatch, nel, nb)
    work = np.zeros((npatch, nel + 1, nb))
    work[:, :nel] = phi.reshape(npatch, nel, nb)
    nbr = ops.hexmesh.neighbors
    inflow_t = ops.C.transpose(0, 1, 3, 2)
    # element flux moments sum_{p,d} X[p,d,h] phi[p,j,i,d], updated in place
    moments = np.einsum("pjid,pdh->jih", work[:, :nel].reshape(npatch, nel, ns, da), blocks.X)

    for _ in range(nu):
        for o in range(8):
            for front in plan.fronts[o]:
                for q in plan.patches[o]:
                    acc = rhs[q, front].copy()
                    for f in plan.faces[o]:
                        acc -= work[q, nbr[front, f]] @ inflow_t[f, q]
                    scat = np.einsum("eih,mh->eim", moments[front], blocks.sX[q])
                    acc += np.einsum("li,eim->elm", Nmat, scat).reshape(len(front), nb)
                    old = work[q, front]
                    acc -= old @ self_t[q]
                    new = acc @ binv_t[q]
                    work[q, front] = new
                    delta = (new - old).reshape(len(front), ns, da)
                    moments[front] += np.einsum("eid,dh->eih", delta, blocks.X[q])
        if history is not None:
            cur = work[:, :nel].reshape(ops.shape)
            history.append(float(np.linalg.norm(rhs.reshape(ops.shape) - apply_A(ops, cur))))
    return work[:, :nel].reshape(ops.shape).copy()
