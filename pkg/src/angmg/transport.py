"""Matrix-free discrete transport operator and right-hand sides.

Flux vectors are arrays of shape ``(n_patches, n_elements, ns, da)``: one
(ns x da) block per (patch, element) pair, patch-major. Only the small
per-patch and per-element matrices are stored; block couplings are Kronecker
products ``kron(spatial, angular)`` of those.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .angular import AXIS_NORMALS, BasisKind, PatchOperators, basis_at_bary, build_patch_operators
from .scatter import (
    HarmonicCouplings,
    ScatterKernel,
    angular_scatter_matrix,
    apply_scatter,
    build_couplings,
)
from .spatial import FACE_AXIS, ElementMatrices, HexMesh, SpatialBasis, element_matrices
from .sphere_mesh import AngularMesh

__all__ = [
    "ProblemOperators",
    "UniformSource",
    "BeamSource",
    "build_operators",
    "apply_L",
    "apply_S",
    "apply_A",
    "assemble_rhs",
    "particle_balance",
    "scalar_flux",
]


@dataclass
class ProblemOperators:
    hexmesh: HexMesh
    sbasis: SpatialBasis
    em: ElementMatrices
    ang: PatchOperators
    kernel: ScatterKernel
    couplings: HarmonicCouplings
    scatter_order: int
    B: np.ndarray = field(repr=False)  # (np, nb, nb) self block of L
    C: np.ndarray = field(repr=False)  # (6, np, nb, nb) upwind neighbor coupling
    incoming: list = field(repr=False)  # per face: patch indices with inflow
    _dense: dict = field(default_factory=dict, repr=False)

    @property
    def mesh(self) -> AngularMesh:
        return self.ang.mesh

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.ang.n_patches, self.hexmesh.n_elements, self.sbasis.dofs, self.ang.dofs)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def block(self) -> int:
        return self.sbasis.dofs * self.ang.dofs

    @property
    def sigma_t(self) -> float:
        return self.kernel.sigma_t

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def scatter_dense(self, order: int) -> np.ndarray | None:
        """Dense angular scatter matrix when it is the cheaper route."""
        nd = self.ang.n_patches * self.ang.dofs
        if nd > 2 * (order + 1) ** 2:
            return None
        if order not in self._dense:
            self._dense[order] = angular_scatter_matrix(self.kernel, self.couplings, order)
        return self._dense[order]


def build_operators(
    hexmesh: HexMesh,
    mesh: AngularMesh,
    kind: BasisKind | str,
    kernel: ScatterKernel,
    scatter_order: int | None = None,
    spatial_order: int = 1,
    quad_order: int | None = None,
) -> ProblemOperators:
    """Discretize the problem directly on one (spatial, angular) mesh pair."""
    kind = BasisKind.parse(kind)
    order = kernel.N if scatter_order is None else scatter_order
    if order > kernel.N:
        raise ValueError(f"scatter order {order} exceeds kernel order {kernel.N}")
    quad_order = quad_order or (8 if kernel.N <= 12 else 12)
    sbasis = SpatialBasis(spatial_order)
    em = element_matrices(hexmesh, sbasis)
    ang = build_patch_operators(mesh, kind, quad_order)
    couplings = build_couplings(mesh, kind, order)

    npatch = ang.n_patches
    st = kernel.sigma_t
    B = np.stack(
        [
            st * np.kron(em.N, ang.M[q])
            - sum(np.kron(em.V[x], ang.A[q, x]) for x in range(3))
            + sum(np.kron(em.F_self[f], ang.a_out[f, q]) for f in range(6))
            for q in range(npatch)
        ]
    )
    C = np.stack(
        [np.stack([np.kron(em.F_nbr[f], ang.a_in[f, q]) for q in range(npatch)]) for f in range(6)]
    )
    incoming = [np.flatnonzero(np.abs(ang.a_in[f]).reshape(npatch, -1).max(axis=1) > 0) for f in range(6)]
    return ProblemOperators(hexmesh, sbasis, em, ang, kernel, couplings, order, B, C, incoming)


def _check(ops: ProblemOperators, phi: np.ndarray) -> np.ndarray:
    if phi.size != ops.size:
        raise ValueError(f"flux vector of size {phi.size} does not match layout {ops.shape}")
    return phi.reshape(ops.shape)


def _padded(ops: ProblemOperators, phi: np.ndarray) -> np.ndarray:
    npatch, nel = ops.shape[:2]
    out = np.zeros((npatch, nel + 1, ops.block))
    out[:, :nel] = phi.reshape(npatch, nel, ops.block)
    return out


def apply_L(ops: ProblemOperators, phi: np.ndarray) -> np.ndarray:
    """Streaming plus removal with the upwind numerical flux (vacuum boundaries)."""
    phi = _check(ops, phi)
    npatch, nel = ops.shape[:2]
    nb = ops.block
    flat = phi.reshape(npatch, nel, nb)
    y = np.matmul(flat, ops.B.transpose(0, 2, 1))
    pad = _padded(ops, phi)
    nbr = ops.hexmesh.neighbors
    for f in range(6):
        qs = ops.incoming[f]
        if len(qs) == 0:
            continue
        y[qs] += np.matmul(pad[qs][:, nbr[:, f]], ops.C[f, qs].transpose(0, 2, 1))
    return y.reshape(ops.shape)


def apply_S(ops: ProblemOperators, phi: np.ndarray, scatter_order: int | None = None) -> np.ndarray:
    order = ops.scatter_order if scatter_order is None else scatter_order
    if order > ops.scatter_order:
        raise ValueError(f"scatter order {order} exceeds operator order {ops.scatter_order}")
    phi = _check(ops, phi)
    return apply_scatter(
        ops.kernel, ops.couplings, ops.em.N, phi, order, dense=ops.scatter_dense(order)
    )


def apply_A(ops: ProblemOperators, phi: np.ndarray, scatter_order: int | None = None) -> np.ndarray:
    return apply_L(ops, phi) - apply_S(ops, phi, scatter_order)


@dataclass(frozen=True)
class UniformSource:
    strength: float = 1.0  # particles / cm^3 / s, isotropic


@dataclass(frozen=True)
class BeamSource:
    """Unit incoming partial current per cm^2 on the z = 0 face."""

    footprint: tuple[float, float, float, float] = (2.0, 3.0, 2.0, 3.0)
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)


def _clipped_face_load(ops: ProblemOperators, fp) -> np.ndarray:
    """int over (z = 0 face of each bottom element) cap footprint of Phi_l."""
    hx, hy = ops.hexmesh.h[:2]
    x0, x1, y0, y1 = fp
    g, w = np.polynomial.legendre.leggauss(3)
    g, w = 0.5 * (g + 1), 0.5 * w
    ijk = ops.hexmesh.ijk
    bottom = np.flatnonzero(ijk[:, 2] == 0)
    load = np.zeros((ops.hexmesh.n_elements, ops.sbasis.dofs))
    for j in bottom:
        ax, bx = max(x0, ijk[j, 0] * hx), min(x1, (ijk[j, 0] + 1) * hx)
        ay, by = max(y0, ijk[j, 1] * hy), min(y1, (ijk[j, 1] + 1) * hy)
        if ax >= bx or ay >= by:
            continue
        u = (ax + g * (bx - ax)) / hx - ijk[j, 0]
        v = (ay + g * (by - ay)) / hy - ijk[j, 1]
        U, V = np.meshgrid(u, v, indexing="ij")
        pts = np.stack([U.ravel(), V.ravel(), np.zeros(U.size)], axis=1)
        wts = np.outer(w, w).ravel() * (bx - ax) * (by - ay)
        load[j] = wts @ ops.sbasis.values(pts)
    return load


def beam_angular_weights(mesh: AngularMesh, kind: BasisKind, direction) -> np.ndarray:
    """psi_m(direction) per patch, split equally over all patches whose
    closure contains the direction. Shape (np, da)."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    w = np.zeros((len(mesh), kind.dofs))
    owners = [k for k, p in enumerate(mesh.patches) if p.contains(d, tol=1e-12)]
    for k in owners:
        lam = np.clip(mesh.patches[k].barycentric(d), 0.0, None)
        w[k] = basis_at_bary(kind, lam / lam.sum()) / len(owners)
    return w


def assemble_rhs(ops: ProblemOperators, source) -> np.ndarray:
    if isinstance(source, UniformSource):
        iso = source.strength / (4.0 * np.pi)
        load = ops.em.N.sum(axis=1)
        ang = ops.ang.M.sum(axis=2)  # (np, da) = int psi_m
        f = iso * np.einsum("l,qm->qlm", load, ang)
        return np.broadcast_to(f[:, None], ops.shape).copy()
    if isinstance(source, BeamSource):
        x0, x1, y0, y1 = source.footprint
        Lx, Ly, _ = ops.hexmesh.box
        if not (0 <= x0 < x1 <= Lx and 0 <= y0 < y1 <= Ly):
            raise ValueError("beam footprint must lie inside the z = 0 face")
        d = np.asarray(source.direction, dtype=float)
        d = d / np.linalg.norm(d)
        if d[2] <= 0:
            raise ValueError("beam must enter through the z = 0 face")
        load = _clipped_face_load(ops, source.footprint)
        ang = beam_angular_weights(ops.mesh, ops.ang.kind, d) * d[2]
        return np.einsum("jl,qm->qjlm", load, ang)
    raise TypeError(f"unknown source {source!r}")


def particle_balance(ops: ProblemOperators, phi: np.ndarray, rhs: np.ndarray) -> dict:
    """Source, absorption and boundary leakage rates of a discrete solution."""
    phi = _check(ops, phi)
    vol_w = ops.em.N.sum(axis=1)  # int Phi_i
    ang_w = ops.ang.M.sum(axis=1)  # int psi_d, (np, da)
    total = np.einsum("i,qd,qjid->", vol_w, ang_w, phi)
    absorption = (ops.kernel.sigma_t - ops.kernel.effective_moments(0)[0]) * total
    leak = 0.0
    for f in range(6):
        bdry = ops.hexmesh.boundary_elements(f)
        out_w = ops.ang.a_out[f].sum(axis=1)  # (np, da)
        leak += np.einsum("i,qd,qjid->", ops.em.face_load[f], out_w, phi[:, bdry])
    source = float(rhs.sum())
    return {
        "source": source,
        "absorption": float(absorption),
        "leakage": float(leak),
        "imbalance": float((source - absorption - leak) / source) if source else 0.0,
    }


def scalar_flux(ops: ProblemOperators, phi: np.ndarray) -> np.ndarray:
    """Element-averaged scalar flux (nel,)."""
    phi = _check(ops, phi)
    vol_w = ops.em.N.sum(axis=1)
    ang_w = ops.ang.M.sum(axis=1)
    vol = ops.hexmesh.volumes
    return np.einsum("i,qd,qjid->j", vol_w, ang_w, phi) / vol
