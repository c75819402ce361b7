"""Structured hexahedral grids and the discontinuous Galerkin element matrices."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .sphere_mesh import octant_signs

__all__ = [
    "HexMesh",
    "SpatialBasis",
    "ElementMatrices",
    "build_hex_mesh",
    "element_matrices",
    "sweep_order",
    "wavefronts",
    "FACE_AXIS",
    "FACE_SIDE",
]

# face f: axis f // 2, side 0 (low) or 1 (high); outward normal (-1)**(side+1) e_axis
FACE_AXIS = np.array([0, 0, 1, 1, 2, 2])
FACE_SIDE = np.array([0, 1, 0, 1, 0, 1])


@dataclass(frozen=True)
class HexMesh:
    nx: int
    ny: int
    nz: int
    box: tuple[float, float, float]  # cm

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def h(self) -> np.ndarray:
        return np.array(self.box, dtype=float) / np.array(self.shape)

    @property
    def volumes(self) -> np.ndarray:
        return np.full(self.n_elements, np.prod(self.h))

    def index(self, ix, iy, iz):
        return ix + self.nx * (iy + self.ny * iz)

    @cached_property
    def ijk(self) -> np.ndarray:
        """(nel, 3) integer grid coordinates of every element."""
        iz, iy, ix = np.meshgrid(
            np.arange(self.nz), np.arange(self.ny), np.arange(self.nx), indexing="ij"
        )
        return np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1)

    @cached_property
    def neighbors(self) -> np.ndarray:
        """(nel, 6) neighbor across each face, -1 on the boundary."""
        ijk = self.ijk
        n = np.array(self.shape)
        out = np.full((self.n_elements, 6), -1, dtype=np.int64)
        for f in range(6):
            ax, step = FACE_AXIS[f], 2 * FACE_SIDE[f] - 1
            other = ijk.copy()
            other[:, ax] += step
            ok = (other[:, ax] >= 0) & (other[:, ax] < n[ax])
            out[ok, f] = self.index(*other[ok].T)
        return out

    def face_area(self, f: int) -> float:
        h = self.h
        return float(np.prod(np.delete(h, FACE_AXIS[f])))

    def boundary_elements(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.neighbors[:, f] < 0)

    def centers(self) -> np.ndarray:
        return (self.ijk + 0.5) * self.h


def build_hex_mesh(nx: int, ny: int, nz: int, box=(1.0, 1.0, 1.0)) -> HexMesh:
    if min(nx, ny, nz) < 1:
        raise ValueError("element counts must be >= 1")
    box = (box,) * 3 if np.isscalar(box) else tuple(box)
    if len(box) != 3 or min(box) <= 0:
        raise ValueError("box extents must be three positive lengths")
    return HexMesh(int(nx), int(ny), int(nz), tuple(float(b) for b in box))


@dataclass(frozen=True)
class SpatialBasis:
    """Tensor Lagrange basis on the unit cube, nodes at the corners (p = 1)."""

    order: int = 1

    def __post_init__(self):
        if self.order not in (0, 1):
            raise ValueError("spatial order must be 0 or 1")

    @property
    def dofs(self) -> int:
        return 1 if self.order == 0 else 8

    def values(self, pts: np.ndarray) -> np.ndarray:
        """Shape functions at reference points (nq, 3) -> (nq, dofs)."""
        pts = np.atleast_2d(pts)
        if self.order == 0:
            return np.ones((len(pts), 1))
        one_d = np.stack([1.0 - pts, pts], axis=-1)  # (nq, 3, 2)
        out = np.empty((len(pts), 8))
        for k in range(8):
            a, b, c = k & 1, (k >> 1) & 1, (k >> 2) & 1
            out[:, k] = one_d[:, 0, a] * one_d[:, 1, b] * one_d[:, 2, c]
        return out

    def gradients(self, pts: np.ndarray) -> np.ndarray:
        """Reference gradients (nq, 3, dofs)."""
        pts = np.atleast_2d(pts)
        if self.order == 0:
            return np.zeros((len(pts), 3, 1))
        one_d = np.stack([1.0 - pts, pts], axis=-1)
        d_one = np.array([-1.0, 1.0])
        out = np.empty((len(pts), 3, 8))
        for k in range(8):
            e = (k & 1, (k >> 1) & 1, (k >> 2) & 1)
            for ax in range(3):
                term = np.full(len(pts), d_one[e[ax]])
                for other in range(3):
                    if other != ax:
                        term = term * one_d[:, other, e[other]]
                out[:, ax, k] = term
        return out


@dataclass(frozen=True)
class ElementMatrices:
    N: np.ndarray  # (ns, ns) cm^3
    V: np.ndarray  # (3, ns, ns) cm^2, V[xi, l, i] = int d_xi Phi_l Phi_i
    F_self: np.ndarray  # (6, ns, ns) cm^2
    F_nbr: np.ndarray  # (6, ns, ns) cm^2, neighbor trace in column index
    face_load: np.ndarray  # (6, ns) cm^2, int_face Phi_l
    h: np.ndarray

    @property
    def dofs(self) -> int:
        return self.N.shape[0]


def _gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    g, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (g + 1.0), 0.5 * w


def element_matrices(mesh: HexMesh, basis: SpatialBasis, j: int = 0) -> ElementMatrices:
    """Gauss quadrature of the element integrals (uniform grid: same for all j)."""
    if not 0 <= j < mesh.n_elements:
        raise IndexError(f"element {j} out of range")
    h = mesh.h
    g, w = _gauss01(3)
    U, Vv, W = np.meshgrid(g, g, g, indexing="ij")
    pts = np.stack([U.ravel(), Vv.ravel(), W.ravel()], axis=1)
    wts = np.einsum("i,j,k->ijk", w, w, w).ravel() * np.prod(h)
    phi = basis.values(pts)
    grad = basis.gradients(pts) / h[None, :, None]

    N = np.einsum("q,ql,qi->li", wts, phi, phi)
    V = np.einsum("q,qxl,qi->xli", wts, grad, phi)

    ns = basis.dofs
    F_self = np.empty((6, ns, ns))
    F_nbr = np.empty((6, ns, ns))
    face_load = np.empty((6, ns))
    G1, G2 = np.meshgrid(g, g, indexing="ij")
    fw = np.outer(w, w).ravel()
    for f in range(6):
        ax, side = FACE_AXIS[f], FACE_SIDE[f]
        tang = [a for a in range(3) if a != ax]
        fp = np.empty((len(fw), 3))
        fp[:, tang[0]], fp[:, tang[1]] = G1.ravel(), G2.ravel()
        fp[:, ax] = float(side)
        nb = fp.copy()
        nb[:, ax] = 1.0 - float(side)
        area = mesh.face_area(f)
        own, other = basis.values(fp), basis.values(nb)
        F_self[f] = np.einsum("q,ql,qi->li", fw * area, own, own)
        F_nbr[f] = np.einsum("q,ql,qi->li", fw * area, own, other)
        face_load[f] = (fw * area) @ own
    return ElementMatrices(N, V, F_self, F_nbr, face_load, h)


def _axis_ranges(mesh: HexMesh, octant: int):
    s = octant_signs(octant)
    return [np.arange(n) if s[a] > 0 else np.arange(n)[::-1] for a, n in enumerate(mesh.shape)]


def sweep_order(mesh: HexMesh, octant: int) -> np.ndarray:
    """Lexicographic element order for directions in ``octant`` (x fastest)."""
    if not 0 <= octant < 8:
        raise ValueError("octant must be in 0..7")
    rx, ry, rz = _axis_ranges(mesh, octant)
    iz, iy, ix = np.meshgrid(rz, ry, rx, indexing="ij")
    return mesh.index(ix.ravel(), iy.ravel(), iz.ravel())


def wavefronts(mesh: HexMesh, octant: int) -> list[np.ndarray]:
    """Elements grouped by distance from the upwind corner.

    Elements in one group never share a face, so a group can be solved in
    one batch once all earlier groups are done.
    """
    s = octant_signs(octant)
    n = np.array(mesh.shape)
    ijk = mesh.ijk
    dist = np.where(s > 0, ijk, n - 1 - ijk).sum(axis=1)
    order = np.argsort(dist, kind="stable")
    cuts = np.flatnonzero(np.diff(dist[order])) + 1
    return np.split(order, cuts)
