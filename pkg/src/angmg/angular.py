"""Patch-local angular basis functions, quadrature and matrices.

Quadrature on a patch maps a flat-triangle rule through the central projection
x -> x / |x| from the octahedron face to the sphere. For a point x on the face
plane s.x = 1 the solid-angle element is dOmega = dA / (sqrt(3) |x|^3).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sphere_mesh import AngularMesh, Patch

__all__ = [
    "BasisKind",
    "QuadratureRule",
    "PatchOperators",
    "triangle_rule",
    "patch_quadrature",
    "eval_basis",
    "basis_at_bary",
    "mass_matrix",
    "jacobian_matrices",
    "face_split",
    "build_patch_operators",
    "AXIS_NORMALS",
]

_INV_SQRT3 = 1.0 / np.sqrt(3.0)

# outward normals of the six hexahedron faces: -x, +x, -y, +y, -z, +z
AXIS_NORMALS = np.array(
    [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]], dtype=float
)


class BasisKind(enum.Enum):
    CONST = "const"
    LIN = "lin"

    @property
    def dofs(self) -> int:
        return 1 if self is BasisKind.CONST else 3

    @classmethod
    def parse(cls, value) -> "BasisKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (nq, 3) unit directions
    weights: np.ndarray  # (nq,) sr
    bary: np.ndarray  # (nq, 3) flat barycentric coordinates

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def triangle_rule(npts: int, subdiv: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Composite collapsed-Gauss rule on the reference triangle.

    Returns barycentric points (nq, 3) and weights normalized to sum to one.
    The single-triangle rule integrates polynomials of degree 2*npts - 2
    exactly; ``subdiv`` splits the triangle 4**subdiv times first.
    """
    if npts < 1:
        raise ValueError("npts must be positive")
    g, w = np.polynomial.legendre.leggauss(npts)
    g = 0.5 * (g + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(g, g, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    x = u.ravel()
    y = (v * (1.0 - u)).ravel()
    wt = (wu * wv * (1.0 - u)).ravel() * 2.0
    base = np.stack([1.0 - x - y, x, y], axis=1)

    tris = [np.eye(3)]
    for _ in range(subdiv):
        nxt = []
        for t in tris:
            a, b, c = t
            ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
            nxt += [np.array(q) for q in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (bc, ca, ab))]
        tris = nxt
    pts = np.concatenate([base @ t for t in tris])
    wts = np.concatenate([wt / len(tris)] * len(tris))
    return pts, wts


def _rule_size(order: int, level: int) -> tuple[int, int]:
    # Integrands carry 1/|x|^k from the projection; octant-sized patches are
    # split so every sub-triangle is no larger than a level-2 patch.
    return order // 2 + 3, max(0, 2 - level)


def patch_quadrature(patch: Patch, order: int = 8) -> QuadratureRule:
    if order < 1 or order > 60:
        raise ValueError(f"unsupported quadrature order {order}")
    npts, subdiv = _rule_size(order, patch.level)
    return _mapped_rule(patch.flat_vertices, npts, subdiv)


def _flat_area(flat: np.ndarray) -> float:
    return 0.5 * np.linalg.norm(np.cross(flat[1] - flat[0], flat[2] - flat[0]))


def _mapped_rule(flat: np.ndarray, npts: int, subdiv: int) -> QuadratureRule:
    bary, w = triangle_rule(npts, subdiv)
    x = bary @ flat
    r = np.linalg.norm(x, axis=1)
    weights = w * _flat_area(flat) * _INV_SQRT3 / r**3
    return QuadratureRule(x / r[:, None], weights, bary)


def basis_at_bary(kind: BasisKind, bary: np.ndarray) -> np.ndarray:
    """Basis values (..., dofs) at flat barycentric coordinates."""
    bary = np.asarray(bary, dtype=float)
    if kind is BasisKind.CONST:
        return np.ones(bary.shape[:-1] + (1,))
    return bary


def eval_basis(kind: BasisKind, patch: Patch, d: int, omega) -> float:
    omega = np.asarray(omega, dtype=float)
    if not patch.contains(omega, tol=1e-12):
        return 0.0
    if kind is BasisKind.CONST:
        return 1.0
    return float(patch.barycentric(omega)[d])


def mass_matrix(kind: BasisKind, patch: Patch, order: int = 8) -> np.ndarray:
    q = patch_quadrature(patch, order)
    b = basis_at_bary(kind, q.bary)
    return np.einsum("q,qm,qd->md", q.weights, b, b)


def jacobian_matrices(kind: BasisKind, patch: Patch, order: int = 8) -> np.ndarray:
    """A[xi, m, d] = integral of Omega_xi psi_m psi_d over the patch."""
    q = patch_quadrature(patch, order)
    b = basis_at_bary(kind, q.bary)
    return np.einsum("q,qx,qm,qd->xmd", q.weights, q.nodes, b, b)


def _clip(poly: list[np.ndarray], g: np.ndarray, sign: float) -> list[np.ndarray]:
    """Sutherland-Hodgman clip of a flat polygon to sign * (g . x) >= 0."""
    out = []
    n = len(poly)
    for k in range(n):
        a, b = poly[k], poly[(k + 1) % n]
        fa, fb = sign * (g @ a), sign * (g @ b)
        if fa >= 0.0:
            out.append(a)
        if (fa > 0.0 and fb < 0.0) or (fa < 0.0 and fb > 0.0):
            t = fa / (fa - fb)
            out.append(a + t * (b - a))
    return out


def _half_rule(patch: Patch, normal: np.ndarray, sign: float, order: int) -> QuadratureRule | None:
    poly = _clip(list(patch.flat_vertices), normal, sign)
    if len(poly) < 3:
        return None
    npts, subdiv = _rule_size(order, patch.level)
    parts = []
    for k in range(1, len(poly) - 1):
        tri = np.array([poly[0], poly[k], poly[k + 1]])
        if _flat_area(tri) <= 1e-300:
            continue
        rule = _mapped_rule(tri, npts, subdiv)
        # barycentric coordinates with respect to the parent patch
        bary = np.linalg.solve(patch.flat_vertices.T, (rule.bary @ tri).T).T
        parts.append(QuadratureRule(rule.nodes, rule.weights, bary))
    if not parts:
        return None
    return QuadratureRule(
        np.concatenate([p.nodes for p in parts]),
        np.concatenate([p.weights for p in parts]),
        np.concatenate([p.bary for p in parts]),
    )


def face_split(
    kind: BasisKind, patch: Patch, normal, order: int = 8
) -> tuple[np.ndarray, np.ndarray]:
    """Split the face matrix sum_xi n_xi A^xi into outgoing and incoming parts.

    The sign change of Omega . n is a great circle, which projects to a
    straight line on the octahedron face, so straddling patches are clipped
    exactly and each half is integrated with the smooth rule.
    """
    normal = np.asarray(normal, dtype=float)
    if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
        raise ValueError("normal must be a unit vector")
    dots = patch.vertices @ normal
    full = np.einsum("x,xmd->md", normal, jacobian_matrices(kind, patch, order))
    zero = np.zeros_like(full)
    if np.all(dots >= 0.0):
        return full, zero
    if np.all(dots <= 0.0):
        return zero, full
    halves = []
    for sign in (1.0, -1.0):
        rule = _half_rule(patch, normal, sign, order)
        if rule is None:
            halves.append(zero.copy())
            continue
        b = basis_at_bary(kind, rule.bary)
        halves.append(np.einsum("q,q,qm,qd->md", rule.weights, rule.nodes @ normal, b, b))
    return halves[0], halves[1]


@dataclass(frozen=True)
class PatchOperators:
    """Angular matrices for every leaf of a mesh, stacked along axis 0.

    ``a_out[f]`` / ``a_in[f]`` are the upwind parts of the face matrix for the
    hexahedron face with outward normal ``AXIS_NORMALS[f]``.
    """

    kind: BasisKind
    mesh: AngularMesh
    M: np.ndarray  # (np, da, da)
    A: np.ndarray  # (np, 3, da, da)
    a_out: np.ndarray  # (6, np, da, da)
    a_in: np.ndarray  # (6, np, da, da)
    order: int

    @property
    def n_patches(self) -> int:
        return self.M.shape[0]

    @property
    def dofs(self) -> int:
        return self.kind.dofs


def build_patch_operators(mesh: AngularMesh, kind: BasisKind, order: int = 8) -> PatchOperators:
    kind = BasisKind.parse(kind)
    n, da = len(mesh), kind.dofs
    M = np.empty((n, da, da))
    A = np.empty((n, 3, da, da))
    a_out = np.empty((6, n, da, da))
    a_in = np.empty((6, n, da, da))
    for k, patch in enumerate(mesh.patches):
        M[k] = mass_matrix(kind, patch, order)
        A[k] = jacobian_matrices(kind, patch, order)
        for f, nrm in enumerate(AXIS_NORMALS):
            a_out[f, k], a_in[f, k] = face_split(kind, patch, nrm, order)
    return PatchOperators(kind, mesh, M, A, a_out, a_in, order)
