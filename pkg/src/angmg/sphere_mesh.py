"""Hierarchical octahedral triangulation of the unit sphere.

Every patch is a spherical triangle inside one octant. Refinement halves the
three great-circle edges and joins the midpoints by great circles. Each patch
also carries the central projection of its corners onto the octahedron face
|x| + |y| + |z| = 1 of its octant ("flat vertices"). Great circles project to
straight lines there, so a daughter's flat triangle is a sub-triangle of its
parent's and the Lin angular basis is nested from level to level.

Patch ids are canonical: the id only depends on the position of the patch in
the refinement tree, not on the order in which meshes were built.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "Patch",
    "PatchTree",
    "AngularMesh",
    "octant_signs",
    "build_base_mesh",
    "refine",
    "build_uniform_mesh",
    "build_banded_mesh",
    "coarsen_to_level",
    "BAND_EDGES",
    "dump_mesh",
]

# (lower bound on Omega_z, levels below l_max), checked from the top
BAND_EDGES = ((0.97, 0), (0.9, 1), (0.8, 2), (0.6, 3))


def octant_signs(octant: int) -> np.ndarray:
    """Sign vector of an octant; bit k set means a negative k-th axis."""
    return np.array([-1.0 if (octant >> k) & 1 else 1.0 for k in range(3)])


def _arc_midpoint(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # symmetric in (a, b) bitwise, which the adjacency keys rely on
    m = a + b
    return m / np.sqrt(m @ m)


def _level_offset(level: int) -> int:
    return 8 * (4**level - 1) // 3


@dataclass(frozen=True, eq=False)
class Patch:
    id: int
    level: int
    octant: int
    path: tuple[int, ...]
    flat_vertices: np.ndarray
    vertices: np.ndarray
    parent: int | None = None

    @property
    def signs(self) -> np.ndarray:
        return octant_signs(self.octant)

    @property
    def daughters(self) -> tuple[int, int, int, int]:
        base = _level_offset(self.level + 1)
        idx = self.id - _level_offset(self.level)
        return tuple(base + 4 * idx + c for c in range(4))

    @property
    def centroid(self) -> np.ndarray:
        c = self.flat_vertices.mean(axis=0)
        return c / np.linalg.norm(c)

    def area(self) -> float:
        """Exact solid angle of the spherical triangle (Van Oosterom-Strackee)."""
        a, b, c = self.vertices
        num = abs(np.dot(a, np.cross(b, c)))
        den = 1.0 + a @ b + b @ c + c @ a
        return 2.0 * np.arctan2(num, den)

    def contains(self, omega: np.ndarray, tol: float = 1e-12) -> bool:
        lam = self.barycentric(omega)
        return lam is not None and bool(np.all(lam >= -tol))

    def barycentric(self, omega: np.ndarray) -> np.ndarray | None:
        """Flat-triangle barycentric coordinates of a direction, None if it
        points away from this patch's octahedron face."""
        s = self.signs @ omega
        if s <= 0.0:
            return None
        x = np.asarray(omega, dtype=float) / s
        return np.linalg.solve(self.flat_vertices.T, x)


class PatchTree:
    """Lazily grown store of every patch ever created.

    Daughters of a patch are always the same, so meshes built from one tree
    can share it freely.
    """

    def __init__(self):
        self._patches: dict[int, Patch] = {}
        for o in range(8):
            s = octant_signs(o)
            flat = np.diag(s)
            self._patches[o] = Patch(o, 0, o, (), flat, flat.copy())

    def __getitem__(self, pid: int) -> Patch:
        try:
            return self._patches[pid]
        except KeyError:
            raise KeyError(f"unknown patch id {pid}") from None

    def __contains__(self, pid: int) -> bool:
        return pid in self._patches

    def __len__(self) -> int:
        return len(self._patches)

    def daughters(self, pid: int) -> tuple[int, int, int, int]:
        p = self[pid]
        ids = p.daughters
        if ids[0] not in self._patches:
            a, b, c = p.vertices
            mab, mbc, mca = _arc_midpoint(a, b), _arc_midpoint(b, c), _arc_midpoint(c, a)
            corners = ((a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mbc, mca, mab))
            s = p.signs
            for k, (cid, tri) in enumerate(zip(ids, corners)):
                sph = np.array(tri)
                flat = sph / (sph @ s)[:, None]
                self._patches[cid] = Patch(
                    cid, p.level + 1, p.octant, p.path + (k,), flat, sph, parent=pid
                )
        return ids

    def ancestor(self, pid: int, level: int) -> int:
        p = self[pid]
        while p.level > level:
            p = self[p.parent]
        return p.id


def _sort_key(tree: PatchTree, pid: int):
    p = tree[pid]
    return (p.octant, p.path)


@dataclass(frozen=True, eq=False)
class AngularMesh:
    """Immutable set of leaf patches over a shared :class:`PatchTree`."""

    tree: PatchTree
    leaves: tuple[int, ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_leaves(cls, tree: PatchTree, leaves: Iterable[int]) -> "AngularMesh":
        uniq = sorted(set(leaves), key=lambda pid: _sort_key(tree, pid))
        return cls(tree, tuple(uniq))

    def __len__(self) -> int:
        return len(self.leaves)

    @property
    def patches(self) -> list[Patch]:
        return [self.tree[p] for p in self.leaves]

    @property
    def levels(self) -> np.ndarray:
        return np.array([self.tree[p].level for p in self.leaves], dtype=int)

    @property
    def octants(self) -> np.ndarray:
        return np.array([self.tree[p].octant for p in self.leaves], dtype=int)

    @property
    def max_level(self) -> int:
        return int(self.levels.max())

    def index(self, pid: int) -> int:
        idx = self._cache.get("index")
        if idx is None:
            idx = {p: k for k, p in enumerate(self.leaves)}
            self._cache["index"] = idx
        return idx[pid]

    def total_area(self) -> float:
        return float(sum(p.area() for p in self.patches))

    def neighbors(self) -> list[set[int]]:
        """Edge adjacency between leaves, as sets of leaf positions."""
        nb = self._cache.get("neighbors")
        if nb is None:
            nb = _edge_adjacency(self.tree, self.leaves)
            self._cache["neighbors"] = nb
        return nb

    def is_two_irregular(self) -> bool:
        lv = self.levels
        return all(abs(lv[a] - lv[b]) <= 2 for a, nbs in enumerate(self.neighbors()) for b in nbs)


def _edge_adjacency(tree: PatchTree, leaves: tuple[int, ...]) -> list[set[int]]:
    # Chop every leaf edge into finest-level segments by repeated arc
    # halving. Shared edge pieces then have bitwise identical end points
    # (the midpoint rule is symmetric), so they can be matched by key.
    lmax = max(tree[p].level for p in leaves)
    owners: dict[tuple, list[int]] = defaultdict(list)
    for k, pid in enumerate(leaves):
        p = tree[pid]
        for a, b in ((0, 1), (1, 2), (2, 0)):
            pts = [p.vertices[a], p.vertices[b]]
            for _ in range(lmax - p.level):
                split = [pts[0]]
                for u, v in zip(pts[:-1], pts[1:]):
                    split += [_arc_midpoint(u, v), v]
                pts = split
            keys = [tuple(np.round(x, 12) + 0.0) for x in pts]
            for u, v in zip(keys[:-1], keys[1:]):
                owners[(u, v) if u < v else (v, u)].append(k)
    nb: list[set[int]] = [set() for _ in leaves]
    for ks in owners.values():
        for a in ks:
            for b in ks:
                if a != b:
                    nb[a].add(b)
    return nb


def _enforce_two_irregularity(tree: PatchTree, leaves: set[int]) -> set[int]:
    while True:
        order = tuple(leaves)
        nb = _edge_adjacency(tree, order)
        lv = [tree[p].level for p in order]
        coarse = {order[b] for a, nbs in enumerate(nb) for b in nbs if lv[a] - lv[b] > 2}
        if not coarse:
            return leaves
        for pid in coarse:
            leaves.discard(pid)
            leaves.update(tree.daughters(pid))


def build_base_mesh(tree: PatchTree | None = None) -> AngularMesh:
    tree = tree or PatchTree()
    return AngularMesh.from_leaves(tree, range(8))


def refine(mesh: AngularMesh, pid: int) -> AngularMesh:
    if pid not in mesh.leaves:
        raise KeyError(f"patch {pid} is not a leaf of this mesh")
    leaves = set(mesh.leaves)
    leaves.discard(pid)
    leaves.update(mesh.tree.daughters(pid))
    leaves = _enforce_two_irregularity(mesh.tree, leaves)
    return AngularMesh.from_leaves(mesh.tree, leaves)


def build_uniform_mesh(level: int, tree: PatchTree | None = None) -> AngularMesh:
    if level < 0:
        raise ValueError("level must be non-negative")
    tree = tree or PatchTree()
    leaves = list(range(8))
    for _ in range(level):
        leaves = [d for p in leaves for d in tree.daughters(p)]
    return AngularMesh.from_leaves(tree, leaves)


def band_level(omega_z: float, l_max: int) -> int:
    for lo, drop in BAND_EDGES:
        if omega_z > lo:
            return max(l_max - drop, 0)
    return max(l_max - 4, 0)


def build_banded_mesh(l_max: int, tree: PatchTree | None = None) -> AngularMesh:
    """Polar band refinement around +z.

    A patch is refined while the band level of any of its three corners is
    above its own level (corner rule; it reproduces the published leaf counts
    20, 32, 44, 128, 440, 1388 for l_max = 1..6).
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    tree = tree or PatchTree()
    leaves = set(range(8))
    todo = list(leaves)
    while todo:
        nxt = []
        for pid in todo:
            p = tree[pid]
            want = max(band_level(v[2], l_max) for v in p.vertices)
            if want > p.level:
                leaves.discard(pid)
                ds = tree.daughters(pid)
                leaves.update(ds)
                nxt.extend(ds)
        todo = nxt
    leaves = _enforce_two_irregularity(tree, leaves)
    return AngularMesh.from_leaves(tree, leaves)


def coarsen_to_level(mesh: AngularMesh, level: int) -> AngularMesh:
    if level < 0:
        raise ValueError("level must be non-negative")
    return AngularMesh.from_leaves(
        mesh.tree, (mesh.tree.ancestor(p, level) for p in mesh.leaves)
    )


def dump_mesh(mesh: AngularMesh) -> str:
    """One leaf per line: id, level, octant, then the three unit vertices."""
    lines = []
    for p in mesh.patches:
        coords = " ".join(f"{x:.17g}" for x in p.vertices.ravel())
        lines.append(f"{p.id} {p.level} {p.octant} {coords}")
    return "\n".join(lines) + "\n"
