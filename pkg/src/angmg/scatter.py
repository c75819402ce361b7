"""Legendre scatter kernel with Fokker-Planck-equivalent moments.

The scatter source is expanded in real orthonormal spherical harmonics,
``Q(r, Omega) = sum_{n,o} sigma_n Phi_{n,o}(r) Y_{n,o}(Omega)``, so the
discrete operator only needs the patch/harmonic couplings
``X[q, m, (n, o)] = integral over D_q of psi_{q,m} Y_{n,o}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import sph_harm_y

from .angular import BasisKind, basis_at_bary, patch_quadrature
from .sphere_mesh import AngularMesh

__all__ = [
    "ScatterKernel",
    "HarmonicCouplings",
    "fp_equivalent_moments",
    "harmonic_index",
    "real_sph_harmonic",
    "real_sph_harmonics",
    "build_couplings",
    "angular_scatter_matrix",
    "apply_scatter",
]


@dataclass(frozen=True)
class ScatterKernel:
    N: int
    alpha: float
    moments: np.ndarray  # sigma_{s,n}, n = 0..N  (1/cm)
    sigma_a: float = 0.0
    shift: float = 0.0  # optional extended transport correction

    @property
    def sigma_t(self) -> float:
        """Removal cross section; the whole in-group scatter sits on the RHS."""
        return self.sigma_a + self.moments[0] - self.shift

    def effective_moments(self, max_order: int | None = None) -> np.ndarray:
        order = self.N if max_order is None else max_order
        if order > self.N:
            raise ValueError(f"scatter order {order} exceeds kernel order {self.N}")
        return self.moments[: order + 1] - self.shift

    def truncated(self, order: int) -> "ScatterKernel":
        """Same cross sections, expansion cut after ``order``.

        The removal term keeps the full sigma_{s,0}, which is what the
        multigrid levels with reduced scatter order need.
        """
        if order > self.N:
            raise ValueError(f"scatter order {order} exceeds kernel order {self.N}")
        return replace(self, N=order, moments=self.moments[: order + 1].copy())


def fp_equivalent_moments(
    N: int, alpha: float, sigma_a: float = 0.0, transport_correction: bool = False
) -> ScatterKernel:
    """sigma_{s,n} = alpha/2 (N(N+1) - n(n+1)), n = 0..N."""
    if N < 1:
        raise ValueError("scatter order N must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if sigma_a < 0:
        raise ValueError("sigma_a must be non-negative")
    n = np.arange(N + 1)
    moments = 0.5 * alpha * (N * (N + 1) - n * (n + 1))
    shift = moments[-1] if transport_correction else 0.0
    return ScatterKernel(N, float(alpha), moments.astype(float), float(sigma_a), float(shift))


def harmonic_index(n: int, o: int) -> int:
    return n * n + n + o


def real_sph_harmonics(N: int, omega: np.ndarray) -> np.ndarray:
    """All real orthonormal harmonics up to degree N at directions (..., 3).

    Returns (..., (N+1)**2) ordered by ``harmonic_index``.
    """
    omega = np.asarray(omega, dtype=float)
    theta = np.arccos(np.clip(omega[..., 2], -1.0, 1.0))
    phi = np.arctan2(omega[..., 1], omega[..., 0])
    out = np.empty(omega.shape[:-1] + ((N + 1) ** 2,))
    for n in range(N + 1):
        out[..., harmonic_index(n, 0)] = sph_harm_y(n, 0, theta, phi).real
        for o in range(1, n + 1):
            y = sph_harm_y(n, o, theta, phi)
            c = np.sqrt(2.0) * (-1.0) ** o
            out[..., harmonic_index(n, o)] = c * y.real
            out[..., harmonic_index(n, -o)] = c * y.imag
    return out


def real_sph_harmonic(n: int, o: int, omega) -> float:
    if n < 0 or abs(o) > n:
        raise ValueError(f"invalid harmonic ({n}, {o})")
    return float(real_sph_harmonics(n, np.asarray(omega, dtype=float))[harmonic_index(n, o)])


@dataclass(frozen=True)
class HarmonicCouplings:
    N: int
    X: np.ndarray  # (np, da, (N+1)**2)
    degree: np.ndarray = field(repr=False, default=None)  # n for every column

    def __post_init__(self):
        if self.degree is None:
            deg = np.concatenate([np.full(2 * n + 1, n) for n in range(self.N + 1)])
            object.__setattr__(self, "degree", deg)


def build_couplings(
    mesh: AngularMesh, kind: BasisKind, N: int, order: int | None = None
) -> HarmonicCouplings:
    kind = BasisKind.parse(kind)
    order = order or max(8, N + 4)
    X = np.empty((len(mesh), kind.dofs, (N + 1) ** 2))
    patches = mesh.patches
    for lo in range(0, len(patches), 64):
        rules = [patch_quadrature(p, order) for p in patches[lo : lo + 64]]
        nodes = np.concatenate([r.nodes for r in rules])
        wb = np.concatenate([r.weights[:, None] * basis_at_bary(kind, r.bary) for r in rules])
        Y = real_sph_harmonics(N, nodes)
        owner = np.repeat(np.arange(len(rules)), [len(r.weights) for r in rules])
        seg = np.zeros((len(rules), len(owner)))
        seg[owner, np.arange(len(owner))] = 1.0
        X[lo : lo + len(rules)] = np.einsum("pq,qm,qh->pmh", seg, wb, Y, optimize=True)
    return HarmonicCouplings(N, X)


def angular_scatter_matrix(
    kernel: ScatterKernel, couplings: HarmonicCouplings, max_order: int | None = None
) -> np.ndarray:
    """Dense (np*da, np*da) matrix sum_n sigma_n X_n X_n^T."""
    sig = kernel.effective_moments(max_order)
    nh = len(sig) ** 2
    X = couplings.X[:, :, :nh].reshape(-1, nh)
    return (X * sig[couplings.degree[:nh]]) @ X.T


def apply_scatter(
    kernel: ScatterKernel,
    couplings: HarmonicCouplings,
    spatial_mass: np.ndarray,
    phi: np.ndarray,
    max_order: int | None = None,
    dense: np.ndarray | None = None,
) -> np.ndarray:
    """Discrete scatter source for a flux laid out as (np, nel, ns, da).

    ``dense`` may carry a precomputed :func:`angular_scatter_matrix`, which is
    cheaper than the moment route when np*da is small against (N+1)**2.
    """
    npatch, nel, ns, da = phi.shape
    flat = phi.transpose(1, 2, 0, 3).reshape(nel * ns, npatch * da)
    if dense is not None:
        ang = flat @ dense
    else:
        sig = kernel.effective_moments(max_order)
        nh = len(sig) ** 2
        if nh > couplings.X.shape[2]:
            raise ValueError("couplings do not cover the requested scatter order")
        X = couplings.X[:, :, :nh].reshape(npatch * da, nh)
        ang = ((flat @ X) * sig[couplings.degree[:nh]]) @ X.T
    ang = ang.reshape(nel, ns, npatch, da)
    out = np.einsum("li,jiqm->qjlm", spatial_mass, ang, optimize=True)
    return np.ascontiguousarray(out)
