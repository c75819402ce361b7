import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from angmg.angular import patch_quadrature
from angmg.krylov import bicgstab
from angmg.multigrid import (
    CycleSpec,
    MultigridPreconditioner,
    build_hierarchy,
    default_nr,
    lmg_vcycle,
    prolongate,
    restrict,
)
from angmg.scatter import fp_equivalent_moments
from angmg.spatial import build_hex_mesh
from angmg.sphere_mesh import build_banded_mesh, build_base_mesh, build_uniform_mesh
from angmg.sweeps import build_sweep_plan, coarse_scatter_sweep, standard_sweep
from angmg.transport import UniformSource, apply_A, assemble_rhs, build_operators


def _hier(mesh, kind="const", N=2, shape=(1, 1, 1), box=1.0, cycle=None, p=0):
    ops = build_operators(build_hex_mesh(*shape, box), mesh, kind, fp_equivalent_moments(N, 1.0), spatial_order=p)
    return build_hierarchy(ops, cycle or CycleSpec()), ops


@pytest.fixture(scope="module")
def lin_uniform():
    return _hier(build_uniform_mesh(3), "lin")[0]


@pytest.fixture(scope="module")
def lin_banded():
    return _hier(build_banded_mesh(4), "lin")[0]


def test_level_sizes(lin_uniform):
    assert [len(m) for m in lin_uniform.meshes] == [8, 32, 128, 512]
    assert lin_uniform.L == 3


def test_banded_coarsest_is_octants(lin_banded):
    assert len(lin_banded.meshes[0]) == 8
    assert len(lin_banded.meshes[-1]) == 128


def test_default_nr_schedule():
    assert [default_nr(n) for n in (4, 8, 12, 16, 20, 24)] == [2, 4, 6, 7, 8, 9]
    assert default_nr(10) == 5 and default_nr(40) == 9
    assert all(default_nr(n) <= n for n in range(1, 40))


def test_nr_exceeding_N_rejected():
    ops = build_operators(build_hex_mesh(1, 1, 1), build_uniform_mesh(1), "const", fp_equivalent_moments(2, 1.0))
    with pytest.raises(ValueError, match="exceeds"):
        build_hierarchy(ops, CycleSpec(nr=3))


def test_cycle_parse():
    assert CycleSpec.parse("v10").nu_post == 0
    assert CycleSpec.parse("V(1,1)").name == "V(1,1)"
    with pytest.raises(ValueError):
        CycleSpec.parse("w11")


@pytest.mark.parametrize("which", ["lin_uniform", "lin_banded"])
def test_adjoint_identity(which, request):
    h = request.getfixturevalue(which)
    rng = np.random.default_rng(7)
    for l in range(1, h.L + 1):
        for _ in range(100):
            c = rng.normal(size=h.ops[l - 1].shape)
            r = rng.normal(size=h.ops[l].shape)
            lhs = np.vdot(prolongate(h, l, c), r)
            rhs = np.vdot(c, restrict(h, l, r))
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_transfer_level_range(lin_uniform):
    with pytest.raises(IndexError):
        prolongate(lin_uniform, 0, lin_uniform.ops[0].zeros())
    with pytest.raises(IndexError):
        restrict(lin_uniform, 4, lin_uniform.ops[3].zeros())
    assert np.all(restrict(lin_uniform, 2, lin_uniform.ops[2].zeros()) == 0)


def test_const_prolongation_and_restriction():
    h, _ = _hier(build_uniform_mesh(2))
    one = np.ones(h.ops[1].shape)
    assert np.allclose(prolongate(h, 2, one), 1.0)
    r = np.random.default_rng(0).random(h.ops[2].shape)
    coarse = restrict(h, 2, r)
    expect = np.zeros(h.ops[1].shape)
    np.add.at(expect, h.parents[2], r)
    assert np.allclose(coarse, expect)


def test_lin_corner_daughter_interpolation():
    h, _ = _hier(build_uniform_mesh(1), "lin")
    c = np.zeros(h.ops[0].shape)
    c[0, 0, 0, 0] = 1.0
    fine = prolongate(h, 1, c)
    corner = h.meshes[1].index(h.meshes[1].tree.daughters(h.meshes[0].leaves[0])[0])
    assert np.allclose(fine[corner, 0, 0], [1.0, 0.5, 0.5])


@pytest.mark.parametrize("which", ["lin_uniform", "lin_banded"])
def test_prolongation_reproduces_coarse_function(which, request):
    h = request.getfixturevalue(which)
    rng = np.random.default_rng(11)
    for l in range(1, h.L + 1):
        c = rng.normal(size=h.ops[l - 1].shape)
        f = prolongate(h, l, c)
        fine, coarse = h.meshes[l], h.meshes[l - 1]
        defect = 0.0
        for k, p in enumerate(fine.patches):
            q = patch_quadrature(p, 4)
            par = coarse.patches[h.parents[l][k]]
            lam_c = np.array([par.barycentric(w) for w in q.nodes])
            vf = q.bary @ f[k, 0, 0]
            vc = lam_c @ c[h.parents[l][k], 0, 0]
            defect += q.weights @ (vf - vc) ** 2
        assert np.sqrt(defect) < 1e-12


def test_galerkin_product_matches_rediscretization():
    """For octant-contained nested patches P^T A_l P equals A_{l-1}."""
    h, _ = _hier(build_uniform_mesh(1), "lin", N=3, shape=(1, 1, 1), p=1)
    fine, coarse = h.ops[1], h.ops[0]
    I = np.eye(coarse.size)
    galerkin = np.stack(
        [restrict(h, 1, apply_A(fine, prolongate(h, 1, I[k].reshape(coarse.shape)))).ravel() for k in range(coarse.size)],
        axis=1,
    )
    direct = np.stack([apply_A(coarse, I[k]).ravel() for k in range(coarse.size)], axis=1)
    assert np.allclose(galerkin, direct, atol=1e-10 * np.abs(direct).max())


def test_single_level_cycle_is_coarse_solver():
    h, ops = _hier(build_base_mesh(), shape=(2, 2, 2), p=1)
    f = assemble_rhs(ops, UniformSource())
    ref = coarse_scatter_sweep(build_sweep_plan(ops), ops, f, 10)
    assert np.allclose(lmg_vcycle(h, 0, f), ref, rtol=1e-13, atol=1e-15)


def test_zero_in_zero_out_and_fixedness():
    h, ops = _hier(build_uniform_mesh(2), "lin", N=4, shape=(2, 2, 2), p=1)
    M = MultigridPreconditioner(h)
    assert np.all(M(ops.zeros()) == 0)
    r = np.random.default_rng(3).random(ops.shape)
    assert np.array_equal(M(r), M(r))


@settings(max_examples=5, deadline=None)
@given(st.floats(-10, 10).filter(lambda a: abs(a) > 1e-3))
def test_vcycle_is_linear(a):
    h, ops = _hier(build_uniform_mesh(1), "const", N=4, shape=(2, 2, 2), p=1)
    M = MultigridPreconditioner(h)
    r = np.random.default_rng(5).random(ops.shape)
    lhs, rhs = M(a * r), a * M(r)
    assert np.abs(lhs - rhs).max() <= 1e-11 * np.abs(rhs).max()


def test_tolerance_coarse_solve():
    h, ops = _hier(build_uniform_mesh(1), "const", N=4, shape=(2, 2, 2), p=1, cycle=CycleSpec(coarse_tol=1e-5))
    f = assemble_rhs(ops, UniformSource())
    x = lmg_vcycle(h, 0, restrict(h, 1, f))
    r = restrict(h, 1, f) - apply_A(h.ops[0], x)
    assert np.linalg.norm(r) < 1e-5 * np.linalg.norm(restrict(h, 1, f))


@pytest.mark.parametrize("cycle", ["v10", "v11"])
def test_multigrid_beats_single_grid(cycle):
    ops = build_operators(build_hex_mesh(4, 4, 4, 2.0), build_uniform_mesh(1), "const", fp_equivalent_moments(8, 1.0))
    f = assemble_rhs(ops, UniformSource())
    A = lambda v: apply_A(ops, v)
    plan = build_sweep_plan(ops)
    _, sg = bicgstab(A, lambda v: standard_sweep(plan, ops, v), f)
    h = build_hierarchy(ops, CycleSpec.parse(cycle))
    _, mg = bicgstab(A, MultigridPreconditioner(h), f)
    assert sg.converged and mg.converged
    assert mg.iterations < sg.iterations
    assert h.stats["vcycles"] == mg.preconditioner_applications
