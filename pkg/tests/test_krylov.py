import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from angmg.krylov import bicgstab
from angmg.scatter import fp_equivalent_moments
from angmg.spatial import build_hex_mesh
from angmg.sphere_mesh import build_base_mesh, build_uniform_mesh
from angmg.sweeps import build_sweep_plan, standard_sweep
from angmg.transport import UniformSource, apply_A, assemble_rhs, build_operators

from oracles import dense_transport_matrix


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_identity_converges_in_one_step(b):
    b = np.array(b)
    x, rep = bicgstab(lambda v: v, lambda v: v, b)
    assert rep.iterations == 1 and rep.converged
    assert np.allclose(x, b)


def test_zero_rhs():
    x, rep = bicgstab(lambda v: 2 * v, None, np.zeros(5))
    assert rep.iterations == 0 and rep.converged and np.all(x == 0)


def test_tol_validation():
    with pytest.raises(ValueError):
        bicgstab(lambda v: v, None, np.ones(3), tol=0.0)


def test_nan_detected():
    with pytest.raises(FloatingPointError):
        bicgstab(lambda v: v * np.nan, None, np.ones(3))


def test_small_nonsymmetric_system():
    rng = np.random.default_rng(0)
    A = np.eye(40) * 4 + rng.normal(size=(40, 40)) * 0.3
    b = rng.random(40)
    x, rep = bicgstab(lambda v: A @ v, None, b, tol=1e-12)
    assert rep.converged
    assert np.linalg.norm(A @ x - b) < 1e-11 * np.linalg.norm(b)
    assert rep.residual_history[-1] < 1e-12
    assert len(rep.time_history) == rep.iterations


def test_max_iter_reports_non_convergence():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(60, 60))
    b = rng.random(60)
    x, rep = bicgstab(lambda v: A @ v, None, b, tol=1e-14, max_iter=3)
    assert not rep.converged and rep.iterations == 3


def _problem(mesh=None):
    ops = build_operators(build_hex_mesh(2, 2, 2, 1.0), mesh or build_base_mesh(), "const", fp_equivalent_moments(4, 1.0))
    return ops, assemble_rhs(ops, UniformSource()), build_sweep_plan(ops)


def test_matches_dense_lu():
    ops, f, plan = _problem()
    x, rep = bicgstab(lambda v: apply_A(ops, v), lambda v: standard_sweep(plan, ops, v), f, tol=1e-12)
    ref = np.linalg.solve(dense_transport_matrix((2, 2, 2), (1, 1, 1), 4, 1.0), f.ravel())
    assert np.linalg.norm(x.ravel() - ref) <= 1e-8 * np.linalg.norm(ref)


def test_true_residual_agrees_with_recursion():
    ops, f, plan = _problem(build_uniform_mesh(1))
    x, rep = bicgstab(lambda v: apply_A(ops, v), lambda v: standard_sweep(plan, ops, v), f)
    assert rep.converged
    assert abs(rep.final_residual - rep.residual_history[-1]) < 1e-10
    assert rep.preconditioner_applications <= 2 * rep.iterations


def test_iterations_invariant_to_scaling():
    ops, f, plan = _problem(build_uniform_mesh(1))
    A = lambda v: apply_A(ops, v)
    M = lambda v: standard_sweep(plan, ops, v)
    _, r1 = bicgstab(A, M, f)
    _, r2 = bicgstab(A, M, 1e3 * f)
    assert r1.iterations == r2.iterations
