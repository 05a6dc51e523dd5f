import numpy as np
import pytest
from scipy import sparse

from pdwg.assembly import PdwgParams, assemble_B, assemble_F, nonlinear_residual
from pdwg.mesh import build_mesh
from pdwg.problems import ProblemSpec, example
from pdwg.solver import LinearSolveError, dof_coordinates, nested_dissection, run_pdwg, solve_linear
from pdwg.spaces import build_dof_map

from conftest import UNIT_CUBE


def constant_problem(c=(1.0, 2.0, 3.0)):
    c = np.asarray(c, dtype=float)
    return ProblemSpec(0, "constant", UNIT_CUBE, np.ones(3), lambda P: np.broadcast_to(c, P.shape).copy(),
                       lambda P: np.zeros(P.shape[:-1]), lambda P: np.zeros(P.shape), lambda p: (1.0, 1.0))


def scaled(prob, t):
    return ProblemSpec(prob.id, prob.name, prob.domain, prob.eps, lambda P: t * prob.u(P), lambda P: t * prob.f(P),
                       lambda P: t * prob.g(P), prob.rho)


def test_diagonal_system():
    x = solve_linear(sparse.diags([2.0, -3.0]), np.array([2.0, 3.0]))
    np.testing.assert_allclose(x, [1, -1], rtol=1e-15)


def test_zero_rhs_gives_zero():
    x = solve_linear(sparse.diags([2.0, -3.0]), np.zeros(2))
    assert np.all(x == 0)


def test_singular_system_reported():
    with pytest.raises(LinearSolveError):
        solve_linear(sparse.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        solve_linear(sparse.eye(3), np.ones(2))


def test_unit_cube_example1_p2(cube1):
    rep = run_pdwg(example(1), cube1, PdwgParams(p=2))
    assert rep.iterations == 1 and rep.converged
    assert rep.residual <= 1e-9
    assert len(rep.history) == rep.iterations


def test_constant_solution_reproduced(cube2):
    prob = constant_problem()
    rep = run_pdwg(prob, cube2, PdwgParams(p=2))
    np.testing.assert_allclose(rep.u_h, np.broadcast_to([1.0, 2.0, 3.0], rep.u_h.shape), atol=1e-9)


def test_p2_solution_solves_nonlinear_scheme(cube2):
    prob, par = example(1), PdwgParams(p=2)
    rep = run_pdwg(prob, cube2, par)
    d = rep.dofmap
    r = nonlinear_residual(cube2, d, rep.x, assemble_F(cube2, d, prob), assemble_B(cube2, d, prob.eps), par)
    assert np.abs(r).max() <= 1e-8


def test_p2_solution_linear_in_data(cube2):
    par = PdwgParams(p=2)
    a = run_pdwg(example(1), cube2, par).x
    b = run_pdwg(scaled(example(1), -2.5), cube2, par).x
    np.testing.assert_allclose(b, -2.5 * a, rtol=1e-9, atol=1e-9 * np.abs(a).max())


def test_example5_p3_iteration_count():
    prob = example(5)
    mesh = build_mesh(prob.domain, prob.domain.refinement_for(2))
    rep = run_pdwg(prob, mesh, PdwgParams(p=3, rho1=5e4, rho2=5e4))
    assert rep.converged
    assert 5 <= rep.iterations <= 50
    assert rep.history[-1] <= 1e-5 < rep.history[-2]


def test_iteration_flags_non_convergence(cube1):
    rep = run_pdwg(example(1), cube1, PdwgParams(p=3, rho1=900, rho2=900, max_iters=2))
    assert not rep.converged and rep.iterations == 2


def test_nested_dissection_is_a_permutation_and_solves(cube2):
    prob = example(1)
    from pdwg.assembly import build_system

    d = build_dof_map(cube2)
    system = build_system(cube2, d, prob, PdwgParams(p=2))
    perm = nested_dissection(system.matrix, dof_coordinates(cube2, d), leaf=16)
    np.testing.assert_array_equal(np.sort(perm), np.arange(d.size))
    np.testing.assert_allclose(solve_linear(system, ordering=perm), solve_linear(system), atol=1e-10)
