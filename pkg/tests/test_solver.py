import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccl import conformal as cf
from ccl.acceptance import U_STAR_3, U_STAR_3_WARPED, U_STAR_SLAB, slab_initial_guess, warped_torus3
from ccl.solver import (
    DomainExit,
    ProblemError,
    ProblemSpec,
    _Discretization,
    manufactured_problem,
    residual,
    solve_closed,
)
from ccl.symmetric import SymmetricFunctionSpec

S1_3 = SymmetricFunctionSpec.sigma1(3)
S2_4 = SymmetricFunctionSpec.sigma_k_root(4, 2)


@pytest.fixture(scope="module")
def warped_problem():
    return manufactured_problem(warped_torus3(8), S1_3, 0.0, -1, U_STAR_3_WARPED)


@pytest.fixture(scope="module")
def slab_problem():
    man = cf.ModelManifold.slab(4, 8)
    prob, us = manufactured_problem(man, S2_4, 2.5, 1, U_STAR_SLAB, "continuum")
    return prob, us, man


def test_prefactor_matches_closed_form():
    p = ProblemSpec(warped_torus3(8), S1_3, 0.0, -1, 1.0)
    # ((n-2)/(alpha(n tau + 2 - 2n)))^1 with n = 3, tau = 0, alpha = -1
    assert p.c == pytest.approx(0.25)
    q = ProblemSpec(cf.ModelManifold.slab(4, 8), S2_4, 2.5, 1, 1.0, boundary=np.zeros((8,) * 4))
    assert q.c == pytest.approx(2 / 4)
    assert q.consts.varrho == pytest.approx(4 / 3)


def test_problem_validation():
    man = warped_torus3(8)
    with pytest.raises(ProblemError):
        ProblemSpec(man, S1_3, 0.0, -1, -1.0)
    with pytest.raises(ProblemError):
        ProblemSpec(man, SymmetricFunctionSpec.sigma1(4), 0.0, -1, 1.0)
    # n tau + 2 - 2n = 0 at tau = 4/3 for n = 3
    with pytest.raises(ProblemError):
        ProblemSpec(man, S1_3, 4.0 / 3.0, 1, 1.0)
    # alpha = +1 needs varrho = (n-2)/(tau-1) below varrho_cone = 4/2 = 2
    with pytest.raises(ProblemError):
        ProblemSpec(cf.ModelManifold.flat_torus(4, 8), S2_4, 1.5, 1, 1.0)
    with pytest.raises(ProblemError):
        ProblemSpec(cf.ModelManifold.slab(4, 8), S2_4, 2.5, 1, 1.0)


def test_flat_torus_has_no_admissible_manufactured_solution():
    with pytest.raises(ProblemError):
        manufactured_problem(cf.ModelManifold.flat_torus(3, 8), S1_3, 0.0, -1, U_STAR_3)


def _fd_check(prob, u, direction, eps=1e-6):
    disc = _Discretization(prob)
    J = disc.jacobian(disc.state(u))
    Fp = disc.state(u + eps * direction).F
    Fm = disc.state(u - eps * direction).F
    fd = (Fp - Fm) / (2 * eps)
    an = (J @ direction.ravel()).reshape(u.shape)
    return np.max(np.abs(fd - an)) / np.max(np.abs(an))


def test_jacobian_matches_finite_differences_on_torus(warped_problem):
    prob, us = warped_problem
    x = prob.manifold.coords()
    u = us + 0.02 * np.sin(x[0])
    rng = np.random.default_rng(1)
    assert _fd_check(prob, u, rng.standard_normal(u.shape)) < 1e-7


def test_jacobian_matches_finite_differences_on_slab(slab_problem):
    prob, _, man = slab_problem
    u = slab_initial_guess(man)
    u[man.grid.boundary_mask()] = prob.boundary[man.grid.boundary_mask()]
    x = man.coords()
    direction = np.sin(np.pi * (x[0] - 1)) * np.cos(x[1])
    assert _fd_check(prob, u, direction) < 1e-6


def test_recovers_discrete_manufactured_solution(warped_problem):
    prob, us = warped_problem
    rep = solve_closed(prob, np.zeros_like(us), tol=1e-12)
    assert rep.converged and rep.all_interior and rep.coefficient_bounds_ok
    assert np.max(np.abs(rep.u - us)) < 1e-10
    assert rep.iterations <= 10
    # inexact Newton with forcing term 1e-2: every step contracts by a small factor
    r = rep.residual_history
    assert all(b < 0.05 * a for a, b in zip(r, r[1:]))


def test_exact_solution_is_a_fixed_point(warped_problem):
    prob, us = warped_problem
    rep = solve_closed(prob, us, tol=1e-10)
    assert rep.converged and rep.iterations == 0 and np.array_equal(rep.u, us)


@settings(max_examples=20)
@given(st.floats(-1.0, 1.0))
def test_constant_shift_rescales_psi(warped_problem, t):
    prob, us = warped_problem
    shifted = ProblemSpec(prob.manifold, prob.fspec, prob.tau, prob.alpha, prob.psi * np.exp(-2 * prob.degree * t))
    r0 = residual(prob, us + 0.01)
    r1 = residual(shifted, us + 0.01 + t)
    assert np.max(np.abs(r0 - r1)) <= 1e-12 * max(1.0, np.max(np.abs(r0)))


def test_non_admissible_initial_guess_raises_domain_exit(warped_problem):
    prob, us = warped_problem
    x = prob.manifold.coords()
    with pytest.raises(DomainExit) as info:
        solve_closed(prob, 0.3 * np.cos(2 * x[1]))
    assert len(info.value.node) == 3 and info.value.margin < 0
    with pytest.raises(DomainExit):
        residual(prob, 0.3 * np.cos(2 * x[1]))


def test_slab_dirichlet_solve(slab_problem):
    prob, us, man = slab_problem
    rep = solve_closed(prob, slab_initial_guess(man), tol=1e-10)
    assert rep.converged and rep.all_interior
    mask = man.grid.boundary_mask()
    assert np.array_equal(rep.u[mask], us[mask])
    # continuum manufactured data: error is the O(h^2) truncation error
    assert np.max(np.abs(rep.u - us)) < 5e-3


def test_report_serializes(warped_problem, tmp_path):
    prob, us = warped_problem
    rep = solve_closed(prob, np.zeros_like(us), tol=1e-12)
    d = rep.to_dict()
    assert d["converged"] and len(d["theta_floor"]) == len(d["residual_history"])
    rep.write_history_csv(tmp_path / "h.csv")
    rows = (tmp_path / "h.csv").read_text().strip().split("\n")
    assert rows[0].startswith("iter,residual") and len(rows) == len(rep.residual_history) + 1
