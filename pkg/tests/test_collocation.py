import math

import numpy as np
import pytest

from phantom_burster.bvp import solve_segment, start_curve
from phantom_burster.collocation import (
    CollocationMesh,
    CollocationProblem,
    NewtonFailure,
    equidistribute,
    gauss_tableau,
    initial_vector,
    newton_solve,
)
from phantom_burster.continuation import solve_periodic
from phantom_burster.integrator import Section, Tolerances, coordinate_section, integrate
from phantom_burster.model import PAPER_PARAMETERS
from phantom_burster.reductions import FieldTag, build_field

P = PAPER_PARAMETERS


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_gauss_tableau_order_conditions(m):
    c, A, b = gauss_tableau(m)
    assert b.sum() == pytest.approx(1.0, abs=1e-14)
    # C(m): sum_j a_ij c_j^(k-1) = c_i^k / k
    for k in range(1, m + 1):
        assert np.allclose(A @ c ** (k - 1), c**k / k, atol=1e-13)
    # B(2m): quadrature exact to degree 2m - 1
    for k in range(1, 2 * m + 1):
        assert b @ c ** (k - 1) == pytest.approx(1.0 / k, abs=1e-13)


def test_mesh_validation():
    with pytest.raises(ValueError):
        CollocationMesh(np.array([0.0, 0.6, 0.5, 1.0]))
    with pytest.raises(ValueError):
        CollocationMesh(np.array([0.1, 1.0]))
    mesh = CollocationMesh.uniform(10)
    assert mesh.N == 10 and mesh.size(2, 1) == 11 * 2 + 10 * 4 * 2 + 1 + 1


def test_decay_transit_time(decay_field):
    sec = Section("level", lambda u: u[0] - math.exp(-1.0))
    seg = solve_segment(decay_field, [1.0], sec, lambda t: np.exp(-np.asarray(t))[..., None], 1.3, mesh=20)
    assert abs(seg.T - 1.0) < 1e-8
    assert seg.collocation_residual < 1e-10
    assert seg(0.5)[0] == pytest.approx(math.exp(-0.5), abs=1e-9)


def test_segment_rejects_wrong_dimension(decay_field):
    from phantom_burster.model import DomainError

    with pytest.raises(DomainError):
        solve_segment(decay_field, [1.0, 2.0], Section("s", lambda u: u[0]), lambda t: t, 1.0)


def test_chart_segment_matches_initial_value_problem():
    eps = 0.01
    spec = build_field(FieldTag.CHART_K2, P, {"eps": eps, "delta": 0.05})
    start = start_curve(FieldTag.CHART_K2, P, "attracting", eps)(-3.0)
    sec = coordinate_section("X2=-1", 2, -1.0)
    tol = Tolerances(1e-12, 1e-14)
    from phantom_burster.integrator import integrate_to_section

    traj, hit = integrate_to_section(spec, start, sec, 1e3, tol)
    from phantom_burster.bvp import mesh_from_steps

    seg = solve_segment(spec, start, sec, traj, hit.t, mesh=mesh_from_steps(traj.t, 160))
    assert np.max(np.abs(seg.end - hit.state)) < 1e-6
    assert seg.T == pytest.approx(hit.t, rel=1e-6)


def test_residual_under_mesh_refinement(limit_cycle_field):
    seed = integrate(limit_cycle_field, [1.0, 0.0], (0.0, 2 * math.pi), Tolerances(1e-10, 1e-12))
    for N in (40, 80):
        seg = solve_periodic(P, seed, field=limit_cycle_field, mesh_intervals=N, adapt=0)
        assert seg.collocation_residual < 1e-9
        assert seg.boundary_residual < 1e-9


def test_limit_cycle_period(limit_cycle_field):
    seed = integrate(limit_cycle_field, [1.05, 0.0], (0.0, 6.2), Tolerances(1e-10, 1e-12))
    seg = solve_periodic(P, seed, field=limit_cycle_field, mesh_intervals=60)
    assert abs(seg.T - 2 * math.pi) < 1e-8
    r = np.hypot(*seg.dense(4)[1].T)
    assert np.max(np.abs(r - 1.0)) < 1e-9


def test_open_seed_rejected(limit_cycle_field):
    from phantom_burster.model import DomainError

    seed = integrate(limit_cycle_field, [1.0, 0.0], (0.0, 3.0))
    with pytest.raises(DomainError):
        solve_periodic(P, seed, field=limit_cycle_field)


def test_defect_order(limit_cycle_field):
    seed = integrate(limit_cycle_field, [1.0, 0.0], (0.0, 2 * math.pi), Tolerances(1e-10, 1e-12))
    Ns = np.array([8, 16, 32])
    defects = []
    for N in Ns:
        seg = solve_periodic(P, seed, field=limit_cycle_field, mesh_intervals=int(N), adapt=0)
        defects.append(seg.solution.defect(limit_cycle_field.rhs_many))
    slope = -np.polyfit(np.log(Ns), np.log(defects), 1)[0]
    assert abs(slope - 4.0) < 0.3


def test_equidistribution_concentrates_mesh():
    # boundary layer u' = T * (-50 (u - 1)) from u = 0 reaching u = 1 - 1e-6
    def rhs(U, q):
        return -50.0 * (U - 1.0)

    def jac(U, q):
        return np.full((U.shape[0], 1, 1), -50.0)

    prob = CollocationProblem(1, rhs, jac, lambda u0, u1, T, q: np.array([u0[0], u1[0] - (1 - 1e-6)]), 2)
    mesh = CollocationMesh.uniform(40)
    z0 = initial_vector(mesh, lambda tau: np.asarray(tau)[:, None], 0.3)
    sol = newton_solve(prob, mesh, z0)
    assert sol.T == pytest.approx(math.log(1e6) / 50.0, rel=1e-8)
    new = equidistribute(sol)
    assert new.N == 40
    assert new.h[0] < mesh.h[0]


def _unit_speed():
    return (lambda U, q: np.ones_like(U)), (lambda U, q: np.zeros((U.shape[0], 1, 1)))


def test_newton_failure_reported():
    rhs, jac = _unit_speed()
    # u' = T, u(0) = 0 and u(1)^2 + 1 = 0 has no real solution
    prob = CollocationProblem(1, rhs, jac, lambda u0, u1, T, q: np.array([u0[0], u1[0] ** 2 + 1.0]), 2)
    mesh = CollocationMesh.uniform(4)
    z0 = initial_vector(mesh, lambda tau: np.asarray(tau)[:, None], 1.0)
    with pytest.raises(NewtonFailure):
        newton_solve(prob, mesh, z0)


def test_non_square_system_rejected():
    rhs, jac = _unit_speed()
    prob = CollocationProblem(1, rhs, jac, lambda u0, u1, T, q: np.array([u0[0], u1[0] - 1.0]), 2)
    mesh = CollocationMesh.uniform(4)
    z0 = initial_vector(mesh, lambda tau: np.asarray(tau)[:, None], 1.0)
    row = np.zeros(mesh.size(1, 0))
    row[-1] = 1.0
    with pytest.raises(ValueError):
        newton_solve(prob, mesh, z0, linear=[(row, 2.0)])
