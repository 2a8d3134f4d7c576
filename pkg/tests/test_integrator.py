import math

import numpy as np
import pytest

from phantom_burster.integrator import (
    IntegrationError,
    NoCrossingError,
    Section,
    Tolerances,
    coordinate_section,
    integrate,
    integrate_to_section,
)
from phantom_burster.model import PAPER_PARAMETERS, geometry, x_sing
from phantom_burster.reductions import FieldTag, build_field

from conftest import toy_field

P = PAPER_PARAMETERS
SEED = [-1.735124, 2.6166461, 0.27738113, 3.15495372]


def test_linear_decay(decay_field):
    tol = Tolerances(1e-10, 1e-12)
    traj = integrate(decay_field, [1.0], (0.0, 1.0), tol)
    assert abs(traj.final[0] - math.exp(-1.0)) < 1e-8


def test_rotation_returns_to_start(rotation_field):
    tol = Tolerances(1e-9, 1e-11)
    traj = integrate(rotation_field, [1.0, 0.0], (0.0, 2 * math.pi), tol)
    assert np.max(np.abs(traj.final - [1.0, 0.0])) < 10 * 1e-9


def test_dense_output_reproduces_nodes(rotation_field):
    traj = integrate(rotation_field, [1.0, 0.0], (0.0, 3.0))
    assert np.array_equal(traj(traj.t), traj.y)
    mid = 0.5 * (traj.t[3] + traj.t[4])
    assert np.allclose(traj(mid), [math.cos(mid), -math.sin(mid)], atol=1e-6)
    with pytest.raises(ValueError):
        traj(4.0)


def test_backward_integration_is_time_ordered(rotation_field):
    traj = integrate(rotation_field, [1.0, 0.0], (0.0, -1.0), Tolerances(1e-10, 1e-12))
    assert np.all(np.diff(traj.t) > 0)
    assert np.allclose(traj(-1.0), [math.cos(1.0), math.sin(1.0)], atol=1e-8)


def test_constant_velocity_crossing_time():
    field = toy_field(lambda u: np.array([np.full_like(u[0], 2.0), np.zeros_like(u[1])]), lambda u: np.zeros((2, 2) + np.shape(u)[1:]), 2)
    traj, ev = integrate_to_section(field, [0.0, 0.0], coordinate_section("wall", 0, 1.0), 5.0)
    assert abs(ev.t - 0.5) < 1e-12
    assert abs(traj.t_end - 0.5) < 1e-12


def test_rotation_to_section_half_turn(rotation_field):
    sec = coordinate_section("v0", 1, 0.0, direction=+1)
    _, ev = integrate_to_section(rotation_field, [1.0, 0.0], sec, 10.0, Tolerances(1e-10, 1e-12))
    assert abs(ev.t - math.pi) < 1e-7
    assert ev.direction == +1
    assert abs(ev.residual) < 1e-9


def test_direction_filter_skips_downward_crossing(rotation_field):
    sec = coordinate_section("down", 1, 0.0, direction=-1)
    traj = integrate(rotation_field, [1.0, 0.0], (0.0, 7.0), Tolerances(1e-10, 1e-12), [sec])
    times = [e.t for e in traj.events]
    assert len(times) == 1 and abs(times[0] - 2 * math.pi) < 1e-7


def test_no_crossing_raises(decay_field):
    with pytest.raises(NoCrossingError):
        integrate_to_section(decay_field, [1.0], coordinate_section("neg", 0, -1.0), 2.0)


def test_bad_initial_state(rotation_field):
    with pytest.raises(ValueError):
        integrate(rotation_field, [1.0], (0.0, 1.0))
    with pytest.raises(ValueError):
        integrate(rotation_field, [1.0, np.nan], (0.0, 1.0))


def test_step_budget(rotation_field):
    with pytest.raises(IntegrationError):
        integrate(rotation_field, [1.0, 0.0], (0.0, 100.0), max_steps=3)


def test_tolerances_validated():
    with pytest.raises(ValueError):
        Tolerances(0.0, 1e-10)
    assert Tolerances(1e-6, 1e-8).tightened(10).rel == pytest.approx(1e-7)


def test_full_model_self_convergence():
    spec = build_field(FieldTag.FULL4D, P)
    coarse = integrate(spec, SEED, (0.0, 5.0), Tolerances(1e-7, 1e-9))
    fine = integrate(spec, SEED, (0.0, 5.0), Tolerances(5e-8, 5e-10))
    finest = integrate(spec, SEED, (0.0, 5.0), Tolerances(1e-11, 1e-13))
    err_coarse = np.max(np.abs(coarse.final - finest.final))
    change = np.max(np.abs(fine.final - coarse.final))
    assert change < max(err_coarse, 1e-9) * 2


def test_end_of_surge_event_residual():
    geo = geometry(P)
    level = x_sing(geo.gamma, P) - 0.1
    spec = build_field(FieldTag.FULL4D, P)
    sec = Section("endsurge", lambda u: u[0] - level, direction=+1)
    _, ev = integrate_to_section(spec, SEED, sec, 50.0, Tolerances(1e-10, 1e-12))
    assert abs(ev.state[0] - level) < 1e-9
