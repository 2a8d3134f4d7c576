import numpy as np
import pytest

from phantom_burster.integrator import Tolerances, integrate
from phantom_burster.mmo import (
    PAUSE,
    PULSATILITY,
    SURGE,
    TRANSITION,
    Thresholds,
    _distance,
    classify,
    classify_trajectory,
    find_periodic,
    named_sections,
    return_map,
)
from phantom_burster.model import PAPER_PARAMETERS, DomainError, geometry, x_sing
from phantom_burster.reductions import FieldTag, build_field

P = PAPER_PARAMETERS
G = geometry(P)
SEED = [-1.735124, 2.6166461, 0.27738113, 3.15495372]


def _legs(points, n=60):
    """Piecewise-linear path through ``points`` with ``n`` samples per leg."""
    out = [np.linspace(a, b, n, endpoint=False) for a, b in zip(points[:-1], points[1:])]
    return np.concatenate(out + [np.array([points[-1]])])


def synthetic_cycle(n_pulses=3, n_small=2, small_amp=0.02):
    """Plateau surge, a pause sliding down to the fold with small bumps, then relaxation pulses."""
    surge_x, surge_y = np.full(50, -2.0), np.full(50, 10.0)
    # land on the right branch, slide to the fold
    # down the left branch to the lower knee, jump right, slide up to the fold
    land_x, land_y = _legs([-2.0, -G.x_f, 1.2, G.x_f - small_amp]), _legs([10.0, -G.y_f, 0.07, G.y_f])
    s = np.linspace(0.0, 1.0, 200 * max(n_small, 1), endpoint=False)
    osc_x = G.x_f - small_amp * np.cos(2 * np.pi * n_small * s)
    osc_y = np.full(s.size, G.y_f)
    # pulses: each downward zero crossing of x outside the surge is one pulse
    pts = [G.x_f - small_amp] + [-1.5, 1.5] * (n_pulses - 1) + [-1.5, -2.0]
    pul_x = _legs(pts)
    pul_y = np.concatenate([_legs([1.0, 0.5] * (len(pts) // 2) + [1.0] * (len(pts) % 2))[: pul_x.size - 50], _legs([1.0, 10.0], 49)])[: pul_x.size]
    pul_y = np.pad(pul_y, (0, pul_x.size - pul_y.size), mode="edge")
    x = np.concatenate([surge_x, land_x, osc_x, pul_x, surge_x])
    y = np.concatenate([surge_y, land_y, osc_y, pul_y, surge_y])
    t = np.arange(x.size, dtype=float)
    X = np.linspace(-3.0, 3.0, x.size)
    return t, np.column_stack([x, y, X, np.zeros_like(x)])


def test_synthetic_signature():
    t, U = synthetic_cycle()
    sig = classify(t, U, G)
    assert (sig.p, sig.s) == (3, 2)
    kinds = [ph.kind for ph in sig.phases]
    assert SURGE in kinds and PAUSE in kinds and PULSATILITY in kinds


@pytest.mark.parametrize("pulses,small", [(1, 0), (2, 4), (5, 1)])
def test_synthetic_counts_vary(pulses, small):
    t, U = synthetic_cycle(pulses, small) if small else synthetic_cycle(pulses, 0, 0.0)
    sig = classify(t, U, G)
    assert (sig.p, sig.s) == (pulses, small)


def test_constant_trajectory():
    t = np.linspace(0.0, 1.0, 20)
    U = np.tile([0.1, 0.2, 0.3, 0.4], (20, 1))
    sig = classify(t, U, G)
    assert (sig.p, sig.s) == (0, 0)
    assert len(sig.phases) == 1 and sig.phases[0].kind == TRANSITION
    assert any("Regulator" in w for w in sig.warnings)


def test_ambiguous_amplitude_warned():
    amp = 0.6 * Thresholds().resolved(G)["A_pulse"]
    t, U = synthetic_cycle(2, 2, amp / 2)
    sig = classify(t, U, G)
    assert sig.ambiguous == 2
    assert any("ambiguous" in w or "between" in w for w in sig.warnings)


def test_phase_intervals_tile_time():
    t, U = synthetic_cycle()
    sig = classify(t, U, G)
    assert sig.phases[0].t_start == t[0] and sig.phases[-1].t_end == t[-1]
    for a, b in zip(sig.phases, sig.phases[1:]):
        assert a.t_end == b.t_start


def test_too_short():
    with pytest.raises(DomainError):
        classify(np.array([0.0]), np.zeros((1, 4)), G)


def test_signature_serialization():
    t, U = synthetic_cycle()
    d = classify(t, U, G).to_dict()
    assert d["label"] == "(3,2)"
    assert isinstance(d["phases"], list)


def test_named_sections_levels():
    secs = named_sections(P, 0.1)
    u = np.array([x_sing(G.gamma, P) - 0.1, 0.0, 0.0, 0.0])
    assert secs["endsurge"].value(u) == pytest.approx(0.0, abs=1e-14)
    assert secs["endsurge"].direction == +1


def test_simulation_signature_stable_under_tolerance():
    spec = build_field(FieldTag.FULL4D, P)
    a = integrate(spec, SEED, (0.0, 30.0), Tolerances(1e-8, 1e-10))
    b = integrate(spec, SEED, (0.0, 30.0), Tolerances(1e-9, 1e-11))
    sa, sb = classify_trajectory(a, P), classify_trajectory(b, P)
    assert (sa.p, sa.s) == (sb.p, sb.s)


def test_return_map_contracts():
    u0 = return_map(SEED, P).state
    u1 = return_map(u0, P).state
    u2 = return_map(u1, P).state
    assert _distance(u2, u1) < _distance(u1, u0)


def test_fixed_point_maps_to_itself():
    orb = find_periodic(P, SEED, measure_contraction=False)
    image = return_map(orb.anchor, P).state
    assert _distance(image, orb.anchor) < 1e-7
    assert orb.period == pytest.approx(return_map(orb.anchor, P).time, rel=1e-8)
    assert orb.signature.p > 0
