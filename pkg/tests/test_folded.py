import numpy as np
import pytest

from phantom_burster.folded import (
    FoldKind,
    c3_integrand,
    c4_integrand,
    check_h5,
    classify,
    contraction_c3,
    count_k2_rotations,
    expansion_c4,
    k1_equilibria,
    rotation_sector,
    wiwo,
)
from phantom_burster.model import PAPER_PARAMETERS, DomainError, geometry, x_sing

from oracles import h5_verbatim as _h5_verbatim
from oracles import wiwo_oracle as _wiwo_oracle

P = PAPER_PARAMETERS
G = geometry(P)
A = G.alpha * P.c / P.a0


# classification


@pytest.mark.parametrize("delta", [1e-3, 1e-2])
def test_folded_node_at_paper_parameters(delta):
    fs = classify(P, delta)
    assert fs.kind is FoldKind.NODE
    assert abs(fs.X_eval - (-3.3248)) < 1e-3


def test_zero_delta_eigenvalues():
    fs = classify(P, 0.0)
    assert fs.xi_plus == 0.0
    assert fs.xi_minus == -P.a0


def test_folded_saddle_variant():
    fs = classify(P.with_(b2=3.1))
    assert fs.phi < 0 and fs.X_eval > 0
    assert fs.kind is FoldKind.SADDLE


def test_complex_eigenvalues_for_large_delta():
    fs = classify(P, 0.35)
    assert not fs.real_eigenvalues
    assert fs.xi_plus.real == pytest.approx(-0.5 * P.a0)


def test_k1_equilibria_values():
    m, p_ = k1_equilibria(P, 0.0)
    assert m == pytest.approx(-P.a0 / (G.alpha * P.c), rel=1e-14)
    assert p_ == 0.0
    m, p_ = k1_equilibria(P, 0.01)
    # the closed form evaluates to -0.6774682; the reference value is quoted to 5e-6
    assert m == pytest.approx(-0.677470, abs=5e-6)
    assert p_ == pytest.approx(-0.005727, abs=1e-6)


def test_k1_minus_second_order_defect():
    base = -P.a0 / (G.alpha * P.c)
    d1 = abs(k1_equilibria(P, 0.01)[0] - (base + 2 * G.phi * 0.01 / P.a0))
    d2 = abs(k1_equilibria(P, 0.005)[0] - (base + 2 * G.phi * 0.005 / P.a0))
    assert 3.5 < d1 / d2 < 4.5


def test_k1_equilibria_domain():
    with pytest.raises(DomainError):
        k1_equilibria(P, 10.0)


# way-in / way-out


def test_wiwo_antisymmetric_without_slope():
    for X0 in np.linspace(-0.65, -0.01, 20):
        assert abs(wiwo(X0, P, psi=0.0) + X0) < 1e-10


@pytest.mark.parametrize("X0", [-0.3, -0.2, -0.1, -0.5])
def test_wiwo_matches_quadrature_oracle(X0):
    assert wiwo(X0, P) == pytest.approx(_wiwo_oracle(X0, G.phi, G.psi), abs=1e-9)


def test_wiwo_reference_values():
    assert wiwo(-0.2, P) == pytest.approx(0.228, abs=1e-3)
    # the reference -0.3 value is checked in the acceptance suite
    assert wiwo(-0.3, P) > wiwo(-0.2, P)


def test_wiwo_strictly_decreasing():
    xs = np.linspace(-0.65, -0.01, 50)
    vals = [wiwo(X0, P) for X0 in xs]
    assert np.all(np.diff(vals) < 0)


def test_wiwo_domain_errors():
    with pytest.raises(DomainError):
        wiwo(0.1, P)
    with pytest.raises(DomainError):
        wiwo(-0.3, P.with_(b2=3.1))


def test_sector_vanishes_at_origin():
    res = rotation_sector(-1e-9, P, 0.05)
    assert res.R < 1e-6 and res.k == 0


def test_sector_doubles_when_delta_halves():
    k1 = rotation_sector(-0.3, P, 0.02).k
    k2 = rotation_sector(-0.3, P, 0.01).k
    assert abs(k2 - 2 * k1) <= 1


def test_sector_matches_chart_integration():
    eps, delta = 0.01, 0.01
    pred = rotation_sector(-0.3, P, delta, eps=eps)
    direct = count_k2_rotations(-0.3, P, delta, eps)
    assert abs(pred.k - direct["k"]) <= 1


# contraction and expansion constants


def test_c3_integrand_zero_at_regulator_knee():
    assert abs(c3_integrand(x_sing(G.gamma, P), P)) < 1e-12


def test_c3_integrand_nonnegative():
    xs = np.linspace(x_sing(G.X_max, P), x_sing(G.gamma, P), 100)
    assert np.all(c3_integrand(xs, P) >= -1e-14)


def test_c3_dual_quadrature():
    a, g = contraction_c3(P, "adaptive"), contraction_c3(P, "gauss")
    assert a > 0
    assert abs(a - g) / a < 1e-6


def test_c4_zero_at_fold_points():
    assert abs(c4_integrand(G.x_f, P)) < 1e-14
    assert abs(c4_integrand(-G.x_f, P)) < 1e-14


def test_c4_value_and_dual_quadrature():
    a, g = expansion_c4(P, "adaptive"), expansion_c4(P, "gauss")
    assert a == pytest.approx(0.75, abs=0.02)
    assert abs(a - g) / a < 1e-6


def test_c4_denominators():
    den = lambda x: P.a0 * x + P.a1 * (P.lambda3 * x**3 + P.lambda1 * x) + P.a2 - P.c * G.X_f  # noqa: E731
    assert den(-G.x_f) == pytest.approx(1.600, abs=1e-3)
    assert den(G.x_f) == pytest.approx(3.043, abs=1e-3)


def test_unknown_quadrature_method():
    with pytest.raises(ValueError):
        contraction_c3(P, "trapezoid")


def test_h5_limit_small_delta():
    assert check_h5(P, 0.05, 1e-6).holds


def test_h5_flips_at_crossover():
    rep = check_h5(P, 0.05, 0.1)
    ds = rep.delta_star
    assert ds == pytest.approx(0.05 * rep.C3 / (2 * rep.C4), rel=1e-14)
    assert check_h5(P, 0.05, ds * (1 - 1e-9)).holds
    assert not check_h5(P, 0.05, ds * (1 + 1e-9)).holds


def test_h5_matches_verbatim_evaluation():
    holds, c3, c4 = _h5_verbatim(P, 0.05, 0.1)
    rep = check_h5(P, 0.05, 0.1)
    assert rep.holds == holds
    assert rep.C3 == pytest.approx(c3, rel=1e-6)
    assert rep.C4 == pytest.approx(c4, rel=1e-6)
