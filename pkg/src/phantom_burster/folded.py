"""Folded-node analysis: classification, way-in/way-out, rotation sectors, C3/C4.

Local quantities live in the normal-form coordinates centred on the folded
singularity ``(x_f, y_f, X_f)``.  Rotation counts use one small oscillation
per ``2*pi`` of accumulated phase.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.optimize import brentq

from .model import DomainError, FoldGeometry, ParameterSet, _df, _dftilde, _dg, _f, _ftilde, _g, geometry, x_sing
from .reductions import FieldTag, VectorFieldSpec, build_field

__all__ = [
    "FoldKind",
    "FoldedSingularity",
    "WiwoResult",
    "H5Report",
    "classify",
    "k1_equilibria",
    "wiwo",
    "rotation_sector",
    "count_k2_rotations",
    "contraction_c3",
    "expansion_c4",
    "c3_integrand",
    "c4_integrand",
    "check_h5",
    "gauss_legendre",
]

SADDLE_NODE_TOL = 1e-8
QUAD_ABS = 1e-10
QUAD_REL = 1e-8


class FoldKind(str, Enum):
    NODE = "FoldedNode"
    SADDLE = "FoldedSaddle"
    SADDLE_NODE = "FoldedSaddleNode"


@dataclass(frozen=True)
class FoldedSingularity:
    kind: FoldKind
    X_eval: float
    xi_plus: complex
    xi_minus: complex
    phi: float
    psi: float
    A: float
    complex_window: float
    X1minus: float | None
    X1plus: float | None
    delta: float

    @property
    def real_eigenvalues(self) -> bool:
        return self.xi_plus.imag == 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kind"] = self.kind.value
        for key in ("xi_plus", "xi_minus"):
            z = out.pop(key)
            out[key] = {"re": z.real, "im": z.imag}
        out["real_eigenvalues"] = self.real_eigenvalues
        return out


def _ac(p: ParameterSet, geo: FoldGeometry) -> float:
    return geo.alpha * p.c


def k1_equilibria(p: ParameterSet, delta: float | None = None) -> tuple[float, float]:
    """``(X1minus, X1plus)`` of the centre-manifold flow in the entry chart."""
    delta = p.delta if delta is None else float(delta)
    geo = geometry(p)
    ac = _ac(p, geo)
    rad = p.a0**2 - 8.0 * delta * ac * geo.phi
    if rad < 0:
        raise DomainError(f"delta too large for K1 equilibria (radicand {rad:.3g} < 0)")
    s = math.sqrt(rad)
    # X1plus in cancellation-free form
    plus = -8.0 * delta * ac * geo.phi / (2.0 * ac * (p.a0 + s))
    return (-p.a0 - s) / (2.0 * ac), plus


def classify(p: ParameterSet, delta: float | None = None) -> FoldedSingularity:
    """Type and linearization of the folded singularity at leading order in ``delta``."""
    delta = p.delta if delta is None else float(delta)
    geo = geometry(p)
    phi, psi = geo.phi, geo.psi
    X_eval = 24.0 * p.c * p.lambda3 * geo.x_f * phi
    rad = p.a0**2 + delta * X_eval
    if rad >= 0:
        s = math.sqrt(rad)
        xi_p = complex(0.5 * (-p.a0 + s))
        xi_m = complex(0.5 * (-p.a0 - s))
    else:
        s = math.sqrt(-rad)
        xi_p, xi_m = complex(-0.5 * p.a0, 0.5 * s), complex(-0.5 * p.a0, -0.5 * s)
    if abs(phi) < SADDLE_NODE_TOL:
        kind = FoldKind.SADDLE_NODE
    elif X_eval < 0:
        kind = FoldKind.NODE
    else:
        kind = FoldKind.SADDLE
    ac = _ac(p, geo)
    A = ac / p.a0
    try:
        X1m, X1p = k1_equilibria(p, delta) if kind is FoldKind.NODE else (None, None)
    except DomainError:
        X1m = X1p = None
    return FoldedSingularity(kind, X_eval, xi_p, xi_m, phi, psi, A, math.sqrt(p.a0) / A, X1m, X1p, delta)


# ---------------------------------------------------------------------------
# way-in / way-out


def _h(w: float) -> float:
    """(w - log1p(w)) / w^2, smooth through w = 0."""
    if abs(w) < 1e-3:
        return 0.5 - w / 3.0 + w * w / 4.0 - w**3 / 5.0 + w**4 / 6.0
    return (w - math.log1p(w)) / (w * w)


def _wiwo_coefficients(p: ParameterSet, phi: float | None, psi: float | None, eps: float | None) -> tuple[float, float]:
    geo = geometry(p)
    phi = geo.phi if phi is None else float(phi)
    psi = geo.psi if psi is None else float(psi)
    if eps is not None:
        psi *= math.sqrt(eps)
    return phi, psi


def wiwo(
    X0: float,
    p: ParameterSet,
    phi: float | None = None,
    psi: float | None = None,
    eps: float | None = None,
    window: float | None = None,
) -> float:
    """Exit point ``X* > 0`` balancing attraction accumulated from ``X0 < 0``.

    Solves ``int_{X0}^{X*} Z/(phi + psi Z) dZ = 0``.  With ``eps`` the drift
    slope is scaled to ``sqrt(eps)*psi`` as in the transition chart.
    """
    phi, psi = _wiwo_coefficients(p, phi, psi, eps)
    geo = geometry(p)
    A = geo.alpha * p.c / p.a0
    window = math.sqrt(p.a0) / A if window is None else window
    if not (-window < X0 < 0):
        raise DomainError(f"X0={X0} outside the window (-{window:.6g}, 0)")
    if phi <= 0:
        raise DomainError("way-in/way-out needs phi > 0 (folded node)")
    if abs(psi) < 1e-10:
        return -X0
    if phi + psi * X0 <= 0:
        raise DomainError("phi + psi*Z changes sign on the integration range")
    u = psi / phi
    # phi * antiderivative = Z^2 h(uZ), monotone increasing for Z > 0
    target = X0 * X0 * _h(u * X0)
    H = lambda Z: Z * Z * _h(u * Z) - target  # noqa: E731
    hi = -X0
    if psi < 0:
        cap = -phi / psi
        while H(hi) < 0:
            hi = 0.5 * (hi + cap)
    else:
        while H(hi) < 0:
            hi *= 2.0
    return brentq(H, 0.0, hi, xtol=1e-15, rtol=8.9e-16, maxiter=500)


@dataclass(frozen=True)
class WiwoResult:
    X0: float
    Xstar: float
    R: float
    k: int
    delta: float
    R_printed: float
    phi: float
    psi: float

    def to_dict(self) -> dict:
        return asdict(self)


def rotation_sector(
    X0: float,
    p: ParameterSet,
    delta: float | None = None,
    eps: float | None = None,
) -> WiwoResult:
    """Predicted number of small oscillations for an entry at ``X0``.

    ``R = int omega(Z)/(phi + psi Z) dZ`` over ``[X0, Psi(X0)]`` with rotation
    rate ``omega(Z) = sqrt(a0 - A^2 Z^2)`` (zero where the linearization has
    real eigenvalues); ``k = floor(R / (2 pi delta))``.  ``R_printed`` evaluates
    the alternative integrand ``sqrt(A Z - 1)`` on the part of the range where
    it is real.
    """
    delta = p.delta if delta is None else float(delta)
    phi, psi = _wiwo_coefficients(p, None, None, eps)
    geo = geometry(p)
    A = geo.alpha * p.c / p.a0
    Xs = wiwo(X0, p, phi=phi, psi=psi)
    w = math.sqrt(p.a0) / A
    lo, hi = X0, min(Xs, w)
    integrand = lambda Z: math.sqrt(max(p.a0 - (A * Z) ** 2, 0.0)) / (phi + psi * Z)  # noqa: E731
    R = 0.0
    if hi > lo:
        # split at 0 so both halves have a single sqrt endpoint at most
        for a, b in ((lo, min(0.0, hi)), (max(0.0, lo), hi)):
            if b > a:
                R += quad(integrand, a, b, epsabs=QUAD_ABS, epsrel=QUAD_REL, limit=200)[0]
    z0 = p.a0 / (geo.alpha * p.c)
    R_printed = 0.0
    if Xs > max(X0, z0):
        R_printed = quad(lambda Z: math.sqrt(max(A * Z - 1.0, 0.0)) / (phi + psi * Z), max(X0, z0), Xs, epsabs=QUAD_ABS, epsrel=QUAD_REL)[0]
    k = max(int(math.floor(R / (2.0 * math.pi * delta))), 0)
    return WiwoResult(X0, Xs, R, k, delta, R_printed, phi, psi)


def _k2_phase_spec(p: ParameterSet, delta: float, eps: float) -> VectorFieldSpec:
    """Transition-chart field augmented by the angle of a tangent vector in the fast plane."""
    base = build_field(FieldTag.CHART_K2, p, {"eps": eps, "delta": delta})

    def rhs(u):
        J = base._jac(u[:3])
        th = u[3]
        cs, sn = np.cos(th), np.sin(th)
        a, b, c, d = J[0][0], J[0][1], J[1][0], J[1][1]
        dth = c * cs * cs + (d - a) * sn * cs - b * sn * sn
        return np.concatenate([np.asarray(base._rhs(u[:3]), dtype=float), [dth]])

    def jac(u):
        h = 1e-7
        out = np.empty((4, 4))
        f0 = rhs(u)
        for j in range(4):
            e = np.array(u, dtype=float)
            e[j] += h * max(1.0, abs(e[j]))
            out[:, j] = (rhs(e) - f0) / (e[j] - u[j])
        return out

    return VectorFieldSpec(
        tag=FieldTag.CHART_K2,
        dimension=4,
        params=p,
        extras={"eps": eps, "delta": delta},
        coefficients=dict(base.coefficients),
        variables=("x2", "y2", "X2", "theta"),
        _rhs=rhs,
        _jac=jac,
    )


def count_k2_rotations(X0: float, p: ParameterSet, delta: float, eps: float, X_end: float | None = None, rtol: float = 1e-9) -> dict:
    """Rotation count along a direct transition-chart integration.

    Starts on the attracting sheet of the critical manifold at ``X2 = X0`` and
    integrates until ``X2 = X_end`` (default the way-in/way-out exit), while a
    tangent vector is transported by the linearized fast flow.  Its
    x2-component changes sign once per half turn; the count of full turns is
    ``floor(sign_changes / 2)``.
    """
    from .integrator import Tolerances, coordinate_section, integrate_to_section

    if X_end is None:
        X_end = wiwo(X0, p, eps=eps)
    A = geometry(p).alpha * p.c / p.a0
    spec = _k2_phase_spec(p, delta, eps)
    u0 = [-A * X0, -((A * X0) ** 2), X0, 0.0]
    phi, psi = _wiwo_coefficients(p, None, None, eps)
    span = 2.0 * math.log((phi + psi * X_end) / (phi + psi * X0)) / (delta * psi) if abs(psi) > 1e-12 else 2.0 * (X_end - X0) / (delta * phi)
    traj, ev = integrate_to_section(
        spec, u0, coordinate_section("X2_end", 2, X_end, +1), span, Tolerances(rtol, 1e-12, max_step=0.5)
    )
    theta = ev.state[3]
    # tangent x-component is cos(theta): zeros at pi/2 + n pi
    changes = int(math.floor((theta - 0.5 * math.pi) / math.pi) - math.floor((0.0 - 0.5 * math.pi) / math.pi))
    return {"X0": X0, "X_end": X_end, "theta": theta, "sign_changes": changes, "k": changes // 2, "time": ev.t}


# ---------------------------------------------------------------------------
# global contraction / expansion


def gauss_legendre(fn, a: float, b: float, panels: int = 64, order: int = 16) -> float:
    """Composite Gauss-Legendre rule (vectorized integrand)."""
    nodes, weights = leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    pts = mid + half * nodes[None, :]
    return float(np.sum(half * weights[None, :] * fn(pts)))


def c3_integrand(x, p: ParameterSet):
    ft = _ftilde(x, p)
    return (_dftilde(x, p) ** 2) * _dg(ft, p) / (_df(x, p) * (ft + p.b1 * _g(ft, p) + p.b2))


def c4_integrand(x, p: ParameterSet, X_f: float | None = None):
    X_f = geometry(p).X_f if X_f is None else X_f
    return _df(x, p) ** 2 / (p.a0 * x + p.a1 * _f(x, p) + p.a2 - p.c * X_f)


def _c3_bounds(p: ParameterSet) -> tuple[float, float]:
    geo = geometry(p)
    lo, hi = x_sing(geo.X_max, p), x_sing(geo.gamma, p)
    xs = np.linspace(lo, hi, 401)
    den = _df(xs, p) * (_ftilde(xs, p) + p.b1 * _g(_ftilde(xs, p), p) + p.b2)
    if np.any(den == 0) or np.any(np.diff(np.sign(den)) != 0):
        raise DomainError("C3 integrand denominator vanishes inside the surge range (degenerate surge configuration)")
    return lo, hi


def contraction_c3(p: ParameterSet, method: str = "adaptive") -> float:
    """Leading contraction exponent accumulated along the surge (``C3 >= 0``).

    ``method`` is ``"adaptive"`` (QUADPACK) or ``"gauss"`` (composite
    Gauss-Legendre); both exist so results can be cross-checked.
    """
    lo, hi = _c3_bounds(p)
    if method == "adaptive":
        val = quad(lambda x: c3_integrand(x, p), lo, hi, epsabs=QUAD_ABS, epsrel=QUAD_REL, limit=200)[0]
    elif method == "gauss":
        val = gauss_legendre(lambda x: c3_integrand(x, p), lo, hi)
    else:
        raise ValueError(f"unknown quadrature method {method!r}")
    return p.c * val


def expansion_c4(p: ParameterSet, method: str = "adaptive") -> float:
    """Maximal expansion exponent along the middle Secretor branch (``C4 > 0``)."""
    geo = geometry(p)
    xs = np.linspace(-geo.x_f, geo.x_f, 401)
    den = p.a0 * xs + p.a1 * _f(xs, p) + p.a2 - p.c * geo.X_f
    if np.any(den <= 0):
        raise DomainError(f"C4 denominator not positive on [-x_f, x_f] (min {den.min():.4g})")
    fn = lambda x: c4_integrand(x, p, geo.X_f)  # noqa: E731
    if method == "adaptive":
        return quad(fn, -geo.x_f, geo.x_f, epsabs=QUAD_ABS, epsrel=QUAD_REL, limit=200)[0]
    if method == "gauss":
        return gauss_legendre(fn, -geo.x_f, geo.x_f)
    raise ValueError(f"unknown quadrature method {method!r}")


@dataclass(frozen=True)
class H5Report:
    holds: bool
    lhs: float
    rhs: float
    margin: float
    C3: float
    C4: float
    eps: float
    delta: float
    delta_star: float

    def to_dict(self) -> dict:
        return asdict(self)


def check_h5(p: ParameterSet, eps: float | None = None, delta: float | None = None) -> H5Report:
    """Contraction along the surge against expansion near the canard: ``C3/delta > 2 C4/eps``.

    ``delta_star = eps*C3/(2*C4)`` is the crossover below which the condition holds.
    """
    eps = p.eps if eps is None else float(eps)
    delta = p.delta if delta is None else float(delta)
    C3, C4 = contraction_c3(p), expansion_c4(p)
    lhs, rhs = C3 / delta, 2.0 * C4 / eps
    return H5Report(lhs > rhs, lhs, rhs, lhs - rhs, C3, C4, eps, delta, eps * C3 / (2.0 * C4))
