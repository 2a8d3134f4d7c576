"""Reduced vector fields, blow-up charts and local coordinates.

Every field is a :class:`VectorFieldSpec`: a tagged, immutable closure over a
:class:`~phantom_burster.model.ParameterSet` with an ``rhs(t, u)`` and an
analytic ``jac(t, u)``.  Higher-order remainders of the local forms are
dropped, so the fields are the leading-order truncations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .model import (
    DomainError,
    FoldGeometry,
    ParameterSet,
    _df,
    _dg,
    _drift,
    _drift_derivative,
    _f,
    _g,
    full_jacobian,
    eval_full_rhs,
    geometry,
)

__all__ = [
    "FieldTag",
    "VectorFieldSpec",
    "build_field",
    "ChartPoint",
    "k1_to_k2",
    "k2_to_k1",
    "blow_down",
    "local_coordinates",
    "from_local_coordinates",
    "k2_critical_manifold",
]


class FieldTag(str, Enum):
    FULL4D = "Full4D"
    THREE_SCALE_3D = "ThreeScale3D"
    SURGE_PLANAR = "SurgePlanar"
    BOUNDARY_LAYER_3D = "BoundaryLayer3D"
    DESINGULARIZED_REDUCED = "DesingularizedReduced"
    NORMAL_FORM_LOCAL = "NormalFormLocal"
    CHART_K1 = "ChartK1"
    CHART_K1_CM = "ChartK1CenterManifold"
    CHART_K2 = "ChartK2"
    RECTIFIED_K2 = "RectifiedK2"


_DIMENSION = {
    FieldTag.FULL4D: 4,
    FieldTag.THREE_SCALE_3D: 3,
    FieldTag.SURGE_PLANAR: 2,
    FieldTag.BOUNDARY_LAYER_3D: 3,
    FieldTag.DESINGULARIZED_REDUCED: 2,
    FieldTag.NORMAL_FORM_LOCAL: 3,
    FieldTag.CHART_K1: 4,
    FieldTag.CHART_K1_CM: 3,
    FieldTag.CHART_K2: 3,
    FieldTag.RECTIFIED_K2: 3,
}

_VARIABLES = {
    FieldTag.FULL4D: ("x", "y", "X", "Y"),
    FieldTag.THREE_SCALE_3D: ("x", "y", "X"),
    FieldTag.SURGE_PLANAR: ("x", "X"),
    FieldTag.BOUNDARY_LAYER_3D: ("x", "y", "X"),
    FieldTag.DESINGULARIZED_REDUCED: ("x", "X"),
    FieldTag.NORMAL_FORM_LOCAL: ("x", "y", "X"),
    FieldTag.CHART_K1: ("x1", "r1", "X1", "eps1"),
    FieldTag.CHART_K1_CM: ("r1", "X1", "eps1"),
    FieldTag.CHART_K2: ("x2", "y2", "X2"),
    FieldTag.RECTIFIED_K2: ("x", "y", "X"),
}


@dataclass(frozen=True)
class VectorFieldSpec:
    """An evaluable vector field together with its provenance.

    ``singular_loci`` are scalar functions of the state whose zeros bound the
    domain; ``rhs`` raises :class:`DomainError` on them.
    """

    tag: FieldTag
    dimension: int
    params: ParameterSet
    extras: Mapping[str, float]
    coefficients: Mapping[str, float]
    variables: tuple[str, ...]
    _rhs: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    _jac: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    singular_loci: tuple[Callable[[np.ndarray], float], ...] = field(default=(), repr=False)
    singular_tol: float = 1e-12

    def rhs(self, t: float, u: Sequence[float]) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        for locus in self.singular_loci:
            if abs(locus(u)) <= self.singular_tol:
                raise DomainError(f"{self.tag.value} evaluated on a singular locus at {u.tolist()}")
        return self._rhs(u)

    __call__ = rhs

    def jac(self, t: float, u: Sequence[float]) -> np.ndarray:
        return self._jac(np.asarray(u, dtype=float))

    def rhs_many(self, U: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on an ``(n, dim)`` array (no singular-locus checks)."""
        return np.asarray(self._rhs(np.asarray(U, dtype=float).T)).T

    def jac_many(self, U: np.ndarray) -> np.ndarray:
        """Jacobians on an ``(n, dim)`` array, returned as ``(n, dim, dim)``."""
        J = np.asarray(self._jac(np.asarray(U, dtype=float).T))
        return np.moveaxis(J, -1, 0) if J.ndim == 3 else J[None]


def _stack(rows) -> np.ndarray:
    return np.array([np.asarray(r, dtype=float) if np.ndim(r) else r for r in rows])


def _matrix(rows, like) -> np.ndarray:
    """Assemble a Jacobian from scalar/array entries; ``like`` fixes the broadcast shape."""
    shape = np.shape(like)
    return np.array([[np.broadcast_to(np.asarray(e, dtype=float), shape) for e in row] for row in rows])


def build_field(tag: FieldTag | str, p: ParameterSet, extras: Mapping[str, float] | None = None) -> VectorFieldSpec:
    """Construct the vector field identified by ``tag``.

    Required extras: ``Y`` (frozen slow Regulator variable) for
    ``BoundaryLayer3D``; ``eps`` for ``ChartK2`` and ``RectifiedK2``
    (defaults to ``p.eps``).  ``delta`` may be overridden for every local form.
    """
    tag = FieldTag(tag)
    extras = dict(extras or {})
    geo = geometry(p)
    delta = float(extras.get("delta", p.delta))
    coeffs: dict[str, Any] = {}
    loci: tuple[Callable[[np.ndarray], float], ...] = ()
    a0, a1, a2, c = p.a0, p.a1, p.a2, p.c
    l1 = p.lambda1
    alpha, phi, psi = geo.alpha, geo.phi, geo.psi
    ac = alpha * c

    if tag is FieldTag.FULL4D:
        rhs = lambda u: eval_full_rhs(u, p)  # noqa: E731

        def jac(u):
            if np.ndim(u) == 1:
                return full_jacobian(u, p)
            x, y, X, Y = u
            ed, d = p.eps * p.delta, p.delta
            return _matrix(
                [
                    [_df(x, p) / ed, -1.0 / ed, 0.0, 0.0],
                    [p.a0 / d, p.a1 / d, p.c / d, 0.0],
                    [0.0, 0.0, _dg(X, p) / d, -1.0 / d],
                    [0.0, 0.0, 1.0, p.b1],
                ],
                x,
            )

        coeffs.update(eps=p.eps, delta=p.delta)

    elif tag is FieldTag.THREE_SCALE_3D:
        ed = p.eps * delta

        def rhs(u):
            x, y, X = u
            return _stack([(-y + _f(x, p)) / ed, (a0 * x + a1 * y + a2 + c * X) / delta, _drift(X, p)])

        def jac(u):
            x, y, X = u
            return _matrix(
                [[_df(x, p) / ed, -1.0 / ed, 0.0], [a0 / delta, a1 / delta, c / delta], [0.0, 0.0, _drift_derivative(X, p)]],
                x,
            )

        loci = (lambda u: _dg(u[2], p),)
        coeffs.update(eps=p.eps, delta=delta)

    elif tag is FieldTag.SURGE_PLANAR:

        def rhs(u):
            x, X = u
            return _stack([(a0 * x + a1 * _f(x, p) + a2 + c * X) / (delta * _df(x, p)), _drift(X, p)])

        def jac(u):
            x, X = u
            num = a0 * x + a1 * _f(x, p) + a2 + c * X
            dfx = _df(x, p)
            dnum = a0 + a1 * dfx
            ddf = 6.0 * p.lambda3 * x
            return _matrix(
                [[(dnum * dfx - num * ddf) / (delta * dfx**2), c / (delta * dfx)], [0.0, _drift_derivative(X, p)]], x
            )

        loci = (lambda u: _df(u[0], p), lambda u: _dg(u[1], p))
        coeffs.update(delta=delta)

    elif tag is FieldTag.BOUNDARY_LAYER_3D:
        if "Y" not in extras:
            raise DomainError("BoundaryLayer3D needs the frozen Regulator value extras['Y']")
        Y0 = float(extras["Y"])
        eps = float(extras.get("eps", p.eps))

        def rhs(u):
            x, y, X = u
            return _stack([(-y + _f(x, p)) / eps, a0 * x + a1 * y + a2 + c * X, -Y0 + _g(X, p)])

        def jac(u):
            x, y, X = u
            return _matrix([[_df(x, p) / eps, -1.0 / eps, 0.0], [a0, a1, c], [0.0, 0.0, _dg(X, p)]], x)

        coeffs.update(eps=eps, Y=Y0)

    elif tag is FieldTag.DESINGULARIZED_REDUCED:

        def rhs(u):
            x, X = u
            return _stack([-(a0 * x + a1 * _f(x, p) + a2 + c * X), -delta * _drift(X, p) * _df(x, p)])

        def jac(u):
            x, X = u
            return _matrix(
                [
                    [-(a0 + a1 * _df(x, p)), -c],
                    [-delta * _drift(X, p) * 6.0 * p.lambda3 * x, -delta * _drift_derivative(X, p) * _df(x, p)],
                ],
                x,
            )

        loci = (lambda u: _dg(u[1], p),)
        coeffs.update(delta=delta)

    elif tag is FieldTag.NORMAL_FORM_LOCAL:
        eps = float(extras.get("eps", p.eps))
        k3 = 1.0 / (3.0 * l1)

        def rhs(u):
            x, y, X = u
            return _stack([(-y - x * x - k3 * x**3) / eps, a0 * x + a1 * y + ac * X, delta * (phi + psi * X)])

        def jac(u):
            x, y, X = u
            return _matrix(
                [[(-2.0 * x - 3.0 * k3 * x * x) / eps, -1.0 / eps, 0.0], [a0, a1, ac], [0.0, 0.0, delta * psi]], x
            )

        coeffs.update(eps=eps, delta=delta, alpha=alpha, phi=phi, psi=psi, alpha_c=ac)

    elif tag is FieldTag.CHART_K1:
        k3 = 1.0 / (3.0 * l1)

        def rhs(u):
            x1, r1, X1, e1 = u
            F = -a0 * x1 + a1 * r1 - ac * X1
            return _stack(
                [
                    -0.5 * x1 * e1 * F - (-1.0 + x1 * x1 + r1 * k3 * x1**3),
                    0.5 * r1 * e1 * F,
                    -0.5 * X1 * e1 * F + e1 * delta * (phi + psi * r1 * X1),
                    -e1 * e1 * F,
                ]
            )

        def jac(u):
            x1, r1, X1, e1 = u
            F = -a0 * x1 + a1 * r1 - ac * X1
            Fx, Fr, FX = -a0, a1, -ac
            return _matrix(
                [
                    [-0.5 * e1 * (F + x1 * Fx) - (2.0 * x1 + 3.0 * r1 * k3 * x1 * x1), -0.5 * x1 * e1 * Fr - k3 * x1**3, -0.5 * x1 * e1 * FX, -0.5 * x1 * F],
                    [0.5 * r1 * e1 * Fx, 0.5 * e1 * (F + r1 * Fr), 0.5 * r1 * e1 * FX, 0.5 * r1 * F],
                    [-0.5 * X1 * e1 * Fx, -0.5 * X1 * e1 * Fr + e1 * delta * psi * X1, -0.5 * e1 * (F + X1 * FX) + e1 * delta * psi * r1, -0.5 * X1 * F + delta * (phi + psi * r1 * X1)],
                    [-e1 * e1 * Fx, -e1 * e1 * Fr, -e1 * e1 * FX, -2.0 * e1 * F],
                ],
                x1,
            )

        coeffs.update(delta=delta, alpha_c=ac, phi=phi, psi=psi)

    elif tag is FieldTag.CHART_K1_CM:
        kr = a1 + a0 / (6.0 * l1)

        def rhs(u):
            r1, X1, e1 = u
            Ft = -a0 + kr * r1 - ac * X1
            return _stack([0.5 * r1 * Ft, -0.5 * X1 * Ft + delta * (phi + psi * r1 * X1), -e1 * Ft])

        def jac(u):
            r1, X1, e1 = u
            Ft = -a0 + kr * r1 - ac * X1
            return _matrix(
                [
                    [0.5 * Ft + 0.5 * r1 * kr, -0.5 * r1 * ac, 0.0],
                    [-0.5 * X1 * kr + delta * psi * X1, -0.5 * Ft + 0.5 * X1 * ac + delta * psi * r1, 0.0],
                    [-e1 * kr, e1 * ac, -Ft],
                ],
                r1,
            )

        coeffs.update(delta=delta, alpha_c=ac, phi=phi, psi=psi, Ftilde_r1=kr)

    elif tag in (FieldTag.CHART_K2, FieldTag.RECTIFIED_K2):
        eps = float(extras.get("eps", p.eps))
        se = math.sqrt(eps)
        A = ac / a0
        if tag is FieldTag.CHART_K2:
            k3 = se / (3.0 * l1)

            def rhs(u):
                x2, y2, X2 = u
                return _stack([-y2 - x2 * x2 - k3 * x2**3, a0 * x2 + ac * X2 + a1 * se * y2, delta * (phi + se * psi * X2)])

            def jac(u):
                x2, y2, X2 = u
                return _matrix(
                    [[-2.0 * x2 - 3.0 * k3 * x2 * x2, -1.0, 0.0], [a0, a1 * se, ac], [0.0, 0.0, delta * se * psi]], x2
                )

        else:

            def rhs(u):
                x, y, X = u
                return _stack([-y + 2.0 * A * X * x - x * x, a0 * x, delta * (phi + se * psi * X)])

            def jac(u):
                x, y, X = u
                return _matrix([[2.0 * A * X - 2.0 * x, -1.0, 2.0 * A * x], [a0, 0.0, 0.0], [0.0, 0.0, delta * se * psi]], x)

        coeffs.update(eps=eps, delta=delta, A=A, alpha_c=ac, phi=phi, psi=psi, psi_effective=se * psi, complex_window=math.sqrt(a0) / A)

    else:  # pragma: no cover - Enum is exhaustive
        raise DomainError(f"unknown field tag {tag}")

    return VectorFieldSpec(
        tag=tag,
        dimension=_DIMENSION[tag],
        params=p,
        extras=extras,
        coefficients=coeffs,
        variables=_VARIABLES[tag],
        _rhs=rhs,
        _jac=jac,
        singular_loci=loci,
    )


# ---------------------------------------------------------------------------
# blow-up charts


@dataclass(frozen=True)
class ChartPoint:
    """A point in the entry chart K1 ``(x1, r1, X1, eps1)`` or the transition chart K2 ``(x2, y2, X2)``.

    K2 points carry the (fixed) singular parameter ``eps`` so that they can be
    blown down.
    """

    chart: str
    coords: tuple[float, ...]
    eps: float | None = None

    def __post_init__(self) -> None:
        if self.chart not in ("K1", "K2"):
            raise DomainError(f"unknown chart {self.chart!r}")
        n = 4 if self.chart == "K1" else 3
        if len(self.coords) != n:
            raise DomainError(f"chart {self.chart} expects {n} coordinates")
        object.__setattr__(self, "coords", tuple(float(v) for v in self.coords))
        if self.chart == "K1":
            _, r1, _, e1 = self.coords
            if r1 < 0 or e1 < 0:
                raise DomainError("K1 requires r1 >= 0 and eps1 >= 0")


def k1_to_k2(pt: ChartPoint) -> ChartPoint:
    if pt.chart != "K1":
        raise DomainError("k1_to_k2 expects a K1 point")
    x1, r1, X1, e1 = pt.coords
    if e1 <= 0:
        raise DomainError("outside chart overlap: eps1 must be > 0")
    s = math.sqrt(e1)
    return ChartPoint("K2", (x1 / s, -1.0 / e1, X1 / s), eps=r1 * r1 * e1)


def k2_to_k1(pt: ChartPoint) -> ChartPoint:
    if pt.chart != "K2":
        raise DomainError("k2_to_k1 expects a K2 point")
    x2, y2, X2 = pt.coords
    if y2 >= 0:
        raise DomainError("outside chart overlap: y2 must be < 0")
    s = math.sqrt(-y2)
    e1 = -1.0 / y2
    r1 = math.sqrt(pt.eps / e1) if pt.eps is not None else 0.0
    return ChartPoint("K1", (x2 / s, r1, X2 / s, e1))


def blow_down(pt: ChartPoint, eps: float | None = None) -> tuple[float, ...]:
    """Map a chart point to the normal-form coordinates.

    K1 returns ``(x, y, X, eps)``; K2 returns ``(x, y, X)`` using ``eps``
    (argument, else the point's own value).
    """
    if pt.chart == "K1":
        x1, r1, X1, e1 = pt.coords
        return (r1 * x1, -r1 * r1, r1 * X1, r1 * r1 * e1)
    e = pt.eps if eps is None else eps
    if e is None or e < 0:
        raise DomainError("blowing down a K2 point needs eps >= 0")
    s = math.sqrt(e)
    x2, y2, X2 = pt.coords
    return (s * x2, e * y2, s * X2)


def k2_critical_manifold(X2, p: ParameterSet):
    """Critical manifold of the K2 fast subsystem at ``eps = 0``: ``(x2, y2)`` on ``S0``."""
    A = geometry(p).alpha * p.c / p.a0
    X2 = np.asarray(X2, dtype=float)
    return -A * X2, -(A * X2) ** 2


def local_coordinates(state, p: ParameterSet, geo: FoldGeometry | None = None) -> np.ndarray:
    """Translate/rescale ``(x, y, X)`` so the folded singularity sits at the origin."""
    geo = geo or geometry(p)
    x, y, X = state[:3]
    return np.array([geo.alpha * (x - geo.x_f), geo.alpha * (y - geo.y_f), X - geo.X_f])


def from_local_coordinates(local, p: ParameterSet, geo: FoldGeometry | None = None) -> np.ndarray:
    geo = geo or geometry(p)
    xb, yb, Xb = local[:3]
    return np.array([xb / geo.alpha + geo.x_f, yb / geo.alpha + geo.y_f, Xb + geo.X_f])
