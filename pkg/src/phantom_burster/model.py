"""Parameters, vector field and nullcline geometry of the phantom burster.

The model couples a fast FitzHugh-Nagumo type *Secretor* ``(x, y)`` to a
slower relaxation oscillator, the *Regulator* ``(X, Y)``::

    eps*delta x' = -y + f(x)
        delta y' = a0 x + a1 y + a2 + c X
        delta X' = -Y + g(X)
              Y' = X + b1 Y + b2

with odd cubics ``f(x) = lambda3 x^3 + lambda1 x`` and
``g(X) = mu3 X^3 + mu1 X``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Mapping, NamedTuple

import numpy as np

__all__ = [
    "ParameterSet",
    "PAPER_PARAMETERS",
    "CubicValues",
    "FoldGeometry",
    "HypothesisCheck",
    "HypothesisReport",
    "DomainError",
    "eval_full_rhs",
    "full_jacobian",
    "eval_cubics",
    "geometry",
    "x_sing",
    "check_hypotheses",
]


class DomainError(ValueError):
    """Raised when an operation is evaluated outside its domain of validity."""


# Unicode spellings accepted in parameter files next to the ASCII names.
_ALIASES = {
    "λ1": "lambda1",
    "λ3": "lambda3",
    "μ1": "mu1",
    "μ3": "mu3",
    "ε": "eps",
    "epsilon": "eps",
    "δ": "delta",
}


@dataclass(frozen=True)
class ParameterSet:
    """All model constants plus the two singular parameters ``eps`` and ``delta``.

    Defaults are the published parameter set with desk-scale singular
    parameters ``eps=0.05`` and ``delta=0.1``.
    """

    a0: float = 1.0
    a1: float = 0.02
    a2: float = 0.8
    c: float = 0.69
    b1: float = 0.0
    b2: float = -0.8
    lambda1: float = 1.5
    lambda3: float = -1.0
    mu1: float = 4.0
    mu3: float = -1.0
    eps: float = 0.05
    delta: float = 0.1

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise DomainError(f"parameter {f.name} must be a finite real number, got {value!r}")
            object.__setattr__(self, f.name, float(value))
        problems = []
        for name in ("a0", "a1", "a2", "c", "lambda1", "mu1"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0 (got {getattr(self, name)})")
        for name in ("lambda3", "mu3"):
            if not getattr(self, name) < 0:
                problems.append(f"{name} must be < 0 (got {getattr(self, name)})")
        for name in ("eps", "delta"):
            if not 0 < getattr(self, name) < 1:
                problems.append(f"{name} must lie in (0, 1) (got {getattr(self, name)})")
        if problems:
            raise DomainError("invalid ParameterSet: " + "; ".join(problems))

    def with_(self, **changes: float) -> "ParameterSet":
        return replace(self, **{_ALIASES.get(k, k): v for k, v in changes.items()})

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ParameterSet":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = _ALIASES.get(key, key)
            if name not in known:
                raise DomainError(f"unknown parameter {key!r}")
            kwargs[name] = value
        return cls(**kwargs)


PAPER_PARAMETERS = ParameterSet()


class CubicValues(NamedTuple):
    f: float
    df: float
    g: float
    dg: float
    ftilde: float
    dftilde: float


def _f(x, p: ParameterSet):
    return p.lambda3 * x**3 + p.lambda1 * x


def _df(x, p: ParameterSet):
    return 3.0 * p.lambda3 * x**2 + p.lambda1


def _g(X, p: ParameterSet):
    return p.mu3 * X**3 + p.mu1 * X


def _dg(X, p: ParameterSet):
    return 3.0 * p.mu3 * X**2 + p.mu1


def _ftilde(x, p: ParameterSet):
    return -(p.a0 * x + p.a1 * _f(x, p) + p.a2) / p.c


def _dftilde(x, p: ParameterSet):
    return -(p.a0 + p.a1 * _df(x, p)) / p.c


def eval_cubics(x: float, p: ParameterSet) -> CubicValues:
    """Evaluate f, g, the slow nullcline ``ftilde`` and their derivatives at ``x``.

    The same abscissa is fed to the Secretor cubic ``f`` and the Regulator
    cubic ``g``; callers pick the entries they need.
    """
    return CubicValues(_f(x, p), _df(x, p), _g(x, p), _dg(x, p), _ftilde(x, p), _dftilde(x, p))


def eval_full_rhs(state, p: ParameterSet) -> np.ndarray:
    x, y, X, Y = state
    ed = p.eps * p.delta
    return np.array(
        [
            (-y + _f(x, p)) / ed,
            (p.a0 * x + p.a1 * y + p.a2 + p.c * X) / p.delta,
            (-Y + _g(X, p)) / p.delta,
            X + p.b1 * Y + p.b2,
        ]
    )


def full_jacobian(state, p: ParameterSet) -> np.ndarray:
    x, y, X, Y = state
    ed = p.eps * p.delta
    d = p.delta
    return np.array(
        [
            [_df(x, p) / ed, -1.0 / ed, 0.0, 0.0],
            [p.a0 / d, p.a1 / d, p.c / d, 0.0],
            [0.0, 0.0, _dg(X, p) / d, -1.0 / d],
            [0.0, 0.0, 1.0, p.b1],
        ]
    )


@dataclass(frozen=True)
class FoldGeometry:
    x_f: float
    y_f: float
    gamma: float
    X_f: float
    X_SN: float
    alpha: float
    phi: float
    psi: float
    x_cminus: float
    x_cplus: float
    X_min: float
    X_max: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def _drift(X, p: ParameterSet):
    """Reduced Regulator drift (X + b1 g(X) + b2) / g'(X)."""
    return (X + p.b1 * _g(X, p) + p.b2) / _dg(X, p)


def _drift_derivative(X, p: ParameterSet):
    num = X + p.b1 * _g(X, p) + p.b2
    dnum = 1.0 + p.b1 * _dg(X, p)
    den = _dg(X, p)
    dden = 6.0 * p.mu3 * X
    return (dnum * den - num * dden) / den**2


def geometry(p: ParameterSet) -> FoldGeometry:
    """Derived geometric constants of the folded critical manifold."""
    x_f = math.sqrt(p.lambda1 / (-3.0 * p.lambda3))
    gamma = math.sqrt(p.mu1 / (-3.0 * p.mu3))
    y_f = 2.0 / 3.0 * p.lambda1 * x_f
    X_f = -(p.a0 * x_f + p.a1 * y_f + p.a2) / p.c
    dg_f = _dg(X_f, p)
    if abs(dg_f) < 1e-12 * max(1.0, p.mu1):
        raise DomainError("g'(X_f) = 0: the Regulator fold coincides with X_f (degenerate configuration)")
    X_SN = (p.a0 + p.a1 * p.lambda1) ** 2 / (4.0 * p.a1 * p.c * p.lambda1)
    xc = math.sqrt(-(p.a0 + p.a1 * p.lambda1) / (3.0 * p.a1 * p.lambda3))
    # g(X) - g(gamma) = mu3 (X - gamma)^2 (X + 2 gamma) for the odd cubic g,
    # so the singular jump from a knee lands at -2 gamma (resp. +2 gamma).
    return FoldGeometry(
        x_f=x_f,
        y_f=y_f,
        gamma=gamma,
        X_f=X_f,
        X_SN=X_SN,
        alpha=math.sqrt(-3.0 * p.lambda1 * p.lambda3),
        phi=_drift(X_f, p),
        psi=_drift_derivative(X_f, p),
        x_cminus=-xc,
        x_cplus=xc,
        X_min=-2.0 * gamma,
        X_max=2.0 * gamma,
    )


def _real_cubic_roots(a: float, b: float, c: float, d: float, tol: float = 1e-12) -> np.ndarray:
    """Sorted real roots of ``a t^3 + b t^2 + c t + d`` (trigonometric form + Newton polish)."""
    # depressed cubic t = s - b/(3a): s^3 + P s + Q = 0
    shift = b / (3.0 * a)
    P = (3.0 * a * c - b * b) / (3.0 * a * a)
    Q = (2.0 * b**3 - 9.0 * a * b * c + 27.0 * a * a * d) / (27.0 * a**3)
    disc = -(4.0 * P**3 + 27.0 * Q**2)
    scale = max(abs(P) ** 3, Q**2, 1e-300)
    if disc > tol * scale and P < 0:
        m = 2.0 * math.sqrt(-P / 3.0)
        arg = 3.0 * Q / (P * m)
        theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        roots = np.array([m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]) - shift
    elif abs(disc) <= tol * scale:
        if abs(P) < 1e-300:
            roots = np.array([-shift] * 3)
        else:
            roots = np.array([3.0 * Q / P, -1.5 * Q / P, -1.5 * Q / P]) - shift
    else:
        # one real root (Cardano)
        sq = math.sqrt(Q * Q / 4.0 + P**3 / 27.0)
        s = np.cbrt(-Q / 2.0 + sq) + np.cbrt(-Q / 2.0 - sq)
        roots = np.array([s - shift])
    polished = []
    for r in roots:
        val = ((a * r + b) * r + c) * r + d
        der = (3.0 * a * r + 2.0 * b) * r + c
        if der != 0.0:
            r = r - val / der
        polished.append(r)
    return np.sort(np.array(polished))


def x_sing(X: float, p: ParameterSet) -> float:
    """x-component of the middle intersection of the y-nullcline with y = f(x).

    Solves ``a1*lambda3 x^3 + (a0 + a1*lambda1) x + a2 + c X = 0``.
    """
    a = p.a1 * p.lambda3
    b1 = p.a0 + p.a1 * p.lambda1
    d = p.a2 + p.c * X
    roots = _real_cubic_roots(a, 0.0, b1, d)
    if roots.size < 3 or roots[0] == roots[1] or roots[1] == roots[2]:
        raise DomainError(f"fewer than three intersections of the Secretor nullclines at X={X}")
    mid = float(roots[1])
    lo, hi = float(roots[0]), float(roots[2])
    # bisection fallback when the polish did not converge to the bracketed root
    h = lambda t: ((a * t) * t + b1) * t + d  # noqa: E731
    if abs(h(mid)) > 1e-9 * max(1.0, abs(d)):
        left, right = 0.5 * (lo + mid), 0.5 * (mid + hi)
        for _ in range(200):
            m = 0.5 * (left + right)
            if np.sign(h(m)) == np.sign(h(left)):
                left = m
            else:
                right = m
        mid = 0.5 * (left + right)
    return mid


@dataclass(frozen=True)
class HypothesisCheck:
    holds: bool
    margin: float


@dataclass(frozen=True)
class HypothesisReport:
    H1: HypothesisCheck
    H2: HypothesisCheck
    H3: HypothesisCheck
    H4: HypothesisCheck
    h1_gap: float
    h1_close: bool

    @property
    def all_hold(self) -> bool:
        return self.H1.holds and self.H2.holds and self.H3.holds and self.H4.holds

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for name in ("H1", "H2", "H3", "H4"):
            chk = getattr(self, name)
            out[name] = {"holds": chk.holds, "margin": chk.margin}
        out["H1_gap"] = self.h1_gap
        out["H1_close"] = self.h1_close
        out["all_hold"] = self.all_hold
        return out


def check_hypotheses(p: ParameterSet, h1_band: float = 0.5) -> HypothesisReport:
    """Evaluate the parameter constraints H1-H4 with their signed slacks.

    H1 only requires ``X_min <= X_f``; when the gap exceeds ``h1_band`` a
    warning is issued because small oscillations become invisible.
    """
    geo = geometry(p)
    gap = geo.X_f - geo.X_min
    core = -p.a0 * geo.x_f + p.a1 * _f(-geo.x_f, p) + p.a2
    h2 = -(core - p.c * geo.gamma)
    h3 = geo.X_SN - geo.X_max
    h4 = core + p.c * geo.gamma
    close = gap <= h1_band
    if gap > 0 and not close:
        warnings.warn(f"H1 holds but X_f - X_min = {gap:.4g} exceeds the closeness band {h1_band}", stacklevel=2)
    return HypothesisReport(
        H1=HypothesisCheck(gap > 0, gap),
        H2=HypothesisCheck(h2 > 0, h2),
        H3=HypothesisCheck(h3 > 0, h3),
        H4=HypothesisCheck(h4 > 0, h4),
        h1_gap=gap,
        h1_close=close,
    )
