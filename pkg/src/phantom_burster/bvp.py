"""Orbit segments as boundary-value problems, slow-manifold sweeps and canard detection.

A family member is the orbit segment that starts on a curve of initial points
(near the attracting or repelling sheet of the critical manifold) and ends on
a section; the section endpoints of all members form the trace of the slow
manifold.  Canards are transversal intersections of the attracting and the
repelling trace, found in log-polar coordinates around the common spiral
centre so that the exponentially tight windings remain resolvable.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .collocation import (
    CollocationMesh,
    CollocationProblem,
    NewtonFailure,
    Solution,
    equidistribute,
    initial_vector,
    newton_solve,
)
from .integrator import Section, Tolerances, coordinate_section, integrate_to_section
from .model import DomainError, ParameterSet, geometry
from .reductions import FieldTag, VectorFieldSpec, build_field

__all__ = [
    "OrbitSegment",
    "ManifoldFamily",
    "CanardIntersection",
    "CanardSet",
    "reversed_field",
    "solve_segment",
    "start_curve",
    "sweep_manifold",
    "canard_families",
    "detect_canards",
    "canard_spacing",
]


def reversed_field(spec: VectorFieldSpec) -> VectorFieldSpec:
    """The same field with time reversed (orbits traversed backwards)."""
    rhs, jac = spec._rhs, spec._jac
    extras = dict(spec.extras)
    extras["time_reversed"] = 0.0 if extras.get("time_reversed") else 1.0
    return dataclasses.replace(spec, extras=extras, _rhs=lambda u: -rhs(u), _jac=lambda u: -jac(u))


def field_problem(
    spec: VectorFieldSpec,
    bc: Callable[[np.ndarray, np.ndarray, float, np.ndarray], np.ndarray],
    n_bc: int,
) -> CollocationProblem:
    n = spec.dimension
    return CollocationProblem(
        n=n,
        rhs=lambda U, q: spec.rhs_many(U),
        jac=lambda U, q: spec.jac_many(U),
        bc=bc,
        n_bc=n_bc,
    )


@dataclass
class OrbitSegment:
    """A solved orbit segment from ``start`` to ``section``."""

    tag: str
    start: np.ndarray
    section: str
    solution: Solution

    @property
    def T(self) -> float:
        return self.solution.T

    @property
    def end(self) -> np.ndarray:
        return self.solution.nodes[-1]

    @property
    def collocation_residual(self) -> float:
        return self.solution.collocation_residual

    @property
    def boundary_residual(self) -> float:
        return self.solution.boundary_residual

    def __call__(self, t) -> np.ndarray:
        return self.solution(np.asarray(t) / self.T)

    def dense(self, per_interval: int = 4) -> tuple[np.ndarray, np.ndarray]:
        return self.solution.dense(per_interval)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "start": self.start.tolist(),
            "end": self.end.tolist(),
            "section": self.section,
            "T": self.T,
            "mesh_intervals": self.solution.mesh.N,
            "collocation_residual": self.collocation_residual,
            "boundary_residual": self.boundary_residual,
            "newton_iterations": self.solution.iterations,
        }


def _profile_from(guess, T: float) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(guess, OrbitSegment):
        return guess.solution
    if isinstance(guess, Solution):
        return guess
    # an integrator trajectory or any callable of time
    return lambda tau: guess(np.clip(np.asarray(tau) * T, 0.0, T))


def solve_segment(
    spec: VectorFieldSpec,
    start: Sequence[float],
    section: Section,
    guess,
    T_guess: float,
    mesh: CollocationMesh | int = 200,
    adapt: int = 2,
    tol: float = 1e-10,
) -> OrbitSegment:
    """Solve ``u' = T F(u)``, ``u(0) = start``, ``section(u(1)) = 0`` for the orbit and ``T``.

    ``guess`` is a trajectory, a previous segment or a callable of time; the
    mesh is re-equidistributed ``adapt`` times after the first solve.
    """
    start = np.asarray(start, dtype=float)
    n = spec.dimension
    if start.shape != (n,):
        raise DomainError(f"start point must have dimension {n}")

    def bc(u0, u1, T, q):
        return np.append(u0 - start, section.fn(u1))

    prob = field_problem(spec, bc, n + 1)
    if isinstance(mesh, int):
        mesh = CollocationMesh.uniform(mesh)
    profile = _profile_from(guess, T_guess)
    sol = newton_solve(prob, mesh, initial_vector(mesh, profile, T_guess), tol=tol)
    for _ in range(adapt):
        new_mesh = equidistribute(sol)
        sol = newton_solve(prob, new_mesh, initial_vector(new_mesh, sol, sol.T), tol=tol)
    if sol.T <= 0:
        raise NewtonFailure("segment converged to a non-positive transit time", sol.collocation_residual)
    return OrbitSegment(spec.tag.value, start, section.name, sol)


def _continue_segment(spec, start, section, prev: OrbitSegment, tol: float) -> OrbitSegment:
    return solve_segment(spec, start, section, prev, prev.T, mesh=prev.solution.mesh, adapt=0, tol=tol)


def start_curve(tag: FieldTag | str, p: ParameterSet, side: str, eps: float, offset: float = 3.0) -> Callable[[float], np.ndarray]:
    """Curve of initial points on one sheet of the critical manifold, parametrized by the regulator coordinate.

    The fast coordinate sits ``offset`` fast-units away from the fold (scaled by
    ``sqrt(eps)`` in normal-form coordinates) on the attracting (``x > 0``) or
    repelling (``x < 0``) sheet.
    """
    tag = FieldTag(tag)
    k3 = 1.0 / (3.0 * p.lambda1)
    sign = 1.0 if side == "attracting" else -1.0
    if tag is FieldTag.NORMAL_FORM_LOCAL:
        x0 = sign * offset * math.sqrt(eps)
        y0 = -x0 * x0 - k3 * x0**3
    elif tag is FieldTag.CHART_K2:
        x0 = sign * offset
        y0 = -x0 * x0 - math.sqrt(eps) * k3 * x0**3
    else:
        raise DomainError(f"no start curve for field {tag.value}")
    if side not in ("attracting", "repelling"):
        raise DomainError("side must be 'attracting' or 'repelling'")
    return lambda s: np.array([x0, y0, s])


@dataclass
class ManifoldFamily:
    """Family of segments approximating one slow manifold up to a section."""

    tag: str
    side: str
    section: str
    params: np.ndarray
    segments: list[OrbitSegment]
    eps: float
    anchor: np.ndarray | None = None
    failures: list[float] = field(default_factory=list)

    @property
    def trace(self) -> np.ndarray:
        """Section endpoints, one row per member (members ordered as ``params``)."""
        return np.array([s.end for s in self.segments])

    @property
    def max_collocation_residual(self) -> float:
        return max(s.collocation_residual for s in self.segments)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "side": self.side,
            "section": self.section,
            "eps": self.eps,
            "params": self.params.tolist(),
            "trace": self.trace.tolist(),
            "T": [s.T for s in self.segments],
            "anchor": None if self.anchor is None else self.anchor.tolist(),
            "max_collocation_residual": self.max_collocation_residual,
            "failures": list(self.failures),
        }


def mesh_from_steps(t: np.ndarray, N: int, floor: float = 0.2) -> CollocationMesh:
    """Mesh that follows the step distribution of an adaptive integration (plus a uniform share)."""
    tau = (np.asarray(t) - t[0]) / (t[-1] - t[0])
    k = np.arange(len(tau), dtype=float)
    dens_cum = (1.0 - floor) * k / k[-1] + floor * tau
    m = np.interp(np.linspace(0.0, 1.0, N + 1), dens_cum, tau)
    m[0], m[-1] = 0.0, 1.0
    return CollocationMesh(m)


def _first_member(spec, start, section, mesh_intervals, tol, max_time):
    traj, hit = integrate_to_section(spec, start, section, max_time, Tolerances(1e-9, 1e-12))
    mesh = mesh_from_steps(traj.t, mesh_intervals)
    return solve_segment(spec, start, section, traj, hit.t, mesh=mesh, adapt=3, tol=tol)


def sweep_manifold(
    spec: VectorFieldSpec,
    side: str,
    params: Sequence[float],
    curve: Callable[[float], np.ndarray],
    section: Section,
    mesh_intervals: int = 160,
    tol: float = 1e-10,
    adapt_every: int = 25,
    max_time: float = 1e3,
    anchor_param: float | None = None,
    max_halvings: int = 6,
) -> ManifoldFamily:
    """Continue segments along ``params``; each member seeds the next.

    The repelling side is computed as the attracting sweep of the
    time-reversed field.  A member whose Newton iteration fails is approached
    by halving the parameter step; the member is dropped (and recorded in
    ``failures``) after ``max_halvings`` halvings.
    """
    if side not in ("attracting", "repelling"):
        raise DomainError("side must be 'attracting' or 'repelling'")
    work = reversed_field(spec) if side == "repelling" else spec
    eps = float(spec.extras.get("eps", spec.params.eps))
    params = np.asarray(params, dtype=float)
    segs: list[OrbitSegment] = []
    kept: list[float] = []
    failures: list[float] = []
    prev = _first_member(work, curve(params[0]), section, mesh_intervals, tol, max_time)
    segs.append(prev)
    kept.append(params[0])
    prev_s = params[0]
    for idx, s in enumerate(params[1:], start=1):
        target = s
        cur, cur_s = prev, prev_s
        ok = False
        for _ in range(max_halvings + 1):
            try:
                seg = _continue_segment(work, curve(target), section, cur, tol)
            except (NewtonFailure, DomainError, FloatingPointError):
                target = 0.5 * (cur_s + target)
                continue
            cur, cur_s = seg, target
            if target == s:
                ok = True
                break
            target = s
        if not ok:
            failures.append(float(s))
            prev, prev_s = cur, cur_s
            continue
        if seg.solution.iterations > 4 or idx % adapt_every == 0:
            seg = solve_segment(work, curve(s), section, seg, seg.T, mesh=seg.solution.mesh, adapt=1, tol=tol)
        segs.append(seg)
        kept.append(float(s))
        prev, prev_s = seg, s
    anchor = None
    if anchor_param is not None:
        anchor = _first_member(work, curve(anchor_param), section, mesh_intervals, tol, max_time).end
    return ManifoldFamily(spec.tag.value, side, section.name, np.array(kept), segs, eps, anchor, failures)


def canard_families(
    p: ParameterSet,
    eps: float,
    delta: float,
    attracting_range: tuple[float, float] = (-0.03, -0.35),
    repelling_range: tuple[float, float] = (0.03, 0.40),
    members: int = 300,
    tag: FieldTag | str = FieldTag.NORMAL_FORM_LOCAL,
    mesh_intervals: int = 160,
    tol: float = 1e-10,
) -> tuple[ManifoldFamily, ManifoldFamily]:
    """Attracting and repelling families ending on the section {X = 0}.

    Ranges are in units of ``sqrt(eps)`` for the local normal form (so that
    they are the same blown-up regulator values for every ``eps``) and plain
    coordinates in the rescaling chart.  Each range runs outermost first and
    is mirrored when the regulator drift at the fold is negative.
    """
    tag = FieldTag(tag)
    spec = build_field(tag, p, {"eps": eps, "delta": delta})
    unit = math.sqrt(eps) if tag is FieldTag.NORMAL_FORM_LOCAL else 1.0
    section = coordinate_section("X=0", 2, 0.0)
    # the regulator drifts towards X = 0 from the side opposite to the sign of phi
    orient = 1.0 if geometry(p).phi > 0 else -1.0
    fams = []
    for side, rng, sgn in (("attracting", attracting_range, -1.0), ("repelling", repelling_range, 1.0)):
        params = orient * np.linspace(rng[0], rng[1], members) * unit
        curve = start_curve(tag, p, side, eps)
        fams.append(
            sweep_manifold(
                spec,
                side,
                params,
                curve,
                section,
                mesh_intervals=mesh_intervals,
                tol=tol,
                anchor_param=orient * sgn * 0.7 * unit,
            )
        )
    return fams[0], fams[1]


@dataclass(frozen=True)
class CanardIntersection:
    """One transversal intersection of the attracting and repelling traces."""

    location: tuple[float, float]
    rotation: int
    winding_level: int
    orbit_rotations: int
    attracting_param: float
    repelling_param: float
    log_radius: float
    mismatch: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class CanardSet:
    """Secondary canards (at least one small rotation) plus crossings without rotation."""

    canards: list[CanardIntersection]
    primary: list[CanardIntersection]
    center: tuple[float, float]
    scales: tuple[float, float]
    param_gaps: np.ndarray
    arc_gaps: np.ndarray

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "scales": list(self.scales),
            "canards": [c.to_dict() for c in self.canards],
            "primary": [c.to_dict() for c in self.primary],
            "param_gaps": self.param_gaps.tolist(),
            "arc_gaps": self.arc_gaps.tolist(),
        }


def _scaled(P: np.ndarray, center: np.ndarray, scales: np.ndarray) -> np.ndarray:
    return (np.atleast_2d(P)[:, :2] - center) / scales


def _log_polar(P: np.ndarray, center: np.ndarray, scales: np.ndarray, base: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Log radius and unwrapped angle; ``base`` fixes the branch of the first angle."""
    v = _scaled(P, center, scales)
    th = np.unwrap(np.arctan2(v[:, 1], v[:, 0]))
    if base is not None:
        th = th + 2.0 * math.pi * round((base - th[0]) / (2.0 * math.pi))
    return np.log(np.hypot(v[:, 0], v[:, 1])), th


def _intersections(la, ta, lr, tr) -> list[tuple[int, float, int, float, int]]:
    """All crossings of two polylines on the cylinder (log r, angle mod 2 pi).

    Returns ``(i, s, j, t, m)``: attracting segment ``i`` at fraction ``s``
    meets repelling segment ``j`` at fraction ``t`` once the repelling angle
    is shifted by ``2 pi m``.
    """
    out = []
    two_pi = 2.0 * math.pi
    q0 = np.stack([lr[:-1], tr[:-1]], axis=1)
    dq = np.stack([lr[1:], tr[1:]], axis=1) - q0
    qlo = np.minimum(lr[:-1], lr[1:])
    qhi = np.maximum(lr[:-1], lr[1:])
    for i in range(len(la) - 1):
        p0 = np.array([la[i], ta[i]])
        dp = np.array([la[i + 1], ta[i + 1]]) - p0
        for j in np.flatnonzero((qhi >= min(la[i], la[i + 1])) & (qlo <= max(la[i], la[i + 1]))):
            den = dp[0] * dq[j, 1] - dp[1] * dq[j, 0]
            if den == 0.0:
                continue
            lo = min(ta[i], ta[i + 1]) - max(tr[j], tr[j + 1])
            hi = max(ta[i], ta[i + 1]) - min(tr[j], tr[j + 1])
            for m in range(math.ceil(lo / two_pi), math.floor(hi / two_pi) + 1):
                w = q0[j] + np.array([0.0, two_pi * m]) - p0
                s = (w[0] * dq[j, 1] - w[1] * dq[j, 0]) / den
                t = (w[0] * dp[1] - w[1] * dp[0]) / den
                if 0.0 <= s < 1.0 and 0.0 <= t < 1.0:
                    out.append((i, float(s), int(j), float(t), m))
    return out


@dataclass
class _Bracket:
    params_a: list[float]
    params_r: list[float]
    segs_a: list[OrbitSegment]
    segs_r: list[OrbitSegment]
    base_a: float
    base_r: float


def _refine(bracket: _Bracket, m: int, ctx: dict, rounds: int):
    """Interpolate the crossing, solve members there, and re-intersect ``rounds`` times."""
    center, scales = ctx["center"], ctx["scales"]
    estimate = None
    mismatch = float("nan")
    members = (bracket.segs_a[0], bracket.segs_r[0])
    for rnd in range(rounds + 1):
        la, ta = _log_polar(np.array([s.end for s in bracket.segs_a]), center, scales, bracket.base_a)
        lr, tr = _log_polar(np.array([s.end for s in bracket.segs_r]), center, scales, bracket.base_r)
        hits = [h for h in _intersections(la, ta, lr, tr) if h[4] == m]
        if not hits:
            break
        i, s, j, t, _ = hits[0]
        pa = bracket.params_a[i] + s * (bracket.params_a[i + 1] - bracket.params_a[i])
        pr = bracket.params_r[j] + t * (bracket.params_r[j + 1] - bracket.params_r[j])
        logr = la[i] + s * (la[i + 1] - la[i])
        theta = ta[i] + s * (ta[i + 1] - ta[i])
        estimate = (pa, pr, logr, theta)
        if rnd == rounds:
            break
        try:
            sa = _continue_segment(ctx["spec_a"], ctx["curve_a"](pa), ctx["section"], bracket.segs_a[i], ctx["tol"])
            sr = _continue_segment(ctx["spec_r"], ctx["curve_r"](pr), ctx["section"], bracket.segs_r[j], ctx["tol"])
        except (NewtonFailure, DomainError):
            break
        mismatch = float(np.hypot(*_scaled(sa.end - sr.end, 0.0, scales)[0])) / math.exp(logr)
        members = (sa, sr)
        bracket = _Bracket(
            [bracket.params_a[i], pa, bracket.params_a[i + 1]],
            [bracket.params_r[j], pr, bracket.params_r[j + 1]],
            [bracket.segs_a[i], sa, bracket.segs_a[i + 1]],
            [bracket.segs_r[j], sr, bracket.segs_r[j + 1]],
            ta[i],
            tr[j],
        )
    return estimate, mismatch, members


def _tangent_angle(jac: Callable[[np.ndarray], np.ndarray], seg: OrbitSegment, theta0: float, backward: bool) -> float:
    """Angle of a fast-plane tangent vector transported along ``seg`` by the linearized flow.

    ``backward`` transports along the segment from its end to its start (the
    forward direction of an orbit computed with the time-reversed field).
    """
    T = seg.T
    sign = -1.0 if backward else 1.0

    def rate(tau, th):
        J = jac(seg.solution(float(tau)))
        cs, sn = math.cos(th[0]), math.sin(th[0])
        return [sign * T * (J[1, 0] * cs * cs + (J[1, 1] - J[0, 0]) * sn * cs - J[0, 1] * sn * sn)]

    span = (1.0, 0.0) if backward else (0.0, 1.0)
    out = solve_ivp(rate, span, [theta0], rtol=1e-8, atol=1e-10, max_step=float(np.min(seg.solution.mesh.h)) * 4)
    return float(out.y[0, -1])


def orbit_rotations(spec: VectorFieldSpec, seg_a: OrbitSegment, seg_r: OrbitSegment) -> int:
    """Small rotations of the orbit formed by an attracting member followed by a repelling member.

    A tangent vector is transported with the linearized fast flow along the
    whole orbit; its first component changes sign once per half turn.
    """
    jac = lambda u: spec.jac(0.0, u)  # noqa: E731
    th = _tangent_angle(jac, seg_a, 0.0, backward=False)
    th = _tangent_angle(jac, seg_r, th, backward=True)
    half = math.floor((th - 0.5 * math.pi) / math.pi) - math.floor(-0.5)
    return abs(int(half)) // 2


def detect_canards(
    attracting: ManifoldFamily,
    repelling: ManifoldFamily,
    p: ParameterSet,
    delta: float,
    center: Sequence[float] | None = None,
    refine: int = 4,
    tol: float = 1e-10,
    min_log_radius: float = -np.inf,
) -> CanardSet:
    """Canards as crossings of the attracting and repelling traces in their common section.

    Both traces spiral around the same centre (taken from the deep anchor
    members unless given).  In coordinates (log r, angle) the spirals become
    curves on a cylinder, and every crossing there is an intersection of the
    traces; the crossing's winding level ``m`` counts how many full turns
    the attracting trace is ahead of the repelling one.  Each crossing is
    refined by solving members at the interpolated start parameters, and the
    small rotations of the resulting canard orbit are counted by tangent
    transport.  Crossings without rotation are primary canards and are kept
    apart.  Rotation numbers start from the count of the outermost secondary
    canard and follow the winding levels inward.
    """
    if attracting.tag != repelling.tag or attracting.section != repelling.section:
        raise DomainError("families must share field and section")
    tag = FieldTag(attracting.tag)
    eps = attracting.eps
    scales = np.array([math.sqrt(eps), eps]) if tag is FieldTag.NORMAL_FORM_LOCAL else np.array([1.0, 1.0])
    if center is None:
        if attracting.anchor is None or repelling.anchor is None:
            raise DomainError("families carry no anchor members; pass the centre explicitly")
        center = 0.5 * (attracting.anchor[:2] + repelling.anchor[:2])
    center = np.asarray(center, dtype=float)
    spec = build_field(tag, p, {"eps": eps, "delta": delta})
    ctx = {
        "center": center,
        "scales": scales,
        "spec_a": spec,
        "spec_r": reversed_field(spec),
        "curve_a": start_curve(tag, p, "attracting", eps),
        "curve_r": start_curve(tag, p, "repelling", eps),
        "section": coordinate_section(attracting.section, 2, 0.0),
        "tol": tol,
    }
    la, ta = _log_polar(attracting.trace, center, scales)
    lr, tr = _log_polar(repelling.trace, center, scales)
    hits = _intersections(la, ta, lr, tr)
    raw = []
    for i, s, j, t, m in hits:
        bracket = _Bracket(
            list(attracting.params[i : i + 2]),
            list(repelling.params[j : j + 2]),
            attracting.segments[i : i + 2],
            repelling.segments[j : j + 2],
            ta[i],
            tr[j],
        )
        est, mismatch, members = _refine(bracket, m, ctx, refine)
        if est is None:
            est = (
                attracting.params[i] + s * (attracting.params[i + 1] - attracting.params[i]),
                repelling.params[j] + t * (repelling.params[j + 1] - repelling.params[j]),
                la[i] + s * (la[i + 1] - la[i]),
                ta[i] + s * (ta[i + 1] - ta[i]),
            )
        if est[2] < min_log_radius:
            continue
        raw.append((i + s, m, est, mismatch, orbit_rotations(spec, *members)))
    raw.sort(key=lambda r: r[0])
    primary = [r for r in raw if r[4] == 0]
    raw = [r for r in raw if r[4] > 0]
    levels = [r[1] for r in raw]
    increasing = len(levels) < 2 or levels[-1] >= levels[0]

    def build(entry, k):
        _, m, (pa, pr, logr, theta), mismatch, turns = entry
        loc = center + scales * math.exp(logr) * np.array([math.cos(theta), math.sin(theta)])
        return CanardIntersection((float(loc[0]), float(loc[1])), int(k), int(m), int(turns), float(pa), float(pr), float(logr), mismatch)

    # absolute numbering from the rotation count of the outermost canard, consecutive by winding level
    canards = []
    for entry in raw:
        k = raw[0][4] + (entry[1] - raw[0][1] if increasing else raw[0][1] - entry[1])
        canards.append(build(entry, k))
    prim = [build(entry, 0) for entry in primary]
    # gaps along the attracting trace: start parameter and scaled arc length in the section
    pos = np.array([r[0] for r in raw])
    v = _scaled(attracting.trace, center, scales)
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(v, axis=0).T))])
    arc_at = np.interp(pos, np.arange(len(arc)), arc) if len(pos) else np.empty(0)
    param_gaps = np.abs(np.diff([c.attracting_param for c in canards]))
    return CanardSet(canards, prim, (float(center[0]), float(center[1])), (float(scales[0]), float(scales[1])), param_gaps, np.diff(arc_at))


def canard_spacing(cs: CanardSet, eps: float, window: tuple[float, float] = (-0.36, -0.12), blown_up: bool = True) -> dict:
    """Mean distance in start parameter between consecutive secondary canards.

    Fitted as the slope of the attracting start parameter against the rotation
    number over the canards whose start parameter lies in ``window`` (in
    units of ``sqrt(eps)`` when ``blown_up``, so that the window is the same
    region of the blown-up fold for every ``eps``).
    """
    unit = math.sqrt(eps) if blown_up else 1.0
    lo, hi = min(window), max(window)
    sel = [c for c in cs.canards if lo <= c.attracting_param / unit <= hi]
    if len(sel) < 2:
        raise DomainError(f"fewer than two canards in the window {window}")
    k = np.array([c.rotation for c in sel], dtype=float)
    X = np.array([c.attracting_param for c in sel])
    slope = np.polyfit(k, X, 1)[0]
    return {"spacing": float(abs(slope)), "count": len(sel), "rotations": [int(v) for v in k]}
