"""Periodic orbits as boundary-value problems and their continuation in ``a2``.

A periodic orbit solves ``u' = T F(u)``, ``u(1) = u(0)``, plus the integral
phase condition ``int <u, v'> dtau = int <v, v'> dtau`` against a reference
orbit ``v`` (the seed, then the previous branch point).  Branches are
followed by pseudo-arclength continuation along the branch tangent; every
accepted point is classified into its ``(p, s)`` signature.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .collocation import (
    CollocationMesh,
    CollocationProblem,
    NewtonFailure,
    Solution,
    bordered_direction,
    equidistribute,
    initial_vector,
    newton_solve,
)
from .bvp import OrbitSegment, mesh_from_steps
from .mmo import MmoSignature, Thresholds, classify, find_periodic
from .model import DomainError, ParameterSet, geometry, x_sing
from .reductions import FieldTag, VectorFieldSpec, build_field

_log = logging.getLogger(__name__)

__all__ = [
    "ContinuationSettings",
    "BranchPoint",
    "Branch",
    "solve_periodic",
    "periodic_signature",
    "continue_branch",
]


def _node_weights(mesh: CollocationMesh) -> np.ndarray:
    h = mesh.h
    w = np.zeros(mesh.N + 1)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def _phase_row(mesh: CollocationMesh, ref, ref_T: float, rhs, n: int, nq: int, q: np.ndarray) -> tuple[np.ndarray, float]:
    """Row of the discretized phase condition on ``mesh`` against the reference orbit ``ref``."""
    st = mesh.stage_times().ravel()
    V = np.asarray(ref(st))
    dV = ref_T * rhs(V, q)
    wts = (mesh.h[:, None] * mesh.b[None, :]).ravel()
    row = np.zeros(mesh.size(n, nq))
    off = (mesh.N + 1) * n
    row[off : off + mesh.N * mesh.m * n] = (wts[:, None] * dV).ravel()
    return row, float(np.sum(wts * np.einsum("ij,ij->i", V, dV)))


def _periodic_bc(u0, u1, T, q):
    return u1 - u0


def _field_problem(field: VectorFieldSpec, nq: int = 0, builder=None) -> CollocationProblem:
    if nq == 0:
        return CollocationProblem(
            field.dimension,
            lambda U, q: field.rhs_many(U),
            lambda U, q: field.jac_many(U),
            _periodic_bc,
            field.dimension,
        )
    cache: dict = {}

    def spec_for(q):
        key = float(q[0])
        if key not in cache:
            cache.clear()
            cache[key] = builder(key)
        return cache[key]

    return CollocationProblem(
        field.dimension,
        lambda U, q: spec_for(q).rhs_many(U),
        lambda U, q: spec_for(q).jac_many(U),
        _periodic_bc,
        field.dimension,
        nq=nq,
    )


def _as_profile(seed, mesh_intervals: int):
    """(callable of tau, period, starting mesh) from a trajectory, orbit or solved segment."""
    if isinstance(seed, OrbitSegment):
        seed = seed.solution
    if isinstance(seed, Solution):
        mesh = seed.mesh if seed.mesh.N == mesh_intervals else equidistribute(seed, mesh_intervals)
        return seed, seed.T, mesh
    traj = getattr(seed, "trajectory", seed)
    t = np.asarray(traj.t)
    T = float(t[-1] - t[0])
    return (lambda tau: traj(t[0] + np.clip(np.asarray(tau), 0.0, 1.0) * T)), T, mesh_from_steps(t, mesh_intervals)


def solve_periodic(
    p: ParameterSet,
    seed,
    field: VectorFieldSpec | None = None,
    mesh_intervals: int = 200,
    adapt: int = 2,
    tol: float = 1e-10,
    max_gap: float = 0.1,
) -> OrbitSegment:
    """Periodic orbit with unknown period from a seed covering one period.

    ``seed`` is an integrator trajectory (or a periodic orbit found by the
    return map, or a previous solution).  The field defaults to the full
    model at ``p``.
    """
    field = build_field(FieldTag.FULL4D, p) if field is None else field
    profile, T, mesh = _as_profile(seed, mesh_intervals)
    ends = np.asarray(profile(np.array([0.0, 1.0])))
    scale = max(1.0, float(np.max(np.abs(ends))))
    gap = float(np.max(np.abs(ends[1] - ends[0]))) / scale
    if gap > max_gap:
        raise DomainError(f"seed is not closed: endpoint gap {gap:.3g} exceeds {max_gap}")
    prob = _field_problem(field)
    n = field.dimension
    q = np.empty(0)
    rhs = lambda U, qq: field.rhs_many(U)  # noqa: E731
    ref, ref_T = profile, T
    sol = None
    for rnd in range(adapt + 1):
        row = _phase_row(mesh, ref, ref_T, rhs, n, 0, q)
        z0 = initial_vector(mesh, ref, ref_T)
        try:
            sol = newton_solve(prob, mesh, z0, linear=[row], tol=tol)
        except NewtonFailure:
            if sol is None:
                raise
            break
        ref, ref_T = sol, sol.T
        if rnd < adapt:
            mesh = equidistribute(sol)
    if sol.T <= 0:
        raise NewtonFailure("periodic orbit converged to a non-positive period", sol.collocation_residual)
    return OrbitSegment(field.tag.value, sol.nodes[0].copy(), "periodic", sol)


def periodic_signature(seg: OrbitSegment, p: ParameterSet, thresholds: Thresholds | None = None, per_interval: int = 8) -> MmoSignature:
    """``(p, s)`` of one period, started at the end-of-surge crossing so that the period is complete."""
    geo = geometry(p)
    level = x_sing(geo.gamma, p) - 0.1
    sol = seg.solution
    tau, states = _dense_tau(sol, per_interval)
    g = states[:, 0] - level
    up = np.flatnonzero((g[:-1] < 0) & (g[1:] >= 0))
    start = 0.0
    if up.size:
        k = up[0]
        start = tau[k] + (tau[k + 1] - tau[k]) * (-g[k]) / (g[k + 1] - g[k])
    rel = np.concatenate([np.sort(np.mod(tau - start, 1.0)), [1.0]])
    pts = sol(np.mod(rel + start, 1.0))
    return classify(rel * sol.T, pts, geo, thresholds)


def _dense_tau(sol: Solution, per_interval: int) -> tuple[np.ndarray, np.ndarray]:
    sub = np.linspace(0.0, 1.0, per_interval, endpoint=False)
    tau = (sol.mesh.tau[:-1, None] + sol.mesh.h[:, None] * sub[None, :]).ravel()
    return tau, sol(tau)


@dataclass(frozen=True)
class ContinuationSettings:
    """Step control and weights of the pseudo-arclength continuation.

    The arclength norm is ``param_weight * da2^2 + state_weight * int |du|^2``;
    the small default state weight makes steps move mostly in ``a2`` where the
    branch is a graph over ``a2`` and still lets them follow the orbit where it
    is not.
    """

    ds: float = 1e-3
    ds_min: float = 1e-9
    ds_max: float = 1e-2
    max_points: int = 3000
    mesh_intervals: int = 600
    adapt_every: int = 10
    tol: float = 1e-10
    max_newton: int = 12
    param_weight: float = 1.0
    state_weight: float = 1e-4
    min_cos: float = 0.9
    explosion_dparam: float = 1e-8
    explosion_dmeasure: float = 1e-2

    def __post_init__(self) -> None:
        if not (0 < self.ds_min <= self.ds <= self.ds_max):
            raise DomainError("need 0 < ds_min <= ds <= ds_max")
        if not (self.param_weight > 0 and self.state_weight >= 0):
            raise DomainError("arclength weights must be positive")
        if not 0 < self.min_cos < 1:
            raise DomainError("min_cos must lie in (0, 1)")


@dataclass
class BranchPoint:
    a2: float
    measure: float
    period: float
    signature: MmoSignature
    step: float
    explosion: bool
    collocation_residual: float
    boundary_residual: float
    transition: str | None = None

    def to_dict(self) -> dict:
        return {
            "a2": self.a2,
            "measure": self.measure,
            "period": self.period,
            "p": self.signature.p,
            "s": self.signature.s,
            "label": self.signature.label,
            "step": self.step,
            "explosion": self.explosion,
            "transition": self.transition,
            "collocation_residual": self.collocation_residual,
            "boundary_residual": self.boundary_residual,
        }


@dataclass
class Branch:
    parameter: str
    points: list[BranchPoint]
    settings: ContinuationSettings
    stalls: list[float] = field(default_factory=list)
    orbits: list[OrbitSegment] = field(default_factory=list, repr=False)

    @property
    def markers(self) -> list[int]:
        return [i for i, pt in enumerate(self.points) if pt.explosion]

    def transitions(self) -> list[tuple[int, str]]:
        return [(i, pt.transition) for i, pt in enumerate(self.points) if pt.transition]

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "points": [pt.to_dict() for pt in self.points],
            "markers": self.markers,
            "stalls": list(self.stalls),
        }


def _measure(sol: Solution) -> float:
    """Maximum of y over the orbit (polynomial values at nodes and stages)."""
    return float(max(np.max(sol.nodes[:, 1]), np.max(sol.stages[..., 1])))


def _weights(mesh: CollocationMesh, n: int, nq: int, settings: ContinuationSettings) -> np.ndarray:
    w = np.zeros(mesh.size(n, nq))
    w[: (mesh.N + 1) * n] = settings.state_weight * np.repeat(_node_weights(mesh), n)
    w[-1] = settings.param_weight
    return w


def _on_mesh(sol: Solution, mesh: CollocationMesh) -> np.ndarray:
    if sol.mesh is mesh:
        return sol.pack()
    return initial_vector(mesh, sol, sol.T, sol.q)


def _as_solution(z: np.ndarray, mesh: CollocationMesh, n: int) -> Solution:
    """Wrap a packed vector (solution or tangent) so that it can be interpolated onto another mesh."""
    a = (mesh.N + 1) * n
    b = a + mesh.N * mesh.m * n
    return Solution(mesh, z[:a].reshape(mesh.N + 1, n), z[a:b].reshape(mesh.N, mesh.m, n), float(z[b]), z[b + 1 :].copy(), 0.0, 0.0, 0)


def _unit(v: np.ndarray, W: np.ndarray) -> np.ndarray:
    return v / math.sqrt(float(np.sum(W * v * v)))


def continue_branch(
    p: ParameterSet,
    seed,
    a2_range: tuple[float, float],
    settings: ContinuationSettings | None = None,
    thresholds: Thresholds | None = None,
    start: OrbitSegment | None = None,
) -> Branch:
    """Pseudo-arclength continuation of the periodic orbit in ``a2`` from ``a2_range[0]`` towards ``a2_range[1]``.

    The predictor follows the branch tangent (the null vector of the
    Jacobian, bordered by the previous tangent), so folds and steep
    segments are traversed.  Steps that fail, or whose tangent turns by
    more than ``acos(min_cos)``, are halved down to ``ds_min``; a stall is
    then recorded and the branch restarts past it with a natural-parameter
    step, seeded from the attracting cycle of the return map when the
    stalled orbit does not converge there.  A step is an explosion marker when ``|delta a2|`` is below
    ``explosion_dparam`` while the max-y measure moves by more than
    ``explosion_dmeasure``.
    """
    settings = settings or ContinuationSettings()
    a_lo, a_hi = a2_range
    direction = 1.0 if a_hi >= a_lo else -1.0
    p = p.with_(a2=a_lo)
    builder = lambda a2: build_field(FieldTag.FULL4D, p.with_(a2=a2))  # noqa: E731
    field0 = builder(a_lo)
    n = field0.dimension
    first = start if start is not None else solve_periodic(p, seed, field0, settings.mesh_intervals, tol=settings.tol)
    prob = _field_problem(field0, nq=1, builder=builder)
    rhs = prob.rhs

    def make_solution(seg_sol: Solution, a2: float) -> Solution:
        return Solution(
            seg_sol.mesh, seg_sol.nodes, seg_sol.stages, seg_sol.T, np.array([a2]),
            seg_sol.collocation_residual, seg_sol.boundary_residual, seg_sol.iterations,
        )

    points: list[BranchPoint] = []
    orbits: list[OrbitSegment] = []
    stalls: list[float] = []

    def record(sol: Solution, step: float, last: BranchPoint | None) -> BranchPoint:
        a2 = float(sol.q[0])
        seg = OrbitSegment(FieldTag.FULL4D.value, sol.nodes[0].copy(), "periodic", sol)
        sig = periodic_signature(seg, p.with_(a2=a2), thresholds)
        meas = _measure(sol)
        explosion = False
        transition = None
        if last is not None:
            explosion = abs(a2 - last.a2) < settings.explosion_dparam and abs(meas - last.measure) > settings.explosion_dmeasure
            if (sig.p, sig.s) != (last.signature.p, last.signature.s):
                transition = f"({last.signature.p},{last.signature.s})->({sig.p},{sig.s})"
        pt = BranchPoint(a2, meas, sol.T, sig, step, explosion, sol.collocation_residual, sol.boundary_residual, transition)
        points.append(pt)
        orbits.append(seg)
        return pt

    def tangent_at(sol: Solution, mesh: CollocationMesh, W: np.ndarray, guide: np.ndarray | None) -> np.ndarray:
        z = _on_mesh(sol, mesh)
        phase = _phase_row(mesh, sol, sol.T, rhs, n, 1, sol.q)
        if guide is None:
            guide = np.zeros_like(z)
            guide[-1] = direction
            row = guide
        else:
            row = W * guide
        return _unit(bordered_direction(prob, mesh, z, [phase, (row, 0.0)]), W)

    def remesh(sol: Solution, mesh: CollocationMesh, tangent: np.ndarray):
        new_mesh = equidistribute(sol)
        guide = _on_mesh(_as_solution(tangent, mesh, n), new_mesh)
        W = _weights(new_mesh, n, 1, settings)
        return new_mesh, W, tangent_at(sol, new_mesh, W, _unit(guide, W))

    cur = make_solution(first.solution, a_lo)
    mesh = cur.mesh
    W = _weights(mesh, n, 1, settings)
    tangent = tangent_at(cur, mesh, W, None)
    last = record(cur, 0.0, None)
    ds = settings.ds
    steps = 0
    while len(points) < settings.max_points:
        if direction * (float(cur.q[0]) - a_hi) >= 0:
            break
        if steps and steps % settings.adapt_every == 0:
            mesh, W, tangent = remesh(cur, mesh, tangent)
        accepted = None
        for attempt in range(2):
            if attempt:
                # a mesh fitted to the current orbit often resolves what made the steps fail
                mesh, W, tangent = remesh(cur, mesh, tangent)
                ds = settings.ds
            zc = _on_mesh(cur, mesh)
            phase = _phase_row(mesh, cur, cur.T, rhs, n, 1, cur.q)
            arc_row = W * tangent
            while ds >= settings.ds_min:
                try:
                    sol = newton_solve(
                        prob, mesh, zc + ds * tangent, linear=[phase, (arc_row, float(arc_row @ zc) + ds)],
                        tol=settings.tol, max_iter=settings.max_newton,
                    )
                    new_t = _unit(bordered_direction(prob, mesh, sol.pack(), [phase, (arc_row, 0.0)]), W)
                    cos = float(arc_row @ new_t)
                    if sol.T > 0 and cos >= settings.min_cos:
                        accepted = sol
                        break
                    _log.debug("a2=%.10g ds=%.3g rejected: T=%.6g cos=%.4f", cur.q[0], ds, sol.T, cos)
                except (NewtonFailure, DomainError, FloatingPointError) as exc:
                    _log.debug("a2=%.10g ds=%.3g rejected: %s", cur.q[0], ds, exc)
                ds *= 0.5
            if accepted is not None:
                break
        if accepted is None:
            # restart past the stall with a natural-parameter step
            a_stall = float(cur.q[0])
            stalls.append(a_stall)
            _log.info("step underflow at a2=%.10g, restarting with a natural-parameter step", a_stall)
            target = a_stall + direction * max(settings.ds_min * 10, 1e-6)
            q = p.with_(a2=target)
            try:
                seg = solve_periodic(q, cur, builder(target), mesh.N, adapt=1, tol=settings.tol)
            except (NewtonFailure, DomainError):
                # fall back to the attracting cycle reached by iterating the return map
                try:
                    orbit = find_periodic(q, cur.nodes[0], thresholds=thresholds, measure_contraction=False)
                    seg = solve_periodic(q, orbit, builder(target), mesh.N, tol=settings.tol)
                except (NewtonFailure, DomainError):
                    _log.info("restart failed at a2=%.10g", target)
                    break
            cur = make_solution(seg.solution, target)
            mesh = cur.mesh
            W = _weights(mesh, n, 1, settings)
            tangent = tangent_at(cur, mesh, W, None)
            last = record(cur, 0.0, last)
            ds = settings.ds
            steps = 0
            continue
        cur, tangent = accepted, new_t
        last = record(cur, ds, last)
        steps += 1
        if accepted.iterations <= 3:
            ds = min(ds * 1.5, settings.ds_max)
        elif accepted.iterations > settings.max_newton // 2:
            ds = max(ds * 0.5, settings.ds_min)
    # keep only points inside the requested range (the final step may overshoot)
    lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
    keep = [i for i, pt in enumerate(points) if lo - 1e-12 <= pt.a2 <= hi + 1e-12]
    return Branch("a2", [points[i] for i in keep], settings, stalls, [orbits[i] for i in keep])
