"""Stiff adaptive integration with dense output and section events.

The stepping engine is scipy's Radau IIA (order 5, L-stable, embedded error
estimate, cubic dense output).  This module drives it one step at a time so
that every accepted step keeps its interpolant and section crossings can be
refined on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import Radau
from scipy.optimize import brentq

from .reductions import VectorFieldSpec

__all__ = [
    "Tolerances",
    "Section",
    "SectionEvent",
    "Trajectory",
    "IntegrationError",
    "NoCrossingError",
    "integrate",
    "integrate_to_section",
    "coordinate_section",
]


class IntegrationError(RuntimeError):
    """Step-size underflow or Newton failure inside the implicit solve."""


class NoCrossingError(IntegrationError):
    """The requested section was not reached within the time budget."""


@dataclass(frozen=True)
class Tolerances:
    rel: float = 1e-8
    abs: float = 1e-10
    max_step: float = math.inf
    first_step: float | None = None
    fixed_step: float | None = None
    analytic_jacobian: bool = True

    def __post_init__(self) -> None:
        if not (self.rel > 0 and self.abs > 0):
            raise ValueError("tolerances must be positive")
        if self.fixed_step is not None and not self.fixed_step > 0:
            raise ValueError("fixed_step must be positive")

    def tightened(self, factor: float) -> "Tolerances":
        return Tolerances(self.rel / factor, self.abs / factor, self.max_step, self.first_step, self.fixed_step, self.analytic_jacobian)


@dataclass(frozen=True)
class Section:
    """Level set ``fn(state) = 0`` crossed in ``direction`` (+1, -1 or 0 for both)."""

    name: str
    fn: Callable[[np.ndarray], float]
    direction: int = 0
    terminal: bool = False

    def value(self, u: np.ndarray) -> float:
        return float(self.fn(np.asarray(u, dtype=float)))


def coordinate_section(name: str, index: int, level: float, direction: int = 0, terminal: bool = False) -> Section:
    """Section ``u[index] = level``."""
    return Section(name, lambda u, i=index, c=level: u[i] - c, direction, terminal)


@dataclass(frozen=True)
class SectionEvent:
    section: str
    t: float
    state: np.ndarray
    direction: int
    residual: float

    def to_dict(self) -> dict:
        return {
            "section": self.section,
            "t": self.t,
            "state": [float(v) for v in self.state],
            "direction": self.direction,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class Trajectory:
    tag: str
    t: np.ndarray
    y: np.ndarray
    interpolants: tuple = field(repr=False)
    events: tuple[SectionEvent, ...]
    tolerances: Tolerances
    n_rhs: int = 0
    n_jac: int = 0

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.t)

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]

    def __call__(self, t) -> np.ndarray:
        """Dense evaluation; scalar ``t`` gives a state, an array gives ``(len(t), dim)``."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        if ts.size and (ts.min() < self.t[0] - 1e-12 * max(1.0, abs(self.t[0])) or ts.max() > self.t[-1] + 1e-12 * max(1.0, abs(self.t[-1]))):
            raise ValueError("evaluation outside the trajectory span")
        idx = np.clip(np.searchsorted(self.t, ts, side="right") - 1, 0, len(self.interpolants) - 1)
        out = np.empty((ts.size, self.y.shape[1]))
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = np.asarray(self.interpolants[k](ts[sel])).T
        # nodes are reproduced exactly
        exact = np.searchsorted(self.t, ts)
        hit = (exact < len(self.t)) & (self.t[np.minimum(exact, len(self.t) - 1)] == ts)
        out[hit] = self.y[exact[hit]]
        return out[0] if np.ndim(t) == 0 else out

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        ts = np.linspace(self.t[0], self.t[-1], n)
        return ts, self(ts)

    def events_named(self, name: str) -> list[SectionEvent]:
        return [e for e in self.events if e.section == name]


def _refine(interp, sec: Section, t0: float, t1: float) -> tuple[float, np.ndarray, float]:
    g = lambda s: sec.value(interp(s))  # noqa: E731
    ga, gb = g(t0), g(t1)
    if ga == 0.0:
        ts = t0
    elif gb == 0.0:
        ts = t1
    else:
        ts = brentq(g, t0, t1, xtol=4e-16 * max(1.0, abs(t1)), rtol=8.9e-16, maxiter=200)
    u = np.asarray(interp(ts), dtype=float)
    return ts, u, abs(sec.value(u))


def _crossing(ga: float, gb: float, direction: int) -> int:
    if ga < 0.0 <= gb and gb != 0.0 or (ga < 0.0 and gb == 0.0):
        d = 1
    elif ga > 0.0 >= gb and gb != 0.0 or (ga > 0.0 and gb == 0.0):
        d = -1
    else:
        return 0
    return d if direction in (0, d) else 0


def integrate(
    spec: VectorFieldSpec,
    s0: Sequence[float],
    t_span: tuple[float, float],
    tol: Tolerances | None = None,
    sections: Iterable[Section] = (),
    max_steps: int = 2_000_000,
) -> Trajectory:
    """Integrate ``spec`` over ``t_span`` recording all section crossings.

    Integration stops early at the first crossing of a terminal section.
    Backward integration (``t_span[1] < t_span[0]``) is supported; the
    returned samples are then stored in increasing time.
    """
    tol = tol or Tolerances()
    sections = tuple(sections)
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 == t0:
        raise ValueError("empty time span")
    y0 = np.asarray(s0, dtype=float)
    if y0.shape != (spec.dimension,) or not np.all(np.isfinite(y0)):
        raise ValueError(f"initial state must be {spec.dimension} finite values")
    counts = {"rhs": 0, "jac": 0}

    def fun(t, u):
        counts["rhs"] += 1
        return spec.rhs(t, u)

    def jac(t, u):
        counts["jac"] += 1
        return spec.jac(t, u)

    kwargs = {"rtol": tol.rel, "atol": tol.abs, "max_step": tol.max_step}
    if tol.fixed_step is not None:
        kwargs.update(rtol=1e3, atol=1e10, max_step=tol.fixed_step, first_step=tol.fixed_step)
    elif tol.first_step is not None:
        kwargs["first_step"] = tol.first_step
    if tol.analytic_jacobian:
        kwargs["jac"] = jac
    solver = Radau(fun, t0, y0, t1, **kwargs)

    ts, ys, interps, events = [t0], [y0.copy()], [], []
    # a start point on a section (up to round-off) is not a crossing
    prev_vals = [0.0 if abs(v) < 1e-10 else v for v in (s.value(y0) for s in sections)]
    stop = False
    for _ in range(max_steps):
        if solver.status != "running":
            break
        msg = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"{msg} at t={solver.t!r}, state={np.asarray(solver.y).tolist()}")
        ta, tb = ts[-1], solver.t
        interp = solver.dense_output()
        yb = solver.y.copy()
        step_events = []
        for k, sec in enumerate(sections):
            gb = sec.value(yb)
            d = _crossing(prev_vals[k], gb, sec.direction if tb > ta else -sec.direction)
            if d:
                lo, hi = (ta, tb) if ta < tb else (tb, ta)
                tc, uc, res = _refine(interp, sec, lo, hi)
                step_events.append(SectionEvent(sec.name, tc, uc, d if tb > ta else -d, res))
            prev_vals[k] = gb
        step_events.sort(key=lambda e: e.t if tb > ta else -e.t)
        for ev in step_events:
            events.append(ev)
            if next(s for s in sections if s.name == ev.section).terminal:
                tb, yb = ev.t, ev.state.copy()
                stop = True
                break
        ts.append(tb)
        ys.append(yb)
        interps.append(interp)
        if stop:
            break
    else:
        raise IntegrationError(f"step budget of {max_steps} exhausted at t={solver.t!r}")

    t_arr, y_arr = np.array(ts), np.array(ys)
    if t1 < t0:
        t_arr, y_arr, interps = t_arr[::-1], y_arr[::-1], interps[::-1]
    if stop and len(t_arr) > 2 and t_arr[-1] == t_arr[-2]:  # event exactly on a node
        t_arr, y_arr, interps = t_arr[:-1], y_arr[:-1], interps[:-1]
    return Trajectory(spec.tag.value, t_arr, y_arr, tuple(interps), tuple(events), tol, counts["rhs"], counts["jac"])


def integrate_to_section(
    spec: VectorFieldSpec,
    s0: Sequence[float],
    section: Section,
    max_time: float,
    tol: Tolerances | None = None,
    extra_sections: Iterable[Section] = (),
    t0: float = 0.0,
) -> tuple[Trajectory, SectionEvent]:
    """Integrate until the first directed crossing of ``section``.

    A start point lying exactly on the section never counts as a crossing.
    Negative ``max_time`` integrates backward; ``direction`` always refers to
    increasing time.
    """
    term = Section(section.name, section.fn, section.direction, terminal=True)
    others = tuple(Section(s.name, s.fn, s.direction, False) for s in extra_sections)
    traj = integrate(spec, s0, (t0, t0 + max_time), tol, (term,) + others)
    hits = [e for e in traj.events if e.section == section.name]
    if not hits:
        raise NoCrossingError(f"no crossing of section {section.name!r} within time {max_time}")
    return traj, hits[0]
