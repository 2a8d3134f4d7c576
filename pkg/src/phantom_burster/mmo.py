"""Phase segmentation, (p, s) counting and the end-of-surge return map."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from .integrator import Section, Tolerances, Trajectory, integrate_to_section
from .model import DomainError, FoldGeometry, ParameterSet, geometry, x_sing
from .reductions import FieldTag, build_field

__all__ = [
    "Thresholds",
    "PhaseInterval",
    "MmoSignature",
    "PeriodicOrbit",
    "ReturnResult",
    "classify",
    "classify_trajectory",
    "named_sections",
    "return_map",
    "find_periodic",
    "contraction_ratio",
]

PULSATILITY = "Pulsatility"
SURGE = "Surge"
PAUSE = "Pause"
TRANSITION = "Transition"


@dataclass(frozen=True)
class Thresholds:
    """Classifier thresholds as multiples of the fold height ``y_f``.

    ``pause_band`` is the distance in x from ``x_f`` that counts as "near the
    fold" when trimming the pause.
    """

    surge_factor: float = 5.0
    pulse_factor: float = 0.5
    small_factor: float = 0.1
    prominence_factor: float = 0.5
    pause_band: float = 0.35

    def resolved(self, geo: FoldGeometry) -> dict[str, float]:
        a_small = self.small_factor * geo.y_f
        return {
            "y_surge": self.surge_factor * geo.y_f,
            "A_pulse": self.pulse_factor * geo.y_f,
            "A_small": a_small,
            "prominence": self.prominence_factor * a_small,
            "pause_band": self.pause_band,
        }


@dataclass(frozen=True)
class PhaseInterval:
    kind: str
    t_start: float
    t_end: float
    y_min: float
    y_max: float
    x_min: float
    x_max: float


@dataclass(frozen=True)
class MmoSignature:
    p: int
    s: int
    phases: tuple[PhaseInterval, ...]
    ambiguous: int = 0
    n_surges: int = 0
    warnings: tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return f"({self.p},{self.s})"

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "s": self.s,
            "label": self.label,
            "ambiguous": self.ambiguous,
            "n_surges": self.n_surges,
            "warnings": list(self.warnings),
            "phases": [asdict(ph) for ph in self.phases],
        }


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Index ranges ``[i, j]`` (inclusive) of consecutive True entries."""
    if not mask.any():
        return []
    d = np.diff(mask.astype(np.int8))
    starts = list(np.flatnonzero(d == 1) + 1)
    ends = list(np.flatnonzero(d == -1))
    if mask[0]:
        starts.insert(0, 0)
    if mask[-1]:
        ends.append(len(mask) - 1)
    return list(zip(starts, ends))


def classify(t: np.ndarray, states: np.ndarray, geo: FoldGeometry, thresholds: Thresholds | None = None) -> MmoSignature:
    """(p, s) signature and phase partition of a sampled trajectory.

    ``states`` columns are ``x, y, X[, Y]``.  A pulse is a jump from the right
    to the left Secretor branch (downward zero crossing of x) outside the
    surge.  The pause is the first right-branch visit after a surge,
    restricted to the part within ``pause_band`` of ``x_f``; small
    oscillations are local maxima of x there whose prominence exceeds the
    threshold.
    """
    th = (thresholds or Thresholds()).resolved(geo)
    t = np.asarray(t, dtype=float)
    U = np.asarray(states, dtype=float)
    if t.ndim != 1 or len(t) < 2 or U.shape[0] != len(t):
        raise DomainError("trajectory too short to classify")
    x, y, X = U[:, 0], U[:, 1], U[:, 2]
    warn: list[str] = []
    if not (X.min() < -geo.gamma and X.max() > geo.gamma):
        warn.append("trajectory does not cover a full Regulator cycle")

    n = len(t)
    kind = np.full(n, TRANSITION, dtype=object)
    surge_runs = _runs(y > th["y_surge"])
    for i, j in surge_runs:
        kind[i : j + 1] = SURGE

    # downward and upward zero crossings of x (sample index after the crossing)
    sgn = np.sign(x)
    down = np.flatnonzero((sgn[:-1] > 0) & (sgn[1:] <= 0)) + 1
    up = np.flatnonzero((sgn[:-1] <= 0) & (sgn[1:] > 0)) + 1
    in_surge = kind == SURGE
    pulses = [k for k in down if not in_surge[k]]

    # pause candidates follow each surge; a trajectory that starts on the left
    # branch well above the fold (just after a surge) opens with one too
    after = [j for _, j in surge_runs]
    if x[0] < 0 and y[0] > geo.y_f + th["A_pulse"] and (not surge_runs or surge_runs[0][0] > 0):
        first_up = up[0] if len(up) else n
        first_down = down[0] if len(down) else n
        if first_up < first_down and (not surge_runs or first_up < surge_runs[0][0]):
            after.insert(0, -1)
    s_total, ambiguous = 0, 0
    for j in after:
        ups = up[up > j]
        if not len(ups):
            continue
        a = ups[0]
        downs = down[down > a]
        b = downs[0] if len(downs) else n
        near = np.flatnonzero(np.abs(x[a:b] - geo.x_f) < th["pause_band"])
        if not len(near):
            continue
        i0, i1 = a + near[0], a + near[-1]
        if i1 <= i0:
            continue
        kind[i0 : i1 + 1] = PAUSE
        seg = x[i0 : i1 + 1]
        peaks, props = find_peaks(seg, prominence=th["prominence"])
        prom = props["prominences"]
        small = prom < th["A_pulse"]
        s_total += int(np.count_nonzero(small))
        ambiguous += int(np.count_nonzero(small & (prom >= th["A_small"])))

    # pulsatility: from each pause end (or trajectory start) up to the next surge,
    # provided the stretch contains a pulse
    pulse_idx = np.asarray(pulses, dtype=int)
    labels = kind.copy()
    runs_t = _runs(labels == TRANSITION)
    for i, j in runs_t:
        if np.any((pulse_idx >= i) & (pulse_idx <= j)):
            prev_kind = labels[i - 1] if i > 0 else None
            next_kind = labels[j + 1] if j + 1 < n else None
            if prev_kind == PAUSE or next_kind == SURGE or prev_kind is None:
                first = pulse_idx[(pulse_idx >= i) & (pulse_idx <= j)][0]
                start = i if prev_kind == PAUSE or prev_kind is None else first - 1
                kind[max(start, i) : j + 1] = PULSATILITY

    phases = []
    start = 0
    for k in range(1, n + 1):
        if k == n or kind[k] != kind[start]:
            sl = slice(start, k)
            t_end = t[k] if k < n else t[-1]
            phases.append(
                PhaseInterval(str(kind[start]), float(t[start]), float(t_end), float(y[sl].min()), float(y[sl].max()), float(x[sl].min()), float(x[sl].max()))
            )
            start = k
    if ambiguous:
        warn.append(f"{ambiguous} pause oscillation(s) with amplitude between A_small and A_pulse")
    return MmoSignature(len(pulses), s_total, tuple(phases), ambiguous, len(surge_runs), tuple(warn))


def classify_trajectory(traj: Trajectory, p: ParameterSet, thresholds: Thresholds | None = None, resample: float | None = None) -> MmoSignature:
    """Classify a trajectory; ``resample`` adds dense points at that time spacing."""
    t, U = traj.t, traj.y
    if resample:
        extra = np.arange(traj.t[0], traj.t[-1], resample)
        t = np.union1d(t, extra)
        U = traj(t)
    return classify(t, U, geometry(p), thresholds)


# ---------------------------------------------------------------------------
# sections and return map


def named_sections(p: ParameterSet, eta: float = 0.1) -> dict[str, Section]:
    """The four cycle sections; the end-of-surge one is oriented (x increasing)."""
    geo = geometry(p)
    xs_max = x_sing(geo.X_max, p)
    xs_g = x_sing(geo.gamma, p)
    return {
        "in": Section("in", lambda u, c=geo.y_f - eta: u[1] - c, -1),
        "f": Section("f", lambda u, c=geo.x_f: u[0] - c, 0),
        "surge": Section("surge", lambda u, c=xs_max + eta: u[0] - c, -1),
        "endsurge": Section("endsurge", lambda u, c=xs_g - eta: u[0] - c, +1),
    }


@dataclass(frozen=True)
class ReturnResult:
    state: np.ndarray
    time: float
    trajectory: Trajectory


def return_map(state: Sequence[float], p: ParameterSet, eta: float = 0.1, tol: Tolerances | None = None, max_time: float = 100.0) -> ReturnResult:
    """Next end-of-surge crossing of the full system starting from ``state``.

    The start need not lie on the section; intermediate crossings of the
    other named sections are logged on the trajectory.
    """
    tol = tol or Tolerances(1e-10, 1e-12)
    secs = named_sections(p, eta)
    spec = build_field(FieldTag.FULL4D, p)
    traj, ev = integrate_to_section(spec, state, secs["endsurge"], max_time, tol, extra_sections=[secs["in"], secs["f"], secs["surge"]])
    return ReturnResult(ev.state, ev.t, traj)


def _distance(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / scale))


def contraction_ratio(anchor: np.ndarray, p: ParameterSet, h: float = 1e-4, eta: float = 0.1, tol: Tolerances | None = None, image: np.ndarray | None = None) -> float:
    """Spectral radius of the finite-difference return-map Jacobian at ``anchor``.

    The map is strongly non-normal, so single-step distance ratios overstate
    the asymptotic contraction; the spectral radius is what successive
    iterate separations converge to.
    """
    tol = tol or Tolerances(1e-10, 1e-12)
    base = return_map(anchor, p, eta, tol).state if image is None else image
    J = np.empty((3, 3))
    for k in (1, 2, 3):
        e = np.zeros(4)
        e[k] = h
        J[:, k - 1] = (return_map(anchor + e, p, eta, tol).state - base)[1:] / h
    return float(np.max(np.abs(np.linalg.eigvals(J))))


@dataclass(frozen=True)
class PeriodicOrbit:
    period: float
    anchor: np.ndarray
    contraction: float
    signature: MmoSignature
    history: tuple[float, ...]
    trajectory: Trajectory = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "period": self.period,
            "anchor": [float(v) for v in self.anchor],
            "contraction": self.contraction,
            "signature": self.signature.to_dict(),
            "history": list(self.history),
            "iterations": len(self.history),
        }


def find_periodic(
    p: ParameterSet,
    seed: Sequence[float],
    tol: Tolerances | None = None,
    eta: float = 0.1,
    max_iter: int = 30,
    target: float = 1e-8,
    thresholds: Thresholds | None = None,
    measure_contraction: bool = True,
) -> PeriodicOrbit:
    """Attracting MMO cycle by fixed-point iteration of the end-of-surge return map.

    ``history`` holds the scaled section distance ``|F(u) - u|`` per iterate.
    The contraction estimate is the finite-difference ratio at the anchor;
    without ``measure_contraction`` the ratio of the last two distances is
    reported instead.
    """
    tol = tol or Tolerances(1e-10, 1e-12)
    u = return_map(seed, p, eta, tol).state
    history: list[float] = []
    for _ in range(max_iter):
        res = return_map(u, p, eta, tol)
        d = _distance(res.state, u)
        history.append(d)
        if d < target:
            orbit = res
            anchor = u
            break
        u = res.state
    else:
        raise DomainError(f"return map did not converge in {max_iter} iterations (last distance {history[-1]:.3g})")
    if measure_contraction:
        ratio = contraction_ratio(anchor, p, eta=eta, tol=tol, image=orbit.state)
    elif len(history) >= 2 and history[-2] > 0:
        ratio = history[-1] / history[-2]
    else:
        ratio = float("nan")
    sig = classify_trajectory(orbit.trajectory, p, thresholds)
    return PeriodicOrbit(orbit.time, anchor, ratio, sig, tuple(history), orbit.trajectory)
