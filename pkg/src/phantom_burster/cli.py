"""Command-line entry point.

Every subcommand prints a JSON document on stdout.  Subcommands that produce
data files write them (CSV with a header row and 17 significant digits, JSON
with sorted keys) into the output directory together with ``manifest.json``,
which records the hash of the resolved configuration and the library
versions.  Exit status: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__
from .mmo import Thresholds
from .model import _ALIASES, DomainError, ParameterSet, check_hypotheses, geometry

OUTPUT_ENV = "PHANTOM_BURSTER_OUTPUT"
DEFAULT_SEED = (-1.735124, 2.6166461, 0.27738113, 3.15495372)

SUBCOMMANDS = (
    "simulate",
    "reduce",
    "geometry",
    "check",
    "folded",
    "wiwo",
    "sectors",
    "c3",
    "c4",
    "h5",
    "classify",
    "periodic",
    "manifolds",
    "canards",
    "continue",
    "sweep",
)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration

_TOL_KEYS = {"rel", "abs", "max_step"}
_SECTION_KEYS = {"eta", "rho"}
_THRESHOLD_KEYS = {f.name for f in dataclasses.fields(Thresholds)}
_SWEEP_KEYS = {"grid", "workers", "t_end", "seed"}


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration: parameters plus numerical settings."""

    params: ParameterSet = field(default_factory=ParameterSet)
    tolerances: dict = field(default_factory=lambda: {"rel": 1e-8, "abs": 1e-10})
    sections: dict = field(default_factory=lambda: {"eta": 0.1, "rho": 0.1})
    thresholds: dict = field(default_factory=dict)
    output_dir: str = "output"
    sweep: dict = field(default_factory=lambda: {"grid": {}, "workers": 1, "t_end": 60.0})
    continuation: dict = field(default_factory=dict)
    h1_band: float = 0.5

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "tolerances": dict(self.tolerances),
            "sections": dict(self.sections),
            "thresholds": dict(self.thresholds),
            "output_dir": self.output_dir,
            "sweep": self.sweep,
            "continuation": dict(self.continuation),
            "h1_band": self.h1_band,
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def tol(self):
        from .integrator import Tolerances

        return Tolerances(self.tolerances.get("rel", 1e-8), self.tolerances.get("abs", 1e-10), self.tolerances.get("max_step", np.inf))

    def classifier(self) -> Thresholds:
        return Thresholds(**self.thresholds)

    def continuation_settings(self):
        from .continuation import ContinuationSettings

        return ContinuationSettings(**self.continuation)


def _check_keys(name: str, data: Any, allowed: set[str]) -> dict:
    if not isinstance(data, dict):
        raise UsageError(f"config section {name!r} must be an object")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise UsageError(f"unknown key(s) in {name!r}: {', '.join(unknown)}")
    return dict(data)


def load_config(path: str | None, overrides: Sequence[str] = (), eps: float | None = None, delta: float | None = None) -> RunConfig:
    """Read a JSON config (flat parameter names at top level plus optional sections) and apply overrides."""
    from .continuation import ContinuationSettings

    raw: dict = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise UsageError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
    param_names = {f.name for f in dataclasses.fields(ParameterSet)}
    sections = {"params", "tolerances", "sections", "thresholds", "output_dir", "sweep", "continuation", "h1_band"}
    params: dict = {}
    rest: dict = {}
    for key, value in raw.items():
        if key in sections:
            rest[key] = value
        else:
            params[key] = value
    params.update(_check_keys("params", rest.get("params", {}), param_names | set(_ALIASES)))
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k.strip()] = float(v)
        except ValueError as exc:
            raise UsageError(f"--param value for {k!r} is not a number: {v!r}") from exc
    if eps is not None:
        params["eps"] = eps
    if delta is not None:
        params["delta"] = delta
    try:
        pset = ParameterSet.from_mapping(params)
    except DomainError as exc:
        if "unknown" in str(exc).lower():
            raise UsageError(str(exc)) from exc
        raise
    base = RunConfig()
    tol = {**base.tolerances, **_check_keys("tolerances", rest.get("tolerances", {}), _TOL_KEYS)}
    secs = {**base.sections, **_check_keys("sections", rest.get("sections", {}), _SECTION_KEYS)}
    thr = _check_keys("thresholds", rest.get("thresholds", {}), _THRESHOLD_KEYS)
    sweep = {**base.sweep, **_check_keys("sweep", rest.get("sweep", {}), _SWEEP_KEYS)}
    cont = _check_keys("continuation", rest.get("continuation", {}), {f.name for f in dataclasses.fields(ContinuationSettings)})
    out = rest.get("output_dir", base.output_dir)
    if not isinstance(out, str):
        raise UsageError("output_dir must be a string")
    cfg = RunConfig(pset, tol, secs, thr, out, sweep, cont, float(rest.get("h1_band", base.h1_band)))
    # nested invariants
    cfg.tol()
    cfg.classifier()
    cfg.continuation_settings()
    for k, v in secs.items():
        if not (isinstance(v, (int, float)) and v > 0):
            raise DomainError(f"section offset {k} must be positive")
    if not isinstance(sweep["grid"], dict):
        raise UsageError("sweep.grid must map parameter names to value lists")
    if int(sweep["workers"]) < 1:
        raise DomainError("sweep.workers must be at least 1")
    return cfg


# ---------------------------------------------------------------------------
# output helpers


def _num(v: Any) -> str:
    return format(float(v), ".17g")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if hasattr(obj, "value") and not isinstance(obj, (str, bytes)):
        return obj.value
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2)


class Output:
    """Collects files for one run and writes them with a manifest."""

    def __init__(self, cfg: RunConfig, command: str, directory: str | None):
        self.cfg = cfg
        self.command = command
        self.root = Path(directory or os.environ.get(OUTPUT_ENV) or cfg.output_dir)
        self.files: dict[str, str] = {}

    def csv(self, name: str, header: Sequence[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, (float, np.floating, int, np.integer)) and not isinstance(v, bool) else v for v in row])
        self.files[name] = buf.getvalue()

    def json(self, name: str, obj: Any) -> None:
        self.files[name] = dumps(obj) + "\n"

    def write(self) -> list[str]:
        if not self.files:
            return []
        self.root.mkdir(parents=True, exist_ok=True)
        manifest = {
            "command": self.command,
            "config_sha256": self.cfg.digest(),
            "config": self.cfg.to_dict(),
            "versions": {"phantom_burster": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
            "files": {k: hashlib.sha256(v.encode()).hexdigest() for k, v in sorted(self.files.items())},
        }
        self.files["manifest.json"] = dumps(manifest) + "\n"
        written = []
        for name, text in sorted(self.files.items()):
            path = self.root / name
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
            written.append(str(path))
        return written


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_geometry(cfg: RunConfig, args, out: Output) -> dict:
    from .folded import classify

    geo = geometry(cfg.params)
    fs = classify(cfg.params)
    return {"params": cfg.params.to_dict(), "geometry": geo.to_dict(), "X_eval": fs.X_eval, "complex_window": fs.complex_window, "kind": fs.kind.value}


def cmd_check(cfg: RunConfig, args, out: Output) -> dict:
    import warnings

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = check_hypotheses(cfg.params, cfg.h1_band)
    return {"params": cfg.params.to_dict(), "hypotheses": rep.to_dict(), "warnings": [str(w.message) for w in caught]}


def cmd_folded(cfg: RunConfig, args, out: Output) -> dict:
    action = getattr(args, "action", None) or "classify"
    if action == "classify":
        from .folded import classify

        return classify(cfg.params, args.delta_eval).to_dict() if getattr(args, "delta_eval", None) else classify(cfg.params).to_dict()
    return COMMANDS[action](cfg, args, out)


def cmd_wiwo(cfg: RunConfig, args, out: Output) -> dict:
    from .folded import wiwo

    xs = _floats(args.X0) if args.X0 else list(np.linspace(-0.6, -0.05, 12))
    rows = []
    for X0 in xs:
        Xs = wiwo(X0, cfg.params, phi=args.phi, psi=args.psi, eps=args.k2_eps)
        rows.append({"X0": X0, "Xstar": Xs})
    return {"phi": args.phi, "psi": args.psi, "k2_eps": args.k2_eps, "pairs": rows}


def cmd_sectors(cfg: RunConfig, args, out: Output) -> dict:
    from .folded import classify, rotation_sector

    fs = classify(cfg.params)
    if args.X0:
        xs = _floats(args.X0)
    else:
        xs = list(np.linspace(-fs.complex_window * 0.98, -0.05, args.samples))
    res = [rotation_sector(X0, cfg.params, cfg.params.delta, eps=args.k2_eps) for X0 in xs]
    return {"delta": cfg.params.delta, "k2_eps": args.k2_eps, "sectors": res}


def cmd_c3(cfg: RunConfig, args, out: Output) -> dict:
    from .folded import contraction_c3

    a = contraction_c3(cfg.params, "adaptive")
    g = contraction_c3(cfg.params, "gauss")
    return {"C3": a, "C3_gauss_legendre": g, "relative_difference": abs(a - g) / abs(a)}


def cmd_c4(cfg: RunConfig, args, out: Output) -> dict:
    from .folded import expansion_c4

    a = expansion_c4(cfg.params, "adaptive")
    g = expansion_c4(cfg.params, "gauss")
    return {"C4": a, "C4_gauss_legendre": g, "relative_difference": abs(a - g) / abs(a)}


def cmd_h5(cfg: RunConfig, args, out: Output) -> dict:
    from .folded import check_h5

    return check_h5(cfg.params).to_dict()


def cmd_reduce(cfg: RunConfig, args, out: Output) -> dict:
    from .reductions import build_field

    extras = {}
    for item in args.extra or []:
        k, _, v = item.partition("=")
        extras[k] = float(v)
    spec = build_field(args.tag, cfg.params, extras)
    points: list = []
    if args.points:
        try:
            points = json.loads(args.points)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--points must be a JSON list of points: {exc}") from exc
    evals = [{"point": list(map(float, u)), "rhs": spec.rhs(0.0, u), "jacobian": spec.jac(0.0, u)} for u in points]
    coeffs = {k: v for k, v in spec.coefficients.items()}
    return {"tag": spec.tag.value, "variables": list(spec.variables), "coefficients": coeffs, "extras": dict(spec.extras), "evaluations": evals}


def cmd_simulate(cfg: RunConfig, args, out: Output) -> dict:
    from .integrator import Tolerances, coordinate_section, integrate
    from .reductions import FieldTag, build_field

    extras = {}
    for item in args.extra or []:
        k, _, v = item.partition("=")
        extras[k] = float(v)
    spec = build_field(args.field, cfg.params, extras)
    if args.state:
        s0 = _floats(args.state)
    elif spec.tag is FieldTag.FULL4D:
        s0 = list(DEFAULT_SEED)
    else:
        raise UsageError("--state is required for reduced fields")
    if len(s0) != spec.dimension:
        raise UsageError(f"--state needs {spec.dimension} values for {spec.tag.value}")
    tol = cfg.tol() if args.tol is None else Tolerances(args.tol, cfg.tolerances.get("abs", 1e-10))
    sections = []
    for item in args.section or []:
        parts = item.split(":")
        if len(parts) not in (3, 4):
            raise UsageError("--section expects name:index:level[:direction]")
        sections.append(coordinate_section(parts[0], int(parts[1]), float(parts[2]), int(parts[3]) if len(parts) == 4 else 0))
    traj = integrate(spec, s0, (0.0, args.t_end), tol, sections)
    ts, ys = (traj.sample(args.samples) if args.samples else (traj.t, traj.y))
    out.csv("trajectory.csv", ["t", *spec.variables], ([t, *y] for t, y in zip(ts, ys)))
    out.json("events.json", [e.to_dict() for e in traj.events])
    return {"field": spec.tag.value, "steps": len(traj.t) - 1, "t_end": traj.t_end, "final": traj.final, "events": len(traj.events), "n_rhs": traj.n_rhs}


def _read_trajectory_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read trajectory CSV {path!r}: {exc}") from exc
    if data.shape[1] != 5:
        raise DomainError("trajectory CSV needs columns t, x, y, X, Y")
    return data[:, 0], data[:, 1:]


def cmd_classify(cfg: RunConfig, args, out: Output) -> dict:
    from .mmo import classify

    t, states = _read_trajectory_csv(args.input)
    sig = classify(t, states, geometry(cfg.params), cfg.classifier())
    return sig.to_dict()


def cmd_periodic(cfg: RunConfig, args, out: Output) -> dict:
    from .continuation import solve_periodic
    from .mmo import find_periodic

    seed = _floats(args.seed) if args.seed else list(DEFAULT_SEED)
    orb = find_periodic(cfg.params, seed, cfg.tol(), eta=cfg.sections["eta"], thresholds=cfg.classifier())
    result = orb.to_dict()
    ts, ys = orb.trajectory.t, orb.trajectory.y
    if args.bvp:
        seg = solve_periodic(cfg.params, orb, mesh_intervals=args.mesh)
        result["bvp"] = {"period": seg.T, "relative_period_difference": abs(seg.T - orb.period) / orb.period, **seg.to_dict()}
        ts, ys = seg.dense(4)
    out.csv("period.csv", ["t", "x", "y", "X", "Y"], ([t, *y] for t, y in zip(ts, ys)))
    out.json("orbit.json", result)
    return result


def _family_outputs(out: Output, fam, prefix: str) -> None:
    index = fam.to_dict()
    index["segment_files"] = []
    for k, seg in enumerate(fam.segments):
        name = f"{prefix}/segment_{k:04d}.csv"
        ts, ys = seg.dense(2)
        out.csv(name, ["t", "x", "y", "X"], ([t, *y] for t, y in zip(ts, ys)))
        index["segment_files"].append(name)
    out.json(f"{prefix}/family.json", index)


def cmd_manifolds(cfg: RunConfig, args, out: Output) -> dict:
    from .bvp import canard_families

    p = cfg.params
    fa, fr = canard_families(p, p.eps, p.delta, members=args.members, tag=args.tag)
    _family_outputs(out, fa, "attracting")
    _family_outputs(out, fr, "repelling")
    out.csv("traces.csv", ["side", "param", "x", "y"], [["attracting", s, *e[:2]] for s, e in zip(fa.params, fa.trace)] + [["repelling", s, *e[:2]] for s, e in zip(fr.params, fr.trace)])
    return {"attracting": {"members": len(fa.segments), "failures": fa.failures}, "repelling": {"members": len(fr.segments), "failures": fr.failures}}


def cmd_canards(cfg: RunConfig, args, out: Output) -> dict:
    from .bvp import canard_families, detect_canards

    p = cfg.params
    fa, fr = canard_families(p, p.eps, p.delta, members=args.members, tag=args.tag)
    cs = detect_canards(fa, fr, p, p.delta)
    out.json("canards.json", cs)
    out.csv("traces.csv", ["side", "param", "x", "y"], [["attracting", s, *e[:2]] for s, e in zip(fa.params, fa.trace)] + [["repelling", s, *e[:2]] for s, e in zip(fr.params, fr.trace)])
    return cs.to_dict()


def cmd_continue(cfg: RunConfig, args, out: Output) -> dict:
    from .continuation import continue_branch
    from .mmo import find_periodic

    if args.param != "a2":
        raise UsageError("continuation is implemented in a2 only")
    p = cfg.params.with_(a2=args.start)
    seed = _floats(args.seed) if args.seed else list(DEFAULT_SEED)
    orb = find_periodic(p, seed, cfg.tol(), eta=cfg.sections["eta"], thresholds=cfg.classifier(), measure_contraction=False)
    br = continue_branch(p, orb, (args.start, args.stop), cfg.continuation_settings(), cfg.classifier())
    out.json("branch.json", br)
    out.csv(
        "branch.csv",
        ["a2", "measure", "period", "p", "s", "step", "explosion", "transition"],
        ([pt.a2, pt.measure, pt.period, pt.signature.p, pt.signature.s, pt.step, int(pt.explosion), pt.transition or ""] for pt in br.points),
    )
    return {"points": len(br.points), "markers": br.markers, "transitions": br.transitions(), "stalls": br.stalls}


def _sweep_cell(payload: tuple) -> dict:
    from .integrator import integrate
    from .mmo import classify, find_periodic
    from .reductions import FieldTag, build_field

    params, tol, thr, t_end, seed, h1_band = payload
    p = ParameterSet(**params)
    thresholds = Thresholds(**thr)
    row: dict = {"params": params, "warnings": []}
    try:
        rep = check_hypotheses(p, h1_band)
        row["hypotheses"] = {k: v["holds"] for k, v in rep.to_dict().items() if isinstance(v, dict) and "holds" in v}
        try:
            sig = find_periodic(p, seed, tol, thresholds=thresholds, measure_contraction=False).signature
        except (DomainError, RuntimeError) as exc:
            # no converged cycle: classify the transient-free tail of a long run instead
            row["warnings"].append(f"no periodic orbit ({exc}); signature from trajectory tail")
            traj = integrate(build_field(FieldTag.FULL4D, p), seed, (0.0, t_end), tol)
            keep = traj.t >= 0.5 * t_end
            sig = classify(traj.t[keep], traj.y[keep], geometry(p), thresholds)
        row.update({"p": sig.p, "s": sig.s})
        row["warnings"].extend(sig.warnings)
    except DomainError as exc:
        row.update({"p": None, "s": None})
        row["warnings"].append(f"domain error: {exc}")
    return row


def cmd_sweep(cfg: RunConfig, args, out: Output) -> dict:
    import itertools

    grid = cfg.sweep.get("grid", {})
    if not grid:
        raise UsageError("sweep needs a non-empty sweep.grid in the config")
    names = sorted(grid)
    base = cfg.params.to_dict()
    seed = list(cfg.sweep.get("seed", DEFAULT_SEED))
    cells = []
    for values in itertools.product(*(grid[n] for n in names)):
        params = dict(base)
        params.update({n: float(v) for n, v in zip(names, values)})
        ParameterSet(**params)
        cells.append((params, cfg.tol(), dict(cfg.thresholds), float(cfg.sweep["t_end"]), seed, cfg.h1_band))
    workers = int(cfg.sweep.get("workers", 1))
    if workers == 1:
        rows = [_sweep_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    hyp_names = ("H1", "H2", "H3", "H4")
    out.csv(
        "sweep.csv",
        [*names, "p", "s", *hyp_names, "warnings"],
        ([*(r["params"][n] for n in names), "" if r["p"] is None else r["p"], "" if r["s"] is None else r["s"], *(int(r.get("hypotheses", {}).get(h, 0)) for h in hyp_names), "; ".join(r["warnings"])] for r in rows),
    )
    return {"cells": len(rows), "grid": {n: grid[n] for n in names}}


COMMANDS = {
    "simulate": cmd_simulate,
    "reduce": cmd_reduce,
    "geometry": cmd_geometry,
    "check": cmd_check,
    "folded": cmd_folded,
    "wiwo": cmd_wiwo,
    "sectors": cmd_sectors,
    "c3": cmd_c3,
    "c4": cmd_c4,
    "h5": cmd_h5,
    "classify": cmd_classify,
    "periodic": cmd_periodic,
    "manifolds": cmd_manifolds,
    "canards": cmd_canards,
    "continue": cmd_continue,
    "sweep": cmd_sweep,
}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors never exit from inside argparse
        raise UsageError(f"{self.prog}: {message}")


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON run configuration")
    sp.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="parameter override (repeatable)")
    sp.add_argument("--eps", type=float, help="fast singular parameter")
    sp.add_argument("--delta", type=float, help="slow singular parameter")
    sp.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV} and the config)")


def _wiwo_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--X0", help="comma-separated entry values")
    sp.add_argument("--phi", type=float, help="override the drift constant")
    sp.add_argument("--psi", type=float, help="override the drift slope")
    sp.add_argument("--k2-eps", type=float, dest="k2_eps", help="express in rescaling-chart units for this eps")


def _sector_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--X0", help="comma-separated entry values")
    sp.add_argument("--samples", type=int, default=10)
    sp.add_argument("--k2-eps", type=float, dest="k2_eps")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phantom-burster", description="Three-time-scale phantom-burster toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)

    sp = sub.add_parser("simulate", help="integrate a field and write the trajectory")
    _common(sp)
    sp.add_argument("--field", default="Full4D")
    sp.add_argument("--t-end", type=float, dest="t_end", default=20.0)
    sp.add_argument("--tol", type=float, help="relative tolerance")
    sp.add_argument("--state", help="comma-separated initial state")
    sp.add_argument("--extra", action="append", metavar="KEY=VALUE")
    sp.add_argument("--section", action="append", metavar="NAME:INDEX:LEVEL[:DIR]")
    sp.add_argument("--samples", type=int, help="resample to this many uniform times")

    sp = sub.add_parser("reduce", help="coefficients and evaluations of a reduced field")
    _common(sp)
    sp.add_argument("--tag", required=True)
    sp.add_argument("--points", help="JSON list of points")
    sp.add_argument("--extra", action="append", metavar="KEY=VALUE")

    for name, hlp in (("geometry", "fold geometry and X_eval"), ("check", "hypotheses H1-H4"), ("c3", "contraction constant"), ("c4", "expansion constant"), ("h5", "hypothesis H5")):
        _common(sub.add_parser(name, help=hlp))

    sp = sub.add_parser("folded", help="folded-singularity analysis")
    _common(sp)
    sp.add_argument("action", nargs="?", choices=["classify", "wiwo", "sectors", "c3", "c4", "h5"], default="classify")
    sp.add_argument("--delta-eval", type=float, dest="delta_eval", help="delta used for the classification")
    sp.add_argument("--X0")
    sp.add_argument("--phi", type=float)
    sp.add_argument("--psi", type=float)
    sp.add_argument("--k2-eps", type=float, dest="k2_eps")
    sp.add_argument("--samples", type=int, default=10)

    sp = sub.add_parser("wiwo", help="way-in/way-out pairs")
    _common(sp)
    _wiwo_args(sp)

    sp = sub.add_parser("sectors", help="rotation sector predictions")
    _common(sp)
    _sector_args(sp)

    sp = sub.add_parser("classify", help="(p, s) signature of a trajectory CSV")
    _common(sp)
    sp.add_argument("--input", required=True, help="CSV with columns t,x,y,X,Y")

    sp = sub.add_parser("periodic", help="attracting MMO cycle")
    _common(sp)
    sp.add_argument("--seed", help="comma-separated start state")
    sp.add_argument("--bvp", action="store_true", help="also solve the periodic boundary-value problem")
    sp.add_argument("--mesh", type=int, default=400)

    for name in ("manifolds", "canards"):
        sp = sub.add_parser(name, help="slow-manifold families" if name == "manifolds" else "secondary canards")
        _common(sp)
        sp.add_argument("--members", type=int, default=300)
        sp.add_argument("--tag", default="NormalFormLocal", choices=["NormalFormLocal", "ChartK2"])

    sp = sub.add_parser("continue", help="continue the periodic orbit in a parameter")
    _common(sp)
    sp.add_argument("--from", type=float, dest="start", required=True)
    sp.add_argument("--to", type=float, dest="stop", required=True)
    sp.add_argument("--seed")

    sp = sub.add_parser("sweep", help="classify a grid of parameter values")
    _common(sp)
    return parser


def dispatch(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # the continue subcommand reuses --param for the continuation parameter
    cont_name = "a2"
    if argv and argv[0] == "continue":
        rest = []
        i = 1
        while i < len(argv):
            if argv[i] == "--param" and i + 1 < len(argv) and "=" not in argv[i + 1]:
                cont_name = argv[i + 1]
                i += 2
                continue
            rest.append(argv[i])
            i += 1
        argv = [argv[0], *rest]
    try:
        if not argv or argv[0] not in SUBCOMMANDS:
            raise UsageError(f"unknown or missing subcommand; choose from: {', '.join(SUBCOMMANDS)}")
        args = parser.parse_args(argv)
        overrides = list(args.param)
        if argv[0] == "continue":
            args.param = cont_name
        cfg = load_config(args.config, overrides, args.eps, args.delta)
        out = Output(cfg, argv[0], args.out)
        result = COMMANDS[argv[0]](cfg, args, out)
        written = out.write()
        if written:
            result = {**result, "files": written} if isinstance(result, dict) else {"result": result, "files": written}
        print(dumps(result), file=stdout)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        print(f"usage: phantom-burster {{{','.join(SUBCOMMANDS)}}} [options]", file=stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    except (ArithmeticError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
