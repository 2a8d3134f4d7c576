"""Acceptance checks: one PASS/FAIL line per criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed even
under output capture) or ``python tests/test_acceptance.py``.
"""

import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import brentq

sys.path.insert(0, str(Path(__file__).parent))

from oracles import h5_verbatim, wiwo_oracle  # noqa: E402

from phantom_burster.bvp import canard_families, canard_spacing, detect_canards  # noqa: E402
from phantom_burster.continuation import ContinuationSettings, continue_branch  # noqa: E402
from phantom_burster.folded import (  # noqa: E402
    FoldKind,
    check_h5,
    classify,
    contraction_c3,
    count_k2_rotations,
    expansion_c4,
    rotation_sector,
    wiwo,
)
from phantom_burster.integrator import Tolerances, integrate  # noqa: E402
from phantom_burster.mmo import find_periodic  # noqa: E402
from phantom_burster.model import PAPER_PARAMETERS, check_hypotheses, geometry  # noqa: E402
from phantom_burster.reductions import FieldTag, build_field  # noqa: E402

P = PAPER_PARAMETERS
G = geometry(P)
SEED_A = (-1.735124, 2.6166461, 0.27738113, 3.15495372)
SEED_B = (1.2, 0.4, -1.5, -2.6)

# continuation scenario: desk scale with pulse-adding explosions inside [0.75, 0.85]
BRANCH_EPS, BRANCH_DELTA = 0.05, 0.05
BRANCH_RANGE = (0.75, 0.85)
BRANCH_SETTINGS = ContinuationSettings(mesh_intervals=2000)


def _loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def check_fold_classification():
    rows = [classify(P, d) for d in (1e-3, 1e-2)]
    ok = all(abs(r.X_eval - (-3.3248)) <= 1e-3 and r.kind is FoldKind.NODE for r in rows)
    detail = ", ".join(f"delta={r.delta:g}: X_eval={r.X_eval:.6f} {r.kind.value}" for r in rows)
    return ok, detail, 1.0


def check_hypotheses_margins():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = check_hypotheses(P)
        big_c = check_hypotheses(P.with_(c=4.0))
    ok = rep.all_hold and abs(rep.H1.margin - 0.105) <= 0.01 and not big_c.H3.holds
    detail = (
        f"H1..H4 hold={rep.all_hold}, H1 margin={rep.H1.margin:.5f} (0.105 +- 0.01), "
        f"H3 at c=4: {big_c.H3.holds} (margin {big_c.H3.margin:.4f})"
    )
    return ok, detail, 1.0


def check_way_in_way_out():
    w = math.sqrt(P.a0) / (G.alpha * P.c / P.a0)
    xs = np.linspace(-w, -0.01, 22)[1:-1]
    anti = max(abs(wiwo(X0, P, psi=0.0) + X0) for X0 in xs)
    phi, psi = G.phi, G.psi
    v3, v2 = wiwo(-0.3, P), wiwo(-0.2, P)
    o3, o2 = wiwo_oracle(-0.3, phi, psi), wiwo_oracle(-0.2, phi, psi)
    mono = np.linspace(-w, -0.01, 52)[1:-1]
    vals = [wiwo(X0, P) for X0 in mono]
    parts = {
        "antisymmetric": anti < 1e-10,
        "Psi(-0.3)=0.366": abs(v3 - 0.366) <= 1e-3 and abs(o3 - 0.366) <= 1e-3,
        "Psi(-0.2)=0.228": abs(v2 - 0.228) <= 1e-3 and abs(o2 - 0.228) <= 1e-3,
        "oracle agreement": abs(v3 - o3) < 1e-9 and abs(v2 - o2) < 1e-9,
        "decreasing": bool(np.all(np.diff(vals) < 0)),
    }
    detail = (
        f"phi={phi:.6f} psi={psi:.6f}; max|Psi+X0| (psi=0)={anti:.1e}; "
        f"Psi(-0.3)={v3:.6f} oracle {o3:.6f}; Psi(-0.2)={v2:.6f} oracle {o2:.6f}; "
        + "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in parts.items())
    )
    return all(parts.values()), detail, 5.0


def check_sector_prediction():
    eps, delta = 0.01, 0.05
    w = math.sqrt(P.a0) / (G.alpha * P.c / P.a0)
    xs = np.linspace(-w, -0.05, 12)[1:-1]
    pairs = [(rotation_sector(X0, P, delta, eps=eps).k, count_k2_rotations(X0, P, delta, eps)["k"]) for X0 in xs]
    ok = all(abs(a - b) <= 1 for a, b in pairs)
    detail = "predicted/counted: " + " ".join(f"{a}/{b}" for a, b in pairs)
    return ok, detail, 60.0


def _spacing(eps, delta):
    fa, fr = canard_families(P, eps, delta, members=300)
    cs = detect_canards(fa, fr, P, delta)
    rot = [c.rotation for c in cs.canards]
    return canard_spacing(cs, eps)["spacing"], rot


def check_secondary_canards():
    eps0, deltas = 0.01, (0.02, 0.04, 0.08)
    delta0, epss = 0.04, (0.0025, 0.01, 0.04)
    runs = {}
    for eps, delta in [(eps0, d) for d in deltas] + [(e, delta0) for e in epss]:
        if (eps, delta) not in runs:
            runs[(eps, delta)] = _spacing(eps, delta)
    consecutive = all(len(r) >= 2 and np.all(np.diff(r) == 1) for _, r in runs.values())
    sd = _loglog_slope(deltas, [runs[(eps0, d)][0] for d in deltas])
    se = _loglog_slope([math.sqrt(e) for e in epss], [runs[(e, delta0)][0] for e in epss])
    ok = consecutive and abs(sd - 1.0) <= 0.15 and abs(se - 1.0) <= 0.15
    counts = ", ".join(f"(eps={e:g},delta={d:g}):{len(r)}" for (e, d), (_, r) in runs.items())
    detail = f"consecutive rotations={consecutive} [{counts}]; slope vs delta={sd:.3f}, vs sqrt(eps)={se:.3f} (1 +- 0.15)"
    return ok, detail, 600.0


def check_global_orbit():
    p = P.with_(eps=0.05, delta=0.1)
    a = find_periodic(p, SEED_A)
    b = find_periodic(p, SEED_B)
    half = find_periodic(p.with_(delta=0.05), SEED_A)
    tight = find_periodic(p, SEED_A, tol=Tolerances(1e-11, 1e-13), measure_contraction=False)
    gap = float(np.max(np.abs(a.anchor - b.anchor)))
    parts = {
        "same anchor": gap < 1e-6,
        "contracting": a.contraction < 0.5,
        "smaller at delta/2": half.contraction < a.contraction,
        "signature stable": tight.signature.label == a.signature.label,
    }
    detail = (
        f"anchor gap={gap:.1e}; ratio {a.contraction:.2e} (delta=0.1) -> {half.contraction:.2e} (delta=0.05); "
        f"signature {a.signature.label} / tight {tight.signature.label}"
    )
    return all(parts.values()), detail, 300.0


def check_contraction_expansion():
    c3a, c3g = contraction_c3(P, "adaptive"), contraction_c3(P, "gauss")
    c4a, c4g = expansion_c4(P, "adaptive"), expansion_c4(P, "gauss")
    pairs = [(e, d) for e in (0.01, 0.05) for d in (0.001, 0.002, 0.005, 0.02, 0.1)]
    agree = 0
    for e, d in pairs:
        rep = check_h5(P, e, d)
        verb = h5_verbatim(P, e, d)[0]
        agree += rep.holds == (c3a / d - 2 * c4a / e > 0) == verb
    flips = len({check_h5(P, e, d).holds for e, d in pairs}) == 2
    ok = (
        c3a > 0
        and abs(c3a - c3g) / c3a < 1e-6
        and abs(c4a - c4g) / c4a < 1e-6
        and abs(c4a - 0.75) <= 0.02
        and agree == len(pairs)
        and flips
    )
    detail = (
        f"C3={c3a:.6f} (rel diff {abs(c3a - c3g) / c3a:.1e}), C4={c4a:.6f} (rel diff {abs(c4a - c4g) / c4a:.1e}); "
        f"H5 agreement {agree}/{len(pairs)}, both outcomes present={flips}"
    )
    return ok, detail, 10.0


def _allowed(label: str) -> bool:
    a, b = label.split("->")
    p0, s0 = map(int, a.strip("()").split(","))
    p1, s1 = map(int, b.strip("()").split(","))
    dp, ds = p1 - p0, s1 - s0
    return abs(dp) == 1 and (ds == 0 or ds == -dp)


def check_continuation_branch():
    p = P.with_(eps=BRANCH_EPS, delta=BRANCH_DELTA, a2=BRANCH_RANGE[0])
    orbit = find_periodic(p, SEED_A, measure_contraction=False)
    br = continue_branch(p, orbit, BRANCH_RANGE, BRANCH_SETTINGS)
    pts = br.points
    markers = br.markers
    transitions = br.transitions()
    marked = [lab for i, lab in transitions if i in markers]
    unmarked = [lab for i, lab in transitions if i not in markers]
    worst = max(max(pt.collocation_residual, pt.boundary_residual) for pt in pts)
    reach = pts[-1].a2
    parts = {
        "covers range": reach >= BRANCH_RANGE[1] - BRANCH_SETTINGS.ds_max,
        ">=1 marker": len(markers) >= 1,
        "marked transitions allowed": bool(marked) and all(_allowed(lab) for lab in marked),
        "constant away from markers": not unmarked,
        "residuals < 1e-9": worst < 1e-9,
    }
    labels = sorted({pt.signature.label for pt in pts})
    detail = (
        f"eps={BRANCH_EPS} delta={BRANCH_DELTA} N={BRANCH_SETTINGS.mesh_intervals}: {len(pts)} points up to a2={reach:.6f}, "
        f"{len(br.stalls)} stall(s), {len(markers)} marker(s), {len(unmarked)} unmarked label change(s), "
        f"labels {labels}, max residual {worst:.1e}; "
        + "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in parts.items())
    )
    return all(parts.values()), detail, 1800.0


def check_reduction_consistency():
    eps, deltas = 1e-3, (1e-3, 5e-4, 2.5e-4)
    ts = np.linspace(0.0, 0.5, 401)
    defects = []
    for d in deltas:
        p = P.with_(eps=eps, delta=d)
        # Regulator on Y = g(X); Secretor at its left-branch equilibrium, so it tracks X without relaxation jumps
        X0 = 1.5
        Y0 = p.mu3 * X0**3 + p.mu1 * X0
        x0 = brentq(lambda x: p.a0 * x + p.a1 * (p.lambda3 * x**3 + p.lambda1 * x) + p.a2 + p.c * X0, -3.0, -G.x_f)
        y0 = p.lambda3 * x0**3 + p.lambda1 * x0
        tol = Tolerances(1e-9, 1e-11)
        full = integrate(build_field(FieldTag.FULL4D, p), [x0, y0, X0, Y0], (0.0, 0.5), tol)
        red = integrate(build_field(FieldTag.THREE_SCALE_3D, p), [x0, y0, X0], (0.0, 0.5), tol)
        defects.append(float(np.max(np.abs(full(ts)[:, :3] - red(ts)))))
    slope = _loglog_slope(deltas, defects)
    ok = abs(slope - 1.0) <= 0.2
    detail = "defects " + ", ".join(f"{d:g}:{v:.3e}" for d, v in zip(deltas, defects)) + f"; slope={slope:.4f} (1 +- 0.2)"
    return ok, detail, 60.0


CRITERIA = [
    ("AC1", "fold classification", check_fold_classification),
    ("AC2", "hypotheses", check_hypotheses_margins),
    ("AC3", "way-in/way-out", check_way_in_way_out),
    ("AC4", "rotation sectors", check_sector_prediction),
    ("AC5", "secondary canards", check_secondary_canards),
    ("AC6", "global MMO orbit", check_global_orbit),
    ("AC7", "C3/C4/H5", check_contraction_expansion),
    ("AC8", "continuation branch", check_continuation_branch),
    ("AC9", "reduction consistency", check_reduction_consistency),
]


def run(check):
    t0 = time.perf_counter()
    ok, detail, limit = check()
    elapsed = time.perf_counter() - t0
    in_time = elapsed < limit
    return ok and in_time, f"{detail}; runtime {elapsed:.1f} s (< {limit:g} s{'' if in_time else ' EXCEEDED'})"


@pytest.mark.parametrize("tag,name,check", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_acceptance(tag, name, check, capsys):
    ok, line = run(check)
    with capsys.disabled():
        print(f"\n{tag} {'PASS' if ok else 'FAIL'} [{name}] {line}")
    assert ok, line


if __name__ == "__main__":
    failed = 0
    for tag, name, check in CRITERIA:
        ok, line = run(check)
        failed += not ok
        print(f"{tag} {'PASS' if ok else 'FAIL'} [{name}] {line}", flush=True)
    sys.exit(1 if failed else 0)
