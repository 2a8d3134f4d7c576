"""Gauss-Legendre collocation for boundary-value problems with unknown time.

The orbit ``u(tau)``, ``tau in [0, 1]``, solves ``u' = T F(u; q)``.  Each mesh
interval carries the node value ``u_j`` and ``m`` stage values; the stage and
continuity equations are those of the ``m``-stage Gauss implicit Runge-Kutta
method, which is equivalent to collocation at the Gauss points.  Unknowns are
``(u_0..u_N, U, T, q)``; boundary conditions and linear side conditions
(phase condition, pseudo-arclength) close the system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import polynomial as npoly
from numpy.polynomial.legendre import leggauss
from scipy.sparse.linalg import splu

__all__ = [
    "gauss_tableau",
    "CollocationProblem",
    "CollocationMesh",
    "Solution",
    "NewtonFailure",
    "newton_solve",
    "bordered_direction",
    "equidistribute",
]


class NewtonFailure(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


def gauss_tableau(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes ``c``, matrix ``A`` and weights ``b`` of the m-stage Gauss method on [0, 1]."""
    x, w = leggauss(m)
    c = 0.5 * (x + 1.0)
    b = 0.5 * w
    A = np.empty((m, m))
    for l in range(m):
        others = np.delete(c, l)
        poly = npoly.polyfromroots(others) / np.prod(c[l] - others)
        integ = npoly.polyint(poly)
        A[:, l] = npoly.polyval(c, integ) - npoly.polyval(0.0, integ)
    return c, A, b


def _lagrange_weights(nodes: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Weights ``W[k, i]`` so that ``p(s_k) = sum_i W[k, i] p(nodes_i)``."""
    s = np.atleast_1d(s)
    W = np.ones((len(s), len(nodes)))
    for i, ni in enumerate(nodes):
        for j, nj in enumerate(nodes):
            if i != j:
                W[:, i] *= (s - nj) / (ni - nj)
    return W


def _lagrange_derivative_weights(nodes: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Weights ``D[k, i]`` so that ``p'(s_k) = sum_i D[k, i] p(nodes_i)``."""
    s = np.atleast_1d(s)
    D = np.zeros((len(s), len(nodes)))
    for i, ni in enumerate(nodes):
        denom = np.prod([ni - nj for j, nj in enumerate(nodes) if j != i])
        for k, nk in enumerate(nodes):
            if k == i:
                continue
            term = np.ones_like(s)
            for j, nj in enumerate(nodes):
                if j != i and j != k:
                    term = term * (s - nj)
            D[:, i] += term
        D[:, i] /= denom
    return D


@dataclass
class CollocationProblem:
    """Vector field and boundary data of a collocation BVP.

    ``rhs(U, q)`` and ``jac(U, q)`` act on ``(npts, n)`` arrays; ``dparam``
    returns ``(npts, n, nq)`` (finite differences when omitted).  ``bc(u0,
    u1, T, q)`` returns the boundary residuals.
    """

    n: int
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray, np.ndarray], np.ndarray]
    bc: Callable[[np.ndarray, np.ndarray, float, np.ndarray], np.ndarray]
    n_bc: int
    nq: int = 0
    dparam: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def param_derivative(self, U: np.ndarray, q: np.ndarray) -> np.ndarray:
        if self.dparam is not None:
            return self.dparam(U, q)
        out = np.empty(U.shape + (self.nq,))
        f0 = self.rhs(U, q)
        for k in range(self.nq):
            h = 1e-7 * max(1.0, abs(q[k]))
            qq = q.copy()
            qq[k] += h
            out[..., k] = (self.rhs(U, qq) - f0) / h
        return out


@dataclass
class CollocationMesh:
    tau: np.ndarray
    m: int = 4

    def __post_init__(self) -> None:
        self.tau = np.asarray(self.tau, dtype=float)
        if self.tau[0] != 0.0 or self.tau[-1] != 1.0 or np.any(np.diff(self.tau) <= 0):
            raise ValueError("mesh must increase strictly from 0 to 1")
        self.c, self.A, self.b = gauss_tableau(self.m)

    @classmethod
    def uniform(cls, N: int, m: int = 4) -> "CollocationMesh":
        return cls(np.linspace(0.0, 1.0, N + 1), m)

    @property
    def N(self) -> int:
        return len(self.tau) - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.tau)

    def stage_times(self) -> np.ndarray:
        return self.tau[:-1, None] + self.h[:, None] * self.c[None, :]

    def size(self, n: int, nq: int) -> int:
        return (self.N + 1) * n + self.N * self.m * n + 1 + nq


@dataclass
class Solution:
    """Converged collocation solution on a mesh."""

    mesh: CollocationMesh
    nodes: np.ndarray  # (N+1, n)
    stages: np.ndarray  # (N, m, n)
    T: float
    q: np.ndarray
    collocation_residual: float
    boundary_residual: float
    iterations: int
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    def pack(self) -> np.ndarray:
        return np.concatenate([self.nodes.ravel(), self.stages.ravel(), [self.T], self.q])

    def __call__(self, tau) -> np.ndarray:
        """Evaluate the collocation polynomial at ``tau`` (scalar or array)."""
        ts = np.atleast_1d(np.asarray(tau, dtype=float))
        mesh = self.mesh
        j = np.clip(np.searchsorted(mesh.tau, ts, side="right") - 1, 0, mesh.N - 1)
        s = (ts - mesh.tau[j]) / mesh.h[j]
        nodes = np.concatenate([[0.0], mesh.c])
        vals = np.concatenate([self.nodes[:-1, None, :], self.stages], axis=1)  # (N, m+1, n)
        out = np.einsum("ki,kin->kn", _lagrange_weights(nodes, s), vals[j])
        return out[0] if np.ndim(tau) == 0 else out

    def defect(self, rhs: Callable[[np.ndarray], np.ndarray], points: Sequence[float] = (0.5,)) -> float:
        """Max scaled ODE defect ``|p'(tau) - T F(p(tau))|`` at the given fractions of every interval.

        The default interval midpoints are not collocation points, so the
        defect decays like ``h^m`` under refinement.
        """
        mesh = self.mesh
        nodes = np.concatenate([[0.0], mesh.c])
        pts = np.asarray(points, dtype=float)
        W = _lagrange_weights(nodes, pts)
        D = _lagrange_derivative_weights(nodes, pts)
        vals = np.concatenate([self.nodes[:-1, None, :], self.stages], axis=1)  # (N, m+1, n)
        P = np.einsum("ki,jin->jkn", W, vals)
        dP = np.einsum("ki,jin->jkn", D, vals) / mesh.h[:, None, None]
        F = np.asarray(rhs(P.reshape(-1, self.n))).reshape(P.shape)
        scale = max(1.0, float(np.max(np.abs(self.nodes))))
        return float(np.max(np.abs(dP - self.T * F))) / scale

    def times(self) -> np.ndarray:
        return self.mesh.tau * self.T

    def dense(self, per_interval: int = 4) -> tuple[np.ndarray, np.ndarray]:
        """Times and states at ``per_interval`` points inside every mesh interval (plus the end)."""
        sub = np.linspace(0.0, 1.0, per_interval, endpoint=False)
        tau = (self.mesh.tau[:-1, None] + self.mesh.h[:, None] * sub[None, :]).ravel()
        tau = np.append(tau, 1.0)
        return tau * self.T, self(tau)

    def derivative_m(self) -> np.ndarray:
        """m-th tau-derivative of the collocation polynomial on each interval, ``(N, n)``."""
        mesh = self.mesh
        nodes = np.concatenate([[0.0], mesh.c])
        # coefficient of s^m of the Lagrange interpolant, times m!
        lead = np.array([1.0 / np.prod([ni - nj for j, nj in enumerate(nodes) if j != i]) for i, ni in enumerate(nodes)])
        vals = np.concatenate([self.nodes[:-1, None, :], self.stages], axis=1)  # (N, m+1, n)
        fact = float(np.prod(np.arange(1, mesh.m + 1)))
        return fact * np.einsum("i,jik->jk", lead, vals) / mesh.h[:, None] ** mesh.m


def _split(z: np.ndarray, mesh: CollocationMesh, n: int, nq: int):
    N, m = mesh.N, mesh.m
    a = (N + 1) * n
    b = a + N * m * n
    return z[:a].reshape(N + 1, n), z[a:b].reshape(N, m, n), z[b], z[b + 1 : b + 1 + nq]


def _residual(z, mesh, prob: CollocationProblem, linear):
    n, nq = prob.n, prob.nq
    u, U, T, q = _split(z, mesh, n, nq)
    N, m = mesh.N, mesh.m
    h = mesh.h
    F = prob.rhs(U.reshape(-1, n), q).reshape(N, m, n)
    stage = U - u[:-1, None, :] - (h * T)[:, None, None] * np.einsum("il,jlc->jic", mesh.A, F)
    cont = u[1:] - u[:-1] - (h * T)[:, None] * np.einsum("l,jlc->jc", mesh.b, F)
    bc = np.atleast_1d(prob.bc(u[0], u[-1], T, q))
    lin = np.array([row @ z - val for row, val in linear]) if linear else np.empty(0)
    return np.concatenate([stage.ravel(), cont.ravel(), bc, lin]), F


def _jacobian(z, mesh, prob: CollocationProblem, linear, F):
    n, nq = prob.n, prob.nq
    u, U, T, q = _split(z, mesh, n, nq)
    N, m = mesh.N, mesh.m
    h = mesh.h
    size = mesh.size(n, nq)
    J = prob.jac(U.reshape(-1, n), q).reshape(N, m, n, n)
    iu = lambda j, c: j * n + c  # noqa: E731
    off_U = (N + 1) * n
    iT = off_U + N * m * n
    rows, cols, vals = [], [], []

    jj = np.arange(N)[:, None, None, None, None]
    ii = np.arange(m)[None, :, None, None, None]
    cc = np.arange(n)[None, None, :, None, None]
    ll = np.arange(m)[None, None, None, :, None]
    dd = np.arange(n)[None, None, None, None, :]
    # stage rows w.r.t. stage values: delta - hT A_il J_l[c, d]
    blk = -(h * T)[:, None, None, None, None] * mesh.A[None, :, None, :, None] * J.transpose(0, 2, 1, 3)[:, None]
    blk = blk + (ii == ll) * (cc == dd)
    r_stage = (jj * m + ii) * n + cc
    c_stage = off_U + (jj * m + ll) * n + dd
    shape5 = (N, m, n, m, n)
    rows.append(np.broadcast_to(r_stage, shape5).ravel())
    cols.append(np.broadcast_to(c_stage, shape5).ravel())
    vals.append(np.broadcast_to(blk, shape5).ravel())
    # stage rows w.r.t. u_j: -I
    j1 = np.arange(N)[:, None, None]
    i1 = np.arange(m)[None, :, None]
    c1 = np.arange(n)[None, None, :]
    shape3 = (N, m, n)
    rows.append(np.broadcast_to((j1 * m + i1) * n + c1, shape3).ravel())
    cols.append(np.broadcast_to(iu(j1, c1), shape3).ravel())
    vals.append(-np.ones(N * m * n))
    # stage rows w.r.t. T
    dT_stage = -h[:, None, None] * np.einsum("il,jlc->jic", mesh.A, F)
    rows.append(np.broadcast_to((j1 * m + i1) * n + c1, shape3).ravel())
    cols.append(np.full(N * m * n, iT))
    vals.append(dT_stage.ravel())

    r0 = N * m * n
    j2 = np.arange(N)[:, None]
    c2 = np.arange(n)[None, :]
    shape2 = (N, n)
    rc = np.broadcast_to(r0 + j2 * n + c2, shape2).ravel()
    # continuity rows: u_{j+1} - u_j
    rows += [rc, rc]
    cols += [np.broadcast_to(iu(j2 + 1, c2), shape2).ravel(), np.broadcast_to(iu(j2, c2), shape2).ravel()]
    vals += [np.ones(N * n), -np.ones(N * n)]
    # continuity rows w.r.t. stages: -hT b_l J_l[c, d]
    jj4 = np.arange(N)[:, None, None, None]
    cc4 = np.arange(n)[None, :, None, None]
    ll4 = np.arange(m)[None, None, :, None]
    dd4 = np.arange(n)[None, None, None, :]
    blk_c = -(h * T)[:, None, None, None] * mesh.b[None, None, :, None] * np.transpose(J, (0, 2, 1, 3))
    shape4 = (N, n, m, n)
    rows.append(np.broadcast_to(r0 + jj4 * n + cc4, shape4).ravel())
    cols.append(np.broadcast_to(off_U + (jj4 * m + ll4) * n + dd4, shape4).ravel())
    vals.append(blk_c.ravel())
    rows.append(rc)
    cols.append(np.full(N * n, iT))
    vals.append((-h[:, None] * np.einsum("l,jlc->jc", mesh.b, F)).ravel())

    if nq:
        Fp = prob.param_derivative(U.reshape(-1, n), q).reshape(N, m, n, nq)
        for k in range(nq):
            rows.append(np.broadcast_to((j1 * m + i1) * n + c1, shape3).ravel())
            cols.append(np.full(N * m * n, iT + 1 + k))
            vals.append((-(h * T)[:, None, None] * np.einsum("il,jlc->jic", mesh.A, Fp[..., k])).ravel())
            rows.append(rc)
            cols.append(np.full(N * n, iT + 1 + k))
            vals.append((-(h * T)[:, None] * np.einsum("l,jlc->jc", mesh.b, Fp[..., k])).ravel())

    # boundary rows by finite differences in (u0, u1, T, q)
    rb = r0 + N * n
    base = np.atleast_1d(prob.bc(u[0], u[-1], T, q))
    args = [u[0].copy(), u[-1].copy(), np.array([T]), q.copy()]
    targets = [iu(0, np.arange(n)), iu(N, np.arange(n)), np.array([iT]), iT + 1 + np.arange(nq)]
    for a, arr in enumerate(args):
        for k in range(arr.size):
            step = 1e-7 * max(1.0, abs(arr[k]))
            pert = [x.copy() for x in args]
            pert[a][k] += step
            d = (np.atleast_1d(prob.bc(pert[0], pert[1], pert[2][0], pert[3])) - base) / step
            nz = np.flatnonzero(d)
            rows.append(rb + nz)
            cols.append(np.full(nz.size, targets[a][k]))
            vals.append(d[nz])
    rl = rb + prob.n_bc
    for k, (row, _) in enumerate(linear):
        nz = np.flatnonzero(row)
        rows.append(np.full(nz.size, rl + k))
        cols.append(nz)
        vals.append(row[nz])
    nrows = rl + len(linear)
    if nrows != size:
        raise ValueError(f"collocation system is not square: {nrows} equations, {size} unknowns")
    return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size))


class _Factor:
    """LU factor of the collocation Jacobian with iterative refinement.

    When the boundary rows match the state dimension the system is permuted
    to block-banded form (boundary rows against ``u_0``, stage rows against
    their stages, continuity rows against the next node, side rows against
    ``T, q``) and factored in that order, which keeps the fill linear in
    ``N``.  Other shapes use the default fill-reducing ordering.
    """

    def __init__(self, J: sp.csc_matrix, mesh: CollocationMesh, n: int, n_bc: int, refine: int = 2):
        self.J = J
        self.refine = refine
        size = J.shape[0]
        if n_bc == n:
            N, m = mesh.N, mesh.m
            off_U = (N + 1) * n
            j = np.arange(N)[:, None]
            blk_cols = np.hstack([off_U + j * m * n + np.arange(m * n), (j + 1) * n + np.arange(n)])
            self.cols = np.concatenate([np.arange(n), blk_cols.ravel(), np.arange(off_U + N * m * n, size)])
            r0 = N * m * n
            rb = r0 + N * n
            blk_rows = np.hstack([j * m * n + np.arange(m * n), r0 + j * n + np.arange(n)])
            self.rows = np.concatenate([np.arange(rb, rb + n_bc), blk_rows.ravel(), np.arange(rb + n_bc, size)])
            # shrink the dense side rows so that partial pivoting never selects them early
            self.scale = np.ones(size)
            side = np.arange(rb + n_bc, size)
            Jr = J.tocsr()
            for r in side:
                peak = np.max(np.abs(Jr.data[Jr.indptr[r] : Jr.indptr[r + 1]]), initial=0.0)
                if peak > 0:
                    self.scale[r] = 1e-8 / peak
            try:
                A = sp.diags(self.scale) @ J
                self.lu = splu(A.tocsc()[self.rows][:, self.cols].tocsc(), permc_spec="NATURAL", diag_pivot_thresh=0.01)
                return
            except RuntimeError:  # zero pivot in the banded order: fall back to full pivoting
                pass
        self.rows = self.cols = None
        self.lu = splu(J)

    def _solve_once(self, b: np.ndarray) -> np.ndarray:
        if self.rows is None:
            return self.lu.solve(b)
        x = np.empty_like(b)
        x[self.cols] = self.lu.solve((self.scale * b)[self.rows])
        return x

    def solve(self, b: np.ndarray) -> np.ndarray:
        x = self._solve_once(b)
        for _ in range(self.refine):
            if not np.all(np.isfinite(x)):
                break
            x = x + self._solve_once(b - self.J @ x)
        return x


def _scaled_max(v: np.ndarray, scale: float) -> float:
    return float(np.max(np.abs(v))) / scale if v.size else 0.0


def newton_solve(
    prob: CollocationProblem,
    mesh: CollocationMesh,
    z0: np.ndarray,
    linear: Sequence[tuple[np.ndarray, float]] = (),
    tol: float = 1e-10,
    max_iter: int = 30,
    min_damping: float = 1e-4,
) -> Solution:
    """Damped Newton iteration on the full collocation system.

    Converged when the scaled residual is below ``tol`` and the last update is
    below ``tol`` (scaled by the solution size).  Raises
    :class:`NewtonFailure` otherwise.
    """
    linear = list(linear)
    z = np.array(z0, dtype=float)
    n, nq = prob.n, prob.nq
    N, m = mesh.N, mesh.m
    n_col = N * m * n + N * n
    res, F = _residual(z, mesh, prob, linear)
    norm = lambda r: float(np.max(np.abs(r))) if r.size else 0.0  # noqa: E731
    for it in range(1, max_iter + 1):
        if not np.all(np.isfinite(res)):
            raise NewtonFailure("non-finite residual", float("inf"))
        Jm = _jacobian(z, mesh, prob, linear, F)
        try:
            lu = _Factor(Jm, mesh, n, prob.n_bc)
        except RuntimeError as exc:  # exactly singular factor
            raise NewtonFailure(f"singular collocation Jacobian: {exc}", norm(res)) from exc
        dz = lu.solve(-res)
        if not np.all(np.isfinite(dz)):
            raise NewtonFailure("singular collocation Jacobian", norm(res))
        lam = 1.0
        r0 = norm(res)
        dz_norm = norm(dz)
        # natural monotonicity test: the simplified Newton correction must shrink
        while True:
            zt = z + lam * dz
            try:
                rt, Ft = _residual(zt, mesh, prob, linear)
                ok = bool(np.all(np.isfinite(rt)))
                if ok:
                    dzbar = lu.solve(-rt)
                    ok = bool(np.all(np.isfinite(dzbar))) and norm(dzbar) <= (1.0 - 0.25 * lam) * dz_norm + 1e-15
            except (ValueError, FloatingPointError, ArithmeticError):
                ok = False
            if ok or lam <= min_damping:
                break
            lam *= 0.5
        if not ok:
            # round-off level already: nothing left to gain
            if r0 < 10 * tol:
                break
            raise NewtonFailure("damping underflow", r0)
        z, res, F = zt, rt, Ft
        scale = max(1.0, float(np.max(np.abs(z[: (N + 1) * n]))))
        step = float(np.max(np.abs(lam * dz))) / scale
        if norm(res) / scale < tol and step < 1e3 * tol:
            break
    else:
        raise NewtonFailure(f"no convergence in {max_iter} iterations", norm(res))
    u, U, T, q = _split(z, mesh, n, nq)
    scale = max(1.0, float(np.max(np.abs(u))))
    return Solution(
        mesh,
        u.copy(),
        U.copy(),
        float(T),
        q.copy(),
        _scaled_max(res[:n_col], scale),
        _scaled_max(res[n_col:], scale),
        it,
    )


def bordered_direction(prob: CollocationProblem, mesh: CollocationMesh, z: np.ndarray, linear: Sequence[tuple[np.ndarray, float]]) -> np.ndarray:
    """Solve ``J v = e_last`` with ``J`` the full system Jacobian at ``z``.

    With the last linear row set to a previous tangent, ``v`` is the branch
    tangent (the null vector of the remaining rows) scaled so that its
    product with that row is one.
    """
    _, F = _residual(z, mesh, prob, linear)
    Jm = _jacobian(z, mesh, prob, linear, F)
    e = np.zeros(Jm.shape[0])
    e[-1] = 1.0
    try:
        v = _Factor(Jm, mesh, prob.n, prob.n_bc).solve(e)
    except RuntimeError as exc:
        raise NewtonFailure(f"singular bordered Jacobian: {exc}", float("nan")) from exc
    if not np.all(np.isfinite(v)):
        raise NewtonFailure("singular bordered Jacobian", float("nan"))
    return v


def equidistribute(sol: Solution, N: int | None = None, floor: float = 0.05) -> CollocationMesh:
    """New mesh equidistributing ``|u^(m)|^(1/m)`` (plus a uniform floor fraction)."""
    mesh = sol.mesh
    N = mesh.N if N is None else N
    dm = sol.derivative_m()
    scale = np.maximum(1.0, np.max(np.abs(sol.nodes), axis=0))
    w = np.max(np.abs(dm) / scale, axis=1) ** (1.0 / mesh.m)
    # smooth over neighbours so isolated spikes widen into a refined zone
    w = np.maximum(w, np.maximum(np.r_[w[1:], w[-1]], np.r_[w[0], w[:-1]]))
    dens = w + floor * float(np.sum(w * mesh.h)) + 1e-300
    cum = np.concatenate([[0.0], np.cumsum(dens * mesh.h)])
    targets = np.linspace(0.0, cum[-1], N + 1)
    tau = np.interp(targets, cum, mesh.tau)
    tau[0], tau[-1] = 0.0, 1.0
    tau = np.maximum.accumulate(tau)
    if np.any(np.diff(tau) <= 0):
        tau = np.linspace(0.0, 1.0, N + 1)
    return CollocationMesh(tau, mesh.m)


def initial_vector(mesh: CollocationMesh, profile: Callable[[np.ndarray], np.ndarray], T: float, q: Sequence[float] = ()) -> np.ndarray:
    """Pack a guess from a callable ``profile(tau) -> (len(tau), n)``."""
    nodes = np.asarray(profile(mesh.tau))
    st = mesh.stage_times()
    stages = np.asarray(profile(st.ravel())).reshape(mesh.N, mesh.m, -1)
    return np.concatenate([nodes.ravel(), stages.ravel(), [float(T)], np.asarray(q, dtype=float)])
