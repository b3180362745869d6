"""Reference propagation in the Heisenberg and Schrodinger pictures.

Observables are integrated backward in time, ``d/ds O(s) = -L_V(s) O(s)`` from
``O(t) = O``; states forward under the adjoint generator. Both use fixed-step
classical RK4 with steps aligned to profile jumps and requested checkpoints.
The step is halved until two successive runs agree to ``tol``; the finer run
is returned and the last difference is the reported error budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import expm

from . import algebra
from .algebra import Op, SuperOp
from .liouvillian import (LiouvillianSpec, LocalTerm,
                          term_superop)


@dataclass(frozen=True)
class SolverConfig:
    step: float | None = None  # None: derived from the step rule below
    tol: float = 1e-9
    halving: bool = True
    max_halvings: int = 6
    step_rule: float = 0.05  # h * ||l|| * Z <= step_rule
    max_sites: int = 12


@dataclass
class Trajectory:
    ops: dict
    error: float
    step: float
    region: tuple


class RegionError(ValueError):
    pass


def closure_region(spec: LiouvillianSpec, V: Iterable, W: Iterable) -> frozenset:
    """``W`` plus every support inside ``V`` reachable from ``W`` through overlapping supports."""
    terms = spec.terms_within(V)
    region = set(W)
    grown = True
    while grown:
        grown = False
        for t in terms:
            if t.sites & region and not t.sites <= region:
                region |= t.sites
                grown = True
    return frozenset(region)


def default_step(spec: LiouvillianSpec, terms: Sequence[LocalTerm], s: float, t: float,
                 rule: float = 0.05) -> float:
    lo, hi = min(s, t), max(s, t)
    ell = max((term.norm_upper_bound() * term.profile.sup_abs(lo, hi, 65) for term in terms), default=0.0)
    if ell == 0:
        return max(hi - lo, 1.0)
    return rule / (ell * spec.Z())


def _grid(start: float, stop: float, marks: Iterable[float], h: float) -> list:
    """Step endpoints from ``start`` to ``stop`` hitting every mark in between."""
    lo, hi = min(start, stop), max(start, stop)
    inner = sorted({m for m in marks if lo < m < hi})
    edges = [lo] + inner + [hi]
    pts = [lo]
    for a, b in zip(edges, edges[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-9))
        pts.extend(a + (b - a) * k / n for k in range(1, n + 1))
        pts[-1] = b
    if start > stop:
        pts.reverse()
    return pts


def _rk4(rhs: Callable, y0: np.ndarray, pts: Sequence[float], save: set) -> dict:
    y = y0
    out = {}
    if pts[0] in save:
        out[pts[0]] = y
    for a, b in zip(pts, pts[1:]):
        h = b - a
        mid = 0.5 * (a + b)
        k1 = rhs(y, a, mid)
        k2 = rhs(y + (h / 2) * k1, a + h / 2, mid)
        k3 = rhs(y + (h / 2) * k2, a + h / 2, mid)
        k4 = rhs(y + h * k3, b, mid)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if b in save:
            out[b] = y
    return out


def _profile_value(term: LocalTerm, tau: float, mid: float) -> float:
    # jumps sit on step edges, so piecewise profiles are read inside the step
    return term.profile(mid) if term.profile.knots() else term.profile(tau)


SUPEROP_MAX_SITES = 9


class CompiledGenerator:
    """Truncated generator on a fixed region, acting on column-stacked operators.

    Terms sharing a time profile are summed into one group. Up to
    ``SUPEROP_MAX_SITES`` sites each group is a sparse superoperator on the
    vectorised space; beyond that the factors ``K``, ``L`` are kept as sparse
    region-sized matrices and applied from the left and right.
    """

    def __init__(self, terms: Sequence[LocalTerm], region: Sequence, picture: str = "heisenberg",
                 vectorized: bool | None = None):
        if picture not in ("heisenberg", "schrodinger"):
            raise ValueError(f"unknown picture {picture!r}")
        self.region = tuple(region)
        self.D = 2 ** len(self.region)
        self.vectorized = len(self.region) <= SUPEROP_MAX_SITES if vectorized is None else vectorized
        sign = -1.0 if picture == "heisenberg" else 1.0
        groups: dict = {}
        for term in terms:
            K = algebra.embed_sparse(term._K, term.support, self.region)
            Ls = [algebra.embed_sparse(L, term.support, self.region) for L in term.lindblads]
            g = groups.setdefault(term.profile, {"K": None, "jumps": []})
            g["K"] = K if g["K"] is None else g["K"] + K
            g["jumps"].extend(Ls)
        self.groups = []
        for prof, g in groups.items():
            K = g["K"].tocsr()
            if picture == "heisenberg":
                # K^dag O + O K + sum L^dag O L
                left, right = K.conj().T.tocsr(), K
                jumps = [(L.conj().T.tocsr(), L) for L in g["jumps"]]
            else:
                # K rho + rho K^dag + sum L rho L^dag
                left, right = K, K.conj().T.tocsr()
                jumps = [(L, L.conj().T.tocsr()) for L in g["jumps"]]
            if self.vectorized:
                I = sparse.identity(self.D, format="csr")
                # vec(A X B) = (B^T kron A) vec(X)
                S = sparse.kron(I, left) + sparse.kron(right.T, I)
                for P, Q in jumps:
                    S = S + sparse.kron(Q.T, P)
                self.groups.append((prof, (sign * S).tocsr()))
            else:
                self.groups.append((prof, (sign * left, (sign * right).T.tocsr(),
                                           [(sign * P, Q.T.tocsr()) for P, Q in jumps])))

    def __call__(self, v: np.ndarray, tau: float, mid: float | None = None) -> np.ndarray:
        """Time derivative of the vectorised operator ``v``."""
        out = np.zeros_like(v)
        for prof, op in self.groups:
            c = prof(mid) if (prof.knots() and mid is not None) else prof(tau)
            if c == 0:
                continue
            if self.vectorized:
                out += c * (op @ v)
                continue
            left, right_t, jumps = op
            y = v.reshape(self.D, self.D, order="F")
            acc = left @ y + (right_t @ y.T).T
            for P, Qt in jumps:
                acc += P @ (Qt @ y.T).T
            out += c * acc.reshape(-1, order="F")
        return out


def _solve(rhs, y0, start, stop, checkpoints, marks, h0, solver: SolverConfig):
    save = set()
    h = h0
    prev = None
    err = math.inf
    for k in range(solver.max_halvings + 1 if solver.halving else 1):
        pts = _grid(start, stop, list(marks) + list(checkpoints), h)
        # checkpoints are grid points by construction; map through the grid values
        keys = {c: min(pts, key=lambda p: abs(p - c)) for c in checkpoints}
        save = set(keys.values())
        res = _rk4(rhs, y0, pts, save)
        cur = {c: res[keys[c]] for c in checkpoints}
        if prev is not None:
            err = max(algebra.inf_norm(algebra.unvec(cur[c] - prev[c])) for c in checkpoints)
            if err <= solver.tol:
                return cur, err, h
        prev = cur
        h = h / 2
    return prev, (err if solver.halving else math.nan), 2 * h


def heisenberg_trajectory(spec: LiouvillianSpec, V: Iterable, O: Op, t: float, s_values: Sequence[float],
                          solver: SolverConfig = SolverConfig()) -> Trajectory:
    """``tau_V(s, t) O`` for several ``s <= t`` from a single backward integration."""
    s_values = [float(s) for s in s_values]
    if any(s > t for s in s_values):
        raise ValueError("propagator needs s <= t")
    V = frozenset(V)
    region = tuple(sorted(closure_region(spec, V, O.sites)))
    if len(region) > solver.max_sites:
        raise RegionError(f"evolution region of {len(region)} sites exceeds max_sites={solver.max_sites}")
    O = algebra.embed(O, region)
    terms = [term for term in spec.terms_within(V) if term.sites <= set(region)]
    if not terms or all(s == t for s in s_values):
        return Trajectory({s: O for s in s_values}, 0.0, 0.0, region)
    lo = min(s_values)
    h = solver.step or default_step(spec, terms, lo, t, solver.step_rule)
    checkpoints = sorted(set(s_values) - {t})
    gen = CompiledGenerator(terms, region, "heisenberg")
    res, err, h = _solve(gen, algebra.vec(O.matrix), float(t), lo, checkpoints, spec.knots(), h, solver)
    ops = {s: (O if s == t else Op(region, algebra.unvec(res[s]), O.dims)) for s in s_values}
    return Trajectory(ops, err, h, region)


def evolve_observable(spec: LiouvillianSpec, V: Iterable, O: Op, s: float, t: float,
                      solver: SolverConfig = SolverConfig()) -> Op:
    """``tau_V(s, t) O`` on the closure of ``O``'s region under the terms inside ``V``."""
    return heisenberg_trajectory(spec, V, O, t, [s], solver).ops[float(s)]


def _check_state(rho: Op, tol: float):
    m = rho.matrix
    if np.max(np.abs(m - m.conj().T)) > tol:
        raise ValueError("state is not Hermitian")
    if abs(np.trace(m) - 1) > tol:
        raise ValueError("state does not have unit trace")
    if np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))) < -tol:
        raise ValueError("state is not positive semidefinite")


def state_trajectory(spec: LiouvillianSpec, V: Iterable, rho: Op, s: float, t_values: Sequence[float],
                     solver: SolverConfig = SolverConfig(), check_tol: float = 1e-9) -> Trajectory:
    _check_state(rho, check_tol)
    t_values = [float(t) for t in t_values]
    if any(t < s for t in t_values):
        raise ValueError("state propagation needs s <= t")
    V = frozenset(V)
    terms = spec.terms_within(V)
    for term in terms:
        if not term.sites <= rho.sites:
            raise RegionError(f"term support {term.support} not inside state region {rho.region}")
    if not terms or all(t == s for t in t_values):
        return Trajectory({t: rho for t in t_values}, 0.0, 0.0, rho.region)
    hi = max(t_values)
    h = solver.step or default_step(spec, terms, s, hi, solver.step_rule)
    checkpoints = sorted(set(t_values) - {s})
    gen = CompiledGenerator(terms, rho.region, "schrodinger")
    res, err, h = _solve(gen, algebra.vec(rho.matrix), float(s), hi, checkpoints, spec.knots(), h, solver)
    ops = {t: (rho if t == s else Op(rho.region, algebra.unvec(res[t]), rho.dims)) for t in t_values}
    return Trajectory(ops, err, h, rho.region)


def propagate_state(spec: LiouvillianSpec, V: Iterable, rho: Op, s: float, t: float,
                    solver: SolverConfig = SolverConfig()) -> Op:
    """``tau_V(s, t)^dag rho``, the state at time ``t`` given ``rho`` at ``s``."""
    return state_trajectory(spec, V, rho, s, [t], solver).ops[float(t)]


def pairing_check(spec: LiouvillianSpec, rho: Op, O: Op, s: float, t: float,
                  solver: SolverConfig = SolverConfig(), V: Iterable | None = None) -> tuple:
    """Expectation of ``O`` at ``t`` from ``rho`` at ``s``, computed in both pictures."""
    V = rho.sites if V is None else frozenset(V)
    Os = evolve_observable(spec, V, O, s, t, solver)
    heis = np.trace(rho.matrix @ algebra.embed(Os, rho.region).matrix)
    rho_t = propagate_state(spec, V, rho, s, t, solver)
    schr = np.trace(rho_t.matrix @ algebra.embed(O, rho.region).matrix)
    return float(heis.real), float(schr.real)


def local_propagator(term: LocalTerm, s: float, t: float, solver: SolverConfig = SolverConfig(),
                     method: str = "integrate") -> SuperOp:
    """Heisenberg propagator ``tau_Z(s, t)`` of a single term on its support.

    ``expm`` uses ``exp(int c * S)``, exact for a scalar profile. ``integrate``
    solves the matrix equation with the same RK4 scheme as the full propagator.
    """
    if s > t:
        raise ValueError("propagator needs s <= t")
    S = term_superop(term).matrix
    n2 = S.shape[0]
    if method == "expm":
        return SuperOp(term.support, expm(term.profile.integral(s, t) * S))
    if method != "integrate":
        raise ValueError(f"unknown method {method!r}")
    if s == t:
        return SuperOp(term.support, np.eye(n2, dtype=complex))

    def rhs(y, tau, mid):
        return -_profile_value(term, tau, mid) * (S @ y)

    ell = term.norm_upper_bound() * term.profile.sup_abs(s, t, 65)
    h = solver.step or (solver.step_rule / ell if ell > 0 else t - s)
    res, _, _ = _solve(rhs, np.eye(n2, dtype=complex), float(t), float(s), [float(s)],
                       term.profile.knots(), h, solver)
    return SuperOp(term.support, res[float(s)])
