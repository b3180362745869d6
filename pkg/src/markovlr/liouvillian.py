"""Local Lindblad terms, their Heisenberg-picture action and norms.

A term on support ``Z`` acts as::

    l(t) O = c(t) * ( i[H, O] + sum_k L_k^dag O L_k - 1/2 {L_k^dag L_k, O} )

with a scalar time profile ``c(t)``. Writing ``K = -iH - 1/2 sum L^dag L`` this
is ``c(t) * (K^dag O + O K + sum L^dag O L)``, which is how it is applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import algebra
from .algebra import Op, SuperOp
from .lattice import InteractionHypergraph, LatticeGeometry, extension, max_neighbors, interaction_range

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class TimeProfile:
    """Scalar time dependence ``c(t)`` multiplying a whole local term.

    kinds and parameters::

        constant    value
        piecewise   breakpoints (sorted), values (one more than breakpoints)
        quench      before, after, at
        sinusoid    offset, amplitude, omega, phase  ->  offset + amplitude*sin(omega*t + phase)
    """
    kind: str = "constant"
    value: float = 1.0
    breakpoints: tuple = ()
    values: tuple = ()
    before: float = 0.0
    after: float = 0.0
    at: float = 0.0
    offset: float = 0.0
    amplitude: float = 0.0
    omega: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "piecewise", "quench", "sinusoid"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "piecewise":
            bps = tuple(float(b) for b in self.breakpoints)
            if list(bps) != sorted(bps):
                raise ValueError("piecewise breakpoints must be sorted")
            if len(self.values) != len(bps) + 1:
                raise ValueError("piecewise profile needs len(breakpoints) + 1 values")
            object.__setattr__(self, "breakpoints", bps)
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def constant(cls, value: float = 1.0) -> "TimeProfile":
        return cls("constant", value=value)

    def _pieces(self):
        if self.kind == "quench":
            return (self.at,), (self.before, self.after)
        return self.breakpoints, self.values

    def knots(self) -> tuple:
        """Times at which the profile may jump."""
        if self.kind in ("piecewise", "quench"):
            return self._pieces()[0]
        return ()

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "sinusoid":
            return self.offset + self.amplitude * math.sin(self.omega * t + self.phase)
        bps, vals = self._pieces()
        k = int(np.searchsorted(bps, t, side="right"))
        return vals[k]

    def integral(self, r: float, t: float) -> float:
        """Exact ``int_r^t c(s) ds``."""
        if self.kind == "constant":
            return self.value * (t - r)
        if self.kind == "sinusoid":
            osc = 0.0
            if self.omega != 0:
                osc = -self.amplitude / self.omega * (
                    math.cos(self.omega * t + self.phase) - math.cos(self.omega * r + self.phase))
            else:
                osc = self.amplitude * math.sin(self.phase) * (t - r)
            return self.offset * (t - r) + osc
        bps, vals = self._pieces()
        edges = [r] + [b for b in bps if r < b < t] + [t]
        return sum(self((lo + hi) / 2) * (hi - lo) for lo, hi in zip(edges, edges[1:]))

    def sup_abs(self, t0: float, t1: float, grid: int = 257) -> float:
        """``sup |c|`` over ``[t0, t1]``: grid points plus known extrema and pieces."""
        if self.kind == "constant":
            return abs(self.value)
        if self.kind in ("piecewise", "quench"):
            bps, vals = self._pieces()
            edges = [t0] + [b for b in bps if t0 < b < t1] + [t1]
            if t0 == t1:
                return abs(self(t0))
            return max(abs(self((lo + hi) / 2)) for lo, hi in zip(edges, edges[1:]))
        ts = list(np.linspace(t0, t1, max(grid, 2)))
        if self.omega != 0:
            # stationary points omega*t + phase = pi/2 + k*pi
            lo, hi = sorted((self.omega * t0 + self.phase, self.omega * t1 + self.phase))
            k = math.ceil((lo - math.pi / 2) / math.pi)
            while math.pi / 2 + k * math.pi <= hi:
                ts.append((math.pi / 2 + k * math.pi - self.phase) / self.omega)
                k += 1
        return max(abs(self(s)) for s in ts)

    def nonnegative(self) -> bool:
        if self.kind == "constant":
            return self.value >= 0
        if self.kind == "sinusoid":
            return self.offset >= abs(self.amplitude)
        return min(self._pieces()[1]) >= 0

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant({self.value!r})"
        if self.kind == "piecewise":
            return f"piecewise({list(self.breakpoints)!r},{list(self.values)!r})"
        if self.kind == "quench":
            return f"quench({self.before!r},{self.after!r},{self.at!r})"
        return f"sinusoid({self.offset!r},{self.amplitude!r},{self.omega!r},{self.phase!r})"


@dataclass(frozen=True, eq=False)
class LocalTerm:
    support: tuple
    hamiltonian: np.ndarray
    lindblads: tuple = ()
    profile: TimeProfile = field(default_factory=TimeProfile)
    name: str = "term"
    params: tuple = ()  # (key, value) pairs kept for serialisation

    def __post_init__(self):
        support = tuple(sorted(self.support))
        if not support:
            raise ValueError("term support must be nonempty")
        D = 2 ** len(support)
        H = np.asarray(self.hamiltonian, dtype=complex)
        Ls = tuple(np.asarray(L, dtype=complex) for L in self.lindblads)
        for m in (H,) + Ls:
            if m.shape != (D, D):
                raise ValueError(f"operator shape {m.shape} does not match support {support}")
        if np.max(np.abs(H - H.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ValueError("hamiltonian is not Hermitian")
        if Ls and not self.profile.nonnegative():
            raise ValueError("dissipative terms need a nonnegative profile")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "lindblads", Ls)
        K = -1j * H - 0.5 * sum((L.conj().T @ L for L in Ls), np.zeros((D, D), complex))
        object.__setattr__(self, "_K", K)

    @property
    def sites(self) -> frozenset:
        return frozenset(self.support)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.hamiltonian) and not any(np.any(L) for L in self.lindblads)

    def norm_upper_bound(self) -> float:
        """Cheap ``2||H|| + 2 sum ||L||^2`` bound on the unscaled term norm."""
        return 2 * algebra.inf_norm(self.hamiltonian) + 2 * sum(algebra.inf_norm(L) ** 2 for L in self.lindblads)


@dataclass(frozen=True, eq=False)
class LiouvillianSpec:
    geometry: LatticeGeometry
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        sups = [t.sites for t in terms]
        if len(set(sups)) != len(sups):
            raise ValueError("at most one local term per support")
        for t in terms:
            if not t.sites <= self.geometry.all_sites:
                raise ValueError(f"support {t.support} outside the lattice")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "hypergraph",
                           InteractionHypergraph(tuple(t.sites for t in terms if not t.is_zero)))

    @property
    def sites(self) -> frozenset:
        return self.geometry.all_sites

    def terms_within(self, V: Iterable) -> list:
        V = frozenset(V)
        return [t for t in self.terms if t.sites <= V and not t.is_zero]

    def knots(self) -> tuple:
        return tuple(sorted({k for t in self.terms for k in t.profile.knots()}))

    def a(self) -> float:
        return interaction_range(self.geometry, self.hypergraph)

    def Z(self) -> int:
        return max_neighbors(self.hypergraph)

    def extension(self, V: Iterable) -> frozenset:
        return extension(self.hypergraph, V)


def apply_term(term: LocalTerm, t: float, O: Op, c: float | None = None) -> Op:
    """``l_Z(t) O`` by contraction on the support slots of ``O``."""
    if not term.sites <= O.sites:
        raise ValueError(f"term support {term.support} not inside operator region {O.region}")
    if c is None:
        c = term.profile(t)
    return c * _heisenberg_unscaled(term, O)


def _heisenberg_unscaled(term: LocalTerm, O: Op) -> Op:
    K = term._K
    out = algebra.apply_left(K.conj().T, term.support, O).matrix + algebra.apply_right(O, K, term.support).matrix
    for L in term.lindblads:
        out = out + algebra.apply_left(L.conj().T, term.support, algebra.apply_right(O, L, term.support)).matrix
    return Op(O.region, out, O.dims)


def apply_term_adjoint(term: LocalTerm, t: float, rho: Op, c: float | None = None) -> Op:
    """Schrodinger-picture action ``l_Z(t)^dag rho``."""
    if not term.sites <= rho.sites:
        raise ValueError(f"term support {term.support} not inside state region {rho.region}")
    if c is None:
        c = term.profile(t)
    K = term._K
    out = algebra.apply_left(K, term.support, rho).matrix + algebra.apply_right(rho, K.conj().T, term.support).matrix
    for L in term.lindblads:
        out = out + algebra.apply_left(L, term.support, algebra.apply_right(rho, L.conj().T, term.support)).matrix
    return Op(rho.region, c * out, rho.dims)


def apply_truncated(spec: LiouvillianSpec, V: Iterable, t: float, O: Op) -> Op:
    """``L_V(t) O``: sum over the terms whose support lies inside ``V``."""
    out = np.zeros_like(O.matrix)
    for term in spec.terms_within(V):
        out += apply_term(term, t, O).matrix
    return Op(O.region, out, O.dims)


def term_superop(term: LocalTerm, c: float = 1.0) -> SuperOp:
    """Heisenberg generator of ``c * l_Z`` as a matrix on the support."""
    D = 2 ** len(term.support)
    I = np.eye(D)
    K = term._K
    mat = np.kron(I, K.conj().T) + np.kron(K.T, I)
    for L in term.lindblads:
        mat = mat + np.kron(L.T, L.conj().T)
    return SuperOp(term.support, c * mat)


def dense_generator(spec: LiouvillianSpec, V: Iterable, t: float, region: Sequence) -> SuperOp:
    """Materialised ``L_V(t)`` on ``region`` (small regions only)."""
    region = tuple(sorted(region))
    D = 2 ** len(region)
    mat = np.zeros((D * D, D * D), complex)
    I = np.eye(D)
    for term in spec.terms_within(V):
        if not term.sites <= set(region):
            raise ValueError(f"term support {term.support} not inside region")
        c = term.profile(t)
        K = algebra.embed(Op(term.support, term._K), region).matrix
        mat += c * (np.kron(I, K.conj().T) + np.kron(K.T, I))
        for L in term.lindblads:
            Lf = algebra.embed(Op(term.support, L), region).matrix
            mat += c * np.kron(Lf.T, Lf.conj().T)
    return SuperOp(region, mat)


def _ancilla_superop(S: SuperOp) -> SuperOp:
    """``S (x) id`` on the support doubled by an equally sized ancilla."""
    D = S.D
    n = len(S.dims)
    T4 = S.matrix.reshape(D, D, D, D)  # (j_out, i_out, j_in, i_in) with vec index i + j*D
    I = np.eye(D)
    # joint operator X on (sys, anc): row (i, a), column (j, b); vec index (i*D + a) + (j*D + b)*D^2
    big = np.einsum("JIji,Aa,Bb->JBIAjbia", T4, I, I).reshape(D ** 4, D ** 4)
    return SuperOp(tuple(range(2 * n)), big)


def term_norm(term: LocalTerm, window: tuple = (0.0, 0.0), grid: int = 257, stabilized: bool = False,
              restarts: int = 32, seed: int = 0) -> float:
    """``sup_t ||l_Z(t)||`` over ``window`` in the induced operator norm.

    The profile is a scalar, so this is ``sup|c| * ||l_Z||``. With
    ``stabilized=True`` the norm of ``l_Z (x) id`` on a same-size ancilla is
    returned instead, which bounds the action on operators that extend beyond
    the support.
    """
    if grid < 1:
        raise ValueError("grid must be >= 1")
    if term.is_zero:
        return 0.0
    c = term.profile.sup_abs(window[0], window[1], grid)
    S = term_superop(term)
    if stabilized:
        S = _ancilla_superop(S)
    mode = "exact-small" if S.D == 2 else "estimate"
    return c * algebra.inf_inf_norm(S, mode=mode, restarts=restarts, seed=seed).value


def averaged_term(term: LocalTerm, r: float, t: float) -> LocalTerm:
    """Constant-profile term equal to the time average of ``term`` over ``[r, t]``."""
    if r > t:
        raise ValueError("averaging window needs r <= t")
    avg = term.profile(r) if r == t else term.profile.integral(r, t) / (t - r)
    return replace(term, profile=TimeProfile.constant(avg))
