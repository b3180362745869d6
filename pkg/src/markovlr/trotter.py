"""Light-cone Trotter circuits of local channels and their measured error."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import algebra
from .algebra import Op, SuperOp
from .lattice import distance
from .liouvillian import LiouvillianSpec, LocalTerm, averaged_term
from .propagator import SolverConfig, heisenberg_trajectory, local_propagator

ORDERINGS = ("lexicographic", "even-odd", "seeded-random")


@dataclass(frozen=True)
class Schedule:
    times: tuple
    regions: tuple  # V_1 ... V_N

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        regions = tuple(frozenset(V) for V in self.regions)
        if len(regions) != len(times) - 1:
            raise ValueError("need one region per slice")
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("schedule times must be nondecreasing")
        if any(not a <= b for a, b in zip(regions, regions[1:])):
            raise ValueError("schedule regions must be nested")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "regions", regions)

    @property
    def N(self) -> int:
        return len(self.regions)

    def extended(self, spec: LiouvillianSpec) -> list:
        return [spec.extension(V) for V in self.regions]

    def saturated(self, spec: LiouvillianSpec) -> list:
        """Slices whose extended region holds every term, so truncation is exact."""
        out = []
        for Vb in self.extended(spec):
            out.append(all(t.sites <= Vb for t in spec.terms if not t.is_zero))
        return out

    def cone_distances(self, spec: LiouvillianSpec, Y: Iterable) -> list:
        """``D_n = ceil(d(Y, complement V_n)/a)``, ``None`` where the slice is saturated."""
        Y = frozenset(Y)
        a = spec.a()
        out = []
        for V, sat in zip(self.regions, self.saturated(spec)):
            rest = spec.sites - V
            if sat or not rest:
                out.append(None)
            else:
                out.append(math.ceil(distance(spec.geometry, Y, rest) / a - 1e-12))
        return out

    def volumes(self, spec: LiouvillianSpec) -> list:
        return [len(Vb) for Vb in self.extended(spec)]


def light_cone_schedule(spec: LiouvillianSpec, Y: Iterable, t_total: float, dt: float, D0: int,
                        v: float, t0: float = 0.0) -> Schedule:
    """Uniform slices of width ``dt``; ``V_n`` is the ball of radius ``a (D0 + v n dt)`` around ``Y``.

    A last short slice is added when ``dt`` does not divide ``t_total``. The
    cone distances ``D_n`` are recomputed from the regions actually built.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if D0 < 1:
        raise ValueError("D0 must be >= 1")
    Y = frozenset(Y)
    if not Y <= spec.sites:
        raise ValueError("Y must lie in the lattice")
    N = max(1, math.ceil(t_total / dt - 1e-9))
    times = [t0 + min(n * dt, t_total) for n in range(N + 1)]
    a = spec.a()
    regions = []
    for n in range(1, N + 1):
        radius = a * (D0 + v * (times[n] - t0))
        regions.append(spec.geometry.ball(Y, radius) | Y)
    return Schedule(tuple(times), tuple(regions))


@dataclass(frozen=True)
class Channel:
    slice: int
    term: LocalTerm
    t0: float
    t1: float
    order: int

    @property
    def support(self) -> tuple:
        return self.term.support


@dataclass(frozen=True)
class TrotterCircuit:
    """Channels in product order: slice 1 first, and within a slice the stated ordering.

    As a map on observables the rightmost factor acts first, so :func:`apply_circuit`
    walks the list backwards.
    """
    channels: tuple
    ordering: str = "lexicographic"
    averaged: bool = False
    N: int = 0

    def slice(self, n: int) -> list:
        return [c for c in self.channels if c.slice == n]

    @property
    def sites(self) -> frozenset:
        return frozenset().union(*(c.term.sites for c in self.channels))


def _order_terms(terms: list, ordering: str, rng: np.random.Generator) -> list:
    key = lambda t: (min(t.support), t.support)
    terms = sorted(terms, key=key)
    if ordering == "lexicographic":
        return terms
    if ordering == "even-odd":
        # on-site terms, then bonds starting on even sites, then odd ones; needs integer sites
        def parity(t):
            if len(t.support) == 1:
                return 0
            s0 = min(t.support)
            if not isinstance(s0, (int, np.integer)):
                raise ValueError("even-odd ordering needs a chain")
            return 1 + s0 % 2
        return sorted(terms, key=lambda t: (parity(t), key(t)))
    if ordering == "seeded-random":
        return [terms[i] for i in rng.permutation(len(terms))]
    raise ValueError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")


def build_circuit(spec: LiouvillianSpec, sched: Schedule, ordering: str = "lexicographic",
                  averaged: bool = False, seed: int = 0) -> TrotterCircuit:
    rng = np.random.default_rng(seed)
    channels = []
    for n, Vb in enumerate(sched.extended(spec), start=1):
        r, t = sched.times[n - 1], sched.times[n]
        terms = _order_terms(spec.terms_within(Vb), ordering, rng)
        for k, term in enumerate(terms):
            channels.append(Channel(n, averaged_term(term, r, t) if averaged else term, r, t, k))
    return TrotterCircuit(tuple(channels), ordering, averaged, sched.N)


def channel_superop(ch: Channel, solver: SolverConfig = SolverConfig(), method: str = "expm") -> SuperOp:
    """``tau_Z(t_{n-1}, t_n)`` on the support.

    The profile is a scalar, so ``expm`` of the integrated generator is exact;
    ``integrate`` runs the RK4 reference solver instead.
    """
    return local_propagator(ch.term, ch.t0, ch.t1, solver, method=method)


def apply_circuit(circuit: TrotterCircuit, O: Op, solver: SolverConfig = SolverConfig(),
                  method: str = "expm") -> Op:
    missing = circuit.sites - O.sites
    if missing:
        raise ValueError(f"operator region misses channel sites {sorted(missing)}")
    cache: dict = {}
    for ch in reversed(circuit.channels):
        key = (ch.term, ch.t0, ch.t1)
        if key not in cache:
            cache[key] = channel_superop(ch, solver, method).matrix
        O = algebra.apply_superop_local(cache[key], ch.support, O)
    return O


def hermitian_basis(Y: Sequence) -> list:
    """Pauli strings on ``Y``; orthogonal under the trace inner product, each of norm 1."""
    Y = tuple(sorted(Y))
    labels = [""]
    for _ in Y:
        labels = [l + p for l in labels for p in "IXYZ"]
    return [(l, Op(Y, algebra.pauli_string(l))) for l in labels]


def _random_samples(Y: tuple, count: int, rng: np.random.Generator) -> list:
    D = 2 ** len(Y)
    out = []
    for k in range(count):
        if k % 2 == 0:
            A = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
            out.append((f"hermitian_{k}", Op(Y, 0.5 * (A + A.conj().T))))
        else:
            u = rng.normal(size=D) + 1j * rng.normal(size=D)
            w = rng.normal(size=D) + 1j * rng.normal(size=D)
            out.append((f"rank_one_{k}", Op(Y, np.outer(u, w.conj()))))
    return out


@dataclass
class ErrorMeasurement:
    observed_sup: float
    samples: list  # (label, error) pairs
    comparator_region: tuple
    solver_error: float
    comparator_truncation_bound: float = 0.0  # nonzero only when V_N-bar misses terms
    extras: dict = field(default_factory=dict)


def measure_error(spec: LiouvillianSpec, sched: Schedule, circuit: TrotterCircuit, Y: Iterable,
                  sample_count: int = 4, seed: int = 0, solver: SolverConfig = SolverConfig(),
                  comparator: dict | None = None) -> ErrorMeasurement:
    """Sampled lower bound on ``||tau(t_0, t_N) - tau_circuit||_Y``.

    Both maps are linear, so they are applied once to each Pauli string on ``Y``
    and every sample is assembled from its Pauli expansion. ``comparator`` may
    carry previously evolved Pauli strings keyed by label (same spec, times and
    region), which lets a dt sweep reuse the reference evolution.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    Y = tuple(sorted(frozenset(Y)))
    rng = np.random.default_rng(seed)
    t0, tN = sched.times[0], sched.times[-1]
    Vb = spec.extension(sched.regions[-1]) | frozenset(Y)
    region = tuple(sorted(Vb | circuit.sites))
    basis = hermitian_basis(Y)
    comparator = {} if comparator is None else comparator
    solver_error = comparator.get("_error", 0.0)
    diffs = {}
    for label, P in basis:
        if set(label) == {"I"}:
            diffs[label] = np.zeros((2 ** len(region),) * 2, complex)
            continue
        if label not in comparator:
            traj = heisenberg_trajectory(spec, Vb, P, tN, [t0], solver)
            comparator[label] = traj.ops[t0]
            solver_error = max(solver_error, traj.error)
        exact = algebra.embed(comparator[label], region).matrix
        approx = apply_circuit(circuit, algebra.embed(P, region), solver).matrix
        diffs[label] = exact - approx
    comparator["_error"] = solver_error
    D = 2 ** len(Y)
    samples = []
    for label, O in basis + _random_samples(Y, sample_count, rng):
        coeffs = {l: np.trace(P.matrix.conj().T @ O.matrix) / D for l, P in basis}
        diff = sum(c * diffs[l] for l, c in coeffs.items() if c != 0)
        err = 0.0 if np.isscalar(diff) else algebra.inf_norm(diff) / algebra.inf_norm(O.matrix)
        samples.append((label, float(err)))
    return ErrorMeasurement(max(e for _, e in samples), samples, region, solver_error)


def circuit_to_text(circuit: TrotterCircuit) -> str:
    """One tab-separated line per channel in product order."""
    lines = ["# slice\tsupport\tt0\tt1\tgenerator\tparams\torder"]
    for ch in circuit.channels:
        params = dict(ch.term.params)
        params["profile"] = ch.term.profile.describe()
        lines.append("\t".join([
            str(ch.slice), json.dumps(list(ch.support)), repr(ch.t0), repr(ch.t1),
            ch.term.name or "term", json.dumps(params, sort_keys=True), str(ch.order)]))
    return "\n".join(lines) + "\n"


def parse_circuit_text(text: str) -> list:
    records = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        sl, sup, t0, t1, name, params, order = line.split("\t")
        records.append({"slice": int(sl), "support": tuple(json.loads(sup)), "t0": float(t0),
                        "t1": float(t1), "generator": name, "params": json.loads(params),
                        "order": int(order)})
    return records
