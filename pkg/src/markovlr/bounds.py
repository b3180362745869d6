"""Closed-form locality and Trotter error bounds, and the two series lemmas behind them.

All functions are pure. Evaluations outside a bound's range of validity raise
:class:`PreconditionError` instead of returning a number.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence


class PreconditionError(ValueError):
    """A bound was evaluated outside the range where it holds."""


@dataclass(frozen=True)
class BoundParams:
    a: float  # interaction range
    Z_max: int  # max number of overlapping terms
    ell_norm: float  # sup of the local term norms
    M: float = 0.0  # shell-growth prefactor
    kappa: float = 0.0  # shell-growth exponent

    def __post_init__(self):
        for name in ("a", "Z_max", "ell_norm", "M", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def v(self) -> float:
        return lr_velocity(self)

    def as_dict(self) -> dict:
        return asdict(self) | {"v": self.v}


def lr_velocity(p: BoundParams) -> float:
    return math.e * p.Z_max * p.ell_norm


def lr_bound(p: BoundParams, vol_X: int, vol_Y: int, dXY: float, r: float, t: float,
             normK: float, normO: float) -> float:
    """Bound on ``||K_X tau(r, t) O_Y||``."""
    if r > t:
        raise PreconditionError("Lieb-Robinson bound needs r <= t")
    V = min(vol_X, vol_Y) / p.Z_max
    return V * normK * normO * math.exp(p.v * (t - r) - dXY / p.a)


def _check_cone(D, kappa):
    if D != int(D) or D < 1:
        raise PreconditionError(f"D must be a positive integer, got {D}")
    if not D > 2 * kappa + 1:
        raise PreconditionError(f"cone precondition violated: D={D} <= 2*kappa+1={2 * kappa + 1}")


def quasi_locality_bound(p: BoundParams, D: int, r: float, t: float, normO: float) -> float:
    """Bound on ``||tau(r, t) O_Y - tau_{ext V}(r, t) O_Y||`` with ``D = ceil(d(Y, V^c)/a)``.

    ``kappa = 0`` is admitted with ``D > 1``; the tail lemma holds there with the
    same constant.
    """
    _check_cone(D, p.kappa)
    if r > t:
        raise PreconditionError("quasi-locality bound needs r <= t")
    return 2 * p.M / p.Z_max * normO * D ** p.kappa * math.exp(p.v * (t - r) - D)


def slice_trotter_bound(dt: float, Z_max: int, vol: int, ell_norm: float) -> float:
    if dt < 0:
        raise PreconditionError("time step must be nonnegative")
    return dt ** 2 * Z_max * vol * ell_norm ** 2 * math.exp(dt * ell_norm)


@dataclass(frozen=True)
class TrotterBound:
    total: float
    truncation: tuple  # per slice; 0 where the region covers every term
    trotter: tuple  # per slice

    @property
    def truncation_total(self) -> float:
        return math.fsum(self.truncation)

    @property
    def trotter_total(self) -> float:
        return math.fsum(self.trotter)


def trotter_bound_parts(p: BoundParams, times: Sequence[float], D: Sequence, vols: Sequence[int]) -> TrotterBound:
    """Per-slice truncation and splitting errors of a Trotter circuit.

    ``D[n]`` is ``None`` for saturated slices, whose truncated propagator is exact.
    """
    N = len(times) - 1
    if len(D) != N or len(vols) != N:
        raise ValueError("need one D and one volume per slice")
    if any(b < a for a, b in zip(times, times[1:])):
        raise PreconditionError("times must be nondecreasing")
    trunc, trot = [], []
    for n in range(1, N + 1):
        Dn = D[n - 1]
        if Dn is None:
            trunc.append(0.0)
        else:
            try:
                _check_cone(Dn, p.kappa)
            except PreconditionError as exc:
                raise PreconditionError(f"slice {n}: {exc}") from None
            trunc.append(2 * p.M / p.Z_max * Dn ** p.kappa * math.exp(p.v * (times[n] - times[0]) - Dn))
        trot.append(slice_trotter_bound(times[n] - times[n - 1], p.Z_max, vols[n - 1], p.ell_norm))
    return TrotterBound(math.fsum(trunc + trot), tuple(trunc), tuple(trot))


def trotter_total_bound(p: BoundParams, times: Sequence[float], D: Sequence, vols: Sequence[int]) -> float:
    return trotter_bound_parts(p, times, D, vols).total


def partial_exp_sum(x: float, N: int) -> tuple:
    """``(sum_{n>=N} x^n/n!, exp(x e - N))``; the first never exceeds the second."""
    if x < 0 or N < 0:
        raise PreconditionError("need x >= 0 and N >= 0")
    bound = math.exp(x * math.e - N)
    if x == 0:
        return (1.0 if N == 0 else 0.0), bound
    term = math.exp(N * math.log(x) - math.lgamma(N + 1))
    terms = [term]
    n = N
    # summed forward from n = N: no cancellation against exp(x)
    while True:
        term *= x / (n + 1)
        n += 1
        terms.append(term)
        if n > x and term < 1e-18 * terms[0]:
            break
    return math.fsum(terms), bound


def tail_lemma_valid(kappa: float, D) -> bool:
    """Range of the tail lemma: ``D > 2 kappa + 1``, or any ``D >= 1`` when ``kappa = 0``."""
    if D != int(D) or D < 1:
        return False
    return kappa == 0 or D > 2 * kappa + 1


def exp_tail_sum(kappa: float, D: int) -> tuple:
    """``(sum_{n>=D} n^kappa e^-n, 2e D^kappa e^-D)``.

    For ``kappa = 0`` the tail is ``e^-D / (1 - 1/e) <= 2e e^-D`` for every ``D >= 1``.
    """
    if kappa < 0:
        raise PreconditionError("kappa must be nonnegative")
    if not tail_lemma_valid(kappa, D):
        raise PreconditionError(f"tail lemma precondition violated: kappa={kappa}, D={D}")
    terms = []
    n = D
    while True:
        term = n ** kappa * math.exp(-n)
        terms.append(term)
        n += 1
        if term < 1e-18 * math.fsum(terms):
            break
    return math.fsum(terms), 2 * math.e * D ** kappa * math.exp(-D)
