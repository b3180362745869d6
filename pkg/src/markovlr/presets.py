"""Built-in lattice models."""
from __future__ import annotations

import numpy as np

from .algebra import PAULI, pauli_string
from .lattice import LatticeGeometry, chain, onsite_supports, pair_supports
from .liouvillian import LiouvillianSpec, LocalTerm, TimeProfile


def dissipative_ising(geom: LatticeGeometry | int, J: float = 1.0, h: float = 1.0, gamma: float = 0.5,
                      coupling_profile: TimeProfile | None = None) -> LiouvillianSpec:
    """Transverse-field Ising model with on-site amplitude damping.

    Pair terms ``J Z Z`` on nearest neighbours carry ``coupling_profile``; the
    on-site terms combine ``h X`` with the jump operator ``sqrt(gamma) sigma^-``.
    """
    if isinstance(geom, int):
        geom = chain(geom)
    prof = coupling_profile or TimeProfile.constant(1.0)
    terms = []
    for z in pair_supports(geom):
        terms.append(LocalTerm(tuple(sorted(z)), J * pauli_string("ZZ"), (), prof,
                               "ising_zz", (("J", J),)))
    lind = (np.sqrt(gamma) * PAULI["-"],) if gamma > 0 else ()
    for z in onsite_supports(geom):
        terms.append(LocalTerm(tuple(z), h * PAULI["X"], lind, TimeProfile.constant(1.0),
                               "field_damping", (("h", h), ("gamma", gamma))))
    return LiouvillianSpec(geom, tuple(terms))


def xy_dephasing(geom: LatticeGeometry | int, J: float = 1.0, gamma: float = 0.2,
                 coupling_profile: TimeProfile | None = None) -> LiouvillianSpec:
    """XY chain ``J/2 (XX + YY)`` with on-site dephasing ``sqrt(gamma) Z``."""
    if isinstance(geom, int):
        geom = chain(geom)
    prof = coupling_profile or TimeProfile.constant(1.0)
    hop = 0.5 * J * (pauli_string("XX") + pauli_string("YY"))
    terms = [LocalTerm(tuple(sorted(z)), hop, (), prof, "xy_hop", (("J", J),)) for z in pair_supports(geom)]
    if gamma > 0:
        for z in onsite_supports(geom):
            terms.append(LocalTerm(tuple(z), np.zeros((2, 2)), (np.sqrt(gamma) * PAULI["Z"],),
                                   TimeProfile.constant(1.0), "dephasing", (("gamma", gamma),)))
    return LiouvillianSpec(geom, tuple(terms))


def commuting_zz(geom: LatticeGeometry | int, J: float = 1.0, gamma: float = 0.3) -> LiouvillianSpec:
    """Classical ``Z Z`` couplings plus ``Z`` dephasing: every pair of terms commutes."""
    if isinstance(geom, int):
        geom = chain(geom)
    terms = [LocalTerm(tuple(sorted(z)), J * pauli_string("ZZ"), (), TimeProfile.constant(1.0),
                       "ising_zz", (("J", J),)) for z in pair_supports(geom)]
    for z in onsite_supports(geom):
        terms.append(LocalTerm(tuple(z), np.zeros((2, 2)), (np.sqrt(gamma) * PAULI["Z"],),
                               TimeProfile.constant(1.0), "dephasing", (("gamma", gamma),)))
    return LiouvillianSpec(geom, tuple(terms))


PRESETS = {
    "dissipative_ising": dissipative_ising,
    "xy_dephasing": xy_dephasing,
    "commuting_zz": commuting_zz,
}
