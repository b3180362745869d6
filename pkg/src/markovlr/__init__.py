"""Heisenberg-picture Lindblad dynamics on lattices, with locality and Trotter bound checks."""
from .bounds import BoundParams, PreconditionError
from .lattice import LatticeGeometry, InteractionHypergraph, chain, grid
from .liouvillian import LiouvillianSpec, LocalTerm, TimeProfile
from .propagator import SolverConfig, evolve_observable, propagate_state
from .presets import PRESETS

__version__ = "0.1.0"
