"""Lattice geometry and interaction-hypergraph combinatorics.

Every constant that enters the locality bounds (range ``a``, neighbour
count ``Z``, volumes, shell counts, path counts) is computed here from a
finite geometry and the set of supports of the nonzero local terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Callable, Hashable, Iterable, Sequence

Site = Hashable
Region = frozenset


def region(sites: Iterable[Site]) -> frozenset:
    return frozenset(sites)


# built-in metrics; module level so geometries pickle across worker processes
def abs_metric(x: int, y: int) -> float:
    return float(abs(x - y))


def l1_metric(x: Sequence[int], y: Sequence[int]) -> float:
    return float(sum(abs(a - b) for a, b in zip(x, y)))


def linf_metric(x: Sequence[int], y: Sequence[int]) -> float:
    return float(max(abs(a - b) for a, b in zip(x, y)))


@dataclass(frozen=True)
class LatticeGeometry:
    sites: tuple
    metric: Callable[[Site, Site], float]
    name: str = "custom"

    def __post_init__(self):
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("duplicate site identifiers")
        object.__setattr__(self, "sites", tuple(sorted(self.sites)))

    @property
    def all_sites(self) -> frozenset:
        return frozenset(self.sites)

    def d(self, x: Site, y: Site) -> float:
        return self.metric(x, y)

    def diameter(self, sites: Iterable[Site]) -> float:
        s = list(sites)
        return max((self.metric(x, y) for x in s for y in s), default=0.0)

    def ball(self, center: Iterable[Site], radius: float) -> frozenset:
        """All sites within ``radius`` of the set ``center``."""
        c = list(center)
        return frozenset(x for x in self.sites if min(self.metric(x, y) for y in c) <= radius)


def chain(n: int) -> LatticeGeometry:
    return LatticeGeometry(tuple(range(n)), abs_metric, name=f"chain{n}")


def grid(shape: Sequence[int], metric: str = "l1") -> LatticeGeometry:
    metrics = {"l1": l1_metric, "linf": linf_metric}
    if metric not in metrics:
        raise ValueError(f"unknown grid metric {metric!r}")
    sites = tuple(product(*(range(n) for n in shape)))
    return LatticeGeometry(sites, metrics[metric], name=f"grid{'x'.join(map(str, shape))}-{metric}")


@dataclass(frozen=True)
class InteractionHypergraph:
    supports: tuple

    def __post_init__(self):
        sups = tuple(sorted({frozenset(z) for z in self.supports}, key=support_key))
        if any(len(z) == 0 for z in sups):
            raise ValueError("empty support")
        object.__setattr__(self, "supports", sups)

    def __len__(self):
        return len(self.supports)

    def __iter__(self):
        return iter(self.supports)


def support_key(z: Iterable[Site]) -> tuple:
    s = sorted(z)
    return (s[0], len(s), tuple(s))


def pair_supports(geom: LatticeGeometry, max_distance: float = 1.0) -> list:
    """All site pairs at metric distance in (0, max_distance]."""
    out = []
    for i, x in enumerate(geom.sites):
        for y in geom.sites[i + 1:]:
            if 0 < geom.d(x, y) <= max_distance:
                out.append(frozenset((x, y)))
    return out


def onsite_supports(geom: LatticeGeometry) -> list:
    return [frozenset((x,)) for x in geom.sites]


def _nonempty(X, what):
    X = frozenset(X)
    if not X:
        raise ValueError(f"{what} must be a nonempty region")
    return X


def distance(geom: LatticeGeometry, X: Iterable[Site], Y: Iterable[Site]) -> float:
    X = _nonempty(X, "X")
    Y = _nonempty(Y, "Y")
    return min(geom.d(x, y) for x in X for y in Y)


def extension(hg: InteractionHypergraph, V: Iterable[Site]) -> frozenset:
    """Union of all supports that intersect ``V``."""
    V = frozenset(V)
    out = set()
    for z in hg.supports:
        if z & V:
            out |= z
    return frozenset(out)


def volume(hg: InteractionHypergraph, V: Iterable[Site]) -> int:
    """Number of supports fully contained in ``V``."""
    V = frozenset(V)
    return sum(1 for z in hg.supports if z <= V)


def supports_within(hg: InteractionHypergraph, V: Iterable[Site]) -> list:
    V = frozenset(V)
    return [z for z in hg.supports if z <= V]


def max_neighbors(hg: InteractionHypergraph) -> int:
    """Largest number of supports overlapping a single support (itself included)."""
    if not hg.supports:
        raise ValueError("empty hypergraph")
    return max(sum(1 for w in hg.supports if w & z) for z in hg.supports)


def max_extension_volume(hg: InteractionHypergraph) -> int:
    """Largest ``volume(extension(Z))`` over supports.

    This is the per-step branching of the containment successor rule used by
    :func:`enumerate_paths`. It equals :func:`max_neighbors` for pair-only
    chains but can exceed it (on-site plus pair terms, 2D grids).
    """
    if not hg.supports:
        raise ValueError("empty hypergraph")
    return max(volume(hg, extension(hg, z)) for z in hg.supports)


def interaction_range(geom: LatticeGeometry, hg: InteractionHypergraph) -> float:
    """Maximal support diameter ``a``."""
    return max((geom.diameter(z) for z in hg.supports), default=0.0)


def shell_terms(geom: LatticeGeometry, hg: InteractionHypergraph, y: Site, n: int,
                a: float | None = None) -> set:
    """Supports ``X`` with ``d(y, X)/a`` in ``[n, n+1)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if a is None:
        a = interaction_range(geom, hg)
    if a <= 0:
        raise ValueError("shells need a positive interaction range")
    out = set()
    for z in hg.supports:
        r = distance(geom, (y,), z) / a
        if n <= r < n + 1:
            out.add(z)
    return out


def lattice_extent(geom: LatticeGeometry, a: float) -> int:
    return int(math.floor(geom.diameter(geom.sites) / a)) + 1


def fit_growth_constants(geom: LatticeGeometry, hg: InteractionHypergraph, kappa: float) -> float:
    """Smallest ``M`` with ``|R_{n,y}| <= M n**kappa`` for every site and every shell n >= 1.

    Exact by enumeration, hence only meaningful up to the lattice extent.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    a = interaction_range(geom, hg)
    if a <= 0:
        # on-site terms only: every shell n >= 1 is empty
        return 0.0
    best = 0.0
    for y in geom.sites:
        counts: dict[int, int] = {}
        for z in hg.supports:
            n = int(math.floor(distance(geom, (y,), z) / a))
            counts[n] = counts.get(n, 0) + 1
        for n, c in counts.items():
            if n >= 1:
                best = max(best, c / n ** kappa)
    return best


def enumerate_paths(hg: InteractionHypergraph, X: Iterable[Site], Y: Iterable[Site], n: int) -> int:
    """Count support sequences ``(Z_1, ..., Z_n)`` from ``X`` that end on ``Y``.

    ``Z_1`` lies inside ``extension(X)``, each ``Z_{i+1}`` inside
    ``extension(Z_i)``, and ``Z_n`` meets ``Y``. Exhaustive memoized count.
    """
    X = frozenset(X)
    Y = frozenset(Y)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return int(bool(X & Y))
    succ = _successors(hg)
    index = {z: i for i, z in enumerate(hg.supports)}

    @lru_cache(maxsize=None)
    def ending(i: int, remaining: int) -> int:
        # paths of `remaining` further steps from support i that end on Y
        if remaining == 0:
            return int(bool(hg.supports[i] & Y))
        return sum(ending(j, remaining - 1) for j in succ[i])

    starts = [index[z] for z in supports_within(hg, extension(hg, X))]
    return sum(ending(i, n - 1) for i in starts)


def _successors(hg: InteractionHypergraph) -> list:
    out = []
    for z in hg.supports:
        ext = extension(hg, z)
        out.append(tuple(j for j, w in enumerate(hg.supports) if w <= ext))
    return out
