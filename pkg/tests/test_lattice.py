import itertools
import math

import pytest
from hypothesis import given, strategies as st

from markovlr.lattice import (InteractionHypergraph, chain, distance, enumerate_paths, extension,
                              fit_growth_constants, grid, interaction_range, max_extension_volume,
                              max_neighbors, onsite_supports, pair_supports, shell_terms, volume)


def pairs(n):
    return InteractionHypergraph(tuple(frozenset({i, i + 1}) for i in range(n - 1)))


def pairs_onsite(n):
    g = chain(n)
    return InteractionHypergraph(tuple(pair_supports(g) + onsite_supports(g)))


@pytest.mark.parametrize("geom", [chain(7), grid((3, 3)), grid((2, 3), "linf")])
def test_metric_axioms(geom):
    for x, y, z in itertools.product(geom.sites, repeat=3):
        assert geom.d(x, x) == 0
        assert geom.d(x, y) == geom.d(y, x)
        assert geom.d(x, z) <= geom.d(x, y) + geom.d(y, z)


def test_distance_examples():
    assert distance(chain(12), {4, 5}, {8, 9}) == 3
    assert distance(chain(12), {3, 7}, {3, 7}) == 0
    assert distance(grid((4, 4)), {(0, 0)}, {(2, 3)}) == 5
    with pytest.raises(ValueError):
        distance(chain(3), set(), {1})


def test_extension_and_volume_examples():
    hg = pairs(10)
    assert extension(hg, {4, 5}) == {3, 4, 5, 6}
    assert extension(InteractionHypergraph((frozenset({0, 1}),)), {5}) == frozenset()
    assert extension(hg, range(10)) == frozenset(range(10))
    assert volume(hg, {3, 4, 5, 6}) == 3
    assert volume(hg, {4}) == 0
    assert volume(hg, range(10)) == 9


def test_max_neighbors_examples():
    assert max_neighbors(pairs(20)) == 3
    assert max_neighbors(pairs_onsite(20)) == 5
    assert max_neighbors(InteractionHypergraph((frozenset({0, 1}),))) == 1
    with pytest.raises(ValueError):
        max_neighbors(InteractionHypergraph(()))


def test_Z_two_ways():
    # overlap count and largest extension volume agree on pair-only chains
    for n in (3, 6, 11):
        assert max_neighbors(pairs(n)) == max_extension_volume(pairs(n))
    # elsewhere the containment rule branches more
    for hg in (pairs_onsite(8), InteractionHypergraph(tuple(pair_supports(grid((3, 3)))))):
        assert max_extension_volume(hg) >= max_neighbors(hg)


@given(st.sets(st.integers(0, 11)), st.sets(st.integers(0, 11)))
def test_extension_and_volume_monotone(a, b):
    hg = pairs_onsite(12)
    V, W = frozenset(a), frozenset(a | b)
    assert extension(hg, V) <= extension(hg, W)
    assert volume(hg, V) <= volume(hg, W)
    for z in hg.supports:
        if z & V:
            assert z <= extension(hg, V)


def test_shell_terms():
    g = chain(20)
    hg = pairs(20)
    assert shell_terms(g, hg, 0, 2) == {frozenset({2, 3})}
    assert shell_terms(g, hg, 0, 40) == set()


@pytest.mark.parametrize("geom", [chain(9), grid((4, 4))])
def test_shells_partition(geom):
    hg = InteractionHypergraph(tuple(pair_supports(geom)))
    a = interaction_range(geom, hg)
    for y in geom.sites:
        far = [z for z in hg.supports if distance(geom, {y}, z) >= a]
        shells = [shell_terms(geom, hg, y, n) for n in range(1, 20)]
        for z in far:
            assert sum(z in s for s in shells) == 1


def test_grid_shells_grow_linearly():
    g = grid((9, 9))
    hg = InteractionHypergraph(tuple(pair_supports(g)))
    counts = [len(shell_terms(g, hg, (4, 4), n)) for n in range(1, 4)]
    assert counts == sorted(counts) and counts[-1] > counts[0]
    assert max(c / n for n, c in enumerate(counts, 1)) <= fit_growth_constants(g, hg, 1.0)


def test_fit_growth_constants():
    assert fit_growth_constants(chain(20), pairs(20), 0.0) == 2
    assert fit_growth_constants(chain(2), pairs(2), 1.0) <= 1
    g = grid((4, 4))
    M = fit_growth_constants(g, InteractionHypergraph(tuple(pair_supports(g))), 1.0)
    assert 0 < M < math.inf


def test_enumerate_paths_examples():
    hg = pairs(8)
    assert enumerate_paths(hg, {0, 1}, {2, 3}, 1) == 1
    assert enumerate_paths(hg, {0}, {0}, 0) == 1
    assert enumerate_paths(hg, {0}, {5}, 0) == 0


def _brute_paths(hg, X, Y, n):
    ext = lambda V: extension(hg, V)
    starts = [z for z in hg.supports if z <= ext(X)]
    count = 0
    for seq in itertools.product(hg.supports, repeat=n):
        if seq[0] not in starts or not seq[-1] & Y:
            continue
        if all(b <= ext(a) for a, b in zip(seq, seq[1:])):
            count += 1
    return count


def test_enumerate_paths_matches_brute_force():
    hg = pairs_onsite(5)
    for X, Y in [({0}, {4}), ({1, 2}, {3}), ({2}, {2})]:
        for n in range(1, 4):
            assert enumerate_paths(hg, X, Y, n) == _brute_paths(hg, frozenset(X), frozenset(Y), n)


@pytest.mark.parametrize("g", [chain(7), chain(6), grid((2, 3)), grid((2, 4)), grid((3, 3))])
def test_path_count_branching_bound(g):
    # the containment rule branches by the extension volume, which bounds every path count
    for hg in (InteractionHypergraph(tuple(pair_supports(g))),
               InteractionHypergraph(tuple(pair_supports(g) + onsite_supports(g)))):
        if len(hg) > 12:
            continue
        Z = max_extension_volume(hg)
        a = interaction_range(g, hg)
        regions = [frozenset({s}) for s in g.sites] + list(hg.supports)
        for X, Y in itertools.product(regions, repeat=2):
            D = math.ceil(distance(g, X, Y) / a - 1e-12)
            cap = min(volume(hg, extension(hg, X)), volume(hg, extension(hg, Y)))
            for n in range(0, 7):
                c = enumerate_paths(hg, X, Y, n)
                if n < D:
                    assert c == 0
                if n >= 1:
                    assert c <= cap * Z ** (n - 1)


def test_overlap_count_understates_grid_branching():
    hg = InteractionHypergraph(tuple(pair_supports(grid((3, 3)))))
    assert max_extension_volume(hg) > max_neighbors(hg)
