import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from markovlr import algebra
from markovlr.algebra import PAULI, Op, adjoint, cpt_check, local_op
from markovlr.bounds import BoundParams, trotter_bound_parts
from markovlr.lattice import chain
from markovlr.liouvillian import LiouvillianSpec, LocalTerm, TimeProfile, term_norm
from markovlr.presets import commuting_zz, dissipative_ising
from markovlr.propagator import evolve_observable
from markovlr.trotter import (Schedule, apply_circuit, build_circuit, channel_superop, circuit_to_text,
                              hermitian_basis, light_cone_schedule, measure_error, parse_circuit_text)


def constants(spec, M=4, kappa=0.0):
    ell = max(term_norm(t, (0.0, 1.0)) for t in spec.terms)
    return BoundParams(spec.a(), spec.Z(), ell, M, kappa)


def rand_op(rng, region):
    D = 2 ** len(region)
    return Op(tuple(region), rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D)))


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule((0.0, 0.2, 0.1), ({1}, {1, 2}))
    with pytest.raises(ValueError):
        Schedule((0.0, 0.1, 0.2), ({1, 2}, {1}))
    with pytest.raises(ValueError):
        Schedule((0.0, 0.1), ({1}, {1}))


def test_light_cone_schedule():
    spec = dissipative_ising(15)
    s = light_cone_schedule(spec, {7}, 0.3, 0.1, 3, 5.0)
    assert s.regions[0] == spec.geometry.ball({7}, 3)  # v dt < 1
    assert s.times == pytest.approx((0.0, 0.1, 0.2, 0.3))
    assert all(a <= b for a, b in zip(s.regions, s.regions[1:]))
    assert s.cone_distances(spec, {7}) == [4, 5, 5]  # radii 3.5, 4.0, 4.5
    small = dissipative_ising(5)
    sat = light_cone_schedule(small, {2}, 0.2, 0.1, 2, 40.0)
    assert sat.regions[-1] == small.sites
    assert sat.cone_distances(small, {2}) == [None, None]
    assert sat.saturated(small) == [True, True]
    uneven = light_cone_schedule(small, {2}, 0.25, 0.1, 2, 1.0)
    assert uneven.times[-1] == pytest.approx(0.25) and uneven.N == 3
    with pytest.raises(ValueError):
        light_cone_schedule(small, {2}, 0.2, 0.0, 2, 1.0)


def test_build_circuit_counts_and_orderings():
    spec = dissipative_ising(6)
    s = Schedule((0.0, 0.1), ({2},))  # extension {1,2,3}: two pairs and three on-site terms
    c = build_circuit(spec, s)
    assert len(c.channels) == 5 and c.N == 1
    pairs = LiouvillianSpec(chain(6), tuple(t for t in spec.terms if len(t.support) == 2))
    assert len(build_circuit(pairs, Schedule((0.0, 0.1), ({2, 3},))).channels) == 3
    eo = build_circuit(spec, Schedule((0.0, 0.1), (spec.sites,)), "even-odd")
    kinds = [(len(ch.support), min(ch.support) % 2) for ch in eo.channels]
    first_pair = next(i for i, k in enumerate(kinds) if k[0] == 2)
    assert all(k[0] == 1 for k in kinds[:first_pair])
    assert [k[1] for k in kinds[first_pair:]] == sorted(k[1] for k in kinds[first_pair:])
    r1 = build_circuit(spec, s, "seeded-random", seed=4)
    r2 = build_circuit(spec, s, "seeded-random", seed=4)
    assert [ch.support for ch in r1.channels] == [ch.support for ch in r2.channels]
    with pytest.raises(ValueError):
        build_circuit(spec, s, "spiral")
    empty = LiouvillianSpec(chain(3), (LocalTerm((0,), np.zeros((2, 2))),))
    c0 = build_circuit(empty, Schedule((0.0, 0.1), ({1},)))
    assert c0.channels == ()
    O = local_op("X", [1])
    assert apply_circuit(c0, O) is O


def test_identity_and_single_channel():
    spec = dissipative_ising(4)
    s = Schedule((0.0, 0.3), (spec.sites,))
    c = build_circuit(spec, s)
    Id = algebra.identity(spec.sites)
    assert np.allclose(apply_circuit(c, Id).matrix, np.eye(16), atol=1e-12)
    one = LiouvillianSpec(chain(2), (dissipative_ising(2).terms[0],))
    c1 = build_circuit(one, Schedule((0.0, 0.5), ({0, 1},)))
    O = local_op("XY", [0, 1])
    exact = evolve_observable(one, {0, 1}, O, 0.0, 0.5)
    assert np.max(np.abs(apply_circuit(c1, O).matrix - exact.matrix)) < 1e-9


def test_region_violation():
    spec = dissipative_ising(4)
    c = build_circuit(spec, Schedule((0.0, 0.1), (spec.sites,)))
    with pytest.raises(ValueError):
        apply_circuit(c, local_op("Z", [1]))


@settings(max_examples=10)
@given(st.integers(0, 10 ** 6))
def test_disjoint_channels_commute(seed):
    rng = np.random.default_rng(seed)
    onsite = LiouvillianSpec(chain(3), tuple(t for t in dissipative_ising(3).terms if len(t.support) == 1))
    s = Schedule((0.0, 0.2, 0.5), ({0, 1, 2}, {0, 1, 2}))
    O = rand_op(rng, (0, 1, 2))
    a = apply_circuit(build_circuit(onsite, s, "lexicographic"), O)
    b = apply_circuit(build_circuit(onsite, s, "seeded-random", seed=seed), O)
    assert np.allclose(a.matrix, b.matrix, atol=1e-12)


def test_product_order_convention():
    """With two slices and non-commuting channels, slice 2 must act first on the observable."""
    H1 = LocalTerm((0,), PAULI["X"], profile=TimeProfile("piecewise", breakpoints=(0.5,), values=(1.0, 0.0)))
    H2 = LocalTerm((0, 1), np.kron(PAULI["Z"], PAULI["Y"]),
                   profile=TimeProfile("piecewise", breakpoints=(0.5,), values=(0.0, 1.0)))
    spec = LiouvillianSpec(chain(2), (H1, H2))
    s = Schedule((0.0, 0.5, 1.0), ({0, 1}, {0, 1}))
    c = build_circuit(spec, s)
    O = local_op("ZI", [0, 1])
    exact = evolve_observable(spec, {0, 1}, O, 0.0, 1.0)
    # each slice has only one active term, so the circuit is exact under the right order
    assert np.max(np.abs(apply_circuit(c, O).matrix - exact.matrix)) < 1e-9


def test_channels_are_cpt():
    prof = TimeProfile("sinusoid", offset=1.0, amplitude=0.4, omega=3.0)
    spec = dissipative_ising(3, coupling_profile=prof)
    for averaged in (False, True):
        c = build_circuit(spec, Schedule((0.0, 0.3), (spec.sites,)), averaged=averaged)
        for ch in c.channels:
            assert cpt_check(adjoint(channel_superop(ch))).ok


def test_measure_error_exact_cases():
    single = LiouvillianSpec(chain(3), (dissipative_ising(3).terms[1],))
    s = Schedule((0.0, 0.2, 0.4), (single.sites, single.sites))
    m = measure_error(single, s, build_circuit(single, s), {1}, 3, 0)
    assert m.observed_sup <= 1e-8
    comm = commuting_zz(4)
    s = Schedule((0.0, 0.3), (comm.sites,))
    m = measure_error(comm, s, build_circuit(comm, s), {1}, 3, 0)
    assert m.observed_sup <= 1e-8
    with pytest.raises(ValueError):
        measure_error(comm, s, build_circuit(comm, s), {1}, 0, 0)


def test_measure_error_within_bound_and_samples():
    spec = dissipative_ising(5)
    p = constants(spec)
    s = light_cone_schedule(spec, {2}, 0.2, 0.1, 2, p.v)
    for averaged in (False, True):
        c = build_circuit(spec, s, averaged=averaged)
        m = measure_error(spec, s, c, {2}, 4, 1)
        labels = [l for l, _ in m.samples]
        assert labels[:4] == ["I", "X", "Y", "Z"] and len(labels) == 8
        b = trotter_bound_parts(p, s.times, s.cone_distances(spec, {2}), s.volumes(spec))
        assert all(err <= b.total + 1e-7 for _, err in m.samples)
        assert m.observed_sup > 0


def test_hermitian_basis_orthogonal():
    basis = hermitian_basis((3, 5))
    assert len(basis) == 16
    mats = np.array([P.matrix for _, P in basis])
    gram = np.einsum("aij,bij->ab", mats.conj(), mats)
    assert np.allclose(gram, 4 * np.eye(16))


def test_circuit_serialisation_roundtrip():
    spec = dissipative_ising(4, coupling_profile=TimeProfile("quench", before=0.5, after=1.0, at=0.1))
    s = light_cone_schedule(spec, {1}, 0.2, 0.1, 1, 3.0)
    c = build_circuit(spec, s, "even-odd")
    text = circuit_to_text(c)
    assert text == circuit_to_text(build_circuit(spec, s, "even-odd"))
    recs = parse_circuit_text(text)
    assert len(recs) == len(c.channels)
    for rec, ch in zip(recs, c.channels):
        assert rec["slice"] == ch.slice and rec["support"] == ch.support and rec["order"] == ch.order
        assert (rec["t0"], rec["t1"]) == (ch.t0, ch.t1)
        assert rec["generator"] == ch.term.name
    assert recs[-1]["params"]["profile"].startswith("quench")
