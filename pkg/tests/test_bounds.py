import math

import mpmath
import pytest
from hypothesis import given, strategies as st

from markovlr.bounds import (BoundParams, PreconditionError, exp_tail_sum, lr_bound, lr_velocity,
                             partial_exp_sum, quasi_locality_bound, slice_trotter_bound, tail_lemma_valid, trotter_bound_parts,
                             trotter_total_bound)

mpmath.mp.dps = 40


def tail_oracle(x, N):
    """sum_{n>=N} x^n/n! = e^x P(N, x), regularized lower incomplete gamma."""
    if N == 0:
        return mpmath.e ** x
    return mpmath.e ** x * mpmath.gammainc(N, 0, x, regularized=True)


def exp_tail_oracle(kappa, D):
    """sum_{n>=D} n^kappa e^-n through the Lerch transcendent."""
    x = mpmath.e ** -1
    return x ** D * mpmath.lerchphi(x, -kappa, D)


def test_velocity():
    assert lr_velocity(BoundParams(1, 3, 1.0)) == pytest.approx(8.154845, abs=1e-6)
    assert lr_velocity(BoundParams(1, 3, 0.0)) == 0
    assert BoundParams(1, 5, 2.0).v == pytest.approx(10 * math.e)
    with pytest.raises(ValueError):
        BoundParams(1, 3, -1.0)


def test_lr_bound():
    p = BoundParams(1, 3, 1.0)
    assert lr_bound(BoundParams(1, 1, 1.0), 1, 1, 0, 0.5, 0.5, 1, 1) == 1
    assert lr_bound(p, 2, 2, 4, 0.0, 0.2, 1, 1) == pytest.approx(0.06238090805790572, rel=1e-12)
    assert lr_bound(p, 2, 2, 5, 0.0, 0.2, 1, 1) / lr_bound(p, 2, 2, 4, 0.0, 0.2, 1, 1) == pytest.approx(math.exp(-1))
    with pytest.raises(PreconditionError):
        lr_bound(p, 2, 2, 4, 0.3, 0.2, 1, 1)


def test_quasi_locality_bound():
    p = BoundParams(1, 3, 1.0, M=2, kappa=0)
    # v (t - r) = 1
    assert quasi_locality_bound(p, 5, 0, 1 / p.v, 1) == pytest.approx(0.02442085185164557, rel=1e-12)
    with pytest.raises(PreconditionError, match="precondition"):
        quasi_locality_bound(p, 1, 0, 1, 1)
    with pytest.raises(PreconditionError):
        quasi_locality_bound(BoundParams(1, 3, 1.0, 2, 1.5), 4, 0, 1, 1)
    vals = [quasi_locality_bound(BoundParams(1, 3, 1.0, 2, 1.0), D, 0, 0, 1) for D in range(4, 30)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


@given(st.floats(0, 2), st.floats(0, 2), st.integers(2, 30), st.sampled_from([0.0, 0.5, 1.0]))
def test_bounds_monotone_in_time(d1, d2, D, kappa):
    p = BoundParams(1, 5, 1.3, 2, kappa)
    lo, hi = sorted((d1, d2))
    assert lr_bound(p, 3, 5, 4, 0, lo, 2, 1) <= lr_bound(p, 3, 5, 4, 0, hi, 2, 1)
    if D > 2 * kappa + 1:
        assert quasi_locality_bound(p, D, 0, lo, 1) <= quasi_locality_bound(p, D, 0, hi, 1)


def test_slice_bound():
    assert slice_trotter_bound(0, 3, 5, 1) == 0
    # dt^2 Z vol l^2 e^{dt l} = 0.15 e^{0.1}
    assert slice_trotter_bound(0.1, 3, 5, 1) == pytest.approx(0.1657756377113471, rel=1e-12)
    ratio = slice_trotter_bound(2e-6, 3, 5, 1) / slice_trotter_bound(1e-6, 3, 5, 1)
    assert ratio == pytest.approx(4, rel=1e-5)


def test_trotter_total_bound():
    p = BoundParams(1, 5, 1.0, M=2, kappa=0)
    times = [0.1 * n for n in range(6)]
    D = [4 + n for n in range(1, 6)]
    vols = [3 + 2 * n for n in range(1, 6)]
    assert trotter_total_bound(p, times, D, vols) == pytest.approx(2.730599453014536, rel=1e-12)
    parts = trotter_bound_parts(p, times, D, vols)
    assert parts.total == pytest.approx(parts.truncation_total + parts.trotter_total, rel=1e-15)
    one = trotter_total_bound(p, [0, 0.2], [5], [7])
    assert one == pytest.approx(quasi_locality_bound(p, 5, 0, 0.2, 1) + slice_trotter_bound(0.2, 5, 7, 1.0))
    # finer slices at fixed D: truncation part fixed, splitting part linear in dt
    for N in (10, 20, 40):
        pp = trotter_bound_parts(p, [0.4 * n / N for n in range(N + 1)], [6] * N, [7] * N)
        trunc_end = 2 * p.M / p.Z_max * math.exp(p.v * 0.4 - 6)
        assert pp.truncation[-1] == pytest.approx(trunc_end)
        assert pp.trotter_total / (0.4 / N) == pytest.approx(0.4 * 5 * 7 * math.exp(0.4 / N), rel=1e-9)
    with pytest.raises(PreconditionError, match="slice 2"):
        trotter_total_bound(p, [0, 0.1, 0.2], [3, 1], [5, 5])
    saturated = trotter_bound_parts(p, [0, 0.1], [None], [8])
    assert saturated.truncation == (0.0,)


def test_partial_exp_sum_examples():
    assert partial_exp_sum(0, 0) == (1.0, 1.0)
    exact, bound = partial_exp_sum(1, 2)
    assert exact == pytest.approx(math.e - 2, rel=1e-14)
    assert bound == pytest.approx(2.050906372692501, rel=1e-14)
    exact, bound = partial_exp_sum(1, 10)
    assert exact == pytest.approx(3.028858529955014e-07, rel=1e-12)
    assert bound == pytest.approx(6.880024413654348e-04, rel=1e-12)


def test_partial_exp_sum_grid_against_oracle():
    for i in range(51):
        x = i / 10
        for N in range(31):
            exact, bound = partial_exp_sum(x, N)
            assert exact <= bound
            ref = float(tail_oracle(mpmath.mpf(i) / 10, N))
            assert exact == pytest.approx(ref, rel=1e-12, abs=0 if ref else 1e-300)


def test_exp_tail_examples():
    exact, bound = exp_tail_sum(1, 4)
    x = math.exp(-1)
    assert exact == pytest.approx(x ** 4 * (4 * (1 - x) + x) / (1 - x) ** 2, rel=1e-13)
    assert bound == pytest.approx(8 * math.exp(-3), rel=1e-14)
    exact, bound = exp_tail_sum(0, 1)
    assert exact == pytest.approx(x / (1 - x), rel=1e-14)
    assert bound == pytest.approx(2.0)
    with pytest.raises(PreconditionError):
        exp_tail_sum(1, 3)
    with pytest.raises(PreconditionError):
        exp_tail_sum(0.5, 2)
    with pytest.raises(PreconditionError):
        exp_tail_sum(0, 0)


def test_exp_tail_grid_against_oracle():
    for kappa in (0, 0.5, 1, 2):
        for D in range(1, 41):
            if not tail_lemma_valid(kappa, D):
                continue
            exact, bound = exp_tail_sum(kappa, D)
            assert exact <= bound
            assert exact == pytest.approx(float(exp_tail_oracle(mpmath.mpf(kappa), D)), rel=1e-12)
