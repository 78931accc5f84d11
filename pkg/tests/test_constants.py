import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_solutions, numeric_is_zero
from rsmoments.constants import (
    DELTA_K,
    B_k,
    SeriesValue,
    beta,
    phase_cos,
    s_kl,
    second_moment_constant,
    solution_tuples,
    stated_denominator,
    theorem_coefficient,
    theorem_constants,
    theorem_exponent,
    theorem_prediction,
)


def _weights(ct):
    return ct.weights()


def test_series_value_validation():
    with pytest.raises(ValueError):
        SeriesValue(value=1.0, N=1, tail_estimate=-1.0, term_count=1)
    with pytest.raises(ValueError):
        SeriesValue(value=1.0, N=1, tail_estimate=0.0, term_count=-1)


def test_phases_are_exact():
    assert phase_cos(4, 2) == 1.0
    assert phase_cos(4, 1) == 0.0 and phase_cos(4, 3) == 0.0
    assert phase_cos(3, 1) == phase_cos(3, 2) == math.sqrt(0.5)
    assert phase_cos(5, 1) == -math.sqrt(0.5)
    for k in (3, 4, 5):
        for l in range(1, k):
            assert phase_cos(k, l) == pytest.approx(math.cos(math.pi * (k - 2 * l) / 4), abs=1e-15)
    # a sign vector with l plus signs among k has beta = 2l - k
    for k in (3, 4, 5):
        for i in itertools.product((0, 1), repeat=k - 1):
            l = 1 + i.count(0)
            assert beta(i) == 2 * l - k


def test_s32_at_16_is_single_solution(table_small):
    brute = [ns for ns in itertools.product(range(1, 17), repeat=3)
             if numeric_is_zero(ns, (0, 1))]
    assert brute == [(1, 1, 16)]
    c = table_small.c
    expected = c[1] ** 2 * c[16] / 16**0.875
    assert s_kl(3, 2, 16, table_small).value == pytest.approx(expected, rel=1e-15)
    assert s_kl(3, 1, 16, table_small).value == pytest.approx(expected, rel=1e-15)


def test_b3_and_b4_phase_structure(table_small):
    parts = {}
    B3 = B_k(3, 16, table_small, parts=parts)
    c = table_small.c
    s = c[1] ** 2 * c[16] / 16**0.875
    # C(2,1) cos(pi/4) s_{3;1} + C(2,2) cos(-pi/4) s_{3;2} = (3 sqrt2 / 2) s_{3;1}
    assert B3.value == pytest.approx(3 * math.sqrt(2) / 2 * s, rel=1e-14)
    parts = {}
    B4 = B_k(4, 300, table_small, parts=parts)
    assert B4.value == pytest.approx(3 * parts[2].value, rel=1e-15)


def test_non_diagonal_k4_solution_present():
    assert (1, 81, 16, 16) in solution_tuples(4, 2, 81)


@pytest.mark.parametrize("k,l", [(3, 1), (3, 2), (4, 1), (4, 2), (4, 3)])
def test_kernel_enumeration_equals_naive(k, l):
    assert solution_tuples(k, l, 200) == naive_solutions(k, l, 200)


@pytest.mark.parametrize("k,l,N", [(3, 1, 200), (3, 2, 200), (4, 2, 120), (4, 1, 200),
                                   (5, 2, 40), (5, 1, 60)])
def test_s_kl_equals_sum_over_solutions(table_small, k, l, N):
    w = _weights(table_small)
    sols = solution_tuples(k, l, N) if k < 5 else naive_solutions(k, l, N)
    expected = math.fsum(math.prod(w[n] for n in ns) for ns in sols)
    got = s_kl(k, l, N, table_small, tail=False)
    assert got.value == pytest.approx(expected, rel=1e-13)


def test_s_kl_symmetry_and_monotonicity(table_small):
    for k in (3, 4, 5):
        for l in range(1, k):
            assert s_kl(k, l, 300, table_small).value == pytest.approx(
                s_kl(k, k - l, 300, table_small).value, rel=1e-14)
    prev = 0.0
    for N in (1, 16, 81, 256, 625, 1296, 2000):
        v = s_kl(4, 2, N, table_small, tail=False).value
        assert v >= prev
        prev = v


def test_s_kl_precondition(table_small):
    with pytest.raises(ValueError):
        s_kl(3, 1, table_small.N + 1, table_small)
    with pytest.raises(ValueError):
        s_kl(3, 3, 10, table_small)


def test_b4_diagonal_lower_bound(table_small):
    N = 2000
    w = _weights(table_small)[1 : N + 1]
    S = math.fsum(w**2)
    assert B_k(4, N, table_small).value / 3 >= 2 * S**2 - math.fsum(w**4)


def test_second_moment_constant_examples(table_small):
    assert second_moment_constant(1, table_small).value == 1.0
    assert second_moment_constant(2, table_small).value == pytest.approx(
        1 + (9 / 32) ** 2 * 2**-1.75, rel=1e-15)
    vals = [second_moment_constant(N, table_small).value for N in (1, 10, 100, 1000, 2000)]
    assert vals == sorted(vals)
    assert second_moment_constant(2000, table_small).tail_estimate > 0


def test_theorem_constants():
    assert [theorem_exponent(k) for k in (3, 4, 5)] == [35 / 8, 11 / 2, 53 / 8]
    assert [stated_denominator(k) for k in (3, 4, 5)] == [1120, 11264, 108544]
    tc = theorem_constants(4, 2.0)
    assert tc.coefficient == pytest.approx(2.0 / (11264 * math.pi**8), rel=1e-15)
    assert tc.delta_k == DELTA_K[4]
    assert DELTA_K[3] * 62 == 3 and DELTA_K[5] * 680 == 1
    with pytest.raises(ValueError):
        theorem_constants(6, 1.0)


def test_prediction_normalizations():
    B, T = 0.7, 1234.5
    e = 35 / 8
    stated = B / (35 * 2**5 * math.pi**6)
    assert theorem_coefficient(3, B) == pytest.approx(stated, rel=1e-15)
    assert theorem_prediction(3, B, T, 2 * T) == pytest.approx(
        stated * (2**e - 1) * T**e, rel=1e-13)
    # the [0, T] integral of the main term carries the stated coefficient
    for k in (3, 4, 5):
        lim = theorem_prediction(k, B, 1e-300, T)
        assert lim == pytest.approx(theorem_coefficient(k, B) * T ** theorem_exponent(k), rel=1e-13)
    with pytest.raises(ValueError):
        theorem_prediction(3, B, 2.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(k=st.sampled_from([3, 4, 5]), T=st.floats(1.0, 1e6), r=st.floats(1.01, 10.0),
       s=st.floats(0.1, 10.0))
def test_prediction_properties(k, T, r, s):
    B = 1.3
    p = theorem_prediction(k, B, T, r * T)
    assert theorem_prediction(k, B, s * T, s * r * T) == pytest.approx(
        s ** theorem_exponent(k) * p, rel=1e-11)
    assert theorem_prediction(k, B, T, r * T) + theorem_prediction(k, B, r * T, r * r * T) == \
        pytest.approx(theorem_prediction(k, B, T, r * r * T), rel=1e-11)
    assert theorem_prediction(k, B, T, r * T * 1.01) > p
    assert theorem_prediction(k, B, 2 * T, 4 * T) == pytest.approx(
        2 ** theorem_exponent(k) * theorem_prediction(k, B, T, 2 * T), rel=1e-12)


def test_tail_estimates_nonnegative(table_small):
    for k in (3, 4, 5):
        B = B_k(k, 2000, table_small)
        assert B.tail_estimate >= 0
        assert np.isfinite(B.value)
