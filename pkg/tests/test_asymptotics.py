import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from latcap.asymptotics import (
    FitError,
    c3_reference,
    conjecture_bounds,
    entropy,
    entropy_max,
    lz_fit,
    lz_series,
    np_lower_bound,
    solve_rational,
    subexponential_check,
)
from latcap.capacity import closed_forms
from latcap.enumeration import count_rectangle

F1 = [math.comb(2 * n, n) for n in range(1, 12)]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_width_one_fit_is_exact(k):
    fit = lz_fit(F1, k, 1)
    assert fit.A == 4
    assert fit.alpha == Fraction(-1, 2)
    assert fit.c_est == 2
    assert all(fit.ratio(n) == Fraction(F1[n], F1[n - 1]) for n in range(1, 2 * k + 2))


def test_degenerate_fits_are_flagged():
    assert lz_fit(F1, 1).degenerate == 0
    assert lz_fit(F1, 2).degenerate > 0


@given(st.integers(1, 6), st.fractions(-3, 3, max_denominator=4), st.fractions(0, 3, max_denominator=4))
@settings(max_examples=30, deadline=None)
def test_fit_recovers_rational_ratio(A, a, b):
    # f(n+1)/f(n) = A (n + a) / (n + b) with b >= 0 keeps every ratio finite
    if a == b or any(n + a == 0 for n in range(1, 5)):
        return
    vals = [Fraction(1)]
    for n in range(1, 4):
        vals.append(vals[-1] * A * (n + a) / (n + b))
    fit = lz_fit(vals, 1)
    assert fit.A == A
    assert fit.alpha == a - b


def test_fit_needs_enough_values():
    with pytest.raises(ValueError):
        lz_fit(F1[:3], 2)
    with pytest.raises(ValueError):
        lz_fit([1, 0, 2, 3], 1)


def test_solve_rational_inconsistent():
    M = [[Fraction(1), Fraction(1)], [Fraction(2), Fraction(2)]]
    with pytest.raises(FitError):
        solve_rational(M, [Fraction(1), Fraction(3)])
    x, null = solve_rational(M, [Fraction(1), Fraction(2)])
    assert x == [1, 0] and null == [[-1, 1]]


def test_width_two_estimates_close_to_closed_form():
    vals = [count_rectangle(2, n) for n in range(1, 24)]
    c2 = closed_forms()[2]
    fits = lz_series(vals, range(7, 11), 2)
    for k, fit in fits.items():
        assert abs(fit.c_est - c2) < 1e-3, k


def test_subexponential_rows():
    rep = subexponential_check(lz_series(F1, [1, 2, 3]))
    assert all(d == 0 for _, d in rep["rows"])


def test_conjecture_bounds():
    c = closed_forms()
    rows = conjecture_bounds({1: c[1], 2: c[2]})
    assert len(rows) == 1
    assert abs(rows[0][1] - (2 * c[2] - 2)) < 1e-12


def test_c3_reference_between_neighbours():
    c2 = closed_forms()[2]
    ref, spread = c3_reference(c2, "2.10392283469307790885")
    assert c2 < ref < mpmath.mpf("2.10392283469307790885")
    assert spread < 1e-5


def test_np_bound_example():
    count, val = np_lower_bound(5, 4)
    assert count == 10 ** 6 * 70 ** 5
    assert abs(val - math.log(count) / 25) < 1e-14
    with pytest.raises(ValueError):
        np_lower_bound(3, 5)


def test_np_bound_rate_increases():
    vals = [np_lower_bound(n, (4 * n) // 5)[1] for n in (5, 10, 20, 40, 80)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < math.log(5)


def test_entropy_values():
    assert entropy(0.5) == pytest.approx(2 * math.log(2), abs=1e-15)
    assert entropy(0) == 0
    assert entropy(1) == pytest.approx(math.log(4))
    with pytest.raises(ValueError):
        entropy(1.5)


def test_entropy_maximum():
    x, h = entropy_max()
    assert abs(x - 0.8) < 1e-12
    assert abs(h - math.log(5)) < 1e-12


@given(st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=100, deadline=None)
def test_entropy_concave(a, b):
    assert entropy((a + b) / 2) >= (entropy(a) + entropy(b)) / 2 - 1e-12


@given(st.floats(0.01, 0.99))
@settings(max_examples=50, deadline=None)
def test_entropy_below_max(x):
    assert entropy(x) <= math.log(5) + 1e-15
