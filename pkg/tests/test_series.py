import pytest
from hypothesis import given, settings, strategies as st

from latcap.identities import IDENTITIES, verify_identity
from latcap.series import LaurentSeries, SeriesError, cf_extract, geometric, substitute_monomial
from latcap.systems import series_J, series_L, solve_width4, solve_width5, width5_order_for_L

VARS = ("s", "u")
TRUNC = 5

term = st.tuples(st.integers(0, TRUNC), st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
                 st.integers(-6, 6))
series = st.lists(term, max_size=8).map(lambda ts: LaurentSeries.from_terms(VARS, TRUNC, ts))


def unit_series(rest):
    """1 + x * rest: invertible in the truncated ring."""
    return LaurentSeries.one(VARS, TRUNC) + rest.shift(1).truncate(TRUNC)


@given(series, series)
@settings(max_examples=40, deadline=None)
def test_commutative(a, b):
    assert a * b == b * a
    assert a + b == b + a


@given(series, series, series)
@settings(max_examples=30, deadline=None)
def test_associative_and_distributive(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c


@given(series, series)
@settings(max_examples=30, deadline=None)
def test_division_inverts_multiplication(a, r):
    b = unit_series(r)
    assert (a * b) / b == a
    assert b * b.inverse() == LaurentSeries.one(VARS, TRUNC)


@given(series, series)
@settings(max_examples=30, deadline=None)
def test_coefficient_extraction_is_linear(a, b):
    assert cf_extract(a + b, "s", -1) == cf_extract(a, "s", -1) + cf_extract(b, "s", -1)


def test_big_coefficients_stay_exact():
    a = LaurentSeries.monomial(VARS, 4, coef=2 ** 40, s=1)
    p = a * a * a * a
    assert dict(p.coeff(0)) == {(4, 0): 2 ** 160}


def test_geometric_series():
    m = LaurentSeries.monomial(VARS, 6, 1, s=1)
    g = geometric(m, 6)
    assert [dict(g.coeff(k)) for k in range(7)] == [{(k, 0): 1} for k in range(7)]
    assert g * (LaurentSeries.one(VARS, 6) - m) == LaurentSeries.one(VARS, 6)


def test_non_unit_division_raises():
    two = LaurentSeries.monomial(VARS, 3, coef=2)
    with pytest.raises(SeriesError):
        LaurentSeries.one(VARS, 3) / two


def test_substitution_tracks_truncation():
    a = LaurentSeries.from_terms(VARS, 3, [(1, (1, 0), 1), (2, (0, 1), 3)])
    b = substitute_monomial(a, {"s": {"x": 1, "s": -1}})
    assert b.trunc >= 3
    # x s -> x^2 / s, while 3 x^2 u is unchanged
    assert dict(b.coeff(2)) == {(-1, 0): 1, (0, 1): 3}
    with pytest.raises(SeriesError):
        substitute_monomial(a, {"x": {"x": 0}})


def test_truncation_and_equality():
    a = LaurentSeries.from_terms(VARS, 5, [(0, (0, 0), 1), (5, (1, 1), 2)])
    assert a.truncate(4) == LaurentSeries.one(VARS, 4)
    assert a != LaurentSeries.one(VARS, 5)


# --------------------------------------------------------------------------
# series solutions against exact trapezoid counts

def test_width4_series_solution_counts():
    J = series_J(solve_width4(20))
    assert [J[k] for k in (0, 2, 4, 6)] == [0, 6, 714, 180337]
    assert all(J[k] == 0 for k in (1, 3, 5))


@pytest.mark.parametrize("lam,row", [
    (1, ([0, 0, 2, 79, 1075], [0, 1, 5, 84, 2104])),
    (2, ([0, 1, 5, 84, 2104], [0, 1, 8, 111, 3419])),
])
def test_width5_series_solution_counts(lam, row):
    l1, l2 = series_L(solve_width5(width5_order_for_L(4, lam), lam))
    assert [l1[k] for k in range(5)] == row[0]
    assert [l2[k] for k in range(5)] == row[1]


def test_solver_rejects_bad_arguments():
    with pytest.raises(ValueError):
        solve_width5(10, 3)
    with pytest.raises(ValueError):
        solve_width4(1)


@pytest.mark.parametrize("ident", [k for k, v in IDENTITIES.items() if v[0] == 4])
def test_width4_identities(ident):
    assert verify_identity(ident, 8).is_zero()


@pytest.mark.parametrize("ident", [k for k, v in IDENTITIES.items() if v[0] == 5])
def test_width5_identities(ident):
    assert verify_identity(ident, 6).is_zero()


def test_identity_detects_corruption():
    from latcap.identities import residual
    from latcap.systems import Kernel4
    fam = solve_width4(14)
    K = Kernel4(26)
    bump = LaurentSeries.monomial(fam.vars, fam.trunc, 3, s=1, u=1)
    fam.members["g1"] = fam.members["g1"] + bump
    assert not residual("t4.g1.init", fam, K, 8).is_zero()


def test_unknown_identity():
    with pytest.raises(KeyError):
        verify_identity("t9.zz", 4)
