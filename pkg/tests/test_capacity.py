import math

import mpmath
import numpy as np
import pytest

from latcap.capacity import (
    BETA4_PLUS,
    CapacityResult,
    RootError,
    _first_crossing,
    beta_from_series,
    capacity_from_beta,
    closed_forms,
    common_digits,
    convergence_study,
    find_beta4,
    find_beta5,
)
from latcap.enumeration import count_rectangle, trapezoid4_series
from latcap.quadrature import make_grid
from latcap.systems import series_J, solve_width4

C4_REF = "2.10392283469307790885"


def test_capacity_from_beta():
    assert capacity_from_beta(0.25, 4) == 1
    assert capacity_from_beta(mpmath.mpf(2) ** -5, 5) == 2
    with pytest.raises(ValueError):
        capacity_from_beta(0, 4)


def test_closed_forms():
    c = closed_forms()
    assert c[1] == 2
    with mpmath.workdps(40):
        assert abs(c[2] - mpmath.log((611 + mpmath.sqrt(73)) / 36, 2) / 2) < mpmath.mpf(10) ** -35


def test_width_one_growth_matches_closed_form():
    # f(1,n)^(1/n) -> 4 = 2^c_1
    n = 400
    assert abs(math.log2(count_rectangle(1, n)) / n - 2) < 0.02


def test_width_two_growth_approaches_closed_form():
    c2 = float(closed_forms()[2])
    est = [math.log2(count_rectangle(2, n + 1) / count_rectangle(2, n)) / 2 for n in (10, 20, 40)]
    # the ratio estimates approach c_2 monotonically from below
    assert est[0] < est[1] < est[2] < c2
    assert c2 - est[2] < 0.02


def test_common_digits():
    # digits of agreement measured by the relative difference
    assert common_digits("2.1039228346", "2.1039228399") == 8
    assert common_digits(1, 1) == 30
    assert common_digits(1, 0) == 0
    # decimal strings beyond double precision are not rounded before comparing
    assert common_digits("2.10392283469307787", "2.10392283469307790885") == 16
    assert common_digits(np.longdouble("2.10392283469307787"), "2.10392283469307790885") == 16


def test_result_bracket_order():
    with pytest.raises(ValueError):
        CapacityResult(4, (0.2, 0.1), 1, 0, "test")


def test_first_crossing_skips_past_pole():
    # J(y) = y / (0.3 - y) reaches 1 at y = 0.15 and blows up at 0.3
    J = lambda y: y / (0.3 - y) if y < 0.3 else -1.0
    fun = lambda y: (J(y) - 1, J(y))
    (lo, hi), _ = _first_crossing(fun, 0.01, 0.5)
    assert lo < 0.15 <= hi


def test_first_crossing_without_root():
    with pytest.raises(RootError):
        _first_crossing(lambda y: (-1.0, y), 0.0, 1.0)


def test_series_root_is_lower_bound():
    short = beta_from_series(series_J(solve_width4(20)))
    res = beta_from_series(series_J(solve_width4(40)))
    # more terms push the lower bound up toward c_4
    assert short.c < res.c < mpmath.mpf(C4_REF)
    assert res.method == "series"


def test_series_root_from_enumeration():
    counts = trapezoid4_series(6, True)
    res = beta_from_series(counts)
    ref = beta_from_series(series_J(solve_width4(20)))
    assert res.c == ref.c


def test_width4_root_on_small_grid():
    res = find_beta4(make_grid(16))
    assert res.beta[0] < res.beta[1] < BETA4_PLUS
    assert common_digits(res.c, C4_REF) >= 5
    assert res.provenance["n"] == 16


def test_width4_convergence_rows():
    rows = convergence_study(4, [16, 24])
    assert [r["n"] for r in rows] == [16, 24]
    assert rows[1]["stable_digits"] >= 5
    assert common_digits(rows[1]["c"], C4_REF) > common_digits(rows[0]["c"], C4_REF)


def test_width5_coarse_grid_has_no_root():
    with pytest.raises(RootError):
        find_beta5(make_grid(4))
