import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latcap.quadrature import make_grid, mobius, shift_error_decay


@pytest.mark.parametrize("shift", [False, True])
@pytest.mark.parametrize("b", [0.0, 1 / 3])
def test_constant_and_pole_means(shift, b):
    g = make_grid(48, b, shift)
    assert abs(np.sum(g.weights) - 1) < 1e-14
    # mean of 1/(z - 2) over the circle is -1/2
    assert abs(np.sum(g.weights / (g.nodes - 2)) + 0.5) < 1e-12


def test_coefficient_extraction():
    g = make_grid(64, 1 / 3, True)
    f = 3 / g.nodes + g.nodes ** 2 - 5 / g.nodes ** 3
    assert abs(np.sum(g.cf * f) - 3) < 1e-13


def test_nodes_on_unit_circle():
    g = make_grid(40, 0.4, True)
    assert np.allclose(np.abs(g.nodes), 1, atol=1e-15)
    assert np.allclose(mobius(mobius(g.nodes, 0.4), -0.4), g.nodes)


def test_extended_precision_grid():
    g = make_grid(48, 1 / 3, True, dtype=np.clongdouble)
    d = make_grid(48, 1 / 3, True)
    assert g.nodes.dtype == np.clongdouble
    assert np.max(np.abs(g.nodes.astype(np.complex128) - d.nodes)) < 1e-15
    assert abs(np.sum(g.weights) - 1) < 1e-18


def test_invalid_grids():
    with pytest.raises(ValueError):
        make_grid(1)
    with pytest.raises(ValueError):
        make_grid(8, 1.0)


def test_quarter_shift_doubles_decay_rate():
    s0, s1, ratio = shift_error_decay([4, 6, 8, 10, 12])
    assert s0 < 0 and s1 < 0
    assert abs(ratio - 2.0) <= 0.2


@given(st.floats(1.3, 4.0), st.integers(24, 64))
@settings(max_examples=20, deadline=None)
def test_rule_converges_for_poles_outside(pole, n):
    g = make_grid(n, 0.0, True)
    err = abs(np.sum(g.weights / (g.nodes - pole)) + 1 / pole)
    assert err <= 4 * pole ** (-n) / (1 - pole ** (-n)) + 1e-15
