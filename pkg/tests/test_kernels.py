import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latcap.kernels import (
    KernelError,
    eval_phi_psi,
    kernel_polys,
    psi_at_one,
    psi_zero,
    quadrature_phi,
    residue_phi,
    roots_in_unit_disk,
)

angle = st.floats(0.0, 2 * np.pi)


@given(st.floats(0.05, 0.45), angle, angle)
@settings(max_examples=25, deadline=None)
def test_width4_residue_matches_quadrature(x, a, b):
    fixed = {"s": np.exp(1j * a), "u": np.exp(1j * b)}
    r = residue_phi(4, "q", "t", x, fixed)
    q = quadrature_phi(4, "q", "t", x, fixed, n=512)
    assert abs(r - q) < 1e-11 * max(1, abs(r))


@given(st.floats(0.05, 0.45), angle, angle, angle)
@settings(max_examples=15, deadline=None)
def test_width5_residue_matches_quadrature(x, a, b, c):
    fixed = {"s": np.exp(1j * a), "u": np.exp(1j * b), "v": np.exp(1j * c)}
    r = residue_phi(5, "q", "t", x, fixed)
    q = quadrature_phi(5, "q", "t", x, fixed, n=512)
    assert abs(r - q) < 1e-11 * max(1, abs(r))


def test_phi_psi_methods_agree_width5():
    z = np.exp(1j * np.array([0.3, 1.1, 2.0, -0.7]))
    point = dict(zip("tsuv", z))
    r = eval_phi_psi(5, 0.4, point, method="residue", n_outer=256)
    q = eval_phi_psi(5, 0.4, point, method="quadrature", n_outer=256)
    for k in ("phi1", "phi2", "phi0", "psi13", "psi14"):
        assert abs(r[k] - q[k]) < 1e-10, k


def test_kernel_polys_shapes():
    assert set(kernel_polys(4)) == {"q", "p", "r"}
    assert set(kernel_polys(5)) == {"q", "p1", "p2", "r1", "r2"}


def test_psi_near_one_at_small_x():
    for w in ("psi1", "psi2", "psi3"):
        assert abs(psi_at_one(w, 0.01) - 1) < 1e-3


@pytest.mark.parametrize("which,value", [("psi1", 0.495375), ("psi2", 0.495455), ("psi3", 0.499999)])
def test_psi_zeros(which, value):
    root, (a, b) = psi_zero(which)
    assert a < root < b
    # the reference values are truncated, not rounded, to six decimals
    assert value <= root < value + 1e-6


def test_psi_zero_needs_sign_change():
    with pytest.raises(KernelError):
        psi_zero("psi1", 0.1, 0.2)


def test_wrong_root_count_raises():
    with pytest.raises(KernelError):
        roots_in_unit_disk(4, "q", "t", 0.3, {"s": 1.0, "u": 1.0}, expected=3)


def test_unknown_psi():
    with pytest.raises(ValueError):
        psi_at_one("psi9", 0.3)
