import numpy as np
import pytest

from latcap import _accel
from latcap.nystrom import (
    ContractionReport,
    PrecisionConfig,
    SolveError,
    assemble_width4,
    assemble_width5,
    certify_contraction,
    contraction_norms,
    eval_J,
    eval_Lmatrix,
    solve_refined,
)
from latcap.quadrature import make_grid
from latcap.systems import series_J, series_L, solve_width4, solve_width5, width5_order_for_L


@pytest.fixture(scope="module")
def series_J_coeffs():
    return series_J(solve_width4(40))


@pytest.fixture(scope="module")
def series_L_rows():
    return [series_L(solve_width5(width5_order_for_L(7, lam), lam)) for lam in (1, 2)]


def test_width4_block_count():
    S = assemble_width4(0.3, make_grid(6))
    assert S.size == 2 * 6 ** 2 + 6
    assert S.to_sparse().shape == (S.size, S.size)


def test_width5_block_count():
    S = assemble_width5(0.3, make_grid(4))
    assert S.size == 2 * 4 ** 3 + 3 * 4 ** 2 + 4
    assert sum(int(np.prod(shape)) for _, shape in S.blocks().values()) == S.size


def test_width4_sparse_matches_matvec():
    S = assemble_width4(0.35, make_grid(6))
    v = np.random.default_rng(1).standard_normal(S.size) + 0j
    assert np.allclose(S.to_sparse() @ v, S.matvec(v), rtol=1e-13, atol=1e-13)
    assert S.nnz == S.to_sparse().nnz


def test_width5_sparse_matches_matvec():
    S = assemble_width5(0.35, make_grid(3))
    v = np.random.default_rng(2).standard_normal(S.size) + 0j
    assert np.allclose(S.to_sparse() @ v, S.matvec(v), rtol=1e-13, atol=1e-13)


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba missing")
def test_compiled_and_numpy_paths_agree(monkeypatch):
    g = make_grid(10)
    monkeypatch.setenv("LATCAP_NUMBA", "1")
    S1 = assemble_width4(0.4, g)
    v = np.random.default_rng(3).standard_normal(S1.size) + 1j
    y1 = S1.matvec(v)
    monkeypatch.setenv("LATCAP_NUMBA", "0")
    assert not _accel.use_numba()
    S0 = assemble_width4(0.4, g)
    assert np.allclose(S0.A1, S1.A1, rtol=1e-13, atol=1e-15)
    assert np.allclose(S0.matvec(v), y1, rtol=1e-13, atol=1e-13)


def test_zero_argument():
    assert eval_J(0.0, make_grid(8)) == 0.0
    assert np.all(eval_Lmatrix(0.0, make_grid(4)) == 0)
    with pytest.raises(ValueError):
        assemble_width4(0.0, make_grid(8))


class _Diagonal:
    """Minimal system with a diagonal operator."""

    def __init__(self, d, b):
        self.d, self.rhs = d, b
        self.size, self.dtype = d.size, d.dtype

    def matvec(self, v):
        return self.d * v

    def diagonal(self):
        return self.d


def test_diagonal_system_needs_one_refinement():
    d = np.linspace(1, 3, 50).astype(complex)
    b = np.ones(50, dtype=complex)
    res = solve_refined(_Diagonal(d, b), PrecisionConfig(refine_digits=16, target_residual=1e-15))
    assert res.refinements == 1
    assert np.allclose(res.x, 1 / d, rtol=1e-15)


def test_extended_refinement_beats_double():
    g = make_grid(16)
    _, info_d = eval_J(0.45, g, PrecisionConfig(refine_digits=16), return_info=True)
    _, info_x = eval_J(0.45, g, PrecisionConfig(refine_digits=19), return_info=True)
    if np.finfo(np.longdouble).precision < 18:
        pytest.skip("no extended precision on this platform")
    assert min(info_x["residuals"]) < 1e-17
    assert min(info_x["residuals"]) < min(info_d["residuals"])


def test_precision_config_validation():
    with pytest.raises(ValueError):
        PrecisionConfig(base_digits=34, refine_digits=68)
    with pytest.raises(ValueError):
        PrecisionConfig(base_digits=16, refine_digits=12)
    assert PrecisionConfig(refine_digits=16).refine_dtype == np.complex128


@pytest.mark.parametrize("x", [0.1, 0.2, 0.25])
def test_J_matches_series(x, series_J_coeffs):
    y = x ** 4
    ref = sum(c * y ** k for k, c in series_J_coeffs.items())
    val, info = eval_J(x, make_grid(32), return_info=True)
    assert abs(val - ref) < 1e-11 * ref
    assert info["imag"] < 1e-10 * ref


def test_J_increasing():
    g = make_grid(16)
    xs = np.linspace(0.05, 0.47, 8)
    vals = [eval_J(x, g) for x in xs]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("x", [0.15, 0.2, 0.25])
def test_L_matches_series(x, series_L_rows):
    y = x ** 5
    ref = np.array([[sum(c * y ** k for k, c in r.items()) for r in row] for row in series_L_rows])
    L8 = eval_Lmatrix(x, make_grid(8))
    L, info = eval_Lmatrix(x, make_grid(12), return_info=True)
    err8, err12 = np.max(np.abs(L8 - ref)), np.max(np.abs(L - ref))
    assert err12 < 2e-6 * np.max(np.abs(ref))
    assert err12 < err8
    assert info["symmetry_defect"] < 1e-9


def test_L_symmetry_improves_with_nodes():
    d8 = eval_Lmatrix(0.3, make_grid(8), return_info=True)[1]["symmetry_defect"]
    d12 = eval_Lmatrix(0.3, make_grid(12), return_info=True)[1]["symmetry_defect"]
    assert d12 < d8


def test_symmetry_tolerance_enforced():
    with pytest.raises(SolveError):
        eval_Lmatrix(0.3, make_grid(6), sym_tol=1e-30)


def test_contraction_norms_vanish_at_zero():
    assert all(v == 0 for v in contraction_norms(0.0, make_grid(8)).values())


def test_contraction_norms_grow_with_x():
    g = make_grid(8)
    a, b = contraction_norms(0.2, g), contraction_norms(0.4, g)
    assert b["K22"] > a["K22"] > 0


def test_certify_report_structure():
    rep = certify_contraction(0.3, make_grid(8), samples=2)
    assert isinstance(rep, ContractionReport)
    assert rep.xs == [0.0, 0.3]
    assert rep.max("K22") < rep.bounds["K22"]
