import numpy as np
import pytest
from hypothesis import given, strategies as st

from homoglab.assembly import assemble_fiber, constant_vector
from homoglab.cell import effective_model
from homoglab.coefficients import ProblemSpec, constant_table, fixture_a, fixture_b
from homoglab.errors import ConfigError, NumericalError
from homoglab.rates import fit_rate
from homoglab.spectral import (eigensystem, eigenvalue_bound_check, operator_norm, rho_fiber, spectral_projector,
                               spectral_report, threshold_af_residual, threshold_projector_residual, thresholds,
                               uniform_xi_grid)
from homoglab.symbol import levy_constant

SPEC = ProblemSpec(1, 1.5, 16)
C0 = levy_constant(1, 1.5)


def test_thresholds_fixture_a():
    d0, delta0 = thresholds(fixture_a(), SPEC)
    assert d0 == pytest.approx(0.5 * C0 * np.pi**1.5, rel=1e-12)
    assert d0 == pytest.approx(9.30, abs=0.01)
    assert delta0 == pytest.approx(np.pi * (0.5 / 4.5) ** (2 / 3), rel=1e-12)
    assert delta0 == pytest.approx(0.726, abs=1e-3)


def test_constant_eigenvalues_are_symbols():
    spec = ProblemSpec(1, 1.5, 2)
    lam, _ = eigensystem(assemble_fiber(constant_table(), spec, 0.5))
    n = np.arange(-2, 3)
    np.testing.assert_allclose(lam, np.sort(C0 * np.abs(2 * np.pi * n + 0.5) ** 1.5), rtol=1e-13)


def test_fixture_a_bottom_at_origin():
    lam, vec = eigensystem(assemble_fiber(fixture_a(), SPEC, 0.0))
    assert abs(lam[0]) <= 1e-10
    e0 = constant_vector(SPEC)
    assert abs(abs(vec[:, 0] @ e0) - 1) <= 1e-12


@given(st.floats(-0.7, 0.7))
def test_projector_properties(xi):
    ct = fixture_b()
    d0, _ = thresholds(ct, SPEC)
    F = spectral_projector(assemble_fiber(ct, SPEC, xi), d0)
    np.testing.assert_allclose(F, F.conj().T, atol=1e-14)
    assert np.max(np.abs(F @ F - F)) <= 1e-10
    assert abs(np.trace(F) - 1) <= 1e-10
    assert operator_norm(F - np.outer(constant_vector(SPEC), constant_vector(SPEC))) <= 2


def test_projector_at_origin_and_constant():
    P = np.outer(constant_vector(SPEC), constant_vector(SPEC))
    d0, _ = thresholds(fixture_b(), SPEC)
    np.testing.assert_allclose(spectral_projector(assemble_fiber(fixture_b(), SPEC, 0.0), d0), P, atol=1e-12)
    d0c, delta0c = thresholds(constant_table(), SPEC)
    F = spectral_projector(assemble_fiber(constant_table(), SPEC, 0.9 * delta0c), d0c)
    assert np.max(np.abs(F - P)) == 0


def test_gap_violation_raises():
    fm = assemble_fiber(fixture_b(), SPEC, 0.1)
    with pytest.raises(NumericalError, match="gap"):
        spectral_projector(fm, d0=1e6)


@given(st.integers(0, 2**32 - 1))
def test_operator_norm_is_largest_singular_value(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    H = X + X.conj().T
    assert operator_norm(H) == pytest.approx(np.linalg.norm(H, 2), rel=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_operator_norm_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    X, Y = (rng.normal(size=(8, 8)) for _ in range(2))
    H, K = X + X.T, Y + Y.T
    assert operator_norm(H + K) <= operator_norm(H) + operator_norm(K) + 1e-12


@given(st.floats(-np.pi, np.pi))
def test_rho_is_zero_entry(xi):
    for ct in (fixture_a(), fixture_b()):
        fm = assemble_fiber(ct, SPEC, xi)
        assert rho_fiber(ct, SPEC, xi) == fm.entries[fm.basis.zero, fm.basis.zero].real


def test_rho_constant_and_origin():
    assert rho_fiber(fixture_a(), SPEC, 0.0) == 0.0
    assert rho_fiber(constant_table(), SPEC, 0.4) == pytest.approx(C0 * 0.4**1.5, rel=1e-14)


def test_rho_remainder_slope_fixture_a():
    em = effective_model(fixture_a(), SPEC)
    xi = np.geomspace(1e-3, 1e-1, 20)
    rem = [abs(rho_fiber(fixture_a(), SPEC, x) - C0 * x**1.5 - em.g_star[0, 0] * x**2) for x in xi]
    assert fit_rate(xi, rem, floor=1e-12).slope >= 2.4


def test_constant_residuals_vanish():
    em = effective_model(constant_table(), SPEC)
    xi = np.geomspace(1e-3, 0.5, 6)
    assert np.all(threshold_projector_residual(constant_table(), SPEC, xi)[:, 1] == 0)
    assert np.all(threshold_af_residual(constant_table(), SPEC, em, xi)[:, 1] <= 1e-13)


def test_projector_slope_fixture_b():
    xi = np.geomspace(1e-3, 1e-1, 12)
    rows = threshold_projector_residual(fixture_b(), SPEC, xi)
    assert fit_rate(rows[:, 0], rows[:, 1]).slope >= 0.9


def test_projector_residual_is_zero_for_difference_kernel():
    rows = threshold_projector_residual(fixture_a(), SPEC, np.geomspace(1e-3, 0.7, 8))
    assert np.max(rows[:, 1]) <= 1e-12


def test_residual_requires_small_xi():
    with pytest.raises(ConfigError, match="delta0"):
        threshold_projector_residual(fixture_a(), SPEC, [1.0])


def test_lambda1_rate():
    xi = np.geomspace(1e-3, 1e-1, 12)
    lam1 = [eigensystem(assemble_fiber(fixture_a(), SPEC, x))[0][0] for x in xi]
    assert fit_rate(xi, lam1).slope == pytest.approx(1.5, abs=0.05)


@pytest.mark.parametrize("ct", [constant_table(), fixture_a(), fixture_b()], ids=["const", "A", "B"])
def test_eigenvalue_bounds(ct):
    rep = eigenvalue_bound_check(ct, SPEC, uniform_xi_grid(1, 33))
    assert rep["ok"], rep["failures"][:3]
    assert rep["n_points"] == 33


def test_eigenvalue_bounds_2d():
    rep = eigenvalue_bound_check(fixture_b(2), ProblemSpec(2, 1.5, 3), uniform_xi_grid(2, 9), threads=2)
    assert rep["ok"]


def test_uniform_grid_contains_origin():
    g = uniform_xi_grid(1, 65)
    assert len(g) == 65 and any(np.all(x == 0) for x in g)
    assert len(uniform_xi_grid(2, 5)) == 25


def test_spectral_report_row():
    em = effective_model(fixture_b(), SPEC)
    rep = spectral_report(fixture_b(), SPEC, em, 0.05)
    row = rep.row()
    assert list(row) == ["xi_norm", "lambda1", "lambda2", "proj_residual", "af_residual", "rho"]
    assert rep.gap_ok and row["lambda1"] < row["lambda2"]
    far = spectral_report(fixture_b(), SPEC, em, 2.0)
    assert np.isnan(far.projector_residual)
