import numpy as np
import pytest
from hypothesis import given, strategies as st

from homoglab.assembly import LatticeBasis
from homoglab.cell import effective_model
from homoglab.coefficients import ProblemSpec, constant_table, fixture_a, fixture_b
from homoglab.errors import ConfigError
from homoglab.rates import fit_rate, parallel_map
from homoglab.sweep import (SweepConfig, build_xi_grid, corrector_fiber, fiber_resolvent_error, full_space_error,
                            predicted_exponent, rate_experiment, sup_error_over_grid)
from homoglab.symbol import levy_constant

SPEC = ProblemSpec(1, 1.5, 16)

# value of the K_1 example below, pinned after checking it against the explicit expression
K1_EXAMPLE = -0.06670110321828274


@pytest.fixture(scope="module")
def model_a():
    return effective_model(fixture_a(), SPEC)


def test_corrector_fiber_example(model_a):
    em = model_a.with_g0(0.25)
    spec = ProblemSpec(1, 1.5, 4)
    k = corrector_fiber(em, spec, 0.3, 0.1, 1)
    c0 = levy_constant(1, 1.5)
    expected = -0.25 * 0.09 / (c0 * 0.3**1.5 + 0.1**1.5) ** 2
    assert k[LatticeBasis(1, 4).zero] == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(K1_EXAMPLE, rel=1e-14)


def test_corrector_fiber_zero_g0(model_a):
    assert np.all(corrector_fiber(model_a.with_g0(0.0), SPEC, 0.4, 0.2, 2) == 0)
    with pytest.raises(ConfigError):
        corrector_fiber(model_a, SPEC, 0.4, 0.2, 0)


@pytest.mark.parametrize("N", [0, 1, 3])
def test_constant_error_vanishes(N):
    ct = constant_table()
    em = effective_model(ct, SPEC)
    for xi in (0.0, 0.3, -2.0):
        for eps in (0.5, 0.01):
            assert fiber_resolvent_error(ct, SPEC, em, xi, eps, N) <= 1e-10


def test_sup_error_argmax_small_xi(model_a):
    grid = build_xi_grid(1, SweepConfig())
    err, xi = sup_error_over_grid(fixture_a(), SPEC, model_a, grid, 2**-5, 0, threads=2)
    assert err > 0
    assert abs(xi[0]) < 0.5


def test_full_space_error():
    assert full_space_error(0.0, 0.3, 1.5) == 0
    assert full_space_error(1.0, 0.5, 1.5) == pytest.approx(0.35355, abs=1e-5)
    with pytest.raises(ConfigError):
        full_space_error(-1.0, 0.5, 1.5)


@pytest.mark.parametrize("alpha,N,expected", [
    (1.5, 0, 0.5), (1.5, 1, 1.0), (1.5, 2, 1.0), (1.9, 5, 0.6), (1.9, 9, 1.0), (1.8, 1, 0.4), (1.8, 3, 0.8), (1.8, 4, 1.0),
    (1.3, 1, 1.0), (1.3, 3, 1.0), (1.6, 2, 1.0), (1.7, 2, 0.9),
])
def test_predicted_exponent(alpha, N, expected):
    assert predicted_exponent(alpha, N) == pytest.approx(expected)


@given(st.floats(1.01, 1.99), st.integers(0, 6))
def test_predicted_exponent_monotone_and_capped(alpha, N):
    p = predicted_exponent(alpha, N)
    assert 0 < p <= 1
    assert predicted_exponent(alpha, N + 1) >= p


def test_grid_contents():
    cfg = SweepConfig()
    g = build_xi_grid(1, cfg)
    assert len(g) == 159
    mags = np.abs(np.array(g)[:, 0])
    assert mags.min() == 0 and mags.max() == pytest.approx(np.pi)
    assert np.sort(mags[mags > 0])[0] == pytest.approx(min(cfg.epsilons) * cfg.xi_min_factor)
    assert len(build_xi_grid(2, SweepConfig(n_uniform=5, n_log=4))) == 25 + 8 * 4 - 4  # +-pi e_j already on the uniform grid


def test_sweep_config_validation():
    assert SweepConfig(epsilons=(0.1, 0.5)).epsilons == (0.5, 0.1)
    with pytest.raises(ConfigError):
        SweepConfig(epsilons=(1.5,))
    with pytest.raises(ConfigError):
        SweepConfig(N_max=-1)


def test_constant_rate_report_is_exact():
    ct = constant_table()
    rep = rate_experiment(ct, SPEC, effective_model(ct, SPEC), SweepConfig(N_max=2, n_uniform=9, n_log=6))
    assert rep.passed
    assert all(f["exact"] for f in rep.fits.values())
    assert max(r["E_full"] for r in rep.rows) <= 1e-13


def test_rate_experiment_small_fixture_b():
    ct = fixture_b()
    em = effective_model(ct, SPEC)
    rep = rate_experiment(ct, SPEC, em, SweepConfig(N_max=1, n_uniform=17, n_log=16), threads=2)
    eps, E = rep.table(0)
    assert len(eps) == 8 and np.all(np.diff(eps) < 0)
    assert np.all(E[1:] <= E[:-1] * 1.05)
    assert rep.fits[0]["guaranteed"] and rep.fits[1]["guaranteed"]


def test_exact_power_fit():
    eps = 2.0 ** -np.arange(2, 10)
    fit = fit_rate(eps, eps**0.5)
    assert fit.slope == pytest.approx(0.5, abs=1e-12) and fit.r2 == pytest.approx(1.0)
    fit = fit_rate(eps, 3 * eps)
    assert fit.slope == pytest.approx(1.0, abs=1e-12) and fit.intercept == pytest.approx(np.log(3))


def test_fit_needs_points():
    with pytest.raises(ConfigError):
        fit_rate([0.1, 0.2, 0.3], [1, 2, 3])
    with pytest.raises(ConfigError):
        fit_rate([0.1, 0.2, 0.3, 0.4, 0.5], [0, 0, 0, 1, 2])


@given(st.lists(st.integers(), max_size=30), st.integers(1, 4))
def test_parallel_map_preserves_order(items, threads):
    assert parallel_map(lambda v: v * 2, items, threads) == [v * 2 for v in items]
