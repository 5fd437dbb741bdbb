import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rebvoter.analysis import (
    beta_scan,
    critical_scan,
    fit_linear_fractional,
    joint_critical_scan,
    savgol_derivative,
)

GRID = np.round(np.arange(0.45, 0.5601, 0.0025), 4)


def _two_sided(a):
    return (1 - 1.958 * a) / (1 - 0.975 * a)


# ---------------------------------------------------------------- fit

def test_fit_recovers_two_sided_coefficients():
    a = np.linspace(0.0, 0.45, 46)
    fit = fit_linear_fractional(a, _two_sided(a))
    assert abs(fit.c1 - 1.958) < 1e-10
    assert abs(fit.c2 - 0.975) < 1e-10
    assert abs(fit.alpha_c - 1 / 1.958) < 1e-10
    assert round(fit.alpha_c, 4) == 0.5107
    assert fit.residual_rms < 1e-12
    assert not fit.degenerate


def test_fit_one_sided_formula():
    a = np.linspace(0.05, 0.45, 9)
    fit = fit_linear_fractional(a, (1 - 2 * a) / (1 - a))
    assert fit.c1 == pytest.approx(2, abs=1e-10)
    assert fit.c2 == pytest.approx(1, abs=1e-10)
    assert fit.alpha_c == pytest.approx(0.5, abs=1e-10)


@given(c1=st.floats(1.2, 3.0), c2=st.floats(0.0, 1.0))
def test_fit_exact_for_any_model_curve(c1, c2):
    a = np.linspace(0.0, 0.8 / c1, 12)
    rho = (1 - c1 * a) / (1 - c2 * a)
    fit = fit_linear_fractional(a, rho)
    assert fit.c1 == pytest.approx(c1, abs=1e-8)
    assert fit.c2 == pytest.approx(c2, abs=1e-8)


def test_fit_callable_evaluates_model():
    a = np.linspace(0.1, 0.4, 5)
    fit = fit_linear_fractional(a, _two_sided(a))
    np.testing.assert_allclose(fit(a), _two_sided(a), atol=1e-12)


def test_fit_noisy_data_has_dispersion():
    rng = np.random.default_rng(3)
    a = np.linspace(0.0, 0.45, 40)
    fit = fit_linear_fractional(a, _two_sided(a) + rng.normal(0, 1e-3, a.size))
    assert abs(fit.alpha_c - 0.5107) < 0.01
    assert all(c > 0 for c in fit.cov_diag)


def test_fit_constant_one_is_degenerate():
    fit = fit_linear_fractional([0.1, 0.2, 0.3], [1.0, 1.0, 1.0])
    assert fit.degenerate
    assert fit.alpha_c == np.inf


@pytest.mark.parametrize("a, r", [
    ([0.1, 0.2], [0.9, 0.8]),
    ([0.1, 0.1, 0.2], [0.9, 0.9, 0.8]),
    ([0.1, 0.2, 0.3], [0.9, 0.0, 0.5]),
    ([0.1, 0.2, 0.3], [0.9, 0.8]),
])
def test_fit_rejects_bad_input(a, r):
    with pytest.raises(ValueError):
        fit_linear_fractional(a, r)


# ---------------------------------------------------------------- critical scan

def _h(a):
    return 1.3 + 0.8 * a - a ** 2


def test_scan_finds_synthetic_rho_zero():
    a = np.linspace(0.40, 0.51, 111)[:-1]
    res = critical_scan(a, (0.51 - a) * _h(a), GRID, "rho")
    assert abs(res.best - 0.51) <= 0.0025
    assert res.bracket[0] <= res.best <= res.bracket[1]


def test_scan_finds_synthetic_chi_zero():
    a = np.linspace(0.51, 0.62, 111)[1:]
    res = critical_scan(a, (a - 0.51) * _h(a), GRID, "chi")
    assert abs(res.best - 0.51) <= 0.0025


@pytest.mark.parametrize("scale", ["log", "linear"])
def test_scan_linear_scale_also_works(scale):
    a = np.linspace(0.40, 0.5, 101)[:-1]
    res = critical_scan(a, (0.5 - a) * _h(a), GRID, "rho", scale=scale)
    assert abs(res.best - 0.5) <= 0.0025


def test_scan_skips_thin_candidates():
    a = np.linspace(0.40, 0.51, 111)[:-1]
    res = critical_scan(a, (0.51 - a) * _h(a), np.array([0.40, 0.401, 0.51]), "rho")
    assert np.isnan(res.score[0]) and np.isnan(res.score[1])
    assert res.best == 0.51


def test_scan_all_skipped_raises():
    with pytest.raises(ValueError):
        critical_scan([0.1, 0.2, 0.3], [0.3, 0.2, 0.1], [0.5], "rho")


def test_scan_bad_side():
    with pytest.raises(ValueError):
        critical_scan([0.1], [0.3], [0.5], "left")


def test_joint_scan_on_two_sided_synthetic():
    a = np.linspace(0.40, 0.62, 221)
    rho = np.clip((0.51 - a) * _h(a), 0, None)
    chi = np.clip((a - 0.51) * _h(a), 0, None)
    res = joint_critical_scan(a, rho, chi, GRID)
    assert abs(res.best - 0.51) <= 0.0025


def test_scan_is_pure():
    a = np.linspace(0.40, 0.51, 50)
    v = (0.51 - a) * _h(a)
    a0, v0 = a.copy(), v.copy()
    r1 = critical_scan(a, v, GRID)
    r2 = critical_scan(a[::-1], v[::-1], GRID)
    np.testing.assert_array_equal(a, a0)
    np.testing.assert_array_equal(v, v0)
    np.testing.assert_array_equal(r1.score, r2.score)


# ---------------------------------------------------------------- beta scan

def test_beta_scan_flattens_at_one():
    # distances to alpha_c spaced evenly on the log axis of the plot
    a = 0.5 - np.logspace(-1, -4, 200)
    rho = (1 - 2 * a) / (1 - a)
    scan = beta_scan(a, rho, 0.5, [0.92, 1.0])
    s92, s1 = np.abs(scan.slope)
    assert s1 < 1e-2
    assert s92 >= 5 * s1
    assert scan.best == 1.0
    assert scan.curves.shape == (2, a.size)


def test_beta_scan_synthetic_power():
    a = np.linspace(0.3, 0.509, 100)
    scan = beta_scan(a, 2.0 * (0.51 - a) ** 0.92, 0.51, [0.9, 0.92, 1.0])
    assert abs(scan.slope[1]) < 1e-12
    assert scan.best == 0.92


def test_beta_scan_needs_points():
    with pytest.raises(ValueError):
        beta_scan([0.6, 0.7], [0.1, 0.1], 0.5, [1.0])


# ---------------------------------------------------------------- savgol

@given(c=st.tuples(*[st.floats(-5, 5)] * 3), dx=st.floats(0.001, 1.0))
def test_savgol_exact_on_quadratics(c, dx):
    x = np.arange(40) * dx
    y = c[0] + c[1] * x + c[2] * x ** 2
    d = savgol_derivative(y, dx=dx)
    np.testing.assert_allclose(d, c[1] + 2 * c[2] * x, atol=1e-8 * (1 + abs(c[2]) + abs(c[1])))


def test_savgol_matches_polyfit_oracle():
    rng = np.random.default_rng(0)
    x = np.linspace(0, 1, 30)
    y = np.sin(3 * x) + rng.normal(0, 0.01, x.size)
    d = savgol_derivative(y, x=x)
    for i in (5, 14, 24):
        coef = np.polyfit(x[i - 5:i + 6], y[i - 5:i + 6], 2)
        assert d[i] == pytest.approx(np.polyval(np.polyder(coef), x[i]), abs=1e-9)
    # edges use the polynomial of the outermost full window
    coef = np.polyfit(x[:11], y[:11], 2)
    assert d[0] == pytest.approx(np.polyval(np.polyder(coef), x[0]), abs=1e-9)


def test_savgol_constant_gives_zero():
    np.testing.assert_allclose(savgol_derivative(np.full(20, 3.0)), 0.0, atol=1e-12)


@pytest.mark.parametrize("kw", [dict(window=10), dict(window=1, degree=2)])
def test_savgol_bad_window(kw):
    with pytest.raises(ValueError):
        savgol_derivative(np.zeros(20), **kw)


def test_savgol_short_series():
    with pytest.raises(ValueError, match="shorter"):
        savgol_derivative(np.zeros(5))


def test_savgol_nonuniform_x():
    x = np.r_[np.linspace(0, 1, 15), [1.5]]
    with pytest.raises(ValueError):
        savgol_derivative(x ** 2, x=x)
