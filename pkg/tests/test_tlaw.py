import math
import warnings

import numpy as np
import pytest
from scipy import integrate, special, stats

from conftest import cauchy_cdf, t3_cdf
from stutl.specfun import DomainError, bessel_k, gauss_laguerre
from stutl.tlaw import (
    FFTResidualWarning,
    IncrementLaw,
    InversionConfig,
    InversionDivergedError,
    Method,
    build_law,
    cf_student,
    cf_unit,
    density_cos,
    density_fft,
    density_laguerre,
    raw_density,
)

T3_AT_0 = 2 / (math.pi * math.sqrt(3))
FFT_FINE = InversionConfig(Method.FFT, up=10.0, low=-10.0, n_terms=2**17, n_grid=60000)


def by_quadrature(nu, h, x):
    """Density of J_h by adaptive quadrature of the inversion integral."""
    s = math.sqrt(nu)

    def integrand(u):
        return math.cos(u * x) * cf_unit(nu, s * u) ** h

    val, _ = integrate.quad(integrand, 0, np.inf, limit=4000)
    return val / math.pi


# -- characteristic function -------------------------------------------------


def test_cf_unit_cauchy():
    assert cf_unit(1.0, 2.0) == pytest.approx(math.exp(-2.0), rel=1e-14)


def test_cf_unit_at_zero_and_even():
    assert cf_unit(3.0, 0.0) == 1.0
    u = np.linspace(-30, 30, 121)
    np.testing.assert_allclose(cf_unit(2.5, u), cf_unit(2.5, -u), rtol=0, atol=0)
    v = cf_unit(2.5, u)
    assert np.all(v > 0) and np.all(v <= 1)


def test_cf_unit_nu3_through_bessel():
    expected = 2**-0.5 / special.gamma(1.5) * bessel_k(1.5, 1.0)
    assert cf_unit(3.0, 1.0) == pytest.approx(expected, rel=1e-13)
    assert cf_unit(3.0, 1.0) == pytest.approx(2 * math.exp(-1), rel=1e-13)


def test_cf_student_is_standard_t():
    # sample CF of the standard t5 law from its density
    u = 0.8
    val, _ = integrate.quad(lambda x: math.cos(u * x) * stats.t.pdf(x, 5), -np.inf, np.inf, limit=400)
    assert cf_student(5.0, u) == pytest.approx(val, rel=1e-8)


def test_cf_unit_far_tail_is_tiny_not_nan():
    v = cf_unit(3.0, np.array([800.0, 5000.0]))
    assert np.all(np.isfinite(v)) and np.all(v >= 0) and v[0] < 1e-300


# -- density engines ---------------------------------------------------------


def test_laguerre_density_t3_at_zero():
    rule = gauss_laguerre(180)
    assert density_laguerre(3.0, 1.0, 0.0, rule) == pytest.approx(T3_AT_0, abs=5e-3)


def test_laguerre_density_cauchy_half_step():
    assert density_laguerre(1.0, 0.5, 0.0, gauss_laguerre(180)) == pytest.approx(2 / math.pi, abs=5e-3)


def test_laguerre_density_even():
    rule = gauss_laguerre(180)
    x = np.linspace(0, 6, 25)
    np.testing.assert_array_equal(density_laguerre(3.0, 1.0, x, rule), density_laguerre(3.0, 1.0, -x, rule))


def test_cos_density_examples():
    cfg = InversionConfig(Method.COS, up=10.0, low=-10.0, n_terms=180)
    assert density_cos(3.0, 1.0, 0.0, cfg) == pytest.approx(T3_AT_0, abs=5e-3)
    assert density_cos(3.0, 1.0, 10.0, cfg) == pytest.approx(0.0, abs=5e-3)
    x = np.linspace(0, 10, 41)
    np.testing.assert_array_equal(density_cos(3.0, 1.0, x, cfg), density_cos(3.0, 1.0, -x, cfg))
    with pytest.raises(DomainError):
        density_cos(3.0, 1.0, 10.5, cfg)


def test_fft_density_t3():
    x, f = density_fft(3.0, 1.0, FFT_FINE)
    j = np.argmin(np.abs(x))
    assert x[j] == 0.0
    assert f[j] == pytest.approx(T3_AT_0, abs=1e-5)


def test_fft_density_mass():
    x, f = density_fft(3.0, 1.0, FFT_FINE)
    dx = x[1] - x[0]
    assert abs(f.sum() * dx - 1) < 0.02


def test_fft_density_cauchy_small_step():
    h = 0.02
    x, f = density_fft(1.0, h, FFT_FINE)
    inside = np.abs(x) <= 5
    exact = h / (math.pi * (h * h + x[inside] ** 2))
    assert np.max(np.abs(f[inside] - exact)) <= 1e-3


def test_fft_density_rounds_to_power_of_two():
    cfg = InversionConfig(Method.FFT, up=5.0, low=-5.0, n_terms=1000)
    x, f = density_fft(3.0, 1.0, cfg)
    assert x.size == 1024 and f.size == 1024
    assert x[0] == -5.0 and x[1] - x[0] == pytest.approx(10 / 1024)


def test_fft_residual_warning_on_asymmetric_grid():
    cfg = InversionConfig(Method.FFT, up=10.0, low=-3.0, n_terms=64)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        density_fft(3.0, 1.0, cfg)
    # the density is real for any grid, so no residual is expected
    assert not [w for w in caught if issubclass(w.category, FFTResidualWarning)]


@pytest.mark.parametrize("nu, h", [(3.0, 0.3), (2.5, 1.0), (5.0, 0.1)])
@pytest.mark.parametrize("x", [0.0, 0.4, 2.0])
def test_engines_against_quadrature(nu, h, x):
    expected = by_quadrature(nu, h, x)
    cfg_cos = InversionConfig(Method.COS, up=10.0, low=-10.0, n_terms=5000)
    assert density_cos(nu, h, x, cfg_cos) == pytest.approx(expected, abs=2e-4)
    xs, f = density_fft(nu, h, FFT_FINE)
    assert np.interp(x, xs, f) == pytest.approx(expected, abs=2e-4)
    if h == 1.0:
        rule = gauss_laguerre(180)
        assert density_laguerre(nu, h, x, rule) == pytest.approx(expected, abs=5e-3)


def test_h1_law_is_student_t_for_non_integer_nu():
    law = build_law(2.5, 1.0, InversionConfig(Method.FFT, 40.0, -40.0, 2**18, 80000))
    x = np.array([-5.0, -1.0, 0.0, 0.5, 2.0, 6.0])
    ref = [integrate.quad(lambda t: stats.t.pdf(t, 2.5), -np.inf, xi)[0] for xi in x]
    np.testing.assert_allclose(law.cdf(x), ref, atol=1e-3)


# -- tables ------------------------------------------------------------------


@pytest.fixture(scope="module")
def t3_fft():
    return build_law(3.0, 1.0, FFT_FINE)


def test_build_law_table_shapes(t3_fft):
    law = t3_fft
    assert isinstance(law, IncrementLaw)
    assert law.x_grid.size == law.density_values.size == law.cdf_values.size == 60001
    assert np.allclose(np.diff(law.x_grid), law.dx, rtol=1e-9, atol=0)
    assert law.cdf_values[0] == 0.0 and law.cdf_values[-1] == 1.0
    assert np.all(np.diff(law.cdf_values) >= 0)


def test_build_law_symmetry(t3_fft):
    f = t3_fft.density_values
    assert np.max(np.abs(f - f[::-1])) <= 1e-8
    assert t3_fft.cdf(0.0) == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize(
    "config, tol",
    [(FFT_FINE, 2e-3),
     (InversionConfig(Method.COS, 10.0, -10.0, 5000, 20000), 2e-3),
     (InversionConfig(Method.LAG, 10.0, -10.0, 180, 20000), 5e-3)],
)
def test_cdf_at_one_every_method(config, tol):
    law = build_law(3.0, 1.0, config)
    assert law.cdf(1.0) == pytest.approx(0.8044989, abs=tol)
    assert float(t3_cdf(1.0)) == pytest.approx(0.8044989, abs=1e-7)


def test_cdf_cauchy_small_step():
    law = build_law(1.0, 0.01, InversionConfig(Method.FFT, 10.0, -10.0, 2**17, 200000))
    x = np.linspace(-10, 10, 40001)
    assert np.max(np.abs(law.cdf(x) - cauchy_cdf(x, 0.01))) <= 5e-3


def test_cdf_interpolation_and_clamps(t3_fft):
    law = t3_fft
    mid = 0.5 * (law.x_grid[100] + law.x_grid[101])
    assert law.cdf(mid) == pytest.approx(0.5 * (law.cdf_values[100] + law.cdf_values[101]), rel=1e-12)
    assert law.cdf(-1e9) == 0.0
    assert law.cdf(1e9) == 1.0


def test_quantile_examples(t3_fft):
    law = t3_fft
    assert abs(law.quantile(0.5)) <= law.dx
    assert law.quantile(0.95) == pytest.approx(2.3533634, abs=0.02)
    x = np.linspace(-8, 8, 101)
    np.testing.assert_allclose(law.quantile(law.cdf(x)), x, atol=law.dx)
    for bad in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(DomainError):
            law.quantile(bad)


def test_quantile_tails_return_endpoints():
    law = build_law(3.0, 1.0, InversionConfig(Method.FFT, 3.0, -3.0, 4096, 1000))
    assert law.quantile(1e-12) == pytest.approx(-3.0)
    assert law.quantile(1 - 1e-12) == pytest.approx(3.0)


def test_sample_reproducible_and_empty(t3_fft):
    a = t3_fft.sample(1000, seed=7)
    b = t3_fft.sample(1000, seed=7)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, t3_fft.sample(1000, seed=8))
    assert t3_fft.sample(0, seed=1).size == 0


def test_sample_ks_t3(t3_fft):
    draws = t3_fft.sample(10_000, seed=2024)
    d = stats.kstest(draws, t3_cdf).statistic
    assert d < 1.63 / math.sqrt(10_000)


@pytest.mark.parametrize("method, n_terms", [(Method.LAG, 180), (Method.COS, 5000), (Method.FFT, 2**17)])
@pytest.mark.parametrize("nu", [1.0, 3.0, 5.0])
@pytest.mark.parametrize("h", [1.0, 0.1, 0.02])
def test_table_invariants(method, n_terms, nu, h):
    cfg = InversionConfig(method, 10.0, -10.0, n_terms, 20000)
    try:
        law = build_law(nu, h, cfg)
    except InversionDivergedError:
        # Laguerre with 180 nodes cannot resolve the slowly decaying CF at small h
        assert method is Method.LAG and h < 1
        return
    F = law.cdf_values
    assert np.all(np.diff(F) >= 0) and F[0] >= 0 and F[-1] <= 1
    f = law.density_values
    assert np.max(np.abs(f - f[::-1])) <= 1e-8
    p = np.linspace(0.01, 0.99, 99)
    x = law.quantile(p)
    slack = 2 * law.dx * law.density(x) + 1e-12
    assert np.all(np.abs(law.cdf(x) - p) <= slack)


def test_fft_and_cos_agree():
    fft = build_law(3.0, 1.0, InversionConfig(Method.FFT, 10.0, -10.0, 2**17, 20000))
    cos = build_law(3.0, 1.0, InversionConfig(Method.COS, 10.0, -10.0, 5000, 20000))
    assert np.max(np.abs(fft.cdf_values - cos.cdf_values)) <= 2e-3


def test_divergence_names_method_and_parameters():
    cfg = InversionConfig(Method.LAG, 10.0, -10.0, 180, 1000)
    with pytest.raises(InversionDivergedError, match=r"LAG.*nu=3.*h=0.01"):
        build_law(3.0, 0.01, cfg)


def test_raw_density_keeps_negative_values():
    cfg = InversionConfig(Method.FFT, 10.0, -10.0, 180, 1000)
    _, f = raw_density(3.0, 0.01, cfg)
    assert np.any(f < 0)
    law = build_law(3.0, 0.01, cfg)
    assert np.all(law.density_values >= 0)
    assert law.negative_fraction == pytest.approx(np.mean(f < 0))


def test_table_csv(tmp_path, t3_fft):
    path = tmp_path / "law.csv"
    t3_fft.to_csv(path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert data.dtype.names == ("x", "density", "cdf")
    np.testing.assert_array_equal(data["cdf"], t3_fft.cdf_values)


@pytest.mark.parametrize(
    "kwargs",
    [dict(up=-1.0, low=1.0), dict(n_terms=0), dict(n_grid=1), dict(method="LAG", n_terms=181),
     dict(method="SPLINE")],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        InversionConfig(**kwargs)


def test_config_method_error_lists_names():
    with pytest.raises(ValueError, match="LAG, COS, FFT"):
        InversionConfig(method="bogus")


def test_build_law_domain_errors():
    with pytest.raises(DomainError):
        build_law(0.0, 1.0)
    with pytest.raises(DomainError):
        build_law(3.0, -1.0)
