import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from rcsphere.distributions import (ChiSquare, ScaledChiDist, beta_fn, betainc, chi2_cdf, chi2_isf, chi2_pdf,
                                    chi2_quantile, direction_density, f_quantile, gammainc_lower,
                                    nc_chi2_cdf, nc_chi2_pdf, scaled_chi_moment)


def poisson_mixture_pdf(v, p, lam, terms=200):
    j = np.arange(terms)
    w = stats.poisson.pmf(j, lam / 2)
    return float(np.sum(w * stats.chi2.pdf(v, p + 2 * j)))


def poisson_mixture_cdf(v, p, lam, terms=200):
    j = np.arange(terms)
    w = stats.poisson.pmf(j, lam / 2)
    return float(np.sum(w * stats.chi2.cdf(v, p + 2 * j)))


@pytest.mark.parametrize("a,x", [(0.5, 0.1), (1.5, 2.0), (3.0, 10.0), (12.5, 11.0), (30.0, 45.0)])
def test_gammainc_matches_scipy(a, x):
    assert gammainc_lower(a, x) == pytest.approx(special.gammainc(a, x), abs=1e-14)


@pytest.mark.parametrize("a,b,x", [(0.5, 1.0, 0.3), (1.5, 15.0, 0.9), (5.0, 2.5, 0.2), (20.0, 30.0, 0.45)])
def test_betainc_matches_scipy(a, b, x):
    assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-13)
    assert beta_fn(a, b) == pytest.approx(special.beta(a, b), rel=1e-13)


def test_chi2_cdf_examples():
    assert chi2_cdf(0.0, 3) == 0.0
    assert chi2_cdf(7.8147279, 3) == pytest.approx(0.95, abs=1e-6)
    assert chi2_cdf(1e4, 5) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("df", [1, 2, 3, 7, 25, 60])
def test_chi2_cdf_against_scipy(df):
    for x in (0.01, 0.5, 3.0, df, 2.0 * df + 10):
        assert chi2_cdf(x, df) == pytest.approx(stats.chi2.cdf(x, df), abs=1e-12)
        assert chi2_pdf(x, df) == pytest.approx(stats.chi2.pdf(x, df), rel=1e-11)


def test_chi2_rejects_bad_input():
    with pytest.raises(ValueError):
        chi2_cdf(-1.0, 3)
    with pytest.raises(ValueError):
        chi2_cdf(1.0, 0)
    with pytest.raises(ValueError):
        chi2_quantile(1.0, 3)


def test_chi2_quantile_examples():
    assert chi2_quantile(0.5, 2) == pytest.approx(2 * math.log(2), abs=1e-12)
    assert chi2_quantile(0.95, 3) == pytest.approx(7.8147279, abs=1e-5)
    assert chi2_quantile(0.95, 25) == pytest.approx(stats.chi2.ppf(0.95, 25), rel=1e-10)


@pytest.mark.parametrize("df", range(1, 61))
def test_chi2_round_trip(df):
    for q in (0.001, 0.01, 0.5, 0.95, 0.999):
        assert chi2_cdf(chi2_quantile(q, df), df) == pytest.approx(q, abs=1e-9)


def test_chi2_upper_quantile():
    for df in (3, 13, 28):
        x = chi2_isf(5e-11, df)
        assert stats.chi2.sf(x, df) == pytest.approx(5e-11, rel=1e-8)


def test_nc_chi2_pdf_examples():
    assert nc_chi2_pdf(2.0, 3, 1.0) == pytest.approx(poisson_mixture_pdf(2.0, 3, 1.0), abs=1e-10)
    for v in (0.3, 2.0, 9.0):
        assert nc_chi2_pdf(v, 4, 0.0) == pytest.approx(stats.chi2.pdf(v, 4), abs=1e-12)
    total, _ = integrate.quad(lambda v: nc_chi2_pdf(v, 3, 4.0), 0, np.inf, epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_nc_chi2_cdf_examples():
    assert nc_chi2_cdf(10.0, 3, 4.0) == pytest.approx(poisson_mixture_cdf(10.0, 3, 4.0), abs=1e-10)
    assert nc_chi2_cdf(0.0, 5, 9.0) == 0.0
    for v in (0.3, 2.0, 9.0):
        assert nc_chi2_cdf(v, 4, 0.0) == pytest.approx(chi2_cdf(v, 4), abs=1e-12)


@pytest.mark.parametrize("lam", [100.0, 900.0, 4225.0])
def test_nc_chi2_large_noncentrality(lam):
    for v in (0.5 * lam, lam, lam + 3 * math.sqrt(lam)):
        assert nc_chi2_cdf(v, 3, lam) == pytest.approx(stats.ncx2.cdf(v, 3, lam), abs=1e-10)
        assert nc_chi2_pdf(v, 3, lam) == pytest.approx(stats.ncx2.pdf(v, 3, lam), rel=1e-8, abs=1e-14)


def test_nc_chi2_cdf_is_integral_of_pdf():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = int(rng.integers(3, 26))
        lam = float(rng.uniform(0, 50))
        v = float(rng.uniform(0.1, 80))
        val, _ = integrate.quad(lambda s: nc_chi2_pdf(s, p, lam), 0, v, epsabs=1e-12, limit=200)
        assert nc_chi2_cdf(v, p, lam) == pytest.approx(val, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(p=st.integers(3, 25), lam=st.floats(0, 400), v=st.floats(0, 500))
def test_nc_chi2_cdf_monotone(p, lam, v):
    assert 0.0 <= nc_chi2_cdf(v, p, lam) <= nc_chi2_cdf(v + 0.5, p, lam) + 1e-15 <= 1.0 + 1e-15


def test_f_quantile():
    assert f_quantile(0.5, 4, 4) == pytest.approx(1.0, abs=1e-10)
    assert f_quantile(0.95, 3, 3) == pytest.approx(9.2766, abs=1e-3)
    assert f_quantile(0.95, 3, 30) == pytest.approx(stats.f.ppf(0.95, 3, 30), rel=1e-10)
    qs = [f_quantile(q, 5, 10) for q in (0.1, 0.3, 0.6, 0.9)]
    assert all(b > a for a, b in zip(qs, qs[1:]))


def test_direction_density_examples():
    assert direction_density(0.5, 3) == pytest.approx(0.5, abs=1e-15)
    assert direction_density(1.2, 7) == 0.0
    assert direction_density(0.0, 5) == pytest.approx(0.75, abs=1e-14)
    with pytest.raises(ValueError):
        direction_density(0.0, 2)


@pytest.mark.parametrize("p", range(3, 26))
def test_direction_density_normalised(p):
    total, _ = integrate.quad(lambda l: direction_density(l, p), -1, 1, epsabs=1e-13, epsrel=1e-13)
    assert total == pytest.approx(1.0, abs=1e-10)
    assert direction_density(0.3, p) == direction_density(-0.3, p)


@pytest.mark.parametrize("p,m", [(p, m) for p in (3, 5, 7, 9, 25) for m in (3, 10, 30)])
def test_scaled_chi_moment(p, m):
    dist = ScaledChiDist(m)
    val, _ = integrate.quad(lambda w: w ** p * dist.pdf(w), 0, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    assert scaled_chi_moment(p, m) == pytest.approx(val, rel=1e-8)


@pytest.mark.parametrize("m", [1, 3, 10, 30])
def test_scaled_chi_cdf_and_quantile(m):
    dist = ScaledChiDist(m)
    for w in (0.2, 0.9, 1.0, 1.7):
        assert dist.cdf(w) == pytest.approx(chi2_cdf(m * w * w, m), abs=1e-14)
        assert dist.cdf(w) == pytest.approx(stats.chi.cdf(w * math.sqrt(m), m), abs=1e-12)
    for q in (0.01, 0.5, 0.99):
        w = dist.quantile(q)
        assert dist.cdf(w) == pytest.approx(q, abs=1e-12)
        assert w == pytest.approx(stats.chi.ppf(q, m) / math.sqrt(m), rel=1e-10)


def test_chisquare_class():
    d = ChiSquare(4)
    assert d.quantile(d.cdf(3.3)) == pytest.approx(3.3, rel=1e-10)
