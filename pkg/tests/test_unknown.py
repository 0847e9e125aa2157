import math

import numpy as np
import pytest
from scipy import integrate, stats

from rcsphere.knots import ConstantD, JamesSteinPlus, JamesSteinPlusUnknown, KnotFunction, default_knots_b_tilde
from rcsphere.known import RcsKnown, coverage, radius_constant
from rcsphere.unknown import (OuterQuadConfig, RcsUnknown, SevRule, coverage_unknown, psi,
                              radius_constant_unknown, sev_unknown)

from conftest import indicator_intervals, knot_instance_unknown

FIXED = OuterQuadConfig(fixed_segments=256)


def test_radius_constant_unknown():
    assert radius_constant_unknown(3, 3, 0.05) == pytest.approx(math.sqrt(3 * 9.2766), abs=5e-3)
    assert radius_constant_unknown(3, 10 ** 6, 0.05) == pytest.approx(radius_constant(3, 0.05), abs=1e-2)
    ds = [radius_constant_unknown(p, 10, 0.05) for p in range(3, 12)]
    assert all(b > a for a, b in zip(ds, ds[1:]))


@pytest.mark.parametrize("w,gamma", [(0.4, 0.0), (1.0, 3.0), (2.3, 7.5)])
def test_psi_standard_sphere(w, gamma):
    std = RcsUnknown.standard(3, 3)
    # a = 1 centers at X, so |X - theta| / sigma is central chi_p whatever gamma is
    assert psi(w, gamma, std) == pytest.approx(stats.chi2.cdf((w * std.d) ** 2, 3), abs=1e-9)


@pytest.mark.parametrize("w", [0.5, 1.0, 1.8])
def test_psi_at_zero_gamma(w):
    rcs = knot_instance_unknown()
    p = rcs.p

    def f(r):
        t = r / (math.sqrt(p) * w)
        return float(rcs.a(t)) * r - w * float(rcs.b(t))

    ivs = indicator_intervals(f, 0.0, 40.0)
    expected = sum(stats.chi.cdf(hi, p) - stats.chi.cdf(lo, p) for lo, hi in ivs)
    assert psi(w, 0.0, rcs) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("gamma", [0.0, 2.0, 6.0])
def test_psi_at_unit_scale_is_known_coverage(gamma):
    rcs = knot_instance_unknown()
    alpha_k = float(stats.chi2.sf(rcs.d ** 2, rcs.p))
    known = RcsKnown(rcs.p, alpha_k, rcs.a, rcs.b, rcs.k)
    assert psi(1.0, gamma, rcs) == pytest.approx(coverage(gamma, known), abs=1e-10)


@pytest.mark.parametrize("gamma", [0.0, 1.0, 5.0, 20.0, 65.0])
def test_standard_sphere(gamma):
    std = RcsUnknown.standard(3, 3)
    assert coverage_unknown(gamma, std) == pytest.approx(0.95, abs=1e-5)
    assert sev_unknown(gamma, std) == pytest.approx(1.0, abs=1e-10)


def test_constant_radius_sev_is_one():
    rcs = RcsUnknown.shrinkage_constant_radius(5, 10)
    d = rcs.d
    b = KnotFunction(default_knots_b_tilde(), np.full(6, d), ConstantD(d))
    rcs = RcsUnknown(5, 10, 0.05, rcs.a, b)
    assert sev_unknown(2.0, rcs) == pytest.approx(1.0, abs=1e-10)


def test_coverage_far_from_origin():
    base = RcsUnknown.shrinkage_constant_radius(3, 3)
    assert abs(coverage_unknown(65.0, base, outer=FIXED) - 0.95) <= 2e-3


def test_large_m_approaches_known():
    m = 10 ** 6
    rcs = RcsUnknown(3, m, 0.05, JamesSteinPlusUnknown(3, m), ConstantD(radius_constant_unknown(3, m, 0.05)))
    d = radius_constant(3, 0.05)
    kb = np.array([0.0, 5.0, 10.0])
    known = RcsKnown(3, 0.05, JamesSteinPlus(3), KnotFunction(kb, np.full(3, d), ConstantD(d)))
    for gamma in (0.0, 3.0):
        assert coverage_unknown(gamma, rcs, outer=FIXED) == pytest.approx(coverage(gamma, known), abs=5e-3)


def sev_unknown_oracle(gamma, rcs):
    p, m, d = rcs.p, rcs.m, rcs.d
    mu = rcs.mu
    wd = stats.chi(m, scale=1 / math.sqrt(m))

    def inner(w):
        # E{(w b(T)/d)^p | W = w} with T = sqrt(V)/(sqrt(p) w), V ~ ncx2
        lim = p * (rcs.k * w) ** 2
        pts = [p * (y * w) ** 2 for y in rcs.b.knots]
        body = sum(integrate.quad(lambda v: (float(rcs.b(math.sqrt(v / p) / w)) / d) ** p
                                  * stats.ncx2.pdf(v, p, gamma * gamma), lo, hi, epsabs=1e-12)[0]
                   for lo, hi in zip(pts[:-1], pts[1:]))
        return w ** p * (body + stats.ncx2.sf(lim, p, gamma * gamma)) * wd.pdf(w)

    val, _ = integrate.quad(inner, 0, 12, points=[0.5, 1.0, 2.0], epsabs=1e-11, limit=200)
    return val / mu


@pytest.mark.parametrize("gamma", [0.0, 2.5])
def test_sev_matches_nested_scipy_oracle(gamma):
    rcs = knot_instance_unknown()
    assert sev_unknown(gamma, rcs) == pytest.approx(sev_unknown_oracle(gamma, rcs), abs=1e-8)


def test_sev_rule_matches_adaptive():
    rcs = knot_instance_unknown()
    rule = SevRule(rcs.p, rcs.m, rcs.b.knots, rcs.d)
    assert rule(rcs.b) == pytest.approx(sev_unknown(0.0, rcs), abs=1e-8)


def test_sev_truncation_audit():
    rcs = knot_instance_unknown()
    assert abs(sev_unknown(0.0, rcs, delta=1e-6) - sev_unknown(0.0, rcs, delta=1e-12)) <= 1e-6


def test_fixed_rule_close_to_progressive():
    rcs = knot_instance_unknown()
    prog = coverage_unknown([0.0, 3.0], rcs)
    fixed = coverage_unknown([0.0, 3.0], rcs, outer=FIXED)
    assert np.max(np.abs(prog - fixed)) < 1e-5


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        psi(0.0, 1.0, RcsUnknown.standard(3, 3))
    with pytest.raises(ValueError):
        OuterQuadConfig(initial_segments=3)
    d = radius_constant_unknown(3, 3, 0.05)
    with pytest.raises(ValueError):
        RcsUnknown(3, 3, 0.05, JamesSteinPlusUnknown(3, 3), ConstantD(d * 0.9))
