import math

import numpy as np
import pytest

from rcsphere.known import RcsKnown, coverage
from rcsphere.montecarlo import (McConfig, McEstimate, mc_coverage_known, mc_coverage_unknown, mc_sev_known,
                                 mc_sev_unknown)
from rcsphere.unknown import RcsUnknown

SMALL = McConfig(n_draws=200_000, seed=3)


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(n_draws=10)
    with pytest.raises(ValueError):
        McConfig(n_draws=1001, antithetic=True)


def test_seed_determinism():
    base = RcsKnown.baseline(3)
    a = mc_coverage_known(2.0, base, SMALL)
    b = mc_coverage_known(2.0, base, SMALL)
    assert a == b
    c = mc_coverage_known(2.0, base, McConfig(n_draws=200_000, seed=4))
    assert c.mean != a.mean


def test_standard_sphere_known():
    std = RcsKnown.standard(3)
    est = mc_coverage_known(4.0, std, SMALL)
    assert abs(est.z_score(0.95)) <= 3.5
    sev = mc_sev_known(4.0, std, SMALL)
    assert sev.mean == 1.0 and sev.standard_error == 0.0


def test_standard_sphere_unknown():
    std = RcsUnknown.standard(3, 3)
    assert abs(mc_coverage_unknown(2.0, std, SMALL).z_score(0.95)) <= 3.5
    assert abs(mc_sev_unknown(2.0, std, SMALL).z_score(1.0)) <= 3.5


def test_binomial_standard_error():
    est = mc_coverage_known(1.0, RcsKnown.baseline(3), SMALL)
    assert est.standard_error == pytest.approx(math.sqrt(est.mean * (1 - est.mean) / SMALL.n_draws), rel=1e-3)


def test_rotational_invariance():
    # draw with theta along a random unit vector and compare to the axis-aligned estimator
    base = RcsKnown.baseline(3)
    gamma = 3.0
    ref = mc_coverage_known(gamma, base, SMALL)
    rng = np.random.default_rng(99)
    for _ in range(3):
        u = rng.standard_normal(3)
        theta = gamma * u / np.linalg.norm(u)
        x = rng.standard_normal((SMALL.n_draws, 3)) + theta
        t = np.linalg.norm(x, axis=1) / math.sqrt(3)
        hit = np.linalg.norm(base.a(t)[:, None] * x - theta, axis=1) <= base.b(t)
        mean = hit.mean()
        se = math.sqrt(mean * (1 - mean) / hit.size)
        assert abs(mean - ref.mean) <= 4 * math.hypot(se, ref.standard_error)


def test_antithetic_runs():
    est = mc_coverage_known(1.0, RcsKnown.baseline(3), McConfig(n_draws=100_000, seed=5, antithetic=True))
    assert abs(est.z_score(coverage(1.0, RcsKnown.baseline(3)))) <= 3.5


def test_z_score_zero_se():
    e = McEstimate(1.0, 0.0, 1000, 1)
    assert e.z_score(1.0) == 0.0
    assert e.z_score(2.0) == math.inf
