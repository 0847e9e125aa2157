import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import PchipInterpolator

from rcsphere.distributions import chi2_quantile
from rcsphere.knots import (BStar, ConstantD, JamesSteinPlus, JamesSteinPlusUnknown, KnotFunction,
                            a_tilde_zero_boundary, baseline_b_star, default_knots_a, default_knots_a_tilde,
                            default_knots_b, default_knots_b_tilde, knot_function_from)

D3 = math.sqrt(chi2_quantile(0.95, 3))


def test_constant_data_reproduced():
    f = KnotFunction([0.0, 1.0], [0.4, 0.4], ConstantD(0.4))
    assert f(0.37) == 0.4


def test_linear_data_reproduced():
    f = KnotFunction([0.0, 1.0, 2.0], [0.0, 1.0, 2.0], ConstantD(2.0))
    assert f(1.5) == pytest.approx(1.5, abs=1e-12)
    xs = np.linspace(0, 2, 101)
    assert np.max(np.abs(f(xs) - xs)) <= 1e-12


def test_james_stein_tails():
    assert JamesSteinPlus(3)(1.0) == pytest.approx(2 / 3, abs=1e-15)
    js = JamesSteinPlus(5)
    assert js(js.zero_boundary) == 0.0
    xs = np.linspace(js.zero_boundary, 20, 1000)
    assert np.all(np.diff(js(xs)) >= 0)
    jsu = JamesSteinPlusUnknown(3, 3)
    assert jsu(2.0) == pytest.approx(1 - (1 / 3) * (3 / 5) / 4, abs=1e-15)
    assert jsu(a_tilde_zero_boundary(3, 3)) == pytest.approx(0.0, abs=1e-15)


def test_eval_rejects_negative():
    with pytest.raises(ValueError):
        JamesSteinPlus(3).eval(-0.1)
    with pytest.raises(ValueError):
        KnotFunction([0.0, 1.0], [0.4, 0.4], ConstantD(0.4)).eval(-1.0)


@pytest.mark.parametrize("bad", [
    ([0.0, 1.0, 0.5], [0.1, 0.2, 0.4]),
    ([0.1, 1.0], [0.1, 0.4]),
    ([0.0, 1.0], [0.5, 0.4]),
    ([0.0, 1.0], [0.1, 0.3]),
])
def test_knot_function_validation(bad):
    with pytest.raises(ValueError):
        KnotFunction(bad[0], bad[1], ConstantD(0.4))


def test_matches_scipy_pchip():
    knots = default_knots_b(3, 0.05)
    vals = np.array([1.2, 1.3, 2.0, 2.7, 2.75, 2.79, D3])
    f = KnotFunction(knots, vals, ConstantD(D3))
    xs = np.linspace(0, 10, 3001)
    assert np.max(np.abs(f(xs) - PchipInterpolator(knots, vals)(xs))) <= 1e-13


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=7, max_size=7))
def test_monotone_and_continuous(incs):
    knots = default_knots_b(3, 0.05)
    vals = np.cumsum([0.01] + incs[:-1])
    vals = vals * D3 / max(vals[-1], D3)
    vals = np.append(vals[:-1], D3)
    vals = np.minimum(np.maximum.accumulate(vals), D3)
    f = KnotFunction(knots, vals, ConstantD(D3))
    xs = np.linspace(0, 12, 10_000)
    ys = f(xs)
    assert np.all(np.diff(ys) >= -1e-12)
    assert ys.max() <= D3 + 1e-12
    assert abs(f(10 - 1e-13) - D3) <= 1e-12


def test_default_knots_a():
    kn = default_knots_a(3)
    r0, tau = math.sqrt(1 / 3), 5 - math.sqrt(1 / 3)
    assert kn == pytest.approx([0, r0, r0 + tau / 10, r0 + tau / 5, r0 + 2 * tau / 5, 5, 7.5, 10], abs=1e-14)
    assert default_knots_a(4)[1] == pytest.approx(math.sqrt(0.5), abs=1e-15)
    for p in range(3, 26):
        assert np.all(np.diff(default_knots_a(p)) > 0)


def test_default_knots_b():
    kn = default_knots_b(3, 0.05)
    assert kn[1] == pytest.approx(1.6140, abs=1e-4)
    assert kn[-1] == 10.0
    assert kn.size == 7
    for p in range(3, 26):
        assert np.all(np.diff(default_knots_b(p, 0.05)) > 0)


def test_default_knots_tilde():
    kn = default_knots_a_tilde(3, 3)
    assert kn[1] == pytest.approx(math.sqrt(3 / 15), abs=1e-12)
    assert list(kn[-2:]) == [5.0, 10.0]
    assert kn.size == 7
    assert np.all(np.diff(default_knots_a_tilde(5, 10)) > 0)
    alt = default_knots_a_tilde(3, 3, printed=True)
    assert alt[1] == pytest.approx(math.sqrt(6 / 15), abs=1e-12)
    assert np.all(np.diff(alt) > 0)
    assert list(default_knots_b_tilde()) == [0, 2, 4, 6, 8, 10]


def test_b_star():
    b = baseline_b_star(3, 0.05)
    assert b(0.0) == b(b.breakpoint)
    assert b(1e6) == pytest.approx(b.d, rel=1e-10)
    s = 1 - 1 / (3 * 4.0)
    assert b(2.0) == pytest.approx(math.sqrt(s * (D3 ** 2 - 3 * math.log(s))), abs=1e-14)
    xs = np.linspace(0, 50, 5000)
    assert np.all(np.diff(b(xs)) >= 0)
    with pytest.raises(ValueError):
        BStar(5, 1.0)


def test_sampled_interpolant_keeps_floor():
    tail = JamesSteinPlus(3)
    a = knot_function_from(tail, default_knots_a(3), tail, floor=1e-8)
    assert a.values[0] == 1e-8 and a.values[1] == 1e-8
    assert a.values[-1] == tail(10.0)
    assert a(12.0) == tail(12.0)
