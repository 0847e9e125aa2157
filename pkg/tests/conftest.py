import numpy as np
import pytest
from scipy import optimize

from rcsphere.knots import (ConstantD, JamesSteinPlus, JamesSteinPlusUnknown, KnotFunction, default_knots_a,
                            default_knots_a_tilde, default_knots_b, default_knots_b_tilde)
from rcsphere.known import RcsKnown, radius_constant
from rcsphere.unknown import RcsUnknown, radius_constant_unknown


def knot_instance(p: int = 3, alpha: float = 0.05) -> RcsKnown:
    """A non-trivial admissible pair on the default knots (arbitrary ordinates)."""
    d = radius_constant(p, alpha)
    js = JamesSteinPlus(p)
    a_vals = np.array([0.55, 0.6, 0.66, 0.75, 0.85, 0.93, 0.97, float(js(10.0))])
    b_vals = d * np.array([0.5, 0.62, 0.9, 0.97, 0.99, 1.0, 1.0])
    a = KnotFunction(default_knots_a(p), a_vals, js)
    b = KnotFunction(default_knots_b(p, alpha), b_vals, ConstantD(d))
    return RcsKnown(p, alpha, a, b)


def knot_instance_unknown(p: int = 3, m: int = 3, alpha: float = 0.05) -> RcsUnknown:
    d = radius_constant_unknown(p, m, alpha)
    js = JamesSteinPlusUnknown(p, m)
    a = KnotFunction(default_knots_a_tilde(p, m), [0.5, 0.55, 0.62, 0.7, 0.8, 0.95, float(js(10.0))], js)
    b = KnotFunction(default_knots_b_tilde(), d * np.array([0.45, 0.8, 0.97, 1.0, 1.0, 1.0]), ConstantD(d))
    return RcsUnknown(p, m, alpha, a, b)


@pytest.fixture
def knot_rcs():
    return knot_instance()


def indicator_intervals(f, lo, hi, n=20_000):
    """Intervals of [lo, hi] where f <= 0, located by a fine scan and brentq."""
    r = np.linspace(lo, hi, n)
    v = np.array([f(x) for x in r])
    out, start = [], (lo if v[0] <= 0 else None)
    for i in range(n - 1):
        if (v[i] <= 0) != (v[i + 1] <= 0):
            root = optimize.brentq(f, r[i], r[i + 1], xtol=1e-14)
            if start is None:
                start = root
            else:
                out.append((start, root))
                start = None
    if start is not None:
        out.append((start, hi))
    return out
