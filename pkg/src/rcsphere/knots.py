"""Center and radius functions.

A center function ``a`` or radius function ``b`` is nondecreasing on
``[0, inf)``.  On ``[0, k]`` it is the monotone piecewise cubic Hermite
interpolant (Fritsch-Carlson slopes with the weighted harmonic mean used by
MATLAB/SciPy ``pchip``) of ordinates at fixed knots; for ``x >= k`` it follows
a prescribed tail rule.

Every function object here is callable on arrays and also knows how to pack
itself into the flat float64 record consumed by the compiled kernel (see
:data:`PACK_HEADER`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distributions import chi2_quantile

# packed-record layout shared with the kernels
KIND_KNOT, KIND_JS, KIND_CONST, KIND_BSTAR = 0, 1, 2, 3
TAIL_CONST, TAIL_JS = 0, 1
PACK_HEADER = 10
(_I_KIND, _I_N, _I_TAIL_KIND, _I_TAIL_PARAM, _I_K, _I_BP, _I_BD,
 _I_SIN, _I_SOUT, _I_PARAM) = range(PACK_HEADER)

DEFAULT_K = 10.0


def _packed(kind, n=0, tail_kind=0, tail_param=0.0, k=0.0, bp=0.0, bd=0.0,
            param=0.0, x=(), y=(), m=()):
    head = [kind, n, tail_kind, tail_param, k, bp, bd, 1.0, 1.0, param]
    return np.ascontiguousarray(np.concatenate([head, x, y, m]), dtype=np.float64)


def scale_packed(packed: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """Packed record of ``t -> outer * f(t / inner)``."""
    out = packed.copy()
    out[_I_SIN] = packed[_I_SIN] * inner
    out[_I_SOUT] = packed[_I_SOUT] * outer
    return out


# ---------------------------------------------------------------------------
# Fritsch-Carlson monotone Hermite slopes
# ---------------------------------------------------------------------------

def pchip_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Knot derivatives of the shape-preserving piecewise cubic Hermite interpolant.

    Interior slopes are the weighted harmonic mean of neighbouring secants
    (zero at local extrema or flat secants); end slopes use the one-sided
    three-point formula, clipped so that monotonicity is kept.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h = np.diff(x)
    delta = np.diff(y) / h
    n = x.size
    if n == 2:
        return np.array([delta[0], delta[0]])
    d = np.zeros(n)
    for i in range(1, n - 1):
        d0, d1 = delta[i - 1], delta[i]
        if d0 == 0 or d1 == 0 or np.sign(d0) != np.sign(d1):
            d[i] = 0.0
        else:
            w1 = 2 * h[i] + h[i - 1]
            w2 = h[i] + 2 * h[i - 1]
            d[i] = (w1 + w2) / (w1 / d0 + w2 / d1)
    d[0] = _edge_slope(h[0], h[1], delta[0], delta[1])
    d[-1] = _edge_slope(h[-1], h[-2], delta[-1], delta[-2])
    return d


def _edge_slope(h0, h1, m0, m1):
    d = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
    if np.sign(d) != np.sign(m0):
        return 0.0
    if np.sign(m0) != np.sign(m1) and abs(d) > 3 * abs(m0):
        return 3 * m0
    return d


def hermite_eval(x, y, m, u):
    """Evaluate the cubic Hermite interpolant with knots x, values y, slopes m."""
    u = np.asarray(u, dtype=float)
    i = np.clip(np.searchsorted(x, u, side="right") - 1, 0, x.size - 2)
    h = x[i + 1] - x[i]
    s = (u - x[i]) / h
    s2 = s * s
    s3 = s2 * s
    return (y[i] * (2 * s3 - 3 * s2 + 1) + h * m[i] * (s3 - 2 * s2 + s)
            + y[i + 1] * (3 * s2 - 2 * s3) + h * m[i + 1] * (s3 - s2))


# ---------------------------------------------------------------------------
# exact functions (also used as tail rules)
# ---------------------------------------------------------------------------

class _Exact:
    """Common surface of closed-form functions on [0, inf)."""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self._eval(x)
        return out if out.ndim else float(out)

    def eval(self, x: float) -> float:
        if x < 0:
            raise ValueError("functions are defined on [0, inf)")
        return float(self._eval(np.asarray(float(x))))

    @property
    def tail_function(self):
        """Function that governs ``x >= k``; closed forms are their own tail."""
        return self


@dataclass(frozen=True)
class JamesSteinPlus(_Exact):
    """Positive-part James-Stein shrinkage factor max{0, 1 - (1 - 2/p)/x^2}."""

    p: int

    @property
    def coef(self) -> float:
        return 1.0 - 2.0 / self.p

    @property
    def zero_boundary(self) -> float:
        return math.sqrt(self.coef)

    def _eval(self, x):
        # compare against the boundary itself so a(boundary) is exactly 0
        with np.errstate(divide="ignore"):
            return np.where(x > self.zero_boundary, np.maximum(0.0, 1.0 - self.coef / (x * x)), 0.0)

    def packed(self):
        return _packed(KIND_JS, param=self.coef)

    def describe(self):
        return {"tail": "james-stein-plus", "p": self.p}


@dataclass(frozen=True)
class JamesSteinPlusUnknown(JamesSteinPlus):
    """Unknown-variance analogue max{0, 1 - (1 - 2/p) m/(m + 2) / x^2}."""

    m: int = 1

    @property
    def coef(self) -> float:
        return (1.0 - 2.0 / self.p) * self.m / (self.m + 2.0)

    def describe(self):
        return {"tail": "james-stein-plus-unknown", "p": self.p, "m": self.m}


@dataclass(frozen=True)
class ConstantD(_Exact):
    """Constant function (the fixed radius beyond the tail threshold)."""

    value: float

    def _eval(self, x):
        return np.full_like(x, self.value, dtype=float)

    def packed(self):
        return _packed(KIND_CONST, param=self.value)

    def describe(self):
        return {"tail": "constant", "value": self.value}


TailRule = JamesSteinPlus | JamesSteinPlusUnknown | ConstantD


@dataclass(frozen=True)
class BStar(_Exact):
    """Empirical-Bayes radius function of the classical recentered sphere.

    Constant on [0, d/sqrt(p)], then increases towards ``d`` without reaching
    it, so it has no finite tail threshold.
    """

    p: int
    d: float

    def __post_init__(self):
        if 1.0 - (self.p - 2) / self.d ** 2 <= 0:
            raise ValueError("b* needs d^2 > p - 2")

    @property
    def breakpoint(self) -> float:
        return self.d / math.sqrt(self.p)

    def _eval(self, x):
        p, d = self.p, self.d
        xx = np.maximum(x, self.breakpoint)
        s = 1.0 - (p - 2) / (p * xx * xx)
        return np.sqrt(s * (d * d - p * np.log(s)))

    @property
    def tail_function(self):
        return None

    def packed(self):
        return _packed(KIND_BSTAR, bp=self.p, bd=self.d)


def baseline_b_star(p: int, alpha: float) -> BStar:
    """b* for dimension p and level 1 - alpha."""
    if p < 3:
        raise ValueError("p must be >= 3")
    d = math.sqrt(chi2_quantile(1.0 - alpha, p))
    return BStar(p, d)


# ---------------------------------------------------------------------------
# knot functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KnotFunction:
    """Monotone Hermite interpolant on [0, k] joined continuously to a tail rule."""

    knots: np.ndarray
    values: np.ndarray
    tail: TailRule
    slopes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        values = np.array(self.values, dtype=float)
        if knots.ndim != 1 or knots.size < 2 or knots.size != values.size:
            raise ValueError("need at least two knots with one value each")
        if knots[0] != 0.0:
            raise ValueError("the first knot must be 0")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(np.diff(values) < 0):
            raise ValueError("knot values must be nondecreasing")
        k = knots[-1]
        tk = float(self.tail(k))
        if abs(values[-1] - tk) > 1e-12 * max(1.0, abs(tk)):
            raise ValueError(f"last value {values[-1]!r} does not match tail({k}) = {tk!r}")
        knots.setflags(write=False)
        values.setflags(write=False)
        slopes = pchip_slopes(knots, values)
        slopes.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "slopes", slopes)

    @property
    def k(self) -> float:
        return float(self.knots[-1])

    @property
    def tail_function(self):
        return self.tail

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inner = hermite_eval(self.knots, self.values, self.slopes, np.minimum(x, self.k))
        out = np.where(x >= self.k, self.tail(x), inner)
        return out if out.ndim else float(out)

    def eval(self, x: float) -> float:
        if x < 0:
            raise ValueError("functions are defined on [0, inf)")
        return float(self(float(x)))

    def with_values(self, values: Sequence[float]) -> "KnotFunction":
        return KnotFunction(self.knots, values, self.tail)

    def packed(self) -> np.ndarray:
        if isinstance(self.tail, ConstantD):
            tail_kind, tail_param = TAIL_CONST, self.tail.value
        else:
            tail_kind, tail_param = TAIL_JS, self.tail.coef
        return _packed(KIND_KNOT, n=self.knots.size, tail_kind=tail_kind,
                       tail_param=tail_param, k=self.k,
                       x=self.knots, y=self.values, m=self.slopes)


def knot_function_from(fn, knots: Sequence[float], tail: TailRule, floor: float = 0.0) -> KnotFunction:
    """Sample ``fn`` at ``knots`` (the last ordinate is taken from the tail)."""
    knots = np.asarray(knots, dtype=float)
    vals = np.maximum(np.asarray(fn(knots), dtype=float), floor)
    vals[-1] = float(tail(knots[-1]))
    vals = np.minimum(np.maximum.accumulate(vals), vals[-1])
    return KnotFunction(knots, vals, tail)


# ---------------------------------------------------------------------------
# default knot recipes
# ---------------------------------------------------------------------------

def _check_increasing(knots):
    knots = np.asarray(knots, dtype=float)
    if np.any(np.diff(knots) <= 0):
        raise ValueError(f"knot recipe produced non-increasing knots: {knots}")
    return knots


def default_knots_a(p: int, k: float = DEFAULT_K) -> np.ndarray:
    """Eight knots for the center function, two of them at 0 and at the a+ zero boundary."""
    if p < 3:
        raise ValueError("p must be >= 3")
    r0 = math.sqrt(1.0 - 2.0 / p)
    if k <= 2 * r0:
        raise ValueError("k too small for the knot recipe")
    tau = k / 2 - r0
    return _check_increasing([0.0, r0, r0 + tau / 10, r0 + 2 * tau / 10,
                              r0 + 4 * tau / 10, k / 2, 3 * k / 4, k])


def default_knots_b(p: int, alpha: float, k: float = DEFAULT_K) -> np.ndarray:
    """Seven knots for the radius function; the second sits where b* stops being flat."""
    d = math.sqrt(chi2_quantile(1.0 - alpha, p))
    y1 = d / math.sqrt(p)
    if y1 >= k / 2:
        raise ValueError("d/sqrt(p) must be below k/2")
    xi = k / 2 - y1
    return _check_increasing([0.0, y1, y1 + xi / 3, y1 + 2 * xi / 3, k / 2, 3 * k / 4, k])


def a_tilde_zero_boundary(p: int, m: int, printed: bool = False) -> float:
    """Point below which the unknown-variance shrinkage factor is zero.

    ``printed=True`` returns the alternative placement that carries an extra
    factor 2 inside the square root.
    """
    base = (p - 2) * m / (p * (m + 2.0))
    return math.sqrt(2 * base if printed else base)


def default_knots_a_tilde(p: int, m: int, k: float = DEFAULT_K, printed: bool = False) -> np.ndarray:
    if p < 3 or m < 1:
        raise ValueError("need p >= 3 and m >= 1")
    r0 = a_tilde_zero_boundary(p, m, printed)
    step = (k / 2 - r0) / 4
    return _check_increasing([0.0, r0, r0 + step, r0 + 2 * step, r0 + 3 * step, k / 2, k])


def default_knots_b_tilde(k: float = DEFAULT_K) -> np.ndarray:
    return _check_increasing(np.linspace(0.0, k, 6))
