"""Special functions and distributions used by the coverage and volume formulas.

Everything here is self-contained: the regularized incomplete gamma and beta
functions are evaluated from their power series and continued fractions, and
quantiles are found by safeguarded bisection with a Newton polish.  The only
imported special function is ``math.lgamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10000


# ---------------------------------------------------------------------------
# incomplete gamma / beta
# ---------------------------------------------------------------------------

def _gamma_series(a: float, x: float) -> float:
    # P(a, x) by its power series; converges quickly for x < a + 1
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    # Q(a, x) by the Legendre continued fraction (modified Lentz)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def beta_fn(a: float, b: float) -> float:
    """Euler beta function B(a, b)."""
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def _beta_cf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x < 0 or x > 1:
        raise ValueError("x must lie in [0, 1]")
    if x == 0:
        return 0.0
    if x == 1:
        return 1.0
    lbt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
           + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(lbt) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(lbt) * _beta_cf(b, a, 1.0 - x) / b


# ---------------------------------------------------------------------------
# root finding for quantiles
# ---------------------------------------------------------------------------

def _invert(q, cdf, sf, pdf, x0, tail=None):
    """Solve cdf(x) = q on [0, inf) for a continuous increasing cdf.

    Bisection keeps a bracket at all times; a Newton step is taken whenever it
    lands inside the bracket.  Upper-tail targets are matched through the
    survival function.  Pass ``tail`` (the upper-tail probability) instead of
    ``q`` when it is too small to survive the subtraction ``1 - tail``.
    """
    if tail is not None:
        upper, target = True, tail
    else:
        upper = q > 0.5
        target = 1.0 - q if upper else q

    def resid(x):
        return (target - sf(x)) if upper else (cdf(x) - target)

    lo, hi = 0.0, max(x0, 1.0)
    while resid(hi) < 0:
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("quantile bracket diverged")
    x = 0.5 * (lo + hi)
    for _ in range(400):
        r = resid(x)
        if r == 0:
            return x
        if r < 0:
            lo = x
        else:
            hi = x
        dens = pdf(x)
        step = r / dens if dens > 0 else math.inf
        xn = x - step
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 1e-15 * max(abs(x), 1e-300) or hi - lo <= 1e-15 * hi:
            return xn
        x = xn
    return x


def _check_prob(q):
    if not (0.0 < q < 1.0):
        raise ValueError(f"probability must lie in (0, 1), got {q!r}")


def _check_df(df):
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df!r}")


# ---------------------------------------------------------------------------
# central chi-square
# ---------------------------------------------------------------------------

def chi2_pdf(x, df):
    """Central chi-square density; accepts scalars or arrays."""
    _check_df(df)
    x = np.asarray(x, dtype=float)
    a = 0.5 * df
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = (a - 1.0) * np.log(x) - 0.5 * x - a * math.log(2.0) - math.lgamma(a)
        out = np.where(x > 0, np.exp(logf), 0.0)
    if df == 2:
        out = np.where(x == 0, 0.5, out)
    elif df == 1:
        out = np.where(x == 0, np.inf, out)
    return out if out.ndim else float(out)


def chi2_cdf(x: float, df: int) -> float:
    """P(Q <= x) for Q ~ chi-square with ``df`` degrees of freedom."""
    _check_df(df)
    if x < 0:
        raise ValueError("x must be nonnegative")
    return gammainc_lower(0.5 * df, 0.5 * x)


def chi2_sf(x: float, df: int) -> float:
    _check_df(df)
    if x < 0:
        raise ValueError("x must be nonnegative")
    return gammainc_upper(0.5 * df, 0.5 * x)


def chi2_quantile(q: float, df: int) -> float:
    """Inverse of :func:`chi2_cdf` in its first argument."""
    _check_prob(q)
    _check_df(df)
    return _invert(q, lambda x: chi2_cdf(x, df), lambda x: chi2_sf(x, df),
                   lambda x: chi2_pdf(x, df), float(df))


def chi2_isf(tail: float, df: int) -> float:
    """x with P(Q > x) = tail; exact for tails far below machine epsilon."""
    _check_prob(tail)
    _check_df(df)
    return _invert(None, lambda x: chi2_cdf(x, df), lambda x: chi2_sf(x, df),
                   lambda x: chi2_pdf(x, df), float(df), tail=tail)


# ---------------------------------------------------------------------------
# noncentral chi-square (Poisson mixture)
# ---------------------------------------------------------------------------

def _poisson_log_weight(j, half_lam):
    if half_lam == 0:
        return 0.0 if j == 0 else -math.inf
    return -half_lam + j * math.log(half_lam) - math.lgamma(j + 1.0)


def nc_chi2_pdf(v, df, lam):
    """Noncentral chi-square density f(v; df, lam).

    The Poisson mixture is summed outward from the modal Poisson index.  Each
    direction stops once the terms are falling and every term has dropped
    below 1e-16 of the running sum, so the mixture is stable for the large
    noncentralities (up to 65**2) reached on the coverage grid.
    """
    _check_df(df)
    if lam < 0:
        raise ValueError("noncentrality must be nonnegative")
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("v must be nonnegative")
    if lam == 0:
        return chi2_pdf(v, df)
    scalar = v.ndim == 0
    v = np.atleast_1d(v)
    half_lam = 0.5 * lam
    pos = v > 0
    logv = np.log(np.where(pos, v, 1.0))

    def term(j):
        a = 0.5 * df + j
        logf = (a - 1.0) * logv - 0.5 * v - a * math.log(2.0) - math.lgamma(a)
        t = np.exp(_poisson_log_weight(j, half_lam) + logf)
        if a == 1.0:
            t = np.where(pos, t, math.exp(_poisson_log_weight(j, half_lam)) * 0.5)
        elif a < 1.0:
            t = np.where(pos, t, np.inf)
        else:
            t = np.where(pos, t, 0.0)
        return t

    j0 = int(math.floor(half_lam))
    total = term(j0)
    prev = total
    j = j0
    while True:
        j += 1
        t = term(j)
        total = total + t
        if np.all((t <= prev) & (t <= _EPS * total)) or j - j0 > 100000:
            break
        prev = t
    prev = term(j0)
    j = j0
    while j > 0:
        j -= 1
        t = term(j)
        total = total + t
        if np.all((t <= prev) & (t <= _EPS * total)):
            break
        prev = t
    return float(total[0]) if scalar else total


def nc_chi2_cdf(v: float, df: int, lam: float) -> float:
    """Noncentral chi-square distribution function F(v; df, lam)."""
    _check_df(df)
    if lam < 0:
        raise ValueError("noncentrality must be nonnegative")
    if v < 0:
        raise ValueError("v must be nonnegative")
    if v == 0:
        return 0.0
    if lam == 0:
        return chi2_cdf(v, df)
    half_lam = 0.5 * lam
    x = 0.5 * v

    def term(j):
        return math.exp(_poisson_log_weight(j, half_lam)) * gammainc_lower(0.5 * df + j, x)

    j0 = int(math.floor(half_lam))
    total = prev = term(j0)
    j = j0
    while True:
        j += 1
        t = term(j)
        total += t
        if t <= prev and t <= _EPS * total:
            break
        prev = t
    prev = term(j0)
    j = j0
    while j > 0:
        j -= 1
        t = term(j)
        total += t
        if t <= prev and t <= _EPS * total:
            break
        prev = t
    return min(total, 1.0)


# ---------------------------------------------------------------------------
# F distribution
# ---------------------------------------------------------------------------

def f_cdf(x: float, df1: int, df2: int) -> float:
    if x <= 0:
        return 0.0
    return betainc(0.5 * df1, 0.5 * df2, df1 * x / (df1 * x + df2))


def f_sf(x: float, df1: int, df2: int) -> float:
    if x <= 0:
        return 1.0
    return betainc(0.5 * df2, 0.5 * df1, df2 / (df1 * x + df2))


def f_pdf(x: float, df1: int, df2: int) -> float:
    if x <= 0:
        return 0.0
    a, b = 0.5 * df1, 0.5 * df2
    logf = (a * math.log(df1) + b * math.log(df2) + (a - 1.0) * math.log(x)
            - (a + b) * math.log(df1 * x + df2)
            - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)))
    return math.exp(logf)


def f_quantile(q: float, df1: int, df2: int) -> float:
    """Quantile of the F distribution with (df1, df2) degrees of freedom."""
    _check_prob(q)
    _check_df(df1)
    _check_df(df2)
    return _invert(q, lambda x: f_cdf(x, df1, df2), lambda x: f_sf(x, df1, df2),
                   lambda x: f_pdf(x, df1, df2), 1.0)


# ---------------------------------------------------------------------------
# direction cosine and scaled chi
# ---------------------------------------------------------------------------

def direction_density(ell, p: int):
    """Density of the cosine between a fixed and a uniformly random direction in R^p."""
    if p < 3:
        raise ValueError("direction density needs p >= 3")
    ell = np.asarray(ell, dtype=float)
    norm = beta_fn(0.5, 0.5 * (p - 1))
    inside = np.abs(ell) <= 1.0
    base = np.clip(1.0 - ell * ell, 0.0, None)
    out = np.where(inside, base ** (0.5 * (p - 3)) / norm, 0.0)
    return out if out.ndim else float(out)


def scaled_chi_moment(p: float, m: int) -> float:
    """E(W**p) for W = sqrt(Q/m), Q ~ chi-square(m)."""
    return math.exp(0.5 * p * math.log(2.0 / m) + math.lgamma(0.5 * (p + m)) - math.lgamma(0.5 * m))


@dataclass(frozen=True)
class ChiSquare:
    df: int

    def __post_init__(self):
        _check_df(self.df)

    def pdf(self, x):
        return chi2_pdf(x, self.df)

    def cdf(self, x):
        return chi2_cdf(x, self.df)

    def sf(self, x):
        return chi2_sf(x, self.df)

    def quantile(self, q):
        return chi2_quantile(q, self.df)


@dataclass(frozen=True)
class NoncentralChiSquare:
    df: int
    lam: float

    def pdf(self, v):
        return nc_chi2_pdf(v, self.df, self.lam)

    def cdf(self, v):
        return nc_chi2_cdf(v, self.df, self.lam)


@dataclass(frozen=True)
class FDist:
    df1: int
    df2: int

    def cdf(self, x):
        return f_cdf(x, self.df1, self.df2)

    def quantile(self, q):
        return f_quantile(q, self.df1, self.df2)


@dataclass(frozen=True)
class DirectionCosineDensity:
    p: int

    def __post_init__(self):
        if self.p < 3:
            raise ValueError("p must be >= 3")

    def __call__(self, ell):
        return direction_density(ell, self.p)


@dataclass(frozen=True)
class ScaledChiDist:
    """Distribution of W = S/sigma, i.e. sqrt(Q/m) with Q ~ chi-square(m)."""

    m: int

    def __post_init__(self):
        _check_df(self.m)

    def pdf(self, w):
        w = np.asarray(w, dtype=float)
        out = np.where(w > 0, 2.0 * self.m * w * chi2_pdf(self.m * w * w, self.m), 0.0)
        if self.m == 1:
            out = np.where(w == 0, math.sqrt(2.0 / math.pi), out)
        return out if out.ndim else float(out)

    def cdf(self, w: float) -> float:
        if w <= 0:
            return 0.0
        return chi2_cdf(self.m * w * w, self.m)

    def sf(self, w: float) -> float:
        if w <= 0:
            return 1.0
        return chi2_sf(self.m * w * w, self.m)

    def quantile(self, q: float) -> float:
        return math.sqrt(chi2_quantile(q, self.m) / self.m)

    def moment(self, p: float) -> float:
        return scaled_chi_moment(p, self.m)
