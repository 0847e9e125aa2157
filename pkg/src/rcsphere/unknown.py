"""Coverage probability and scaled expected volume when the error variance is estimated.

Here ``S^2`` is independent of ``X``, ``m S^2 / sigma^2 ~ chi2_m`` and
``W = S / sigma``.  The set is
``{theta : ||a(T) X - theta|| <= S b(T)}`` with ``T = ||X|| / (sqrt(p) S)``.

Conditional on ``W = w`` it is a known-variance set with center function
``t -> a(t / w)``, radius function ``t -> w b(t / w)``, tail threshold
``k w`` and limiting radius ``w d``; :func:`psi` evaluates that conditional
coverage with the kernel of :mod:`rcsphere.known`.  Integrating over W is
split at ``w = 1``: ``[0, 1]`` directly against the density of W, and
``[1, inf)`` after the change of variable ``x = F_W(w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import integrate

from . import kernel
from .distributions import ScaledChiDist, chi2_isf, chi2_quantile, f_quantile, nc_chi2_pdf, scaled_chi_moment
from .known import DEFAULT_CONFIG, NumericalError, QuadratureConfig, radial_truncation
from .knots import DEFAULT_K, ConstantD, JamesSteinPlusUnknown, KnotFunction, scale_packed


def radius_constant_unknown(p: int, m: int, alpha: float) -> float:
    """d~ with P(G <= d~^2 / p) = 1 - alpha for G ~ F(p, m)."""
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    return math.sqrt(p * f_quantile(1.0 - alpha, p, m))


@dataclass(frozen=True, eq=False)
class RcsUnknown:
    """Unknown-variance recentered sphere with center function ``a`` and radius function ``b``."""

    p: int
    m: int
    alpha: float
    a: object
    b: object
    k: float = DEFAULT_K
    d: float = field(default=None)

    def __post_init__(self):
        if self.p < 3 or self.m < 1:
            raise ValueError("need p >= 3 and m >= 1")
        d_true = radius_constant_unknown(self.p, self.m, self.alpha)
        if self.d is None:
            object.__setattr__(self, "d", d_true)
        elif abs(self.d - d_true) > 1e-8 * d_true:
            raise ValueError(f"d={self.d!r} inconsistent with p={self.p}, m={self.m}, alpha={self.alpha}")
        tb = getattr(self.b, "tail_function", None)
        if not isinstance(tb, ConstantD) or abs(tb.value - self.d) > 1e-10 * self.d:
            raise ValueError("radius function must equal d beyond k")
        if isinstance(self.b, KnotFunction):
            if abs(self.b.k - self.k) > 1e-12:
                raise ValueError("radius function threshold must equal k")
            if self.b.values.max() > self.d * (1 + 1e-12):
                raise ValueError("radius function exceeds d")
        if isinstance(self.a, KnotFunction) and abs(self.a.k - self.k) > 1e-12:
            raise ValueError("center function threshold must equal k")

    @classmethod
    def standard(cls, p: int, m: int, alpha: float = 0.05, k: float = DEFAULT_K) -> "RcsUnknown":
        d = radius_constant_unknown(p, m, alpha)
        return cls(p, m, alpha, ConstantD(1.0), ConstantD(d), k)

    @classmethod
    def shrinkage_constant_radius(cls, p: int, m: int, alpha: float = 0.05,
                                  k: float = DEFAULT_K) -> "RcsUnknown":
        """Center by the positive-part shrinkage factor, radius fixed at d~."""
        d = radius_constant_unknown(p, m, alpha)
        return cls(p, m, alpha, JamesSteinPlusUnknown(p, m), ConstantD(d), k)

    @cached_property
    def w_dist(self) -> ScaledChiDist:
        return ScaledChiDist(self.m)

    @cached_property
    def mu(self) -> float:
        """E(W^p)."""
        return scaled_chi_moment(self.p, self.m)


@dataclass(frozen=True)
class OuterQuadConfig:
    """Progressive Simpson rule over W: segments double until successive
    estimates agree to ``rel_stop``.  ``fixed_segments`` switches to one
    composite rule with that many segments (used inside the optimizer)."""

    rel_stop: float = 1e-8
    max_doublings: int = 16
    initial_segments: int = 8
    fixed_segments: int | None = None

    def __post_init__(self):
        if self.rel_stop <= 0:
            raise ValueError("rel_stop must be positive")
        if self.initial_segments < 2 or self.initial_segments % 2:
            raise ValueError("initial_segments must be a positive even number")
        if self.fixed_segments is not None and (self.fixed_segments < 2 or self.fixed_segments % 2):
            raise ValueError("fixed_segments must be a positive even number")


DEFAULT_OUTER = OuterQuadConfig()


class ConvergenceError(ArithmeticError):
    """The progressive outer rule did not meet its stopping criterion."""


class PsiEvaluator:
    """Conditional coverage psi(w, gamma) on a fixed gamma grid, memoised in w.

    The tail part ``c* - c+`` depends only on (p, m, k, alpha) and the tail
    rule of ``a``, so it is cached per w and survives :meth:`rebind` to new
    center/radius functions with the same tails.
    """

    def __init__(self, rcs: RcsUnknown, gammas: Sequence[float], cfg: QuadratureConfig = DEFAULT_CONFIG):
        self.gammas = np.ascontiguousarray(np.atleast_1d(np.asarray(gammas, dtype=float)))
        if np.any(self.gammas < 0):
            raise ValueError("gamma must be nonnegative")
        self.cfg = cfg
        self.l_r, self.u_r = radial_truncation(rcs.p, cfg.delta)
        self._tails: dict[float, np.ndarray] = {}
        self._tail_key = None
        self.rebind(rcs)

    def rebind(self, rcs: RcsUnknown) -> None:
        key = (rcs.p, rcs.m, rcs.k, rcs.d, rcs.a.tail_function)
        if key != self._tail_key:
            self._tails.clear()
            self._tail_key = key
        self.rcs = rcs
        self._pa = rcs.a.packed()
        self._pb = rcs.b.packed()
        self._pa_tail = rcs.a.tail_function.packed()
        self._pb_tail = ConstantD(rcs.d).packed()
        self._values: dict[float, np.ndarray] = {}

    def tail(self, w: float) -> np.ndarray:
        out = self._tails.get(w)
        if out is None:
            rcs, kc = self.rcs, self.cfg.kernel_cfg
            pa = scale_packed(self._pa_tail, w, 1.0)
            pb = scale_packed(self._pb_tail, w, w)
            star = kernel.components(self.gammas, pa, pb, rcs.p, rcs.k * w, self.l_r, self.u_r, False, kc)
            plus = kernel.components(self.gammas, pa, pb, rcs.p, rcs.k * w, self.l_r, self.u_r, True, kc)
            out = np.asarray(star) - np.asarray(plus)
            self._tails[w] = out
        return out

    def __call__(self, w: float) -> np.ndarray:
        """psi(w, gamma) for every gamma on the grid."""
        w = float(w)
        if w <= 0:
            raise ValueError("w must be positive")
        out = self._values.get(w)
        if out is None:
            rcs = self.rcs
            pa = scale_packed(self._pa, w, 1.0)
            pb = scale_packed(self._pb, w, w)
            c = kernel.components(self.gammas, pa, pb, rcs.p, rcs.k * w, self.l_r, self.u_r,
                                  True, self.cfg.kernel_cfg)
            out = np.asarray(c) + self.tail(w)
            if not np.all(np.isfinite(out)):
                raise NumericalError(f"non-finite conditional coverage at w={w}")
            self._values[w] = out
        return out


def psi(w: float, gamma, rcs: RcsUnknown, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """Coverage of the set conditional on W = w."""
    vals = PsiEvaluator(rcs, np.atleast_1d(gamma), cfg)(w)
    return vals if np.ndim(gamma) else float(vals[0])


def _simpson(vals: np.ndarray, h: float) -> np.ndarray:
    return h / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum(axis=0) + 2.0 * vals[2:-1:2].sum(axis=0))


class _Part:
    """One of the two outer integrals; integrand(node) -> array over gamma."""

    def __init__(self, lo, hi, integrand):
        self.lo, self.hi, self.integrand = lo, hi, integrand
        self.cache: dict[int, np.ndarray] = {}

    def estimate(self, n: int) -> np.ndarray:
        # nodes are indexed on the finest grid seen so far through exact fractions
        h = (self.hi - self.lo) / n
        vals = []
        for j in range(n + 1):
            g = math.gcd(j, n)
            key = (j // g, n // g)
            v = self.cache.get(key)
            if v is None:
                v = self.integrand(self.lo + j * h if j < n else self.hi, j == n)
                self.cache[key] = v
            vals.append(v)
        return _simpson(np.asarray(vals), h)


def _parts(ev: PsiEvaluator, rcs: RcsUnknown):
    wd = rcs.w_dist
    ng = ev.gammas.size

    def first(w, _end):
        if w <= 0.0:
            return np.zeros(ng)
        return ev(w) * float(wd.pdf(w))

    x1 = wd.cdf(1.0)
    # start where W has mass: dropping [0, w0) costs at most delta/2 since psi <= 1,
    # and keeps a concentrated W (large m) resolvable by the fixed rule
    eps = 0.5 * ev.cfg.delta
    w0 = float(wd.quantile(eps)) if x1 > eps else 1.0

    def second(x, at_end):
        if at_end:
            return np.ones(ng)
        return ev(wd.quantile(x))

    return _Part(w0, 1.0, first), _Part(x1, 1.0, second)


def coverage_unknown(gamma, rcs: RcsUnknown, cfg: QuadratureConfig = DEFAULT_CONFIG,
                     outer: OuterQuadConfig = DEFAULT_OUTER, evaluator: PsiEvaluator | None = None):
    """Coverage probability at ||theta|| / sigma = gamma (scalar or array).

    With an array, both outer integrals are refined jointly until every
    gamma meets the stopping rule.  ``evaluator`` may be a
    :class:`PsiEvaluator` already bound to ``rcs`` and the same gammas.
    """
    ev = evaluator if evaluator is not None else PsiEvaluator(rcs, np.atleast_1d(gamma), cfg)
    total = np.zeros(ev.gammas.size)
    for part in _parts(ev, rcs):
        if outer.fixed_segments is not None:
            total += part.estimate(outer.fixed_segments)
            continue
        n = outer.initial_segments
        prev = part.estimate(n)
        for _ in range(outer.max_doublings):
            n *= 2
            cur = part.estimate(n)
            denom = np.where(cur != 0.0, np.abs(cur), 1.0)
            if np.all(np.abs(cur - prev) <= outer.rel_stop * denom):
                prev = cur
                break
            prev = cur
        else:
            raise ConvergenceError("outer Simpson rule did not converge")
        total += prev
    bound = 2.0 * cfg.delta + 1e-8
    if np.any(total < -bound) or np.any(total > 1.0 + bound):
        raise NumericalError(f"coverage outside [0, 1]: {total}")
    return total if np.ndim(gamma) else float(total[0])


# ---------------------------------------------------------------------------
# scaled expected volume
# ---------------------------------------------------------------------------

def scale_truncation(p: int, m: int, delta: float) -> tuple[float, float]:
    """Cut points for the size-biased scale w^p f_W(w) / mu, i.e. sqrt(chi2_{m+p} / m)."""
    mu = scaled_chi_moment(p, m)
    tail = 0.5 * delta / mu
    lo = 0.0 if m + p <= 10 else math.sqrt(chi2_quantile(tail, m + p) / m)
    hi = math.sqrt(chi2_isf(tail, m + p) / m)
    return lo, hi


def _radius_panels(b, k):
    if isinstance(b, KnotFunction):
        return list(zip(b.knots[:-1], b.knots[1:]))
    if isinstance(b, ConstantD):
        return []
    raise TypeError(f"unsupported radius function {type(b).__name__}")


def _biased_scale_pdf(w, p, m):
    # density of sqrt(chi2_{m+p} / m): proportional to w^p f_W(w)
    nu = m + p
    lw = (math.log(2.0) + 0.5 * nu * math.log(0.5 * m) - math.lgamma(0.5 * nu)
          + (nu - 1) * np.log(w) - 0.5 * m * w * w)
    return np.exp(lw)


def sev_unknown(gamma: float, rcs: RcsUnknown, delta: float = 1e-10, tol: float = 1e-10,
                inner_order: int = 48) -> float:
    """Scaled expected volume E{W^p b(T)^p} / (mu d^p) at ||theta|| / sigma = gamma.

    Written as ``1 - E'[ int_0^k (1 - (b(x)/d)^p) f(p w^2 x^2; p, gamma^2) 2 p w^2 x dx ]``
    where the outer expectation is over the size-biased scale, truncated at
    tail probability ``delta / (2 mu)`` on each side.  The inner integral is
    split at the radius knots (the integrand is analytic on each piece) and
    done by Gauss-Legendre; the outer one is adaptive.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    p, m, b, d = rcs.p, rcs.m, rcs.b, rcs.d
    panels = _radius_panels(b, rcs.k)
    if not panels:
        return 1.0
    lam = gamma * gamma
    lo_w, hi_w = scale_truncation(p, m, delta)
    gx, gw = np.polynomial.legendre.leggauss(inner_order)
    xs = np.concatenate([0.5 * (x1 - x0) * gx + 0.5 * (x1 + x0) for x0, x1 in panels])
    xw = np.concatenate([0.5 * (x1 - x0) * gw for x0, x1 in panels])
    deficit = xw * (1.0 - (np.asarray(b(xs), dtype=float) / d) ** p) * 2.0 * p * xs

    def inner(w):
        dens = nc_chi2_pdf(p * w * w * xs * xs, p, lam)
        return float(deficit @ dens) * w * w * float(_biased_scale_pdf(w, p, m))

    mode = math.sqrt((m + p - 1.0) / m)
    pts = [x for x in (0.5 * mode, mode, 2.0 * mode) if lo_w < x < hi_w]
    val, _ = integrate.quad(inner, lo_w, hi_w, points=pts or None, epsabs=tol * 1e-2, epsrel=tol, limit=200)
    out = 1.0 - val
    if not math.isfinite(out):
        raise NumericalError("non-finite scaled expected volume")
    return out


class SevRule:
    """Fixed tensor Gauss-Legendre rule for the scaled expected volume at one gamma.

    The kernel matrix is precomputed for a given set of radius knots, so
    evaluating the volume for new knot ordinates is a single dot product.
    Used as the optimizer's objective; checked against :func:`sev_unknown`.
    """

    def __init__(self, p: int, m: int, knots: Sequence[float], d: float, gamma: float = 0.0,
                 delta: float = 1e-10, x_order: int = 24, w_panels: int = 24, w_order: int = 16):
        self.p, self.d = p, d
        knots = np.asarray(knots, dtype=float)
        gx, gw = np.polynomial.legendre.leggauss(x_order)
        xs, xw = [], []
        for x0, x1 in zip(knots[:-1], knots[1:]):
            xs.append(0.5 * (x1 - x0) * gx + 0.5 * (x1 + x0))
            xw.append(0.5 * (x1 - x0) * gw)
        self.x = np.concatenate(xs)
        xw = np.concatenate(xw)
        lo, hi = scale_truncation(p, m, delta)
        gx2, gw2 = np.polynomial.legendre.leggauss(w_order)
        edges = np.linspace(lo, hi, w_panels + 1)
        ws = np.concatenate([0.5 * (b - a) * gx2 + 0.5 * (b + a) for a, b in zip(edges[:-1], edges[1:])])
        ww = np.concatenate([0.5 * (b - a) * gw2 for a, b in zip(edges[:-1], edges[1:])])
        ww = ww * _biased_scale_pdf(ws, p, m)
        v = p * np.outer(ws * ws, self.x * self.x)
        dens = nc_chi2_pdf(v.ravel(), p, gamma * gamma).reshape(v.shape)
        kern = dens * 2.0 * p * np.outer(ws * ws, self.x)
        self.weights = (ww @ kern) * xw

    def __call__(self, b) -> float:
        vals = np.asarray(b(self.x), dtype=float)
        return float(1.0 - self.weights @ (1.0 - (vals / self.d) ** self.p))


def sev_unknown_curve(gammas, rcs: RcsUnknown, delta: float = 1e-10) -> np.ndarray:
    return np.array([sev_unknown(float(g), rcs, delta) for g in gammas])
