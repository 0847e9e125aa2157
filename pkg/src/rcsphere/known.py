"""Coverage probability and scaled expected volume for known error variance.

With sigma^2 = 1, ``X ~ N(theta, I_p)`` and ``T = ||X|| / sqrt(p)``, the
recentered sphere is ``J(a, b) = {theta : ||a(T) X - theta|| <= b(T)}``.

Coverage is assembled as ``c + c* - c+``:

* ``c``   probability of the event with (a, b) and ``T < k``;
* ``c*``  probability of the event with the tail pair (a+, d) and no limit on T;
* ``c+``  probability of the event with the tail pair and ``T < k``.

Each piece is an integral over the direction cosine L of a radial probability
``v(l) = sum_i F_p(u_i^2) - F_p(l_i^2)`` taken over the disjoint r-intervals
where the event holds, with R = ||X - theta|| truncated to
``[l_r, u_r]`` at chi-square tail probability ``delta / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from . import kernel
from .distributions import chi2_isf, chi2_quantile, nc_chi2_pdf
from .knots import DEFAULT_K, BStar, ConstantD, JamesSteinPlus, KnotFunction, baseline_b_star


class Mode(str, Enum):
    C = "C"
    C_PLUS = "C_PLUS"
    C_STAR = "C_STAR"


class NumericalError(ArithmeticError):
    """A quadrature produced a non-finite or out-of-range value."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Accuracy knobs for the coverage integral.

    ``n_grid`` cells scan each admissible r-range for sign changes of h (local
    extrema between grid points are polished as well, so narrow dips are not
    lost); roots are refined to ``root_tol``.  The direction-cosine integral
    is cut where the interval structure changes (``n_scan`` probes, bisection
    to ``ell_tol``); each panel, at most ``max_width`` wide, is integrated by
    adaptive Gauss-Kronrod to absolute error ``eps_abs`` per unit of width.
    """

    delta: float = 1e-10
    n_grid: int = 48
    root_tol: float = 1e-12
    n_scan: int = 24
    ell_tol: float = 1e-10
    max_width: float = 0.5
    eps_abs: float = 1e-10

    def __post_init__(self):
        if not (0 < self.delta <= 1e-3):
            raise ValueError("delta must lie in (0, 1e-3]")
        for name in ("n_grid", "n_scan"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if min(self.root_tol, self.ell_tol, self.max_width, self.eps_abs) <= 0:
            raise ValueError("tolerances must be positive")

    @property
    def kernel_cfg(self) -> tuple:
        return (int(self.n_grid), float(self.root_tol), int(self.n_scan), float(self.ell_tol),
                float(self.max_width), float(self.eps_abs))


DEFAULT_CONFIG = QuadratureConfig()


def radius_constant(p: int, alpha: float) -> float:
    """Radius d of the standard 1 - alpha sphere: P(chi2_p <= d^2) = 1 - alpha."""
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    return math.sqrt(chi2_quantile(1.0 - alpha, p))


def radial_truncation(p: int, delta: float) -> tuple[float, float]:
    """Truncation points (l_r, u_r) of R ~ chi_p; no lower cut for p <= 10."""
    lower = 0.0 if p <= 10 else math.sqrt(chi2_quantile(0.5 * delta, p))
    upper = math.sqrt(chi2_isf(0.5 * delta, p))
    return lower, upper


@dataclass(frozen=True, eq=False)
class RcsKnown:
    """A known-variance recentered sphere J(a, b) at level 1 - alpha.

    ``a`` and ``b`` are any of the function objects in :mod:`rcsphere.knots`.
    When ``b`` equals ``d`` beyond ``k`` coverage uses the three-part
    decomposition; otherwise (e.g. the closed-form b*) the event is
    integrated directly.
    """

    p: int
    alpha: float
    a: object
    b: object
    k: float = DEFAULT_K
    d: float = field(default=None)

    def __post_init__(self):
        if self.p < 3:
            raise ValueError("p must be >= 3")
        d_true = radius_constant(self.p, self.alpha)
        if self.d is None:
            object.__setattr__(self, "d", d_true)
        elif abs(self.d - d_true) > 1e-10 * d_true:
            raise ValueError(f"d={self.d!r} inconsistent with p={self.p}, alpha={self.alpha}")
        if isinstance(self.b, KnotFunction):
            if self.b.values.max() > self.d * (1 + 1e-12):
                raise ValueError("radius function exceeds d")
            if abs(self.b.k - self.k) > 1e-12 or abs(float(self.b.tail(self.k)) - self.d) > 1e-10:
                raise ValueError("radius function must equal d beyond k")
        if isinstance(self.a, KnotFunction) and abs(self.a.k - self.k) > 1e-12:
            raise ValueError("center function threshold must equal k")

    # -- constructors ------------------------------------------------------
    @classmethod
    def standard(cls, p: int, alpha: float = 0.05, k: float = DEFAULT_K) -> "RcsKnown":
        """The usual sphere centred at X with radius d."""
        d = radius_constant(p, alpha)
        return cls(p, alpha, ConstantD(1.0), ConstantD(d), k)

    @classmethod
    def baseline(cls, p: int, alpha: float = 0.05, k: float = DEFAULT_K) -> "RcsKnown":
        """J(a+, b*) with both functions in closed form."""
        return cls(p, alpha, JamesSteinPlus(p), baseline_b_star(p, alpha), k)

    # -- helpers -----------------------------------------------------------
    @property
    def decomposable(self) -> bool:
        tb = getattr(self.b, "tail_function", None)
        return isinstance(tb, ConstantD) and abs(tb.value - self.d) <= 1e-10 * self.d

    @cached_property
    def tail_pair(self):
        """Packed (a tail, constant d) used by the c* and c+ components."""
        return self.a.tail_function.packed(), ConstantD(self.d).packed()

    @cached_property
    def pair(self):
        return self.a.packed(), self.b.packed()


def _pair_for(rcs: RcsKnown, mode: Mode):
    return rcs.pair if mode == Mode.C else rcs.tail_pair


def h_fn(r: float, ell: float, gamma: float, rcs: RcsKnown, mode: Mode = Mode.C) -> float:
    """||a(t) Z + (a(t) - 1) theta|| - b(t) written in (r, l, gamma)."""
    pa, pb = _pair_for(rcs, mode)
    return kernel.h_value(float(r), float(ell), float(gamma), pa, pb, rcs.p)


def g_fn(r: float, ell: float, gamma: float, k: float, p: int) -> float:
    """t^2 - k^2, negative exactly when T < k."""
    return (r * r + 2.0 * gamma * r * ell + gamma * gamma) / p - k * k


def find_admissible_intervals(ell: float, gamma: float, rcs: RcsKnown,
                              cfg: QuadratureConfig = DEFAULT_CONFIG,
                              mode: Mode = Mode.C) -> list[tuple[float, float]]:
    """Sorted disjoint r-intervals in [l_r, u_r] on which the mode's event holds."""
    mode = Mode(mode)
    l_r, u_r = radial_truncation(rcs.p, cfg.delta)
    pa, pb = _pair_for(rcs, mode)
    ivs, _ = kernel.find_intervals(float(ell), float(gamma), pa, pb, rcs.p, rcs.k, l_r, u_r,
                                   mode != Mode.C_STAR, cfg.n_grid, cfg.root_tol)
    return [(float(a), float(b)) for a, b in ivs]


def _component_values(gammas, pa, pb, p, kk, cfg, use_g):
    l_r, u_r = radial_truncation(p, cfg.delta)
    vals = np.asarray(kernel.components(np.ascontiguousarray(gammas, dtype=float), pa, pb, p,
                                        float(kk), l_r, u_r, bool(use_g), cfg.kernel_cfg))
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite coverage component")
    return vals


def coverage_component(gamma, rcs: RcsKnown, cfg: QuadratureConfig = DEFAULT_CONFIG,
                       mode: Mode = Mode.C):
    """c, c* or c+ at one gamma (scalar) or an array of gammas."""
    mode = Mode(mode)
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(g < 0):
        raise ValueError("gamma must be nonnegative")
    pa, pb = _pair_for(rcs, mode)
    vals = _component_values(g, pa, pb, rcs.p, rcs.k, cfg, mode != Mode.C_STAR)
    return vals if np.ndim(gamma) else float(vals[0])


def tail_correction(gammas, rcs: RcsKnown, cfg: QuadratureConfig = DEFAULT_CONFIG) -> np.ndarray:
    """c* - c+ on a gamma grid; depends only on (p, alpha, k, a's tail)."""
    g = np.atleast_1d(np.asarray(gammas, dtype=float))
    return (coverage_component(g, rcs, cfg, Mode.C_STAR)
            - coverage_component(g, rcs, cfg, Mode.C_PLUS))


def coverage(gamma, rcs: RcsKnown, cfg: QuadratureConfig = DEFAULT_CONFIG, tail=None):
    """Coverage probability of J(a, b) at ||theta|| = gamma (scalar or array).

    ``tail`` may carry precomputed :func:`tail_correction` values for the
    same gammas; the optimizer reuses them across iterations.
    """
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(g < 0):
        raise ValueError("gamma must be nonnegative")
    if rcs.decomposable:
        c = coverage_component(g, rcs, cfg, Mode.C)
        corr = tail_correction(g, rcs, cfg) if tail is None else np.asarray(tail, dtype=float)
        out = c + corr
    else:
        pa, pb = rcs.pair
        out = _component_values(g, pa, pb, rcs.p, rcs.k, cfg, False)
    bound = 2.0 * cfg.delta + 1e-9
    if np.any(out < -bound) or np.any(out > 1.0 + bound):
        raise NumericalError(f"coverage outside [0, 1]: {out}")
    return out if np.ndim(gamma) else float(out[0])


# ---------------------------------------------------------------------------
# scaled expected volume
# ---------------------------------------------------------------------------

def t_density(x, p: int, gamma: float):
    """Density of T = ||X|| / sqrt(p) when ||theta|| = gamma."""
    x = np.asarray(x, dtype=float)
    return 2.0 * p * x * nc_chi2_pdf(p * x * x, p, gamma * gamma)


def _sev_panels(b, d, p):
    if isinstance(b, ConstantD):
        return [], False
    if isinstance(b, KnotFunction):
        return list(zip(b.knots[:-1], b.knots[1:])), False
    if isinstance(b, BStar):
        return [(0.0, b.breakpoint)], True
    raise TypeError(f"unsupported radius function {type(b).__name__}")


def sev(gamma: float, rcs: RcsKnown, tol: float = 1e-10) -> float:
    """Scaled expected volume E{(b(T)/d)^p} at ||theta|| = gamma.

    Integrated over T knot panel by knot panel (the radius function is a
    cubic between knots), written as ``1 - sum_i int [1 - (b/d)^p] f_T`` so
    that the constant tail contributes exactly.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    b, d, p = rcs.b, rcs.d, rcs.p
    panels, open_tail = _sev_panels(b, d, p)

    def deficit(x):
        return (1.0 - (float(b(x)) / d) ** p) * float(t_density(x, p, gamma))

    total = 0.0
    for lo, hi in panels:
        val, _ = integrate.quad(deficit, float(lo), float(hi), epsabs=tol * 1e-2, epsrel=tol, limit=200)
        total += val
    if open_tail:
        lo = panels[-1][1]
        val, _ = integrate.quad(deficit, lo, np.inf, epsabs=tol * 1e-2, epsrel=tol, limit=400)
        total += val
    out = 1.0 - total
    if not math.isfinite(out):
        raise NumericalError("non-finite scaled expected volume")
    return out


def sev_curve(gammas: Iterable[float], rcs: RcsKnown) -> np.ndarray:
    return np.array([sev(float(g), rcs) for g in gammas])


def interval_count(ell: float, gamma: float, rcs: RcsKnown, cfg: QuadratureConfig = DEFAULT_CONFIG,
                   mode: Mode = Mode.C) -> int:
    """Number K of disjoint admissible r-intervals (diagnostic)."""
    return len(find_admissible_intervals(ell, gamma, rcs, cfg, mode))


class SevRule:
    """Fixed Gauss-Legendre rule for the scaled expected volume at one gamma.

    Nodes sit on the radius knot panels, so for any radius function on the
    same knots the volume is one dot product.  Smooth in the knot ordinates,
    which the optimizer relies on.
    """

    def __init__(self, p: int, knots: Sequence[float], d: float, gamma: float = 0.0, order: int = 32):
        knots = np.asarray(knots, dtype=float)
        gx, gw = np.polynomial.legendre.leggauss(order)
        self.x = np.concatenate([0.5 * (b - a) * gx + 0.5 * (b + a) for a, b in zip(knots[:-1], knots[1:])])
        w = np.concatenate([0.5 * (b - a) * gw for a, b in zip(knots[:-1], knots[1:])])
        self.weights = w * t_density(self.x, p, gamma)
        self.p, self.d = p, d

    def __call__(self, b) -> float:
        vals = np.asarray(b(self.x), dtype=float)
        return float(1.0 - self.weights @ (1.0 - (vals / self.d) ** self.p))
