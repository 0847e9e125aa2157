"""Pure-Python coverage kernel.

Same entry points and the same arithmetic as the compiled ``_kernel``
extension; used when the extension is not built or when
``RCSPHERE_KERNEL=python`` is set.

Function arguments are packed float64 records produced by
:mod:`rcsphere.knots`.  ``cfg`` is the tuple
``(n_grid, root_tol, n_scan, ell_tol, max_width, eps_abs)``.
"""

from __future__ import annotations

import math

from .distributions import gammainc_lower

KIND_KNOT, KIND_JS, KIND_CONST, KIND_BSTAR = 0, 1, 2, 3
TAIL_CONST = 0
HEADER = 10

EP_LR, EP_UR, EP_GLO, EP_GHI, EP_ROOT = 0, 1, 2, 3, 4
_MASK = (1 << 64) - 1
_MAX_INTERVALS = 64


class _Fn:
    __slots__ = ("kind", "n", "tail_kind", "tail_param", "k", "bp", "bd",
                 "s_in", "s_out", "param", "x", "y", "m", "bstar_break", "js_zero")

    def __init__(self, packed):
        self.kind = int(packed[0])
        self.n = n = int(packed[1])
        self.tail_kind = int(packed[2])
        self.tail_param = float(packed[3])
        self.k = float(packed[4])
        self.bp = float(packed[5])
        self.bd = float(packed[6])
        self.s_in = float(packed[7])
        self.s_out = float(packed[8])
        self.param = float(packed[9])
        self.x = [float(v) for v in packed[HEADER:HEADER + n]]
        self.y = [float(v) for v in packed[HEADER + n:HEADER + 2 * n]]
        self.m = [float(v) for v in packed[HEADER + 2 * n:HEADER + 3 * n]]
        self.bstar_break = self.bd / math.sqrt(self.bp) if self.kind == KIND_BSTAR else 0.0
        if self.kind == KIND_JS:
            self.js_zero = math.sqrt(self.param)
        elif self.kind == KIND_KNOT and self.tail_kind != TAIL_CONST:
            self.js_zero = math.sqrt(self.tail_param)
        else:
            self.js_zero = 0.0


def _js(c, u):
    if u <= 0.0:
        return 0.0
    v = 1.0 - c / (u * u)
    return v if v > 0.0 else 0.0


def fn_value(f: _Fn, t: float) -> float:
    u = t / f.s_in
    kind = f.kind
    if kind == KIND_KNOT:
        if u >= f.k:
            base = f.tail_param if f.tail_kind == TAIL_CONST else _js(f.tail_param, u)
        else:
            x = f.x
            i = 0
            while i < f.n - 2 and u >= x[i + 1]:
                i += 1
            h = x[i + 1] - x[i]
            s = (u - x[i]) / h
            s2 = s * s
            s3 = s2 * s
            base = (f.y[i] * (2 * s3 - 3 * s2 + 1) + h * f.m[i] * (s3 - 2 * s2 + s)
                    + f.y[i + 1] * (3 * s2 - 2 * s3) + h * f.m[i + 1] * (s3 - s2))
    elif kind == KIND_JS:
        base = _js(f.param, u)
    elif kind == KIND_CONST:
        base = f.param
    else:
        p, d = f.bp, f.bd
        uu = u if u > f.bstar_break else f.bstar_break
        s = 1.0 - (p - 2.0) / (p * uu * uu)
        base = math.sqrt(s * (d * d - p * math.log(s)))
    return f.s_out * base


def fn_segment(f: _Fn, t: float) -> int:
    """Index of the smooth piece containing t (changes where derivatives jump)."""
    u = t / f.s_in
    kind = f.kind
    if kind == KIND_KNOT:
        if u >= f.k:
            if f.tail_kind != TAIL_CONST and u < f.js_zero:
                return f.n - 1
            return f.n
        i = 0
        while i < f.n - 2 and u >= f.x[i + 1]:
            i += 1
        return i
    if kind == KIND_JS:
        return 0 if u < f.js_zero else 1
    if kind == KIND_BSTAR:
        return 0 if u <= f.bstar_break else 1
    return 0


def function_values(packed, ts):
    f = _Fn(packed)
    return [fn_value(f, float(t)) for t in ts]


# ---------------------------------------------------------------------------
# chi-square cdf for the radial variable
# ---------------------------------------------------------------------------

def chi2_cdf(x: float, p: int) -> float:
    if x <= 0.0:
        return 0.0
    return gammainc_lower(0.5 * p, 0.5 * x)


# ---------------------------------------------------------------------------
# the recentring inequality h(r) <= 0
# ---------------------------------------------------------------------------

def _h(r, ell, gamma, fa, fb, p):
    q = r * r + 2.0 * gamma * r * ell + gamma * gamma
    t = math.sqrt(q / p) if q > 0.0 else 0.0
    a = fn_value(fa, t)
    b = fn_value(fb, t)
    am1 = a - 1.0
    rad = a * a * r * r + 2.0 * a * am1 * gamma * r * ell + am1 * am1 * gamma * gamma
    return (math.sqrt(rad) if rad > 0.0 else 0.0) - b


def h_value(r, ell, gamma, pa, pb, p):
    return _h(r, ell, gamma, _Fn(pa), _Fn(pb), p)


def _t_of(r, ell, gamma, p):
    q = r * r + 2.0 * gamma * r * ell + gamma * gamma
    return math.sqrt(q / p) if q > 0.0 else 0.0


def _brent(fun, a, b, fa, fb, tol):
    """Brent's zero finder on a bracket [a, b] with fa, fb of opposite sign."""
    c, fc = a, fa
    d = e = b - a
    for _ in range(200):
        if (fb > 0) == (fc > 0):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * 2.2e-16 * abs(b) + 0.5 * tol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                pp = 2.0 * xm * s
                qq = 1.0 - s
            else:
                qq = fa / fc
                rr = fb / fc
                pp = s * (2.0 * xm * qq * (qq - rr) - (b - a) * (rr - 1.0))
                qq = (qq - 1.0) * (rr - 1.0) * (s - 1.0)
            if pp > 0:
                qq = -qq
            pp = abs(pp)
            if 2.0 * pp < min(3.0 * xm * qq - abs(tol1 * qq), abs(e * qq)):
                e = d
                d = pp / qq
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a, fa = b, fb
        if abs(d) > tol1:
            b += d
        else:
            b += tol1 if xm > 0 else -tol1
        fb = fun(b)
    return b


def _golden_extremum(fun, a, b, sign, tol):
    """Locate min (sign=+1) or max (sign=-1) of fun on [a, b] by golden section."""
    g = 0.3819660112501051
    x1 = a + g * (b - a)
    x2 = b - g * (b - a)
    f1 = sign * fun(x1)
    f2 = sign * fun(x2)
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = a + g * (b - a)
            f1 = sign * fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = b - g * (b - a)
            f2 = sign * fun(x2)
        if f1 < 0.0 or f2 < 0.0:
            # already across zero; the exact extremum is not needed
            break
    return (x1, sign * f1) if f1 < f2 else (x2, sign * f2)


def _intervals(ell, gamma, fa, fb, p, kk, l_r, u_r, use_g, n_grid, root_tol):
    """Admissible r-set {h <= 0 (and g <= 0)} within [l_r, u_r] as sorted intervals.

    Returns a list of (lo, hi, lo_type, hi_type).
    """
    lo, hi = l_r, u_r
    lo_t, hi_t = EP_LR, EP_UR
    if use_g:
        disc = p * kk * kk - gamma * gamma * (1.0 - ell * ell)
        if disc <= 0.0:
            return []
        sq = math.sqrt(disc)
        r1 = -gamma * ell - sq
        r2 = -gamma * ell + sq
        if r1 > lo:
            lo, lo_t = r1, EP_GLO
        if r2 < hi:
            hi, hi_t = r2, EP_GHI
        if hi <= lo:
            return []

    def h(r):
        return _h(r, ell, gamma, fa, fb, p)

    n = n_grid
    rs = [lo + (hi - lo) * j / n for j in range(n + 1)]
    rs[n] = hi
    hs = [h(r) for r in rs]
    tol = root_tol
    # split grid cells whose interior hides a sign change behind a local extremum
    pts = [(rs[0], hs[0])]
    for j in range(1, n + 1):
        if j < n:
            hm, h0, hp = hs[j - 1], hs[j], hs[j + 1]
            if h0 > 0.0 and h0 <= hm and h0 <= hp:
                x, fx = _golden_extremum(h, rs[j - 1], rs[j + 1], 1.0, 1e-6 * (rs[j + 1] - rs[j - 1]))
                if fx <= 0.0:
                    if x < rs[j]:
                        pts.append((x, fx))
                        pts.append((rs[j], h0))
                    else:
                        pts.append((rs[j], h0))
                        pts.append((x, fx))
                    continue
            elif h0 <= 0.0 and h0 >= hm and h0 >= hp:
                x, fx = _golden_extremum(h, rs[j - 1], rs[j + 1], -1.0, 1e-6 * (rs[j + 1] - rs[j - 1]))
                if fx > 0.0:
                    if x < rs[j]:
                        pts.append((x, fx))
                        pts.append((rs[j], h0))
                    else:
                        pts.append((rs[j], h0))
                        pts.append((x, fx))
                    continue
        pts.append((rs[j], hs[j]))
    pts.sort()

    out = []
    r0, h0 = pts[0]
    start = lo if h0 <= 0.0 else None
    start_t = lo_t
    for r1_, h1 in pts[1:]:
        if (h0 <= 0.0) != (h1 <= 0.0):
            root = _brent(h, r0, r1_, h0, h1, tol)
            if h0 <= 0.0:
                out.append((start, root, start_t, EP_ROOT))
                start = None
            else:
                start, start_t = root, EP_ROOT
        r0, h0 = r1_, h1
    if start is not None:
        out.append((start, hi, start_t, hi_t))
    return out[:_MAX_INTERVALS]


def _signature(ivs, ell, gamma, fa, fb, p):
    sig = len(ivs)
    for lo, hi, lt, ht in ivs:
        sig = (sig * 1000003 + lt * 8 + ht) & _MASK
        if lt == EP_ROOT:
            t = _t_of(lo, ell, gamma, p)
            sig = (sig * 1000003 + fn_segment(fa, t) * 64 + fn_segment(fb, t)) & _MASK
        if ht == EP_ROOT:
            t = _t_of(hi, ell, gamma, p)
            sig = (sig * 1000003 + fn_segment(fa, t) * 64 + fn_segment(fb, t)) & _MASK
    return sig


def _v(ivs, p):
    total = 0.0
    for lo, hi, _, _ in ivs:
        total += chi2_cdf(hi * hi, p) - chi2_cdf(lo * lo, p)
    return total


def find_intervals(ell, gamma, pa, pb, p, kk, l_r, u_r, use_g, n_grid, root_tol):
    """Public wrapper: list of (lo, hi) plus the interval-structure signature."""
    fa, fb = _Fn(pa), _Fn(pb)
    ivs = _intervals(ell, gamma, fa, fb, p, kk, l_r, u_r, use_g, n_grid, root_tol)
    return [(a, b) for a, b, _, _ in ivs], _signature(ivs, ell, gamma, fa, fb, p)


def v_value(ell, gamma, pa, pb, p, kk, l_r, u_r, use_g, n_grid, root_tol):
    fa, fb = _Fn(pa), _Fn(pb)
    return _v(_intervals(ell, gamma, fa, fb, p, kk, l_r, u_r, use_g, n_grid, root_tol), p)


# ---------------------------------------------------------------------------
# outer integral over the direction cosine
# ---------------------------------------------------------------------------

def _regions(gamma, p, kk, use_g):
    if use_g and gamma * gamma > p * kk * kk:
        s = math.sqrt(gamma * gamma - p * kk * kk) / gamma
        return [(-1.0, -s), (s, 1.0)]
    return [(-1.0, 1.0)]


# Gauss-Kronrod 7/15 pair on [-1, 1]: nodes, Kronrod weights, Gauss weights
GK_X = (-0.991455371120812639, -0.949107912342758525, -0.864864423359769073,
        -0.741531185599394440, -0.586087235467691130, -0.405845151377397167,
        -0.207784955007898468, 0.0, 0.207784955007898468, 0.405845151377397167,
        0.586087235467691130, 0.741531185599394440, 0.864864423359769073,
        0.949107912342758525, 0.991455371120812639)
GK_WK = (0.022935322010529225, 0.063092092629978553, 0.104790010322250184,
         0.140653259715525919, 0.169004726639267903, 0.190350578064785410,
         0.204432940075298892, 0.209482141084727828, 0.204432940075298892,
         0.190350578064785410, 0.169004726639267903, 0.140653259715525919,
         0.104790010322250184, 0.063092092629978553, 0.022935322010529225)
GK_WG = (0.0, 0.129484966168869693, 0.0, 0.279705391489276668, 0.0,
         0.381830050505118945, 0.0, 0.417959183673469388, 0.0,
         0.381830050505118945, 0.0, 0.279705391489276668, 0.0,
         0.129484966168869693, 0.0)
_MAX_DEPTH = 40


def component(gamma, pa, pb, p, kk, l_r, u_r, use_g, cfg):
    """One of the three coverage components, integrated over the direction cosine.

    The integration range is cut at every direction cosine where the structure
    of the admissible r-set changes (number of intervals, which constraint
    fixes each endpoint, which smooth piece of a or b the endpoint falls in),
    located by a scan followed by bisection.  Each resulting panel is mapped
    through the smoothstep u^2 (3 - 2u), which absorbs the square-root
    behaviour at panel ends, and integrated by adaptive Gauss-Kronrod
    bisection in u.
    """
    n_grid, root_tol, n_scan, ell_tol, max_width, eps_abs = cfg
    fa, fb = _Fn(pa), _Fn(pb)

    def ivs_at(ell):
        return _intervals(ell, gamma, fa, fb, p, kk, l_r, u_r, use_g, n_grid, root_tol)

    if gamma == 0.0:
        return _v(ivs_at(1.0), p)

    def sig_at(ell):
        return _signature(ivs_at(ell), ell, gamma, fa, fb, p)

    log_norm = math.lgamma(0.5) + math.lgamma(0.5 * (p - 1)) - math.lgamma(0.5 * p)
    expo = 0.5 * (p - 3)

    def gk(a0, hsub, u0, u1):
        half = 0.5 * (u1 - u0)
        mid = 0.5 * (u1 + u0)
        sk = sg = 0.0
        for i in range(15):
            u = mid + half * GK_X[i]
            ell = a0 + hsub * u * u * (3.0 - 2.0 * u)
            one = 1.0 - ell * ell
            if one <= 0.0:
                continue
            f = (hsub * 6.0 * u * (1.0 - u) * math.exp(expo * math.log(one) - log_norm)
                 * _v(ivs_at(ell), p))
            sk += GK_WK[i] * f
            sg += GK_WG[i] * f
        return half * sk, half * abs(sk - sg)

    total = 0.0
    for A, B in _regions(gamma, p, kk, use_g):
        width = B - A
        scan = [A + width * (j + 0.5) / n_scan for j in range(n_scan)]
        sigs = [sig_at(e) for e in scan]
        cuts = [A]
        for j in range(1, n_scan):
            if sigs[j] != sigs[j - 1]:
                lo_e, hi_e, s_lo = scan[j - 1], scan[j], sigs[j - 1]
                while hi_e - lo_e > ell_tol:
                    mid = 0.5 * (lo_e + hi_e)
                    if sig_at(mid) == s_lo:
                        lo_e = mid
                    else:
                        hi_e = mid
                cuts.append(0.5 * (lo_e + hi_e))
        cuts.append(B)
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            if c1 <= c0:
                continue
            nsub = max(1, int(math.ceil((c1 - c0) / max_width)))
            hsub = (c1 - c0) / nsub
            for s in range(nsub):
                a0 = c0 + s * hsub
                tol = eps_abs * hsub / 2.0
                stack = [(0.0, 1.0, 0)]
                while stack:
                    u0, u1, depth = stack.pop()
                    val, err = gk(a0, hsub, u0, u1)
                    if err <= tol * (u1 - u0) or depth >= _MAX_DEPTH:
                        total += val
                    else:
                        um = 0.5 * (u0 + u1)
                        stack.append((u0, um, depth + 1))
                        stack.append((um, u1, depth + 1))
    return total


def components(gammas, pa, pb, p, kk, l_r, u_r, use_g, cfg):
    return [component(float(g), pa, pb, p, kk, l_r, u_r, use_g, cfg) for g in gammas]
