# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled coverage kernel; line-for-line twin of ``_kernel_py``."""

from libc.math cimport sqrt, log, exp, lgamma, fabs, ceil, INFINITY
from libc.stdlib cimport malloc, free
from libc.stdint cimport uint64_t

cdef enum:
    HEADER = 10
    MAX_INTERVALS = 64
    MAX_DEPTH = 40
    KIND_KNOT = 0
    KIND_JS = 1
    KIND_CONST = 2
    KIND_BSTAR = 3
    TAIL_CONST = 0
    EP_LR = 0
    EP_UR = 1
    EP_GLO = 2
    EP_GHI = 3
    EP_ROOT = 4
    MAX_ITER = 10000

cdef double EPS = 1e-16
cdef double TINY = 1e-300

cdef double[15] GK_X = [-0.991455371120812639, -0.949107912342758525, -0.864864423359769073,
                        -0.741531185599394440, -0.586087235467691130, -0.405845151377397167,
                        -0.207784955007898468, 0.0, 0.207784955007898468, 0.405845151377397167,
                        0.586087235467691130, 0.741531185599394440, 0.864864423359769073,
                        0.949107912342758525, 0.991455371120812639]
cdef double[15] GK_WK = [0.022935322010529225, 0.063092092629978553, 0.104790010322250184,
                         0.140653259715525919, 0.169004726639267903, 0.190350578064785410,
                         0.204432940075298892, 0.209482141084727828, 0.204432940075298892,
                         0.190350578064785410, 0.169004726639267903, 0.140653259715525919,
                         0.104790010322250184, 0.063092092629978553, 0.022935322010529225]
cdef double[15] GK_WG = [0.0, 0.129484966168869693, 0.0, 0.279705391489276668, 0.0,
                         0.381830050505118945, 0.0, 0.417959183673469388, 0.0,
                         0.381830050505118945, 0.0, 0.279705391489276668, 0.0,
                         0.129484966168869693, 0.0]


cdef struct Fn:
    int kind
    int n
    int tail_kind
    double tail_param
    double k
    double bp
    double bd
    double s_in
    double s_out
    double param
    double bstar_break
    double js_zero
    const double* x
    const double* y
    const double* m


cdef struct Ctx:
    Fn fa
    Fn fb
    int p
    double gamma
    double ell
    double kk
    double l_r
    double u_r
    int use_g
    int n_grid
    double root_tol


cdef struct Ivs:
    int count
    double lo[MAX_INTERVALS]
    double hi[MAX_INTERVALS]
    int lt[MAX_INTERVALS]
    int ht[MAX_INTERVALS]


cdef void fn_init(Fn* f, const double[::1] packed):
    cdef int n = <int>packed[1]
    f.kind = <int>packed[0]
    f.n = n
    f.tail_kind = <int>packed[2]
    f.tail_param = packed[3]
    f.k = packed[4]
    f.bp = packed[5]
    f.bd = packed[6]
    f.s_in = packed[7]
    f.s_out = packed[8]
    f.param = packed[9]
    f.x = &packed[HEADER] if n > 0 else NULL
    f.y = &packed[HEADER + n] if n > 0 else NULL
    f.m = &packed[HEADER + 2 * n] if n > 0 else NULL
    f.bstar_break = f.bd / sqrt(f.bp) if f.kind == KIND_BSTAR else 0.0
    if f.kind == KIND_JS:
        f.js_zero = sqrt(f.param)
    elif f.kind == KIND_KNOT and f.tail_kind != TAIL_CONST:
        f.js_zero = sqrt(f.tail_param)
    else:
        f.js_zero = 0.0


cdef inline double js(double c, double u) nogil:
    if u <= 0.0:
        return 0.0
    cdef double v = 1.0 - c / (u * u)
    return v if v > 0.0 else 0.0


cdef double fn_value(const Fn* f, double t) nogil:
    cdef double u = t / f.s_in
    cdef double base, h, s, s2, s3, p, d, uu
    cdef int i
    if f.kind == KIND_KNOT:
        if u >= f.k:
            base = f.tail_param if f.tail_kind == TAIL_CONST else js(f.tail_param, u)
        else:
            i = 0
            while i < f.n - 2 and u >= f.x[i + 1]:
                i += 1
            h = f.x[i + 1] - f.x[i]
            s = (u - f.x[i]) / h
            s2 = s * s
            s3 = s2 * s
            base = (f.y[i] * (2 * s3 - 3 * s2 + 1) + h * f.m[i] * (s3 - 2 * s2 + s)
                    + f.y[i + 1] * (3 * s2 - 2 * s3) + h * f.m[i + 1] * (s3 - s2))
    elif f.kind == KIND_JS:
        base = js(f.param, u)
    elif f.kind == KIND_CONST:
        base = f.param
    else:
        p = f.bp
        d = f.bd
        uu = u if u > f.bstar_break else f.bstar_break
        s = 1.0 - (p - 2.0) / (p * uu * uu)
        base = sqrt(s * (d * d - p * log(s)))
    return f.s_out * base


cdef int fn_segment(const Fn* f, double t) nogil:
    cdef double u = t / f.s_in
    cdef int i
    if f.kind == KIND_KNOT:
        if u >= f.k:
            if f.tail_kind != TAIL_CONST and u < f.js_zero:
                return f.n - 1
            return f.n
        i = 0
        while i < f.n - 2 and u >= f.x[i + 1]:
            i += 1
        return i
    if f.kind == KIND_JS:
        return 0 if u < f.js_zero else 1
    if f.kind == KIND_BSTAR:
        return 0 if u <= f.bstar_break else 1
    return 0


# -- radial chi-square cdf ---------------------------------------------------

cdef double gamma_series(double a, double x) nogil:
    cdef double ap = a, term = 1.0 / a, total = term
    cdef int it
    for it in range(MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if fabs(term) < fabs(total) * EPS:
            break
    return total * exp(-x + a * log(x) - lgamma(a))


cdef double gamma_cf(double a, double x) nogil:
    cdef double b = x + 1.0 - a, c = 1.0 / TINY, d = 1.0 / b, h = d, an, delta
    cdef int i
    for i in range(1, MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < TINY:
            d = TINY
        c = b + an / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < EPS:
            break
    return exp(-x + a * log(x) - lgamma(a)) * h


cdef double chi2_cdf_c(double x, int p) nogil:
    cdef double a = 0.5 * p, xx = 0.5 * x
    if x <= 0.0:
        return 0.0
    if xx == INFINITY:
        return 1.0
    if xx < a + 1.0:
        return gamma_series(a, xx)
    return 1.0 - gamma_cf(a, xx)


def chi2_cdf(double x, int p):
    return chi2_cdf_c(x, p)


# -- the recentring inequality -------------------------------------------------

cdef double h_c(const Ctx* c, double r) nogil:
    cdef double gamma = c.gamma, ell = c.ell
    cdef double q = r * r + 2.0 * gamma * r * ell + gamma * gamma
    cdef double t = sqrt(q / c.p) if q > 0.0 else 0.0
    cdef double a = fn_value(&c.fa, t)
    cdef double b = fn_value(&c.fb, t)
    cdef double am1 = a - 1.0
    cdef double rad = a * a * r * r + 2.0 * a * am1 * gamma * r * ell + am1 * am1 * gamma * gamma
    return (sqrt(rad) if rad > 0.0 else 0.0) - b


cdef inline double t_of(double r, double ell, double gamma, int p) nogil:
    cdef double q = r * r + 2.0 * gamma * r * ell + gamma * gamma
    return sqrt(q / p) if q > 0.0 else 0.0


cdef double brent(const Ctx* ctx, double a, double b, double fa, double fb, double tol) nogil:
    cdef double c = a, fc = fa, d = b - a, e = b - a
    cdef double tol1, xm, s, pp, qq, rr, m1, m2
    cdef int it
    for it in range(200):
        if (fb > 0) == (fc > 0):
            c = a
            fc = fa
            d = b - a
            e = d
        if fabs(fc) < fabs(fb):
            a = b
            b = c
            c = a
            fa = fb
            fb = fc
            fc = fa
        tol1 = 2.0 * 2.2e-16 * fabs(b) + 0.5 * tol
        xm = 0.5 * (c - b)
        if fabs(xm) <= tol1 or fb == 0.0:
            return b
        if fabs(e) >= tol1 and fabs(fa) > fabs(fb):
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
            pp = fabs(pp)
            m1 = 3.0 * xm * qq - fabs(tol1 * qq)
            m2 = fabs(e * qq)
            if 2.0 * pp < (m1 if m1 < m2 else m2):
                e = d
                d = pp / qq
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a = b
        fa = fb
        if fabs(d) > tol1:
            b += d
        else:
            b += tol1 if xm > 0 else -tol1
        fb = h_c(ctx, b)
    return b


cdef void golden(const Ctx* ctx, double a, double b, double sign, double tol,
                 double* xo, double* fo) nogil:
    cdef double g = 0.3819660112501051
    cdef double x1 = a + g * (b - a)
    cdef double x2 = b - g * (b - a)
    cdef double f1 = sign * h_c(ctx, x1)
    cdef double f2 = sign * h_c(ctx, x2)
    while b - a > tol:
        if f1 < f2:
            b = x2
            x2 = x1
            f2 = f1
            x1 = a + g * (b - a)
            f1 = sign * h_c(ctx, x1)
        else:
            a = x1
            x1 = x2
            f1 = f2
            x2 = b - g * (b - a)
            f2 = sign * h_c(ctx, x2)
        if f1 < 0.0 or f2 < 0.0:
            break
    if f1 < f2:
        xo[0] = x1
        fo[0] = sign * f1
    else:
        xo[0] = x2
        fo[0] = sign * f2


cdef void intervals(Ctx* c, double ell, Ivs* out, double* rs, double* hs,
                    double* pr, double* ph) nogil:
    cdef double lo = c.l_r, hi = c.u_r, disc, sq, r1, r2, x, fx, hm, h0, hp, r0, root, start, rj, tr, th
    cdef int lo_t = EP_LR, hi_t = EP_UR, n = c.n_grid, j, npts, i, start_t, has_start
    c.ell = ell
    out.count = 0
    if c.use_g:
        disc = c.p * c.kk * c.kk - c.gamma * c.gamma * (1.0 - ell * ell)
        if disc <= 0.0:
            return
        sq = sqrt(disc)
        r1 = -c.gamma * ell - sq
        r2 = -c.gamma * ell + sq
        if r1 > lo:
            lo = r1
            lo_t = EP_GLO
        if r2 < hi:
            hi = r2
            hi_t = EP_GHI
        if hi <= lo:
            return
    for j in range(n + 1):
        rs[j] = lo + (hi - lo) * j / n
    rs[n] = hi
    for j in range(n + 1):
        hs[j] = h_c(c, rs[j])
    pr[0] = rs[0]
    ph[0] = hs[0]
    npts = 1
    for j in range(1, n + 1):
        if j < n:
            hm = hs[j - 1]
            h0 = hs[j]
            hp = hs[j + 1]
            if h0 > 0.0 and h0 <= hm and h0 <= hp:
                golden(c, rs[j - 1], rs[j + 1], 1.0, 1e-6 * (rs[j + 1] - rs[j - 1]), &x, &fx)
                if fx <= 0.0:
                    if x < rs[j]:
                        pr[npts] = x; ph[npts] = fx; npts += 1
                        pr[npts] = rs[j]; ph[npts] = h0; npts += 1
                    else:
                        pr[npts] = rs[j]; ph[npts] = h0; npts += 1
                        pr[npts] = x; ph[npts] = fx; npts += 1
                    continue
            elif h0 <= 0.0 and h0 >= hm and h0 >= hp:
                golden(c, rs[j - 1], rs[j + 1], -1.0, 1e-6 * (rs[j + 1] - rs[j - 1]), &x, &fx)
                if fx > 0.0:
                    if x < rs[j]:
                        pr[npts] = x; ph[npts] = fx; npts += 1
                        pr[npts] = rs[j]; ph[npts] = h0; npts += 1
                    else:
                        pr[npts] = rs[j]; ph[npts] = h0; npts += 1
                        pr[npts] = x; ph[npts] = fx; npts += 1
                    continue
        pr[npts] = rs[j]
        ph[npts] = hs[j]
        npts += 1
    # insertion sort on (r, h); the list is almost sorted already
    for i in range(1, npts):
        tr = pr[i]
        th = ph[i]
        j = i - 1
        while j >= 0 and (pr[j] > tr or (pr[j] == tr and ph[j] > th)):
            pr[j + 1] = pr[j]
            ph[j + 1] = ph[j]
            j -= 1
        pr[j + 1] = tr
        ph[j + 1] = th

    r0 = pr[0]
    h0 = ph[0]
    has_start = h0 <= 0.0
    start = lo
    start_t = lo_t
    for i in range(1, npts):
        if (h0 <= 0.0) != (ph[i] <= 0.0):
            root = brent(c, r0, pr[i], h0, ph[i], c.root_tol)
            if h0 <= 0.0:
                if out.count < MAX_INTERVALS:
                    out.lo[out.count] = start
                    out.hi[out.count] = root
                    out.lt[out.count] = start_t
                    out.ht[out.count] = EP_ROOT
                    out.count += 1
                has_start = 0
            else:
                start = root
                start_t = EP_ROOT
                has_start = 1
        r0 = pr[i]
        h0 = ph[i]
    if has_start and out.count < MAX_INTERVALS:
        out.lo[out.count] = start
        out.hi[out.count] = hi
        out.lt[out.count] = start_t
        out.ht[out.count] = hi_t
        out.count += 1


cdef uint64_t signature(const Ctx* c, const Ivs* ivs) nogil:
    cdef uint64_t sig = <uint64_t>ivs.count
    cdef int i
    cdef double t
    for i in range(ivs.count):
        sig = sig * <uint64_t>1000003 + <uint64_t>(ivs.lt[i] * 8 + ivs.ht[i])
        if ivs.lt[i] == EP_ROOT:
            t = t_of(ivs.lo[i], c.ell, c.gamma, c.p)
            sig = sig * <uint64_t>1000003 + <uint64_t>(fn_segment(&c.fa, t) * 64 + fn_segment(&c.fb, t))
        if ivs.ht[i] == EP_ROOT:
            t = t_of(ivs.hi[i], c.ell, c.gamma, c.p)
            sig = sig * <uint64_t>1000003 + <uint64_t>(fn_segment(&c.fa, t) * 64 + fn_segment(&c.fb, t))
    return sig


cdef double vsum(const Ivs* ivs, int p) nogil:
    cdef double total = 0.0
    cdef int i
    for i in range(ivs.count):
        total += chi2_cdf_c(ivs.hi[i] * ivs.hi[i], p) - chi2_cdf_c(ivs.lo[i] * ivs.lo[i], p)
    return total


cdef class _Work:
    """Scratch buffers for one kernel call."""
    cdef double* rs
    cdef double* hs
    cdef double* pr
    cdef double* ph

    def __cinit__(self, int n_grid):
        self.rs = <double*>malloc((n_grid + 1) * sizeof(double))
        self.hs = <double*>malloc((n_grid + 1) * sizeof(double))
        self.pr = <double*>malloc((2 * n_grid + 4) * sizeof(double))
        self.ph = <double*>malloc((2 * n_grid + 4) * sizeof(double))
        if not (self.rs and self.hs and self.pr and self.ph):
            raise MemoryError()

    def __dealloc__(self):
        free(self.rs)
        free(self.hs)
        free(self.pr)
        free(self.ph)


cdef void ctx_init(Ctx* c, const double[::1] pa, const double[::1] pb, int p, double gamma,
                   double kk, double l_r, double u_r, bint use_g, int n_grid, double root_tol):
    fn_init(&c.fa, pa)
    fn_init(&c.fb, pb)
    c.p = p
    c.gamma = gamma
    c.ell = 0.0
    c.kk = kk
    c.l_r = l_r
    c.u_r = u_r
    c.use_g = use_g
    c.n_grid = n_grid
    c.root_tol = root_tol


def find_intervals(double ell, double gamma, const double[::1] pa, const double[::1] pb, int p,
                   double kk, double l_r, double u_r, bint use_g, int n_grid, double root_tol):
    cdef Ctx c
    cdef Ivs ivs
    cdef _Work w = _Work(n_grid)
    ctx_init(&c, pa, pb, p, gamma, kk, l_r, u_r, use_g, n_grid, root_tol)
    intervals(&c, ell, &ivs, w.rs, w.hs, w.pr, w.ph)
    return [(ivs.lo[i], ivs.hi[i]) for i in range(ivs.count)], int(signature(&c, &ivs))


def v_value(double ell, double gamma, const double[::1] pa, const double[::1] pb, int p,
            double kk, double l_r, double u_r, bint use_g, int n_grid, double root_tol):
    cdef Ctx c
    cdef Ivs ivs
    cdef _Work w = _Work(n_grid)
    ctx_init(&c, pa, pb, p, gamma, kk, l_r, u_r, use_g, n_grid, root_tol)
    intervals(&c, ell, &ivs, w.rs, w.hs, w.pr, w.ph)
    return vsum(&ivs, p)


def h_value(double r, double ell, double gamma, const double[::1] pa, const double[::1] pb, int p):
    cdef Ctx c
    ctx_init(&c, pa, pb, p, gamma, 0.0, 0.0, 0.0, False, 1, 1e-12)
    c.ell = ell
    return h_c(&c, r)


def function_values(const double[::1] packed, ts):
    cdef Fn f
    fn_init(&f, packed)
    return [fn_value(&f, float(t)) for t in ts]


cdef double gk(Ctx* c, Ivs* ivs, _Work w, double a0, double hsub, double u0, double u1,
               double expo, double log_norm, double* err) nogil:
    cdef double half = 0.5 * (u1 - u0), mid = 0.5 * (u1 + u0)
    cdef double sk = 0.0, sg = 0.0, u, ell, one, f
    cdef int i
    for i in range(15):
        u = mid + half * GK_X[i]
        ell = a0 + hsub * u * u * (3.0 - 2.0 * u)
        one = 1.0 - ell * ell
        if one <= 0.0:
            continue
        intervals(c, ell, ivs, w.rs, w.hs, w.pr, w.ph)
        f = hsub * 6.0 * u * (1.0 - u) * exp(expo * log(one) - log_norm) * vsum(ivs, c.p)
        sk += GK_WK[i] * f
        sg += GK_WG[i] * f
    err[0] = half * fabs(sk - sg)
    return half * sk


cdef double component_c(Ctx* c, _Work w, int n_scan, double ell_tol, double max_width,
                        double eps_abs):
    cdef Ivs ivs
    cdef double gamma = c.gamma, log_norm, expo, total, A, B, width, lo_e, hi_e, mid, c0, c1
    cdef double hsub, a0, tol, u0, u1, val, err, s
    cdef uint64_t s_lo
    cdef int j, nsub, k, depth, top, nreg, reg, sidx
    cdef double regions[4]
    cdef double* scan
    cdef uint64_t* sigs
    cdef double* cuts
    cdef double stack_u0[MAX_DEPTH + 2]
    cdef double stack_u1[MAX_DEPTH + 2]
    cdef int stack_d[MAX_DEPTH + 2]
    if gamma == 0.0:
        intervals(c, 1.0, &ivs, w.rs, w.hs, w.pr, w.ph)
        return vsum(&ivs, c.p)
    log_norm = lgamma(0.5) + lgamma(0.5 * (c.p - 1)) - lgamma(0.5 * c.p)
    expo = 0.5 * (c.p - 3)
    if c.use_g and gamma * gamma > c.p * c.kk * c.kk:
        s = sqrt(gamma * gamma - c.p * c.kk * c.kk) / gamma
        regions[0] = -1.0
        regions[1] = -s
        regions[2] = s
        regions[3] = 1.0
        nreg = 2
    else:
        regions[0] = -1.0
        regions[1] = 1.0
        nreg = 1
    scan = <double*>malloc(n_scan * sizeof(double))
    sigs = <uint64_t*>malloc(n_scan * sizeof(uint64_t))
    cuts = <double*>malloc((n_scan + 2) * sizeof(double))
    total = 0.0
    try:
        for reg in range(nreg):
            A = regions[2 * reg]
            B = regions[2 * reg + 1]
            width = B - A
            for j in range(n_scan):
                scan[j] = A + width * (j + 0.5) / n_scan
                intervals(c, scan[j], &ivs, w.rs, w.hs, w.pr, w.ph)
                sigs[j] = signature(c, &ivs)
            cuts[0] = A
            k = 1
            for j in range(1, n_scan):
                if sigs[j] != sigs[j - 1]:
                    lo_e = scan[j - 1]
                    hi_e = scan[j]
                    s_lo = sigs[j - 1]
                    while hi_e - lo_e > ell_tol:
                        mid = 0.5 * (lo_e + hi_e)
                        intervals(c, mid, &ivs, w.rs, w.hs, w.pr, w.ph)
                        if signature(c, &ivs) == s_lo:
                            lo_e = mid
                        else:
                            hi_e = mid
                    cuts[k] = 0.5 * (lo_e + hi_e)
                    k += 1
            cuts[k] = B
            k += 1
            for j in range(k - 1):
                c0 = cuts[j]
                c1 = cuts[j + 1]
                if c1 <= c0:
                    continue
                nsub = <int>ceil((c1 - c0) / max_width)
                if nsub < 1:
                    nsub = 1
                hsub = (c1 - c0) / nsub
                for sidx in range(nsub):
                    a0 = c0 + sidx * hsub
                    tol = eps_abs * hsub / 2.0
                    # explicit stack mirrors the list-based recursion of the Python twin
                    top = 0
                    stack_u0[0] = 0.0
                    stack_u1[0] = 1.0
                    stack_d[0] = 0
                    while top >= 0:
                        u0 = stack_u0[top]
                        u1 = stack_u1[top]
                        depth = stack_d[top]
                        top -= 1
                        val = gk(c, &ivs, w, a0, hsub, u0, u1, expo, log_norm, &err)
                        if err <= tol * (u1 - u0) or depth >= MAX_DEPTH:
                            total += val
                        else:
                            mid = 0.5 * (u0 + u1)
                            top += 1
                            stack_u0[top] = u0
                            stack_u1[top] = mid
                            stack_d[top] = depth + 1
                            top += 1
                            stack_u0[top] = mid
                            stack_u1[top] = u1
                            stack_d[top] = depth + 1
    finally:
        free(scan)
        free(sigs)
        free(cuts)
    return total


def component(double gamma, const double[::1] pa, const double[::1] pb, int p, double kk,
              double l_r, double u_r, bint use_g, cfg):
    n_grid, root_tol, n_scan, ell_tol, max_width, eps_abs = cfg
    cdef Ctx c
    cdef _Work w = _Work(n_grid)
    ctx_init(&c, pa, pb, p, gamma, kk, l_r, u_r, use_g, n_grid, root_tol)
    return component_c(&c, w, n_scan, ell_tol, max_width, eps_abs)


def components(gammas, const double[::1] pa, const double[::1] pb, int p, double kk,
               double l_r, double u_r, bint use_g, cfg):
    n_grid, root_tol, n_scan, ell_tol, max_width, eps_abs = cfg
    cdef Ctx c
    cdef _Work w = _Work(n_grid)
    out = []
    for g in gammas:
        ctx_init(&c, pa, pb, p, float(g), kk, l_r, u_r, use_g, n_grid, root_tol)
        out.append(component_c(&c, w, n_scan, ell_tol, max_width, eps_abs))
    return out
