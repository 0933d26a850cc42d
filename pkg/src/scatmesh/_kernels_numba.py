"""numba kernels: Bessel tables, Green matrices and weighted cross tables.

J is always obtained by Miller's backward recurrence (normalised by the
Neumann sum for integer orders, by a least-squares fit to the closed
half-order pair otherwise).  Y0 and Y1 come from the Neumann series
accumulated during the same sweep for x <= 25 and from Hankel's
asymptotic expansion above; higher Y orders use forward recurrence.
"""

import math

import numpy as np
from numba import njit

EULER_GAMMA = 0.5772156649015329
TWO_OVER_PI = 0.6366197723675814
ASYMPTOTIC_X = 25.0
_RESCALE = 1e200


@njit(cache=True)
def _envj(n, x):
    # -log10 |J_n(x)| for n >> x (Debye leading order)
    return 0.5 * math.log10(6.28 * n) - n * math.log10(1.36 * x / n)


@njit(cache=True)
def _miller_start(x, nmax):
    m = max(nmax, int(x)) + 2
    target = 18.0
    if nmax > x:
        target += max(_envj(nmax, x), 0.0)
    while _envj(m, x) < target:
        m += 1
    m += 8
    if m % 2 == 1:
        m += 1
    return m


@njit(cache=True)
def _hankel_asymptotic(nu, x):
    mu = 4.0 * nu * nu
    p = 1.0
    q = 0.0
    term = 1.0
    k = 1
    while k < 60:
        nxt = term * (mu - (2.0 * k - 1.0) ** 2) / (k * 8.0 * x)
        if abs(nxt) > abs(term) or nxt == 0.0:
            break
        term = nxt
        if k % 2 == 0:
            p += term if (k // 2) % 2 == 0 else -term
        else:
            q += term if ((k - 1) // 2) % 2 == 0 else -term
        if abs(term) < 1e-17:
            break
        k += 1
    chi = x - (0.5 * nu + 0.25) * math.pi
    amp = math.sqrt(2.0 / (math.pi * x))
    c = math.cos(chi)
    s = math.sin(chi)
    return amp * (p * c - q * s), amp * (p * s + q * c)


@njit(cache=True)
def _jy_integer_core(nmax, x, jout, yout):
    """Fill jout[0..nmax], yout[0..nmax] with J_n(x), Y_n(x); x > 0."""
    top = max(nmax, 1)
    use_asym = x > ASYMPTOTIC_X
    j0 = j1 = y0 = y1 = 0.0
    if use_asym:
        j0, y0 = _hankel_asymptotic(0.0, x)
        j1, y1 = _hankel_asymptotic(1.0, x)
    if (not use_asym) or nmax >= x:
        m = _miller_start(x, top)
        f2 = 0.0
        f1 = 1e-30
        bs = 0.0
        su = 0.0
        sv = 0.0
        f = 0.0
        jt = np.zeros(top + 1)
        for kk in range(m, -1, -1):
            f = 2.0 * (kk + 1) / x * f1 - f2
            if kk <= top:
                jt[kk] = f
            if kk % 2 == 0 and kk != 0:
                bs += 2.0 * f
                if (kk // 2) % 2 == 0:
                    su += f / kk
                else:
                    su -= f / kk
            elif kk % 2 == 1 and kk > 1:
                coef = kk / (kk * kk - 1.0)
                if ((kk - 1) // 2) % 2 == 0:
                    sv += coef * f
                else:
                    sv -= coef * f
            f2 = f1
            f1 = f
            if abs(f) > _RESCALE:
                f /= _RESCALE
                f1 /= _RESCALE
                f2 /= _RESCALE
                bs /= _RESCALE
                su /= _RESCALE
                sv /= _RESCALE
                for i in range(kk, top + 1):
                    jt[i] /= _RESCALE
        s0 = bs + f
        for i in range(nmax + 1):
            jout[i] = jt[i] / s0
        if not use_asym:
            ec = math.log(0.5 * x) + EULER_GAMMA
            j0 = jt[0] / s0
            j1 = jt[1] / s0
            y0 = TWO_OVER_PI * (ec * j0 - 4.0 * su / s0)
            y1 = TWO_OVER_PI * ((ec - 1.0) * j1 - j0 / x - 4.0 * sv / s0)
    else:
        jout[0] = j0
        if nmax >= 1:
            jout[1] = j1
        for n in range(1, nmax):
            jout[n + 1] = 2.0 * n / x * jout[n] - jout[n - 1]
    yout[0] = y0
    if nmax >= 1:
        yout[1] = y1
    for n in range(1, nmax):
        yout[n + 1] = 2.0 * n / x * yout[n] - yout[n - 1]


@njit(cache=True)
def _jy_half_core(nmax, x, jout, yout):
    """Orders 1/2, 3/2, ..., nmax + 1/2 into jout[0..nmax], yout[0..nmax]."""
    sq = math.sqrt(2.0 / (math.pi * x))
    jm = sq * math.cos(x)
    jp = sq * math.sin(x)
    ym = sq * math.sin(x)
    yp = -sq * math.cos(x)
    yout[0] = yp
    prev = ym
    for n in range(nmax):
        nu = n + 0.5
        nxt = 2.0 * nu / x * yout[n] - prev
        prev = yout[n]
        yout[n + 1] = nxt
    m = _miller_start(x, nmax + 1)
    # f[i] ~ J_{i - 1/2}; sweep i = m .. 0
    f2 = 0.0
    f1 = 1e-30
    jt = np.zeros(nmax + 2)
    scale_from = nmax + 1
    f = 0.0
    for i in range(m, -1, -1):
        nu = i + 0.5  # order of f1 = J_{i + 1/2}
        f = 2.0 * nu / x * f1 - f2
        if i <= nmax + 1:
            jt[i] = f
        f2 = f1
        f1 = f
        if abs(f) > _RESCALE:
            f /= _RESCALE
            f1 /= _RESCALE
            f2 /= _RESCALE
            for t in range(i, scale_from + 1):
                jt[t] /= _RESCALE
    # jt[0] ~ J_{-1/2}, jt[1] ~ J_{1/2}
    c = (jt[1] * jp + jt[0] * jm) / (jt[1] * jt[1] + jt[0] * jt[0])
    for n in range(nmax + 1):
        jout[n] = c * jt[n + 1]
    jout[0] = jp


@njit(cache=True)
def jy_integer(nmax, x):
    nx = x.shape[0]
    jj = np.empty((nmax + 1, nx))
    yy = np.empty((nmax + 1, nx))
    jcol = np.empty(nmax + 1)
    ycol = np.empty(nmax + 1)
    for i in range(nx):
        _jy_integer_core(nmax, x[i], jcol, ycol)
        for n in range(nmax + 1):
            jj[n, i] = jcol[n]
            yy[n, i] = ycol[n]
    return jj, yy


@njit(cache=True)
def jy_half(nmax, x):
    nx = x.shape[0]
    jj = np.empty((nmax + 1, nx))
    yy = np.empty((nmax + 1, nx))
    jcol = np.empty(nmax + 1)
    ycol = np.empty(nmax + 1)
    for i in range(nx):
        _jy_half_core(nmax, x[i], jcol, ycol)
        for n in range(nmax + 1):
            jj[n, i] = jcol[n]
            yy[n, i] = ycol[n]
    return jj, yy


@njit(cache=True)
def green_matrix(a, b, k, dim):
    na = a.shape[0]
    nb = b.shape[0]
    out = np.empty((na, nb), dtype=np.complex128)
    jcol = np.empty(1)
    ycol = np.empty(1)
    for i in range(na):
        for j in range(nb):
            r2 = 0.0
            for c in range(a.shape[1]):
                d = a[i, c] - b[j, c]
                r2 += d * d
            r = math.sqrt(r2)
            if dim == 2:
                _jy_integer_core(0, k * r, jcol, ycol)
                out[i, j] = complex(-0.25 * ycol[0], 0.25 * jcol[0])
            else:
                kr = k * r
                s = 1.0 / (4.0 * math.pi * r)
                out[i, j] = complex(s * math.cos(kr), s * math.sin(kr))
    return out


@njit(cache=True)
def cross_table(weights, f, ord_f, g, ord_g, theta):
    """T[p, a, b] = Re sum_r w[p,r] conj(f[p,b,r] e^{-i ord_f[b] th}) g[p,a,r] e^{-i ord_g[a] th}."""
    npt = g.shape[0]
    ng = g.shape[1]
    nf = f.shape[1]
    nr = g.shape[2]
    out = np.zeros((npt, ng, nf))
    for p in range(npt):
        for r in range(nr):
            th = theta[p, r]
            w = weights[p, r]
            for a in range(ng):
                ga = g[p, a, r] * complex(math.cos(ord_g[a] * th), -math.sin(ord_g[a] * th))
                for b in range(nf):
                    fb = f[p, b, r] * complex(math.cos(ord_f[b] * th), -math.sin(ord_f[b] * th))
                    out[p, a, b] += w * (ga.real * fb.real + ga.imag * fb.imag)
    return out
