"""Cylindrical Bessel/Hankel functions and Helmholtz Green's functions.

Orders are integers or half-integers, stored as ``twice_order`` so both
share one exact representation.  Values are produced by the active kernel
backend (see ``scatmesh._backend``); negative orders are mapped onto
non-negative ones by the reflection formulas, so ``J_{-n} = (-1)^n J_n``
holds bit-for-bit.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _backend
from .errors import CoincidentPointError, DomainError

MAX_ABS_ORDER = 64
MAX_GAMMA_RATIO_TERMS = 170


@dataclass(frozen=True)
class BesselOrder:
    twice_order: int

    def __post_init__(self):
        if not isinstance(self.twice_order, (int, np.integer)):
            raise DomainError("twice_order must be an integer")
        if abs(self.twice_order) > 2 * MAX_ABS_ORDER:
            raise DomainError(f"|order| > {MAX_ABS_ORDER} is not supported")

    @classmethod
    def of(cls, nu):
        """Build from an int, a half-integer float/Fraction, or another order."""
        if isinstance(nu, BesselOrder):
            return nu
        twice = Fraction(nu) * 2
        if twice.denominator != 1:
            raise DomainError(f"order {nu!r} is neither integer nor half-integer")
        return cls(int(twice))

    @property
    def nu(self):
        return self.twice_order / 2

    @property
    def is_integer(self):
        return self.twice_order % 2 == 0


@dataclass(frozen=True)
class GreenKernel:
    dimension: int
    wavenumber: float

    def __post_init__(self):
        if self.dimension < 2:
            raise DomainError("dimension must be >= 2")
        if not self.wavenumber > 0:
            raise DomainError("wavenumber must be positive")


def _as_positive_array(x, allow_zero=False):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("argument must be finite")
    bad = arr < 0 if allow_zero else arr <= 0
    if np.any(bad):
        raise DomainError("argument must be positive" if not allow_zero else "argument must be >= 0")
    return arr


def jy_table(twice_orders, x):
    """J and Y for every order in ``twice_orders`` at every x (> 0).

    Returns two real arrays of shape ``(len(twice_orders),) + x.shape``.
    """
    twice = np.asarray(twice_orders, dtype=np.int64).ravel()
    if twice.size and np.max(np.abs(twice)) > 2 * MAX_ABS_ORDER:
        raise DomainError(f"|order| > {MAX_ABS_ORDER} is not supported")
    xa = _as_positive_array(x)
    shape = xa.shape
    flat = np.ascontiguousarray(xa.ravel())
    jj = np.empty((twice.size, flat.size))
    yy = np.empty((twice.size, flat.size))
    kern = _backend.kernels

    even = twice % 2 == 0
    if np.any(even):
        n = np.abs(twice[even]) // 2
        jt, yt = kern.jy_integer(int(n.max()), flat)
        sign = np.where((twice[even] < 0) & (n % 2 == 1), -1.0, 1.0)[:, None]
        jj[even] = sign * jt[n]
        yy[even] = sign * yt[n]
    odd = ~even
    if np.any(odd):
        t = twice[odd]
        n = (np.abs(t) - 1) // 2  # |nu| = n + 1/2
        jt, yt = kern.jy_half(int(n.max()), flat)
        pos = t > 0
        parity = np.where(n % 2 == 0, 1.0, -1.0)[:, None]
        # J_{-(n+1/2)} = (-1)^{n+1} Y_{n+1/2},  Y_{-(n+1/2)} = (-1)^n J_{n+1/2}
        jj[odd] = np.where(pos[:, None], jt[n], -parity * yt[n])
        yy[odd] = np.where(pos[:, None], yt[n], parity * jt[n])
    return jj.reshape((twice.size,) + shape), yy.reshape((twice.size,) + shape)


def hankel1_table(twice_orders, x):
    jj, yy = jy_table(twice_orders, x)
    return jj + 1j * yy


def bessel_j(order, x):
    """J_nu(x) for integer or half-integer nu; x >= 0 (x > 0 for half orders)."""
    o = BesselOrder.of(order)
    xv = float(_as_positive_array(x, allow_zero=True))
    if xv == 0.0:
        if not o.is_integer:
            raise DomainError("half-integer orders need x > 0")
        return 1.0 if o.twice_order == 0 else 0.0
    return float(jy_table([o.twice_order], xv)[0][0])


def bessel_y(order, x):
    o = BesselOrder.of(order)
    xv = float(_as_positive_array(x))
    return float(jy_table([o.twice_order], xv)[1][0])


def hankel(kind, order, x):
    """Hankel function of the first (kind=1) or second (kind=2) kind."""
    if kind not in (1, 2):
        raise DomainError("kind must be 1 or 2")
    o = BesselOrder.of(order)
    xv = float(_as_positive_array(x))
    jj, yy = jy_table([o.twice_order], xv)
    h1 = complex(jj[0], yy[0])
    return h1 if kind == 1 else h1.conjugate()


def gamma_ratio(a, r):
    """Gamma(a + r) / Gamma(a) as the rising product a (a+1) ... (a+r-1)."""
    if not a > 0:
        raise DomainError("a must be positive")
    if r < 0 or int(r) != r:
        raise DomainError("r must be a non-negative integer")
    if r > MAX_GAMMA_RATIO_TERMS:
        raise DomainError(f"r > {MAX_GAMMA_RATIO_TERMS} overflows")
    out = 1.0
    for j in range(int(r)):
        out *= a + j
    return out


def kernel_factor(dimension, k, r):
    """r^{(2-M)/2} H^{(1)}_{(M-2)/2}(k r), the radial part of G in any dimension M."""
    ra = _as_positive_array(r)
    h = hankel1_table([dimension - 2], k * ra)[0]
    return ra ** ((2.0 - dimension) / 2.0) * h


def green_matrix(kernel, a, b):
    """G(a_i, b_j) for point sets ``a`` (n, M) and ``b`` (m, M)."""
    if kernel.dimension not in (2, 3):
        raise DomainError("Green's function is only evaluable for M in {2, 3}")
    a = np.ascontiguousarray(np.atleast_2d(a), dtype=float)
    b = np.ascontiguousarray(np.atleast_2d(b), dtype=float)
    if a.shape[1] != kernel.dimension or b.shape[1] != kernel.dimension:
        raise DomainError("point dimension does not match the kernel")
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    scale = np.maximum(1.0, np.maximum(np.abs(a).max(axis=1)[:, None], np.abs(b).max(axis=1)[None, :]))
    if np.any(d <= np.finfo(float).eps * scale):
        raise CoincidentPointError("G(x, z) is singular at x = z")
    return _backend.kernels.green_matrix(a, b, float(kernel.wavenumber), kernel.dimension)


def green(kernel, x, z):
    return complex(green_matrix(kernel, np.asarray(x, float)[None, :], np.asarray(z, float)[None, :])[0, 0])
