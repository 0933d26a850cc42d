"""Vectorised numpy/scipy counterparts of the numba kernels."""

import numpy as np
from scipy import special


def jy_integer(nmax, x):
    n = np.arange(nmax + 1, dtype=float)[:, None]
    return special.jv(n, x[None, :]), special.yv(n, x[None, :])


def jy_half(nmax, x):
    nu = np.arange(nmax + 1, dtype=float)[:, None] + 0.5
    return special.jv(nu, x[None, :]), special.yv(nu, x[None, :])


def green_matrix(a, b, k, dim):
    r = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    if dim == 2:
        return 0.25j * special.hankel1(0, k * r)
    return np.exp(1j * k * r) / (4.0 * np.pi * r)


def cross_table(weights, f, ord_f, g, ord_g, theta):
    eg = g * np.exp(-1j * ord_g[None, :, None] * theta[:, None, :])
    ef = f * np.exp(-1j * ord_f[None, :, None] * theta[:, None, :])
    return np.einsum("pr,par,pbr->pab", weights, eg, ef.conj()).real
