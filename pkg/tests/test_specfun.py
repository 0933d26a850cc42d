import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scatmesh.errors import CoincidentPointError, DomainError
from scatmesh.specfun import (
    BesselOrder,
    GreenKernel,
    bessel_j,
    bessel_y,
    gamma_ratio,
    green,
    green_matrix,
    hankel,
    hankel1_table,
    jy_table,
    kernel_factor,
)

XS = np.concatenate([np.linspace(0.1, 50.0, 400), [1e-3, 0.5, 7.9, 12.0, 12.01, 25.0, 49.99]])


def test_order_encoding():
    assert BesselOrder.of(0.5).twice_order == 1
    assert BesselOrder.of(-3).twice_order == -6
    assert BesselOrder.of(BesselOrder(5)).nu == 2.5
    with pytest.raises(DomainError):
        BesselOrder.of(0.3)
    with pytest.raises(DomainError):
        BesselOrder(2 * 65)


def test_j_small_values():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert abs(bessel_j(0, 2.404825557695773)) < 1e-12


def test_domain_errors():
    with pytest.raises(DomainError):
        bessel_j(0, -1.0)
    with pytest.raises(DomainError):
        bessel_y(0, 0.0)
    with pytest.raises(DomainError):
        bessel_j(0.5, 0.0)
    with pytest.raises(DomainError):
        hankel(3, 0, 1.0)


def test_wronskian_example(backend):
    w = bessel_j(1, 1.7) * bessel_y(0, 1.7) - bessel_j(0, 1.7) * bessel_y(1, 1.7)
    assert abs(w - 2 / (math.pi * 1.7)) < 1e-10


def test_wronskian_suite(backend):
    jj, yy = jy_table(np.arange(0, 24, 2), XS)
    for n in range(10):
        w = jj[n + 1] * yy[n] - jj[n] * yy[n + 1]
        assert np.max(np.abs(w - 2 / (np.pi * XS))) < 1e-10


def test_reflection_exact(backend):
    x = np.array([0.3, 2.5, 17.0, 44.0])
    jj, yy = jy_table([-6, 6, -7, 7, -2, 2], x)
    assert np.array_equal(jj[0], -jj[1]) and np.array_equal(yy[0], -yy[1])
    assert np.array_equal(jj[4], -jj[5]) and np.array_equal(yy[4], -yy[5])
    assert bessel_y(-3, 2.5) == -bessel_y(3, 2.5)


def test_recurrence_suite(backend):
    # integer and half-integer orders, J, Y and both Hankel kinds
    for twice in (list(range(-10, 12, 2)), list(range(-9, 12, 2))):
        jj, yy = jy_table(twice, XS)
        h1 = jj + 1j * yy
        for arr in (jj, yy, h1, np.conj(h1)):
            for i in range(1, len(twice) - 1):
                nu = twice[i] / 2
                lhs = arr[i - 1] + arr[i + 1]
                rhs = 2 * nu / XS * arr[i]
                scale = np.maximum(1.0, np.abs(arr[i - 1]) + np.abs(arr[i + 1]))
                assert np.max(np.abs(lhs - rhs) / scale) < 1e-9


def test_half_integer_closed_forms(backend):
    x = np.linspace(0.2, 50.0, 300)
    h = hankel1_table([1, 3, -1], x)
    pref = np.sqrt(2 / (np.pi * x))
    assert np.max(np.abs(h[0] - (-1j) * pref * np.exp(1j * x))) < 1e-12
    assert np.max(np.abs(h[1] - (-pref) * np.exp(1j * x) * (1 + 1j / x))) < 1e-12 * np.max(1 / x)
    assert np.max(np.abs(h[2] - pref * np.exp(1j * x))) < 1e-12
    assert abs(bessel_y(0.5, math.pi) - math.sqrt(2 / math.pi**2)) < 1e-12
    assert abs(hankel(1, 0.5, 1.0) - (-1j) * math.sqrt(2 / math.pi) * np.exp(1j)) < 1e-12


def test_against_mpmath_oracle(backend):
    rng = np.random.default_rng(3)
    for _ in range(60):
        n = int(rng.integers(0, 12))
        x = float(rng.uniform(0.05, 50))
        jt, yt = float(mpmath.besselj(n, x)), float(mpmath.bessely(n, x))
        assert abs(bessel_j(n, x) - jt) < 1e-12 * max(1, abs(jt))
        assert abs(bessel_y(n, x) - yt) < 1e-10 * max(1, abs(yt))


def test_hankel_conjugate_and_asymptotic(backend):
    assert hankel(2, 2, 1.3) == hankel(1, 2, 1.3).conjugate()
    assert abs(abs(hankel(1, 0, 50.0)) / math.sqrt(2 / (math.pi * 50)) - 1) < 0.02


def test_gamma_ratio():
    assert gamma_ratio(0.25, 0) == 1.0
    assert gamma_ratio(0.5, 3) == 1.875
    assert gamma_ratio(1.0, 6) == 720.0
    with pytest.raises(DomainError):
        gamma_ratio(1.0, 171)
    with pytest.raises(DomainError):
        gamma_ratio(0.0, 2)


def test_green_values(backend):
    g3 = green(GreenKernel(3, 1.0), np.zeros(3), np.array([1 / (4 * math.pi), 0, 0]))
    assert abs(g3 - np.exp(1j / (4 * math.pi))) < 1e-14
    g2 = green(GreenKernel(2, 2.0), np.zeros(2), np.array([0.3, 0.4]))
    assert abs(g2 - 0.25j * hankel(1, 0, 1.0)) < 1e-15
    with pytest.raises(CoincidentPointError):
        green(GreenKernel(2, 1.0), np.zeros(2), np.zeros(2))


def test_green_helmholtz_residual(backend):
    kern = GreenKernel(2, 3.0)
    x0, h = np.array([0.7, -0.2]), 1e-3
    pts = x0 + h * np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]])
    g = green_matrix(kern, pts, np.zeros((1, 2)))[:, 0]
    lap = (g[1:].sum() - 4 * g[0]) / h**2
    assert abs(lap + 9.0 * g[0]) < 1e-4


def test_kernel_factor_matches_green():
    r = np.array([0.3, 1.1])
    assert np.allclose(0.25j * kernel_factor(2, 1.5, r), green_matrix(GreenKernel(2, 1.5), np.zeros((1, 2)), np.c_[r, 0 * r])[0])


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(0.1, 10), st.sampled_from([2, 3]))
def test_green_symmetry_exact(coords, k, dim):
    a = np.array(coords[:2] + ([0.5] if dim == 3 else []))
    b = np.array(coords[2:] + ([-0.25] if dim == 3 else []))
    if np.linalg.norm(a - b) < 1e-6:
        return
    kern = GreenKernel(dim, k)
    assert green(kern, a, b) == green(kern, b, a)


def test_backends_agree():
    from scatmesh import _backend

    x = np.linspace(0.05, 60, 500)
    prev = _backend.set_backend("numba")
    a = jy_table(range(-20, 21), x)
    _backend.set_backend("numpy")
    b = jy_table(range(-20, 21), x)
    _backend.set_backend(prev)
    for u, v in zip(a, b):
        assert np.max(np.abs(u - v) / np.maximum(1, np.abs(v))) < 1e-10
