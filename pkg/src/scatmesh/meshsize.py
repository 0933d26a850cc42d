"""Optimal sampling mesh sizes.

Far field: the Nyquist spacing pi/k and the sample count ceil(4|Omega|/lambda^2).

Near field: the anisotropic size h_{z,v}(alpha) at a point ``z`` along a
unit direction ``v``, assembled from weighted sums over the measurement
surface of Hankel products (the coefficients ``p`` and ``h``) and the
series constants built from them.  Every function accepting a single
point has a batched counterpart working on ``(P, M)`` stacks, which is what
grid-level routines use.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from .errors import CoincidentPointError, DomainError, PreconditionError
from .geometry import Grid
from .specfun import gamma_ratio, hankel1_table

CONVERGENCE_RTOL = 1e-6
_SERIES_TERMS = 40


class TruncationWarning(UserWarning):
    """Series constants did not settle when the truncation was raised."""


@dataclass(frozen=True)
class MeshSizeParams:
    """Tuning of the near-field mesh-size function.

    Parameters
    ----------
    alpha : float
        Distinguishability level in (0, 1).
    delta, gamma : float
        Series-bound and clamp parameters in (0, 1).
    n_trunc, rs_trunc : int
        Truncation of the Bessel order index and of the radial indices.
    constant_mode : {"paper-approx", "exact-truncated"}
        Closed-form approximations of the constants, or their truncated sums.
    alpha_denominator : {"plus", "minus"}
        Use (2 + alpha)^2 or the exact rearrangement (2 - alpha)^2.
    r0, r1 : float, optional
        Admissible band for dist(z, Gamma); default [0.05, 100] wavelengths.
    """

    alpha: float = 0.5
    delta: float = 0.5
    gamma: float = 0.1
    n_trunc: int = 12
    rs_trunc: int = 6
    constant_mode: str = "paper-approx"
    alpha_denominator: str = "plus"
    r0: Optional[float] = None
    r1: Optional[float] = None

    def __post_init__(self):
        for name in ("alpha", "delta", "gamma"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {val}")
        if self.n_trunc < 1 or self.rs_trunc < 1:
            raise DomainError("truncation orders must be >= 1")
        if self.constant_mode not in ("paper-approx", "exact-truncated"):
            raise DomainError("constant_mode must be 'paper-approx' or 'exact-truncated'")
        if self.alpha_denominator not in ("plus", "minus"):
            raise DomainError("alpha_denominator must be 'plus' or 'minus'")
        if self.r0 is not None and self.r1 is not None and self.r0 > self.r1:
            raise DomainError("validity band needs r0 <= r1")

    @property
    def exact(self):
        return self.constant_mode == "exact-truncated"

    def band(self, ctx):
        r0 = 0.05 * ctx.wavelength if self.r0 is None else self.r0
        r1 = 100.0 * ctx.wavelength if self.r1 is None else self.r1
        return r0, r1

    def with_alpha(self, alpha):
        return MeshSizeParams(**{**self.__dict__, "alpha": alpha})

    def to_dict(self):
        return dict(self.__dict__)


# ---------------------------------------------------------------- geometry


def relative_angle(z, x, v):
    """Angle between z - x and v: signed (counterclockwise) in 2D, unsigned in 3D."""
    z = np.asarray(z, float)
    d = z - np.asarray(x, float)
    if not np.any(d):
        raise CoincidentPointError("z and x coincide")
    return float(_angles(d[None, None, :], np.asarray(v, float)[None, :])[0, 0])


def _angles(d, v):
    """Angles for difference vectors d (P, R, M) against directions v (P, M)."""
    dot = np.einsum("prm,pm->pr", d, v)
    if d.shape[-1] == 2:
        cross = d[..., 0] * v[:, None, 1] - d[..., 1] * v[:, None, 0]
        th = np.arctan2(cross, dot)
        return np.where(th == -np.pi, np.pi, th)
    c = np.cross(d, v[:, None, :])
    return np.arctan2(np.linalg.norm(c, axis=-1), dot)


def _unit(v, dim):
    v = np.asarray(v, float)
    if v.shape[-1] != dim:
        raise DomainError("direction has the wrong dimension")
    n = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(n - 1.0) > 1e-12):
        raise DomainError("direction must be a unit vector")
    return v


def _distances(z, surface):
    d = z[:, None, :] - surface.points[None, :, :]
    return d, np.sqrt((d**2).sum(-1))


def admissible(ctx, z, surface, params):
    """Boolean mask: dist(z, Gamma) inside the validity band."""
    z = np.atleast_2d(np.asarray(z, float))
    r0, r1 = params.band(ctx)
    dist = surface.distance(z)
    return (dist >= r0) & (dist <= r1)


def _check_admissible(ctx, z, surface, params):
    ok = admissible(ctx, z, surface, params)
    if not np.all(ok):
        r0, r1 = params.band(ctx)
        bad = np.atleast_2d(z)[~ok][0]
        raise PreconditionError(
            f"dist(z, Gamma) = {surface.distance(bad[None, :])[0]:.6g} at z = {bad.tolist()} "
            f"outside the validity band [{r0:.6g}, {r1:.6g}]"
        )


# ------------------------------------------------------------ coefficients


def _series_weights(nmax):
    """S_n = sum_l 1/(l! (l+n)!) and 1/n! for n = 0..nmax."""
    inv_fact = np.array([1.0 / math.factorial(j) for j in range(nmax + _SERIES_TERMS + 1)])
    s = np.array([np.sum(inv_fact[:_SERIES_TERMS] * inv_fact[n : n + _SERIES_TERMS]) for n in range(nmax + 1)])
    return s, inv_fact[: nmax + 1]


def _tables_2d(ctx, z, v, surface, N):
    """h[p, n+N, m+N] for |n|, |m| <= N (p_n is the m = 0 column)."""
    d, rho = _distances(z, surface)
    theta = _angles(d, v)
    orders = np.arange(-N, N + 1)
    hk = hankel1_table(2 * orders, ctx.k * rho)  # (2N+1, P, R)
    hk = np.ascontiguousarray(np.moveaxis(hk, 0, 1))
    w = np.ascontiguousarray(np.broadcast_to(surface.weights, rho.shape))
    ordf = orders.astype(float)
    return _backend.kernels.cross_table(w, hk, ordf, hk, ordf, np.ascontiguousarray(theta))


def _tables_3d(ctx, z, v, surface, N, R):
    """p[p, n, r, s] and h[p, n, m, r, s] for half-integer orders 1/2 + n."""
    d, rho = _distances(z, surface)
    theta = _angles(d, v)
    cos = np.cos(theta)
    orders = np.arange(-N, N + 1)
    hk = hankel1_table(1 + 2 * orders, ctx.k * rho)
    hk = np.ascontiguousarray(np.moveaxis(hk, 0, 1))
    h_half = np.ascontiguousarray(hk[:, N : N + 1])
    ordf = orders.astype(float)
    zero = np.zeros(1)
    th = np.ascontiguousarray(theta)
    P = z.shape[0]
    nn = 2 * N + 1
    ptab = np.zeros((P, nn, R + 1, R + 1))
    htab = np.zeros((P, nn, nn, R + 1, R + 1))
    for r in range(R + 1):
        for s in range(r + 1):
            w = surface.weights * rho ** (-1.0 - r - s) * cos ** (r - s)
            w = np.ascontiguousarray(w)
            fac = (-1) ** r / (math.factorial(s) * math.factorial(r - s))
            t = _backend.kernels.cross_table(w, hk, ordf, hk, ordf, th)
            htab[:, :, :, r, s] = fac * gamma_ratio(0.5, r) * t
            t1 = _backend.kernels.cross_table(w, h_half, zero, hk, ordf, th)
            ptab[:, :, r, s] = fac * gamma_ratio(0.25, r) * t1[:, :, 0]
    return ptab, htab


def _alpha_term(params, C):
    a = params.alpha
    den = (2.0 + a) ** 2 if params.alpha_denominator == "plus" else (2.0 - a) ** 2
    return 16.0 * (1.0 - a) / (C * den)


def _constants_2d(htab, N, params):
    """k1, C1, C2, C from the (P, 2N+1, 2N+1) table."""
    p = htab[:, :, N]
    p0 = p[:, N]
    p1, pm1 = p[:, N + 1], p[:, N - 1]
    k1 = (htab[:, N + 1, N] - htab[:, N - 1, N] + htab[:, N, N + 1] - htab[:, N, N - 1]) / p0
    P = np.abs(p1) + np.abs(pm1)
    s, inv = _series_weights(N)
    an = np.abs(np.arange(-N, N + 1))
    sn, fn = s[an], inv[an]
    ap = np.abs(p)
    C1 = ap @ (sn - fn) + ap[:, an >= 2] @ fn[an >= 2]
    ah = np.abs(htab)
    big = (an[:, None] + an[None, :]) >= 2
    C2 = np.einsum("pnm,nm->p", ah, np.outer(sn, sn) - np.outer(fn, fn)) + np.einsum(
        "pnm,nm->p", ah, np.where(big, np.outer(fn, fn), 0.0)
    )
    if params.exact:
        d = params.delta
        C = (
            C2 / p0 * (1.0 + 2.0 * np.abs(k1) / d)
            + k1**2 / d
            + C2**2 / (p0**2 * d)
            + 2.0 * P * np.abs(k1) / p0
            + (P**2 + 2.0 * (p0 + P) * C1 + C1**2) / p0**2
        )
    else:
        C = 13.0 + 8.0 * np.abs(k1) + 2.0 * k1**2 + (P**2 + 2.0 * P * (1.0 + np.abs(k1)) * p0) / p0**2
    return k1, C1, C2, C


def _constants_3d(ptab, htab, N, k, params):
    p000 = ptab[:, N, 0, 0]
    p100, pm100, p010 = ptab[:, N + 1, 0, 0], ptab[:, N - 1, 0, 0], ptab[:, N, 1, 0]
    h = htab[:, :, :, 0, 0]
    k1 = (h[:, N + 1, N] - h[:, N - 1, N] + h[:, N, N + 1] - h[:, N, N - 1] + 2.0 * htab[:, N, N, 1, 0] / k) / p000
    PM = np.abs(p100) + np.abs(pm100) - 2.0 * np.abs(p010) / k
    s, inv = _series_weights(N)
    an = np.abs(np.arange(-N, N + 1))
    sn, fn = s[an], inv[an]
    ap = np.abs(ptab).sum(axis=(2, 3))
    ah = np.abs(htab).sum(axis=(3, 4))
    C1 = ap @ (sn - fn) + ap[:, an >= 2] @ fn[an >= 2]
    big = (an[:, None] + an[None, :]) >= 2
    C2 = np.einsum("pnm,nm->p", ah, np.outer(sn, sn) - np.outer(fn, fn)) + np.einsum(
        "pnm,nm->p", ah, np.where(big, np.outer(fn, fn), 0.0)
    )
    if params.exact:
        d = params.delta
        C = (
            C2 / p000 * (1.0 + 2.0 * np.abs(k1) / d)
            + k1**2 / d
            + C2**2 / (p000**2 * d)
            + 2.0 * PM * np.abs(k1) / p000
            + (PM**2 + 2.0 * (p000 + PM) * C1 + C1**2) / p000**2
        )
    else:
        C = 13.0 + 8.0 * np.abs(k1) + 2.0 * k1**2 + (PM**2 + 2.0 * PM * (p000 + np.abs(k1))) / p000**2
    return k1, C1, C2, C


@dataclass(frozen=True, eq=False)
class CoefficientSet2D:
    """p_n, h_nm and the constants at one point and direction.

    ``p_table[n + N]`` and ``h_table[n + N, m + N]`` hold the truncated tables.
    """

    p_table: np.ndarray
    h_table: np.ndarray
    n_trunc: int
    k1: float
    C1: float
    C2: float
    C: float
    location: np.ndarray
    direction: np.ndarray
    warnings: tuple = ()

    @property
    def p0(self):
        return float(self.p_table[self.n_trunc])

    def pn(self, n):
        return float(self.p_table[n + self.n_trunc])

    def hnm(self, n, m):
        return float(self.h_table[n + self.n_trunc, m + self.n_trunc])

    @property
    def p(self):
        return {n: self.pn(n) for n in range(-self.n_trunc, self.n_trunc + 1)}

    @property
    def h(self):
        r = range(-self.n_trunc, self.n_trunc + 1)
        return {(n, m): self.hnm(n, m) for n in r for m in r}


@dataclass(frozen=True, eq=False)
class CoefficientSet3D:
    """p_nrs, h_nmrs and the constants; tables indexed [n + N, r, s] / [n + N, m + N, r, s]."""

    p3_table: np.ndarray
    h3_table: np.ndarray
    n_trunc: int
    rs_trunc: int
    k1M: float
    C1M: float
    C2M: float
    CM: float
    location: np.ndarray
    direction: np.ndarray
    warnings: tuple = ()

    @property
    def p000(self):
        return float(self.p3_table[self.n_trunc, 0, 0])

    def pnrs(self, n, r, s):
        if not 0 <= s <= r <= self.rs_trunc:
            raise DomainError("need 0 <= s <= r <= rs_trunc")
        return float(self.p3_table[n + self.n_trunc, r, s])

    def hnmrs(self, n, m, r, s):
        if not 0 <= s <= r <= self.rs_trunc:
            raise DomainError("need 0 <= s <= r <= rs_trunc")
        return float(self.h3_table[n + self.n_trunc, m + self.n_trunc, r, s])

    @property
    def p3(self):
        N, R = self.n_trunc, self.rs_trunc
        return {(n, r, s): self.pnrs(n, r, s) for n in range(-N, N + 1) for r in range(R + 1) for s in range(r + 1)}

    @property
    def h3(self):
        N, R = self.n_trunc, self.rs_trunc
        return {
            (n, m, r, s): self.hnmrs(n, m, r, s)
            for n in range(-N, N + 1)
            for m in range(-N, N + 1)
            for r in range(R + 1)
            for s in range(r + 1)
        }


def _converged(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return np.abs(a - b) <= CONVERGENCE_RTOL * np.maximum(np.abs(a), np.abs(b)) + 1e-300


def _prep(ctx, z, v, surface, params, dim):
    if ctx.M != dim:
        raise DomainError(f"expected an M = {dim} context")
    z = np.asarray(z, float)
    if z.shape != (dim,) or surface.dim != dim:
        raise DomainError("point/surface dimension mismatch")
    _check_admissible(ctx, z, surface, params)
    return z[None, :], _unit(v, dim)[None, :]


def coefficients_2d(ctx, z, v, surface, params):
    zz, vv = _prep(ctx, z, v, surface, params, 2)
    N = params.n_trunc
    htab = _tables_2d(ctx, zz, vv, surface, N)
    k1, C1, C2, C = _constants_2d(htab, N, params)
    notes = []
    if params.exact:
        N2 = N + 4
        k1b, C1b, C2b, Cb = _constants_2d(_tables_2d(ctx, zz, vv, surface, N2), N2, params)
        if not np.all(_converged([C1, C2, C], [C1b, C2b, Cb])):
            notes.append(f"constants not converged at n_trunc={N} (relative change > {CONVERGENCE_RTOL:g} at n_trunc={N2})")
            warnings.warn(notes[-1], TruncationWarning, stacklevel=2)
    return CoefficientSet2D(
        htab[0, :, N].copy(), htab[0].copy(), N, float(k1[0]), float(C1[0]), float(C2[0]), float(C[0]),
        zz[0], vv[0], tuple(notes),
    )


def coefficients_3d(ctx, z, v, surface, params):
    zz, vv = _prep(ctx, z, v, surface, params, 3)
    N, R = params.n_trunc, params.rs_trunc
    ptab, htab = _tables_3d(ctx, zz, vv, surface, N, R)
    k1, C1, C2, C = _constants_3d(ptab, htab, N, ctx.k, params)
    notes = []
    if params.exact:
        pb, hb = _tables_3d(ctx, zz, vv, surface, N + 4, R + 2)
        k1b, C1b, C2b, Cb = _constants_3d(pb, hb, N + 4, ctx.k, params)
        if not np.all(_converged([C1, C2, C], [C1b, C2b, Cb])):
            notes.append(f"constants not converged at n_trunc={N}, rs_trunc={R}")
            warnings.warn(notes[-1], TruncationWarning, stacklevel=2)
    return CoefficientSet3D(
        ptab[0].copy(), htab[0].copy(), N, R, float(k1[0]), float(C1[0]), float(C2[0]), float(C[0]),
        zz[0], vv[0], tuple(notes),
    )


# --------------------------------------------------------------- mesh size


def _min_entries(k, k1, C, C2, p0, lin, params, dist):
    """(2/k) min{1/4, second, third}, clamped; also returns the three entries."""
    if params.exact:
        a = p0 * np.abs(k1) / (2.0 * C2)
        second = np.sqrt(a**2 + p0 * (1.0 - params.delta) / C2) - a
    else:
        second = np.sqrt(k1**2 / 16.0 + 0.25) - np.abs(k1) / 4.0
    T = _alpha_term(params, C)
    root = np.sqrt(lin**2 + T)
    # -B + sqrt(B^2 + T), written without cancellation for B > 0
    third = np.where(lin > 0, T / (lin + root), root - lin)
    h = (2.0 / k) * np.minimum(np.minimum(0.25, second), third)
    h = np.minimum(h, (1.0 - params.gamma) * np.minimum(1.0, dist))
    return h, second, third


def _mesh_batch_2d(ctx, z, v, surface, params):
    N = params.n_trunc if params.exact else 1
    htab = _tables_2d(ctx, z, v, surface, N)
    k1, C1, C2, C = _constants_2d(htab, N, params)
    p0 = htab[:, N, N]
    p1, pm1 = htab[:, N + 1, N], htab[:, N - 1, N]
    B = (2.0 * p1 - 2.0 * pm1 + k1 * p0) / (2.0 * C * p0)
    return _min_entries(ctx.k, k1, C, C2, p0, B, params, surface.distance(z))[0]


def _mesh_batch_3d(ctx, z, v, surface, params):
    N, R = (params.n_trunc, params.rs_trunc) if params.exact else (1, 1)
    ptab, htab = _tables_3d(ctx, z, v, surface, N, R)
    k1, C1, C2, C = _constants_3d(ptab, htab, N, ctx.k, params)
    p000 = ptab[:, N, 0, 0]
    D = 2.0 * (ptab[:, N + 1, 0, 0] - ptab[:, N - 1, 0, 0] - 2.0 * ptab[:, N, 1, 0] / ctx.k) / p000 + k1
    return _min_entries(ctx.k, k1, C, C2, p000, D, params, surface.distance(z))[0]


def mesh_size_batch(ctx, z, v, surface, params, combined=False):
    """Mesh sizes at each row of ``z`` (P, M) for direction(s) ``v``.

    Points outside the validity band come back as NaN.
    """
    z = np.atleast_2d(np.asarray(z, float))
    v = _unit(np.broadcast_to(np.asarray(v, float), z.shape), ctx.M)
    v = np.ascontiguousarray(v)
    out = np.full(z.shape[0], np.nan)
    ok = admissible(ctx, z, surface, params)
    if not np.any(ok):
        return out
    fn = _mesh_batch_2d if ctx.M == 2 else _mesh_batch_3d
    h = fn(ctx, z[ok], v[ok], surface, params)
    if combined:
        h = np.minimum(h, fn(ctx, z[ok], -v[ok], surface, params))
    out[ok] = h
    return out


@dataclass(frozen=True)
class MeshSizeResult:
    h: float
    entries: tuple
    warnings: tuple = ()


def _scalar_inputs(ctx, z, v, surface, params):
    if ctx.M == 2:
        cs = coefficients_2d(ctx, z, v, surface, params)
        p0 = cs.p0
        lin = (2.0 * cs.pn(1) - 2.0 * cs.pn(-1) + cs.k1 * p0) / (2.0 * cs.C * p0)
        k1, C, C2 = cs.k1, cs.C, cs.C2
    else:
        cs = coefficients_3d(ctx, z, v, surface, params)
        p0 = cs.p000
        lin = 2.0 * (cs.pnrs(1, 0, 0) - cs.pnrs(-1, 0, 0) - 2.0 * cs.pnrs(0, 1, 0) / ctx.k) / p0 + cs.k1M
        k1, C, C2 = cs.k1M, cs.CM, cs.C2M
    dist = surface.distance(np.asarray(z, float)[None, :])
    return cs, [np.array([x]) for x in (k1, C, C2, p0, lin)] + [dist]


def mesh_size_details(ctx, z, v, surface, params):
    """Mesh size together with its three (unscaled) min-entries and warnings."""
    cs, (k1, C, C2, p0, lin, dist) = _scalar_inputs(ctx, z, v, surface, params)
    h, second, third = _min_entries(ctx.k, k1, C, C2, p0, lin, params, dist)
    return MeshSizeResult(float(h[0]), (0.25, float(second[0]), float(third[0])), cs.warnings)


def mesh_size_2d(ctx, z, v, surface, params):
    if ctx.M != 2:
        raise DomainError("mesh_size_2d needs M = 2")
    return mesh_size_details(ctx, z, v, surface, params).h


def mesh_size_3d(ctx, z, v, surface, params):
    if ctx.M != 3:
        raise DomainError("mesh_size_3d needs M = 3")
    return mesh_size_details(ctx, z, v, surface, params).h


def mesh_size_combined(ctx, z, v, surface, params):
    """min{h(z, v), h(z, -v)}."""
    v = np.asarray(v, float)
    return min(mesh_size_details(ctx, z, v, surface, params).h, mesh_size_details(ctx, z, -v, surface, params).h)


def alpha_sweep(ctx, z, v, surface, params, alphas):
    """h_{z,v}(alpha) for each alpha; the coefficients are computed once."""
    cs, (k1, C, C2, p0, lin, dist) = _scalar_inputs(ctx, z, v, surface, params)
    return np.array([_min_entries(ctx.k, k1, C, C2, p0, lin, params.with_alpha(a), dist)[0][0] for a in alphas])


# --------------------------------------------------------------- far field


def far_field_mesh(ctx):
    """Nyquist spacing lambda/2 = pi/k (the supremum of admissible sizes)."""
    return math.pi / ctx.k


def far_field_sample_count(area_omega, ctx):
    """ceil(4 |Omega| / lambda^2)."""
    if not area_omega > 0:
        raise DomainError("area must be positive")
    if ctx.M != 2:
        raise DomainError("the sample count is stated for M = 2")
    return int(math.ceil(4.0 * area_omega / ctx.wavelength**2))


# ----------------------------------------------------------------- density


@dataclass(frozen=True, eq=False)
class SizeField:
    """Combined mesh size and normalised density over an evaluation grid."""

    grid: Grid
    h: np.ndarray
    density: np.ndarray
    mask: np.ndarray
    alpha: float
    direction: np.ndarray
    normalization: float

    def to_csv(self, path):
        cols = ["x", "y", "z"][: self.grid.dim] + ["h", "density"]
        data = np.column_stack([self.grid.points, self.h, self.density])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def density_field(ctx, domain, v, surface, params, eval_grid):
    """h~^{-M} / int h~^{-M} on ``eval_grid`` (midpoint rule, masked points excluded)."""
    pts = eval_grid.points
    if not np.all(domain.contains(pts, tol=1e-12)):
        raise PreconditionError("evaluation grid leaves the domain")
    h = mesh_size_batch(ctx, pts, v, surface, params, combined=True)
    mask = np.isfinite(h)
    if not np.any(mask):
        raise PreconditionError("every evaluation point is outside the validity band")
    vol = eval_grid.cell_volumes if eval_grid.cell_sizes is not None else np.full(len(eval_grid), domain.volume / len(eval_grid))
    raw = np.where(mask, h, 1.0) ** (-float(ctx.M))
    norm = float(np.sum(raw[mask] * vol[mask]))
    dens = np.where(mask, raw / norm, np.nan)
    return SizeField(eval_grid, h, dens, mask, params.alpha, np.asarray(v, float), norm)
