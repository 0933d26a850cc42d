"""Steering vectors and the rank-2 singular-value test for two point scatterers.

For unit vectors ``w1, w2`` the response matrix of two equal scatterers is
``A = w1 w1^T + w2 w2^T``.  With ``c = <w1, w2> = sum_r weight_r conj(w1_r) w2_r``
its two nonzero singular values are exactly

    sigma = sqrt(1 - (Im c)^2) +- |Re c|

(`rank2_singular_values_exact`).  The classical closed form
``1 +- |Re c|`` (`rank2_singular_values`) drops the imaginary part and is
exact only when ``Im c = 0``; the distinguishability predicate is defined
through it.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentPointError, DomainError
from .geometry import MeasurementSurface, WaveContext
from .specfun import hankel1_table

MAX_ORACLE_DIM = 512


@dataclass(frozen=True, eq=False)
class SteeringVector:
    """Kernel values (k|z-x|)^{(2-M)/2} H_{(M-2)/2}(k|z-x|) over Gamma, unit weighted norm."""

    values: np.ndarray
    location: np.ndarray
    context: WaveContext
    surface: MeasurementSurface

    def norm(self):
        return math.sqrt(float(np.sum(self.surface.weights * np.abs(self.values) ** 2)))


def kernel_values(ctx, z, surface):
    """Unnormalised steering entries for each row of ``z`` -> (len(z), len(surface))."""
    z = np.atleast_2d(np.asarray(z, float))
    r = np.sqrt(((z[:, None, :] - surface.points[None, :, :]) ** 2).sum(-1))
    if np.any(r <= np.finfo(float).eps * np.maximum(1.0, np.abs(z).max())):
        raise CoincidentPointError("sampling point coincides with a surface point")
    kr = ctx.k * r
    h = hankel1_table([ctx.M - 2], kr)[0]
    return kr ** ((2.0 - ctx.M) / 2.0) * h


def steering_vector(ctx, z, surface):
    vals = kernel_values(ctx, z, surface)[0]
    vals = vals / math.sqrt(float(np.sum(surface.weights * np.abs(vals) ** 2)))
    return SteeringVector(vals, np.asarray(z, float), ctx, surface)


def inner(w1, w2):
    """Weighted pairing sum_r weight_r conj(w1_r) w2_r."""
    if w1.surface is not w2.surface and (
        w1.surface.points.shape != w2.surface.points.shape
        or not np.array_equal(w1.surface.points, w2.surface.points)
        or not np.array_equal(w1.surface.weights, w2.surface.weights)
    ):
        raise DomainError("steering vectors live on different surfaces")
    if w1.context != w2.context:
        raise DomainError("steering vectors use different wave contexts")
    return complex(np.sum(w1.surface.weights * np.conj(w1.values) * w2.values))


def real_overlap(w1, w2):
    """Re <w1, w2>; symmetric since the two orders are complex conjugates."""
    return inner(w1, w2).real


@dataclass(frozen=True)
class DistinguishabilityResult:
    sigma0: float
    sigma1: float
    overlap: float

    @property
    def quotient(self):
        return self.sigma1 / self.sigma0

    def distinguishable_at(self, alpha):
        """sigma1/sigma0 <= 1 - alpha.

        Equivalent to |overlap| >= alpha/(2 - alpha); that form is also
        accepted so the boundary case survives rounding in the quotient.
        """
        _check_alpha(alpha)
        return self.quotient <= 1.0 - alpha or abs(self.overlap) >= alpha / (2.0 - alpha)


def _result_from_overlap(overlap):
    a = min(abs(overlap), 1.0)
    return DistinguishabilityResult(1.0 + a, 1.0 - a, overlap)


def rank2_singular_values(w1, w2):
    """Closed form sigma = 1 +- |Re<w1, w2>|."""
    return _result_from_overlap(real_overlap(w1, w2))


def rank2_singular_values_exact(w1, w2):
    """Exact nonzero singular values of w1 w1^T + w2 w2^T (unit weights)."""
    c = inner(w1, w2)
    root = math.sqrt(max(0.0, 1.0 - c.imag**2))
    return root + abs(c.real), root - abs(c.real)


def rank2_matrix(w1, w2):
    """w1 w1^T + w2 w2^T in the weighted coordinates sqrt(weight) * w."""
    s = np.sqrt(w1.surface.weights)
    a, b = s * w1.values, s * w2.values
    return np.outer(a, a) + np.outer(b, b)


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")


def is_distinguishable(overlap, alpha):
    """(1 - |a|)/(1 + |a|) <= 1 - alpha for a real overlap a."""
    _check_alpha(alpha)
    return _result_from_overlap(overlap).distinguishable_at(alpha)


def alpha_distinguishable(ctx, z1, z2, surface, alpha):
    _check_alpha(alpha)
    z1 = np.asarray(z1, float)
    z2 = np.asarray(z2, float)
    w1 = steering_vector(ctx, z1, surface)
    if np.array_equal(z1, z2):
        return True
    w2 = steering_vector(ctx, z2, surface)
    return rank2_singular_values(w1, w2).distinguishable_at(alpha)


def svd_oracle(matrix):
    """Singular values (descending) by a Hermitian eigen-solve.

    The eigenvalues of the Jordan-Wielandt matrix [[0, A], [A^H, 0]] are
    +-sigma_i padded with zeros.  Unlike the Gram matrix A^H A, whose
    eigenvalues square sigma and so resolve small singular values only to
    ~sqrt(eps), this keeps absolute accuracy ~eps * ||A||.
    """
    a = np.asarray(matrix)
    if a.ndim != 2:
        raise DomainError("matrix must be 2-d")
    if max(a.shape) > MAX_ORACLE_DIM:
        raise DomainError(f"dimension exceeds the oracle cap {MAX_ORACLE_DIM}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix entries must be finite")
    m, n = a.shape
    jw = np.zeros((m + n, m + n), dtype=np.result_type(a.dtype, np.complex128))
    jw[:m, m:] = a
    jw[m:, :m] = a.conj().T
    ev = np.linalg.eigvalsh(jw)[::-1]
    return np.sort(np.abs(ev[: min(m, n)]))[::-1]
