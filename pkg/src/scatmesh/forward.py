"""Synthetic scattering data: incident fields, Born and Lippmann-Schwinger
solutions, Born far-field patterns and the multistatic response matrix.

All volume integrals are midpoint sums over the contrast support.  The
Lippmann-Schwinger solve is a dense collocation system whose diagonal uses
the exact integral of G over an equal-area disk (2D) or equal-volume ball
(3D) instead of the singular point value.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, special

from .errors import CoincidentPointError, DomainError, PreconditionError, SingularSystemError
from .geometry import ContrastField, Grid, Illumination, MeasurementSurface, WaveContext
from .specfun import GreenKernel, green_matrix

MAX_LS_UNKNOWNS = 10_000
RCOND_FLOOR = 1e-13


def _kernel(ctx):
    return GreenKernel(ctx.M, ctx.k)


def _as_illuminations(ill):
    if isinstance(ill, Illumination):
        return [ill], True
    return list(ill), False


def incident_fields(ctx, ill, points):
    """u^i at each row of ``points``."""
    p = np.atleast_2d(np.asarray(points, float))
    if ill.kind == "plane":
        return np.exp(1j * ctx.k * (p @ np.asarray(ill.direction)))
    return green_matrix(_kernel(ctx), p, np.asarray(ill.source)[None, :])[:, 0]


def incident_field(ctx, ill, x):
    """Plane wave exp(ik d.x) or point source G(x, y) at a single point."""
    return complex(incident_fields(ctx, ill, np.asarray(x, float)[None, :])[0])


def default_quadrature_step(ctx):
    return ctx.wavelength / 20.0


def _check_outside_support(q, points, what):
    p = np.atleast_2d(points)
    if q.values is not None:
        inside = q(p) != 0
    else:
        inside = np.zeros(p.shape[0], bool)
        for b, w in q.boxes:
            if w != 0:
                inside |= b.contains(p)
    if np.any(inside):
        raise DomainError(f"{what} point {p[np.argmax(inside)].tolist()} lies in supp(q)")


def born_scattered(ctx, q, ill, receivers, h=None):
    """Born scattered field k^2 sum_j vol_j q_j G(x, z_j) u^i(z_j).

    Returns a vector for a single illumination, or a (receivers,
    illuminations) array for a sequence.
    """
    ills, single = _as_illuminations(ill)
    _check_outside_support(q, receivers.points, "receiver")
    nodes, wts = q.quadrature(default_quadrature_step(ctx) if h is None else h)
    out = np.zeros((len(receivers), len(ills)), complex)
    if nodes.shape[0]:
        g = green_matrix(_kernel(ctx), receivers.points, nodes)
        for j, il in enumerate(ills):
            out[:, j] = ctx.k**2 * (g @ (wts * incident_fields(ctx, il, nodes)))
    return out[:, 0] if single else out


def far_field_constant(ctx):
    """C~_{k,M} = -i / sqrt(8 pi) (k / 2 pi)^{(M-2)/2} exp(-(M-1) pi i / 4)."""
    M = ctx.M
    return (
        -1j / math.sqrt(8.0 * math.pi)
        * (ctx.k / (2.0 * math.pi)) ** ((M - 2) / 2.0)
        * np.exp(-1j * (M - 1) * math.pi / 4.0)
    )


def far_field_born(ctx, q, d_x, d_y):
    """Born far-field pattern C~ k^2 int q(z) exp(ik(d_x - d_y).z) dz.

    ``d_x`` and ``d_y`` may be single unit vectors or stacks of them.
    """
    dx = np.atleast_2d(np.asarray(d_x, float))
    dy = np.atleast_2d(np.asarray(d_y, float))
    for d in (dx, dy):
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1.0) > 1e-14):
            raise DomainError("observation and incidence directions must be unit vectors")
    val = far_field_constant(ctx) * ctx.k**2 * q.fourier(ctx.k * (dx - dy))
    return complex(val[0]) if np.ndim(d_x) == 1 and np.ndim(d_y) == 1 else val


@dataclass(frozen=True, eq=False)
class MSRMatrix:
    """Response matrix indexed (receiver, source), normalisation constant dropped."""

    entries: np.ndarray
    context: WaveContext

    @property
    def shape(self):
        return self.entries.shape

    def singular_values(self):
        return np.linalg.svd(self.entries, compute_uv=False)


def msr_point_scatterers(ctx, points, strengths, surface):
    """sum_j s_j G(x_r, z_j) G(z_j, y_s) for point scatterers z_j."""
    z = np.atleast_2d(np.asarray(points, float))
    s = np.broadcast_to(np.asarray(strengths, complex), (z.shape[0],))
    g = green_matrix(_kernel(ctx), surface.points, z)
    return MSRMatrix((g * s) @ g.T, ctx)


def msr_matrix(ctx, q, surface, h=None):
    """MSR matrix sum_j vol_j q_j G(x_r, z_j) G(z_j, y_s) over the contrast support."""
    _check_outside_support(q, surface.points, "surface")
    nodes, wts = q.quadrature(default_quadrature_step(ctx) if h is None else h)
    if nodes.shape[0] == 0:
        return MSRMatrix(np.zeros((len(surface), len(surface)), complex), ctx)
    return msr_point_scatterers(ctx, nodes, wts, surface)


def self_cell_integral(ctx, volume):
    """Integral of G(0, .) over the disk/ball of the given area/volume."""
    k = ctx.k
    if ctx.M == 2:
        a = math.sqrt(volume / math.pi)
        return 1j * math.pi * a * special.hankel1(1, k * a) / (2.0 * k) - 1.0 / k**2
    a = (3.0 * volume / (4.0 * math.pi)) ** (1.0 / 3.0)
    return ((1.0 - 1j * k * a) * np.exp(1j * k * a) - 1.0) / k**2


@dataclass(frozen=True, eq=False)
class LSResult:
    """Total field of a Lippmann-Schwinger collocation solve on a grid."""

    context: WaveContext
    grid: Grid
    illumination: Illumination
    total: np.ndarray
    incident: np.ndarray
    contrast: np.ndarray
    residual: float
    condition: float

    @property
    def scattered_on_grid(self):
        return self.total - self.incident

    def contrast_source(self):
        """phi = k^2 q u on the grid."""
        return self.context.k**2 * self.contrast * self.total

    def scattered(self, receivers):
        """k^2 sum_j vol_j q_j G(x, z_j) u_j at receiver points outside supp(q)."""
        active = self.contrast != 0
        if not np.any(active):
            return np.zeros(len(receivers), complex)
        nodes = self.grid.points[active]
        g = green_matrix(_kernel(self.context), receivers.points, nodes)
        return g @ (self.grid.cell_volumes[active] * self.contrast_source()[active])


def _check_fine_grid(ctx, q, grid):
    if grid.cell_sizes is None:
        raise PreconditionError("the fine grid must carry cell sizes")
    diam = np.sqrt((grid.cell_sizes**2).sum(axis=1)).max()
    if diam > ctx.wavelength / 10.0:
        raise PreconditionError(
            f"fine grid too coarse: cell diameter {diam:.4g} > lambda/10 = {ctx.wavelength / 10:.4g}"
        )
    qc = q.on_cells(grid.points, grid.cell_sizes)
    covered = float(np.sum(qc * grid.cell_volumes))
    if q.values is None and not math.isclose(covered, q.mass(), rel_tol=1e-9, abs_tol=1e-14):
        raise PreconditionError("fine grid does not cover supp(q)")
    return qc


def ls_total_field(ctx, q, ill, fine_grid, check_coverage=True):
    """Solve u = u^i + k^2 sum_j vol_j q_j G(., z_j) u_j on ``fine_grid``.

    Only cells with q != 0 are unknowns; the field at the remaining cells
    follows from the representation formula.  Raises SingularSystemError
    when the reciprocal 1-norm condition estimate drops below 1e-13.
    """
    qc = _check_fine_grid(ctx, q, fine_grid) if check_coverage else q.on_cells(fine_grid.points, fine_grid.cell_sizes)
    pts = fine_grid.points
    vol = fine_grid.cell_volumes
    ui = incident_fields(ctx, ill, pts)
    if ill.kind == "point" and np.any(np.all(pts == np.asarray(ill.source), axis=1)):
        raise CoincidentPointError("point source coincides with a grid point")
    active = np.flatnonzero(qc)
    if active.size == 0:
        return LSResult(ctx, fine_grid, ill, ui.copy(), ui, qc, 0.0, 1.0)
    if active.size > MAX_LS_UNKNOWNS:
        raise PreconditionError(f"{active.size} unknowns exceeds the dense-solve cap {MAX_LS_UNKNOWNS}")

    za = pts[active]
    k2 = ctx.k**2
    g = _offdiag_green(ctx, za)
    np.fill_diagonal(g, [self_cell_integral(ctx, v) for v in vol[active]])
    # off-diagonal columns carry the cell volume; the diagonal already is an integral
    col = vol[active].copy()
    kern = g * col[None, :]
    np.fill_diagonal(kern, np.diag(g))
    a = np.eye(active.size) - k2 * kern * qc[active][None, :]
    b = ui[active]

    lu, piv = linalg.lu_factor(a)
    anorm = np.abs(a).sum(axis=0).max()
    rcond, info = linalg.lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or rcond < RCOND_FLOOR:
        raise SingularSystemError(f"LS system ill-conditioned (rcond {rcond:.3g})", condition=1.0 / max(rcond, 1e-300))
    ua = linalg.lu_solve((lu, piv), b)
    residual = float(np.linalg.norm(a @ ua - b) / np.linalg.norm(b))

    total = ui.copy()
    total[active] = ua
    passive = np.setdiff1d(np.arange(pts.shape[0]), active)
    if passive.size:
        gp = green_matrix(_kernel(ctx), pts[passive], za)
        total[passive] = ui[passive] + k2 * gp @ (vol[active] * qc[active] * ua)
    return LSResult(ctx, fine_grid, ill, total, ui, qc, residual, float(1.0 / rcond))


def _offdiag_green(ctx, z):
    """G(z_i, z_j) for i != j, zero diagonal."""
    n = z.shape[0]
    out = np.zeros((n, n), complex)
    for i in range(n - 1):
        out[i, i + 1 :] = green_matrix(_kernel(ctx), z[i : i + 1], z[i + 1 :])[0]
    out += out.T
    return out


def ls_scattered(ctx, q, ills, fine_grid, receivers):
    """LS scattered data (receivers x illuminations) and the per-solve results."""
    _check_outside_support(q, receivers.points, "receiver")
    results = [ls_total_field(ctx, q, il, fine_grid) for il in ills]
    data = np.stack([r.scattered(receivers) for r in results], axis=1)
    return data, results


def add_noise(data, level, seed):
    """Additive complex Gaussian noise with standard deviation level * rms(data)."""
    rng = np.random.default_rng(seed)
    rms = math.sqrt(float(np.mean(np.abs(data) ** 2))) if data.size else 0.0
    noise = rng.standard_normal(data.shape) + 1j * rng.standard_normal(data.shape)
    return data + level * rms * noise / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class ScatterData:
    """Scattered data on a surface with the configuration that produced it."""

    context: WaveContext
    contrast: ContrastField
    surface: MeasurementSurface
    illuminations: Sequence[Illumination]
    fields: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.fields, complex)
        if f.shape != (len(self.surface), len(self.illuminations)):
            raise DomainError("fields must be receivers x illuminations")
        object.__setattr__(self, "fields", f)

    def to_dict(self):
        return {
            "context": self.context.to_dict(),
            "contrast": self.contrast.to_dict(),
            "surface": self.surface.to_dict(),
            "illuminations": [il.to_dict() for il in self.illuminations],
            "fields": [[float(v.real), float(v.imag)] for v in self.fields.ravel()],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d):
        surface = MeasurementSurface.from_dict(d["surface"])
        ills = [Illumination.from_dict(x) for x in d["illuminations"]]
        raw = np.asarray(d["fields"], float).reshape(len(surface), len(ills), 2)
        return cls(
            WaveContext(d["context"]["k"], d["context"]["M"]),
            ContrastField.from_dict(d["contrast"]),
            surface,
            ills,
            raw[..., 0] + 1j * raw[..., 1],
            d.get("meta", {}),
        )

    def dumps(self):
        # json writes floats with repr, which round-trips bit-exactly
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())
