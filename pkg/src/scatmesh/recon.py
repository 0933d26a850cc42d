"""Sampling-type indicators: the direct sampling index and the multilevel
sampling backpropagation with its least-squares contrast estimate.

Surface integrals are weighted sums over the surface points; volume
integrals are sums over grid cells weighted by the cell volumes.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ProvenanceError
from .forward import incident_fields, self_cell_integral
from .geometry import Grid
from .specfun import GreenKernel, green_matrix


class ZeroDataError(DomainError):
    """The measured data vector vanishes identically."""


class DroppedIlluminationWarning(UserWarning):
    """An illumination with zero data was skipped."""


def _kernel(ctx):
    return GreenKernel(ctx.M, ctx.k)


@dataclass(frozen=True, eq=False)
class IndicatorField:
    """Indicator values on a grid; DSM values are I (report I^2 for plots)."""

    grid: Grid
    values: np.ndarray
    kind: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, float)
        if vals.shape != (len(self.grid),):
            raise DomainError("one value per grid point")
        object.__setattr__(self, "values", vals)

    def write(self, path, sidecar=True):
        """CSV "x,y[,z],value,value_sq" plus a JSON provenance sidecar."""
        cols = ["x", "y", "z"][: self.grid.dim] + ["value", "value_sq"]
        data = np.column_stack([self.grid.points, self.values, self.values**2])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")
        if sidecar:
            with open(str(path) + ".json", "w") as fh:
                json.dump({"kind": self.kind, **self.provenance}, fh, indent=1, sort_keys=True)


def provenance(ctx, surface, illuminations):
    return {
        "k": ctx.k,
        "M": ctx.M,
        "surface_hash": surface.fingerprint(),
        "illuminations": [il.to_dict() for il in illuminations],
    }


def _weighted_norm(values, weights):
    return np.sqrt(np.sum(weights * np.abs(values) ** 2, axis=0))


def dsm_values(ctx, us, points, surface):
    """I(x) = |<u^s, G(., x)>| / (||u^s|| ||G(., x)||) for each row of ``points``."""
    us = np.asarray(us, complex)
    w = surface.weights
    nu = _weighted_norm(us, w)
    if nu == 0:
        raise ZeroDataError("scattered data vanish identically")
    g = green_matrix(_kernel(ctx), surface.points, np.atleast_2d(points))  # (R, P)
    num = np.abs((w * us) @ np.conj(g))
    return np.clip(num / (nu * _weighted_norm(g, w[:, None])), 0.0, 1.0)


def dsm_index(ctx, us, x, surface):
    return float(dsm_values(ctx, us, np.asarray(x, float)[None, :], surface)[0])


def dsm_field(ctx, us, grid, surface, illumination=None):
    prov = provenance(ctx, surface, [] if illumination is None else [illumination])
    return IndicatorField(grid, dsm_values(ctx, us, grid.points, surface), "dsm", prov)


def dsm_combined(fields):
    """Pointwise maximum over per-illumination fields."""
    fields = list(fields)
    if not fields:
        raise DomainError("no fields to combine")
    g0 = fields[0].grid
    for f in fields[1:]:
        if f.grid.points.shape != g0.points.shape or not np.array_equal(f.grid.points, g0.points):
            raise DomainError("indicator fields live on different grids")
    ills = [il for f in fields for il in f.provenance.get("illuminations", [])]
    prov = {**fields[0].provenance, "illuminations": ills}
    return IndicatorField(g0, np.max([f.values for f in fields], axis=0), "dsm", prov)


def op_Pr(ctx, phi, grid, surface):
    """sum_j vol_j G(z_j, x_r) phi_j per receiver; phi may carry a trailing illumination axis."""
    g = green_matrix(_kernel(ctx), surface.points, grid.points)
    vol = grid.cell_volumes
    phi = np.asarray(phi, complex)
    return g @ (vol[:, None] * phi if phi.ndim == 2 else vol * phi)


def op_Pr_star(ctx, data, grid, surface):
    """sum_r w_r conj(G(x_r, z)) g_r per grid point."""
    g = green_matrix(_kernel(ctx), surface.points, grid.points)
    data = np.asarray(data, complex)
    w = surface.weights
    return np.conj(g).T @ (w[:, None] * data if data.ndim == 2 else w * data)


def op_P_omega(ctx, phi, grid):
    """int_Omega G(xi, z_i) phi(xi) d xi as a cell sum.

    Off-diagonal cells use vol_j G(z_j, z_i); the diagonal uses the exact
    integral of G over the equal-area (equal-volume) disk (ball) of the cell,
    matching the forward solver.
    """
    pts = grid.points
    n = len(grid)
    vol = grid.cell_volumes
    g = np.zeros((n, n), complex)
    for i in range(n - 1):
        g[i, i + 1 :] = green_matrix(_kernel(ctx), pts[i : i + 1], pts[i + 1 :])[0]
    g = (g + g.T) * vol[None, :]
    np.fill_diagonal(g, [self_cell_integral(ctx, v) if v > 0 else 0.0 for v in vol])
    return g @ np.asarray(phi, complex)


@dataclass(frozen=True, eq=False)
class ContrastSource:
    """Values per grid point (rows) and per kept illumination (columns)."""

    values: np.ndarray
    grid: Grid
    kept: tuple


def msm_backprop(ctx, us, grid, surface):
    """phi_b,n = (||P* u_n||^2_Omega / ||P P* u_n||^2_Gamma) P* u_n for each column n.

    Zero-data columns are dropped with a warning; ``kept`` lists the
    surviving column indices.
    """
    us = np.asarray(us, complex)
    if us.ndim == 1:
        us = us[:, None]
    vol = grid.cell_volumes
    w = surface.weights
    cols, kept = [], []
    for n in range(us.shape[1]):
        if not np.any(us[:, n]):
            warnings.warn(f"illumination {n} has zero data and is dropped", DroppedIlluminationWarning, stacklevel=2)
            continue
        b = op_Pr_star(ctx, us[:, n], grid, surface)
        num = np.sum(vol * np.abs(b) ** 2)
        den = np.sum(w * np.abs(op_Pr(ctx, b, grid, surface)) ** 2)
        cols.append(num / den * b)
        kept.append(n)
    vals = np.stack(cols, axis=1) if cols else np.zeros((len(grid), 0), complex)
    return ContrastSource(vals, grid, tuple(kept))


def msm_eta(ctx, phi_b, illuminations, grid, phi_omega=None):
    """Least-squares eta = Re{sum phi conj(u) / sum |u|^2}, u = u^i + P_Omega phi.

    ``illuminations`` is indexed like the original data columns; only the
    kept ones are used.  Points with a vanishing denominator are NaN.
    ``phi_omega`` may supply P_Omega phi precomputed.
    """
    phi = phi_b.values
    if phi.shape[1] == 0:
        warnings.warn("no illumination carries data; eta set to 0", DroppedIlluminationWarning, stacklevel=2)
        return np.zeros(len(grid))
    ui = np.stack([incident_fields(ctx, illuminations[n], grid.points) for n in phi_b.kept], axis=1)
    u = ui + (op_P_omega(ctx, phi, grid) if phi_omega is None else phi_omega)
    num = np.sum(phi * np.conj(u), axis=1)
    den = np.sum(np.abs(u) ** 2, axis=1)
    eta = np.full(len(grid), np.nan)
    ok = den > 0
    if not np.all(ok):
        warnings.warn(f"{int((~ok).sum())} points with zero denominator are masked", RuntimeWarning, stacklevel=2)
    eta[ok] = (num[ok] / den[ok]).real
    return eta


def check_provenance(sidecar, ctx, surface):
    """Raise ProvenanceError when a sidecar does not match the configuration."""
    if sidecar.get("surface_hash") != surface.fingerprint() or sidecar.get("k") != ctx.k:
        raise ProvenanceError("data were produced for a different surface or wavenumber")
