"""Sampling grids: uniform lattices, 1D marching lines, tensor grids and
indicator-driven adaptive refinement.

Size functions become grids by greedy marching: from a start point the next
point sits one local size further along the direction, ``t_{j+1} = t_j +
s(x_j)``, until the domain is left.  Tensor grids march each axis along the
domain midline and take the Cartesian product.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay, QhullError, cKDTree

from .errors import DomainError, PreconditionError
from .geometry import Box, Grid
from .meshsize import mesh_size_batch

DEDUP_TOL = 1e-12
MAX_MARCH_STEPS = 1_000_000


def uniform_grid(domain, h):
    """Cell-centred lattice with spacing side / ceil(side / h) on each axis."""
    if not h > 0:
        raise DomainError("h must be positive")
    if h > domain.sides.min():
        raise DomainError(f"h = {h:g} exceeds the shortest box side {domain.sides.min():g}")
    counts = np.ceil(domain.sides / h).astype(int)
    step = domain.sides / counts
    axes = [domain.lo[i] + step[i] * (np.arange(counts[i]) + 0.5) for i in range(domain.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return Grid(pts, "uniform", step, domain, tuple(axes))


def _size_at(sizer, x):
    s = float(sizer(x))
    if not (math.isfinite(s) and s > 0):
        raise PreconditionError(f"sizer returned {s!r} at {np.asarray(x).tolist()}")
    return s


def _march(domain, start, v, sizer, sign):
    """Parameters t (excluding 0) reached from ``start`` along sign*v."""
    ts = []
    t = 0.0
    x = start
    for _ in range(MAX_MARCH_STEPS):
        t = t + sign * _size_at(sizer, x)
        x = start + t * v
        if not domain.contains(x)[0]:
            return ts
        ts.append(t)
    raise PreconditionError("marching did not leave the domain")


def line_parameters(domain, start, v, sizer, both=True):
    """Sorted parameters t with points start + t v (t = 0 included)."""
    start = np.asarray(start, float)
    v = np.asarray(v, float)
    if not domain.contains(start)[0]:
        raise DomainError("start point lies outside the domain")
    fwd = _march(domain, start, v, sizer, 1.0)
    bwd = _march(domain, start, v, sizer, -1.0) if both else []
    return np.array(bwd[::-1] + [0.0] + fwd)


def line_grid(domain, start, v, sizer):
    """Points marched from ``start`` along +v and -v with local step sizer(x).

    ``sizer`` should be the combined (v, -v) size so both halves use the
    same rule.  The parameters are kept in ``grid.axes[0]``.
    """
    t = line_parameters(domain, start, v, sizer)
    pts = np.asarray(start, float)[None, :] + t[:, None] * np.asarray(v, float)[None, :]
    return Grid(pts, "line", None, domain, (t,))


def _cell_widths(coords, lo, hi):
    """1D Voronoi widths of sorted ``coords`` clipped to [lo, hi]."""
    mids = 0.5 * (coords[1:] + coords[:-1])
    edges = np.concatenate([[lo], mids, [hi]])
    return np.diff(edges)


def _axis_coords(domain, axis, sizer, anchor):
    e = np.zeros(domain.dim)
    e[axis] = 1.0
    start = anchor.copy()
    start[axis] = domain.lo[axis]
    t = line_parameters(domain, start, e, sizer, both=False)
    return domain.lo[axis] + t


def tensor_grid(domain, sizer_per_axis, anchor=None):
    """Cartesian product of per-axis marches from the low face along the midline.

    Each grid point carries its 1D Voronoi cell, so the cell volumes tile
    the domain.
    """
    if len(sizer_per_axis) != domain.dim:
        raise DomainError("one sizer per axis is required")
    anchor = domain.center if anchor is None else np.asarray(anchor, float)
    axes = [_axis_coords(domain, i, s, anchor) for i, s in enumerate(sizer_per_axis)]
    widths = [_cell_widths(a, domain.lo[i], domain.hi[i]) for i, a in enumerate(axes)]
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*widths, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    sizes = np.stack([m.ravel() for m in wmesh], axis=1)
    return Grid(pts, "tensor", sizes, domain, tuple(axes))


def mesh_sizer(ctx, surface, params, v, combined=True, floor=None):
    """Callable x -> h~_{x,v}(alpha) for marching.

    Inside the R0-neighbourhood of the surface, where the size function is
    undefined, ``floor`` is returned (default: the clamp value (1-gamma) R0).
    """
    v = np.asarray(v, float)
    r0, _ = params.band(ctx)
    fl = (1.0 - params.gamma) * min(1.0, r0) if floor is None else floor

    def sizer(x):
        h = mesh_size_batch(ctx, np.asarray(x, float)[None, :], v, surface, params, combined=combined)[0]
        return fl if not np.isfinite(h) else h

    return sizer


def representatives(points, tol=DEDUP_TOL):
    """Index of the first point of each near-duplicate group, per point.

    Points closer than ``tol`` in the max-norm are grouped (transitively).
    """
    pts = np.asarray(points, float)
    n = pts.shape[0]
    if n == 0:
        return np.zeros(0, int)
    pairs = cKDTree(pts).query_pairs(tol, p=np.inf, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, lab = connected_components(graph, directed=False)
    first = np.full(lab.max() + 1, n)
    np.minimum.at(first, lab, np.arange(n))
    return first[lab]


def dedup(points, tol=DEDUP_TOL):
    """Indices of first occurrences, treating points within ``tol`` as equal."""
    rep = representatives(points, tol)
    return np.flatnonzero(rep == np.arange(rep.size))


def _merge(points, cells):
    """Drop duplicates, pooling their cell volumes onto the kept point.

    The kept point takes the box of its largest group member, scaled
    isotropically so that its volume is the group total.
    """
    rep = representatives(points)
    keep = np.flatnonzero(rep == np.arange(rep.size))
    vol = np.prod(cells, axis=1)
    order = np.lexsort((-vol, rep))
    best = order[np.r_[True, rep[order][1:] != rep[order][:-1]]]
    total = np.bincount(rep, vol, minlength=rep.size)[keep]
    sizes = cells[best].copy()
    vb = vol[best]
    scale = np.where(vb > 0, (total / np.where(vb > 0, vb, 1.0)) ** (1.0 / cells.shape[1]), 1.0)
    return keep, sizes * scale[:, None]


@dataclass(frozen=True)
class RefinementRule:
    """Indicator-triggered refinement.

    Parameters
    ----------
    threshold : float
        Trigger level in (0, 1].
    alpha : float
        Distinguishability level passed to the size function.
    directions : tuple
        Axis-aligned unit vectors along which patches are refined.
    max_rounds : int
        Upper bound on refinement passes.
    relative : bool
        Compare indicator / max(indicator) instead of the raw value.
    mode : {"threshold", "elongation"}
        ``elongation`` refines only along the long axis of each thresholded
        component whose bounding box has aspect ratio > 2.
    """

    threshold: float
    alpha: float
    directions: tuple = ((1.0, 0.0), (0.0, 1.0))
    max_rounds: int = 1
    relative: bool = True
    mode: str = "threshold"

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise DomainError("threshold must lie in (0, 1]")
        if self.max_rounds < 1:
            raise DomainError("max_rounds must be >= 1")
        if self.mode not in ("threshold", "elongation"):
            raise DomainError("mode must be 'threshold' or 'elongation'")
        dirs = tuple(tuple(float(c) for c in d) for d in self.directions)
        for d in dirs:
            if sorted(np.abs(d)) != [0.0] * (len(d) - 1) + [1.0]:
                raise DomainError("refinement directions must be coordinate axes")
        object.__setattr__(self, "directions", dirs)


def _axis_of(direction):
    return int(np.argmax(np.abs(direction)))


def _patch(domain, center, cell, axes, sizer_factory):
    """Tensor patch over center +- cell/2 (clipped to the domain) refined along ``axes``."""
    lo = np.maximum(center - 0.5 * cell, domain.lo)
    hi = np.minimum(center + 0.5 * cell, domain.hi)
    box = Box(lo, hi)
    coords, widths = [], []
    for i in range(domain.dim):
        if i in axes:
            e = np.zeros(domain.dim)
            e[i] = 1.0
            sz = sizer_factory(center, e)
            c = _axis_coords(box, i, sz, center)
            coords.append(c)
            widths.append(_cell_widths(c, lo[i], hi[i]))
        else:
            coords.append(np.array([center[i]]))
            widths.append(np.array([hi[i] - lo[i]]))
    mesh = np.meshgrid(*coords, indexing="ij")
    wmesh = np.meshgrid(*widths, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), np.stack([m.ravel() for m in wmesh], axis=1)


def _elongated_axes(points, trig, cells, rule):
    """Per-trigger refinement axes in elongation mode."""
    default = sorted({_axis_of(d) for d in rule.directions})
    out = {}
    labels = components(points[trig], max_edge=1.01 * float(np.linalg.norm(cells[trig], axis=1).max()))
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        ext = np.ptp(points[trig][members], axis=0) + cells[trig][members].max(axis=0)
        ratio = ext.max() / ext.min()
        axes = [int(np.argmax(ext))] if ratio > 2.0 else default
        for m in members:
            out[int(trig[m])] = axes
    return out


def adaptive_refine(coarse, indicator, rule, sizer_factory):
    """Refine tensor patches around points where the indicator exceeds the threshold.

    Parameters
    ----------
    coarse : Grid
        Starting grid with cell sizes and a domain.
    indicator : callable
        Maps an (n, M) array of points to n values.
    rule : RefinementRule
    sizer_factory : callable
        ``(point, direction) -> sizer`` giving the marching size along an axis.

    Returns
    -------
    Grid
        Coarse points first, then patch points in trigger order, duplicates
        removed.  Each round re-evaluates the indicator and only newly added
        points may trigger further refinement.
    """
    if len(coarse) == 0:
        raise PreconditionError("empty coarse grid")
    if coarse.cell_sizes is None or coarse.domain is None:
        raise PreconditionError("the coarse grid needs cell sizes and a domain")
    domain = coarse.domain
    pts = np.array(coarse.points)
    cells = np.array(coarse.cell_sizes)
    candidates = np.arange(len(pts))
    default_axes = sorted({_axis_of(d) for d in rule.directions})
    for _ in range(rule.max_rounds):
        vals = np.asarray(indicator(pts), float)
        ref = vals / vals.max() if rule.relative and vals.max() > 0 else vals
        trig = candidates[ref[candidates] > rule.threshold]
        if trig.size == 0:
            break
        axes_for = _elongated_axes(pts, trig, cells, rule) if rule.mode == "elongation" else {}
        new_pts, new_cells = [], []
        for i in trig:
            p, c = _patch(domain, pts[i], cells[i], axes_for.get(int(i), default_axes), sizer_factory)
            new_pts.append(p)
            new_cells.append(c)
        # a refined cell's volume now belongs to its patch
        cells[trig] = 0.0
        merged = np.concatenate([pts] + new_pts)
        keep, cells = _merge(merged, np.concatenate([cells] + new_cells))
        n_old = len(pts)
        pts = merged[keep]
        candidates = np.flatnonzero(keep >= n_old)
        if candidates.size == 0:
            break
    return Grid(pts, "adaptive", cells, domain)


def components(points, mask=None, max_edge=None):
    """Connected-component labels of the masked points under Delaunay adjacency.

    Two selected points are adjacent when they share a Delaunay edge of the
    full point set, optionally no longer than ``max_edge``.  Unselected
    points get label -1; labels follow first appearance.
    """
    pts = np.asarray(points, float)
    n = pts.shape[0]
    sel = np.ones(n, bool) if mask is None else np.asarray(mask, bool)
    labels = np.full(n, -1)
    if n == 0:
        return labels
    edges = None
    if n >= pts.shape[1] + 2:
        try:
            simp = Delaunay(pts).simplices
            m = simp.shape[1]
            edges = np.concatenate([simp[:, [a, b]] for a in range(m) for b in range(a + 1, m)])
        except QhullError:
            pass
    if edges is None:
        edges = np.array([(i, j) for i in range(n) for j in range(i + 1, n)], int).reshape(-1, 2)
    edges = edges[sel[edges[:, 0]] & sel[edges[:, 1]]]
    if max_edge is not None:
        edges = edges[np.linalg.norm(pts[edges[:, 0]] - pts[edges[:, 1]], axis=1) <= max_edge]
    graph = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, lab = connected_components(graph, directed=False)
    idx = np.flatnonzero(sel)
    _, first, inv = np.unique(lab[idx], return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    labels[idx] = rank[inv]
    return labels


def lattice_components(grid, mask):
    """Labels under 8-neighbour (3**M - 1 in M-d) adjacency of a product grid.

    Points must be in the meshgrid ``ij`` order of ``grid.axes``; unselected
    points get -1 and labels are numbered in row order from 0.
    """
    shape = tuple(len(a) for a in grid.axes)
    if int(np.prod(shape)) != len(grid):
        raise PreconditionError("grid is not a product of its axes")
    lab, _ = ndimage.label(np.asarray(mask, bool).reshape(shape), structure=np.ones((3,) * len(shape)))
    return lab.ravel() - 1


def grid_components(grid, mask):
    """Lattice adjacency for uniform/tensor grids, Delaunay adjacency otherwise."""
    if grid.structure in ("uniform", "tensor") and grid.axes is not None:
        return lattice_components(grid, mask)
    return components(grid.points, mask)


def write_grid_csv(grid, path):
    cols = ["x", "y", "z"][: grid.dim]
    np.savetxt(path, grid.points, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def read_grid_csv(path, structure="file", domain=None):
    pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Grid(pts, structure, None, domain)
