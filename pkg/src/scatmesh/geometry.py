"""Value types shared by the forward, sizing, meshing and imaging modules."""

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, PreconditionError


def _readonly(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WaveContext:
    """Wavenumber ``k`` and space dimension ``M``."""

    k: float
    M: int = 2

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k > 0):
            raise DomainError("wavenumber must be positive and finite")
        if self.M not in (2, 3):
            raise DomainError("dimension must be 2 or 3")

    @property
    def wavelength(self):
        return 2.0 * math.pi / self.k

    # the usual symbol, kept as an alias
    lam = wavelength

    def to_dict(self):
        return {"k": self.k, "M": self.M}


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box ``[lo, hi]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _readonly(self.lo)
        hi = _readonly(self.hi)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DomainError("box corners must be 1-d and of equal length")
        if not np.all(hi > lo):
            raise DomainError("box must have positive extent on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    @property
    def sides(self):
        return self.hi - self.lo

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def volume(self):
        return float(np.prod(self.sides))

    def contains(self, points, tol=0.0):
        p = np.atleast_2d(points)
        return np.all((p >= self.lo - tol) & (p <= self.hi + tol), axis=1)

    def contains_open(self, points):
        p = np.atleast_2d(points)
        return np.all((p > self.lo) & (p < self.hi), axis=1)

    def inside(self, other):
        return bool(np.all(self.lo >= other.lo) and np.all(self.hi <= other.hi))

    def midpoints(self, h):
        """Cell centres of the coarsest lattice with spacing <= h per axis."""
        counts = np.maximum(1, np.ceil(self.sides / h - 1e-12).astype(int))
        step = self.sides / counts
        axes = [self.lo[i] + step[i] * (np.arange(counts[i]) + 0.5) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1), step

    def to_dict(self):
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["lo"], float), np.asarray(d["hi"], float))

    def __eq__(self, other):
        return isinstance(other, Box) and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))


@dataclass(frozen=True, eq=False)
class MeasurementSurface:
    """Finite receiver/source set with quadrature weights (unit by default)."""

    points: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = _readonly(np.atleast_2d(self.points))
        if pts.shape[0] < 2:
            raise DomainError("a measurement surface needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise DomainError("surface points must be finite")
        w = np.ones(pts.shape[0]) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (pts.shape[0],) or not np.all(w > 0):
            raise DomainError("weights must be positive, one per point")
        d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        np.fill_diagonal(d, np.inf)
        if np.any(d == 0.0):
            raise DomainError("duplicate surface points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", _readonly(w))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def distance(self, z):
        """Distance from each row of ``z`` to the nearest surface point."""
        z = np.atleast_2d(z)
        return np.sqrt(((z[:, None, :] - self.points[None, :, :]) ** 2).sum(-1)).min(axis=1)

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.points).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        return h.hexdigest()[:16]

    def transformed(self, rotation, shift):
        return MeasurementSurface(self.points @ np.asarray(rotation).T + shift, self.weights)

    @classmethod
    def circle(cls, n, radius, center=(0.0, 0.0), arclength=False):
        t = 2.0 * np.pi * np.arange(n) / n
        pts = np.stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], axis=1)
        w = np.full(n, 2.0 * np.pi * radius / n) if arclength else None
        return cls(pts, w)

    @classmethod
    def ellipse(cls, n, a, b, center=(0.0, 0.0)):
        t = 2.0 * np.pi * np.arange(n) / n
        return cls(np.stack([center[0] + a * np.cos(t), center[1] + b * np.sin(t)], axis=1))

    @classmethod
    def sphere(cls, n, radius, center=(0.0, 0.0, 0.0)):
        """Fibonacci lattice of ``n`` points on a sphere."""
        i = np.arange(n) + 0.5
        polar = np.arccos(1.0 - 2.0 * i / n)
        azim = np.pi * (1.0 + 5.0**0.5) * i
        pts = np.stack(
            [np.cos(azim) * np.sin(polar), np.sin(azim) * np.sin(polar), np.cos(polar)], axis=1
        )
        return cls(radius * pts + np.asarray(center, float))

    def to_dict(self):
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["points"], float), np.asarray(d["weights"], float))


@dataclass(frozen=True, eq=False)
class Grid:
    """Ordered sampling points, optionally with a per-point cell (box) size."""

    points: np.ndarray
    structure: str = "uniform"
    cell_sizes: Optional[np.ndarray] = None
    domain: Optional[Box] = None
    axes: Optional[tuple] = None

    def __post_init__(self):
        pts = _readonly(np.atleast_2d(self.points))
        object.__setattr__(self, "points", pts)
        if self.axes is not None:
            object.__setattr__(self, "axes", tuple(_readonly(a) for a in self.axes))
        if self.cell_sizes is not None:
            cs = np.broadcast_to(np.asarray(self.cell_sizes, float), pts.shape)
            object.__setattr__(self, "cell_sizes", _readonly(cs))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def cell_volumes(self):
        if self.cell_sizes is None:
            raise PreconditionError("grid carries no cell volumes")
        return np.prod(self.cell_sizes, axis=1)


@dataclass(frozen=True)
class Illumination:
    """Plane wave with unit ``direction`` or point source at ``source``."""

    kind: str
    direction: Optional[tuple] = None
    source: Optional[tuple] = None

    def __post_init__(self):
        if self.kind == "plane":
            d = np.asarray(self.direction, float)
            if abs(np.linalg.norm(d) - 1.0) > 1e-14:
                raise DomainError("plane-wave direction must be a unit vector")
            object.__setattr__(self, "direction", tuple(float(v) for v in d))
        elif self.kind == "point":
            object.__setattr__(self, "source", tuple(float(v) for v in self.source))
        else:
            raise DomainError("illumination kind must be 'plane' or 'point'")

    @classmethod
    def plane(cls, direction):
        d = np.asarray(direction, float)
        return cls("plane", direction=tuple(d / np.linalg.norm(d)))

    @classmethod
    def plane_angle(cls, theta):
        return cls("plane", direction=(math.cos(theta), math.sin(theta)))

    @classmethod
    def point(cls, source):
        return cls("point", source=tuple(source))

    def to_dict(self):
        if self.kind == "plane":
            return {"kind": "plane", "direction": list(self.direction)}
        return {"kind": "point", "source": list(self.source)}

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "plane":
            return cls("plane", direction=tuple(d["direction"]))
        return cls("point", source=tuple(d["source"]))


def _overlap_1d(a_lo, a_hi, b_lo, b_hi):
    return np.clip(np.minimum(a_hi, b_hi) - np.maximum(a_lo, b_lo), 0.0, None)


@dataclass(frozen=True, eq=False)
class ContrastField:
    """Contrast ``q`` on a domain box, as weighted boxes or as grid cell values.

    Exactly one of ``boxes`` (list of ``(Box, weight)``) or ``values``
    (array whose shape gives the number of cells per axis over ``domain``)
    is set.
    """

    domain: Box
    boxes: tuple = field(default_factory=tuple)
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.values is not None:
            if self.boxes:
                raise DomainError("give either boxes or grid values, not both")
            v = _readonly(self.values)
            if v.ndim != self.domain.dim or not np.all(np.isfinite(v)):
                raise DomainError("grid values must be finite with one axis per dimension")
            ring = np.ones(v.shape, bool)
            ring[tuple(slice(1, -1) for _ in range(v.ndim))] = False
            if np.any(v[ring] != 0):
                raise DomainError("grid values must vanish on the boundary ring")
            object.__setattr__(self, "values", v)
        boxes = []
        for item in self.boxes:
            b, w = item
            if not isinstance(b, Box):
                b = Box(*b)
            if not math.isfinite(w):
                raise DomainError("contrast weights must be finite")
            if not b.inside(self.domain):
                raise DomainError("contrast box must lie inside the domain")
            boxes.append((b, float(w)))
        object.__setattr__(self, "boxes", tuple(boxes))

    @classmethod
    def from_boxes(cls, domain, boxes):
        return cls(domain, tuple(boxes))

    @classmethod
    def zero(cls, domain):
        return cls(domain, ())

    @property
    def dim(self):
        return self.domain.dim

    @property
    def is_zero(self):
        if self.values is not None:
            return not np.any(self.values)
        return all(w == 0 for _, w in self.boxes)

    def _cells(self):
        shape = np.array(self.values.shape)
        step = self.domain.sides / shape
        axes = [self.domain.lo[i] + step[i] * (np.arange(shape[i]) + 0.5) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1), step

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, float))
        if self.values is not None:
            shape = np.array(self.values.shape)
            idx = np.floor((p - self.domain.lo) / self.domain.sides * shape).astype(int)
            ok = self.domain.contains(p)
            idx = np.clip(idx, 0, shape - 1)
            return np.where(ok, self.values[tuple(idx.T)], 0.0)
        out = np.zeros(p.shape[0])
        for b, w in self.boxes:
            out += w * b.contains_open(p)
        return out

    def mass(self):
        if self.values is not None:
            _, step = self._cells()
            return float(self.values.sum() * np.prod(step))
        return float(sum(w * b.volume for b, w in self.boxes))

    def quadrature(self, h):
        """Midpoint nodes and weights ``vol * q`` over the support."""
        if self.values is not None:
            nodes, step = self._cells()
            wts = self.values.ravel() * np.prod(step)
            keep = wts != 0
            return nodes[keep], wts[keep]
        nodes, wts = [], []
        for b, w in self.boxes:
            if w == 0:
                continue
            mids, step = b.midpoints(h)
            nodes.append(mids)
            wts.append(np.full(mids.shape[0], w * np.prod(step)))
        if not nodes:
            return np.zeros((0, self.dim)), np.zeros(0)
        return np.concatenate(nodes), np.concatenate(wts)

    def on_cells(self, centers, sizes):
        """Average of q over the cells ``center +- size/2`` (exact for boxes)."""
        c = np.atleast_2d(centers)
        s = np.broadcast_to(sizes, c.shape)
        if self.values is not None:
            return self(c)
        lo, hi = c - 0.5 * s, c + 0.5 * s
        out = np.zeros(c.shape[0])
        for b, w in self.boxes:
            frac = np.prod(_overlap_1d(lo, hi, b.lo, b.hi), axis=1) / np.prod(s, axis=1)
            out += w * frac
        return out

    def fourier(self, xi):
        """int q(z) exp(i xi . z) dz for each row of ``xi``."""
        xi = np.atleast_2d(np.asarray(xi, float))
        if self.values is not None:
            nodes, step = self._cells()
            return np.exp(1j * xi @ nodes.T) @ self.values.ravel() * np.prod(step)
        out = np.zeros(xi.shape[0], complex)
        for b, w in self.boxes:
            fac = np.ones(xi.shape[0], complex)
            for j in range(self.dim):
                s = xi[:, j]
                small = np.abs(s) < 1e-300
                safe = np.where(small, 1.0, s)
                term = (np.exp(1j * safe * b.hi[j]) - np.exp(1j * safe * b.lo[j])) / (1j * safe)
                fac *= np.where(small, b.hi[j] - b.lo[j], term)
            out += w * fac
        return out

    def to_dict(self):
        d = {"domain": self.domain.to_dict()}
        if self.values is not None:
            d["values"] = self.values.tolist()
        else:
            d["boxes"] = [{"lo": b.lo.tolist(), "hi": b.hi.tolist(), "weight": w} for b, w in self.boxes]
        return d

    @classmethod
    def from_dict(cls, d):
        domain = Box.from_dict(d["domain"])
        if "values" in d:
            return cls(domain, (), np.asarray(d["values"], float))
        return cls(domain, tuple((Box(np.asarray(b["lo"], float), np.asarray(b["hi"], float)), b["weight"]) for b in d.get("boxes", [])))
