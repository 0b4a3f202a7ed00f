"""Uniform box partitions, face quadrature, and the time-augmented grid."""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoxPartition",
    "UlamTime",
    "CollocationTime",
    "AugmentedGrid",
    "gauss_legendre_panel",
]


class DomainError(ValueError):
    """A point lies outside the partition on a non-periodic axis."""


def gauss_legendre_panel(lo, hi, q):
    """Gauss-Legendre nodes and weights on ``[lo, hi]``; weights sum to ``hi - lo``."""
    x, w = np.polynomial.legendre.leggauss(int(q))
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * x, half * w


class BoxPartition:
    """Uniform partition of a rectangular domain into axis-aligned boxes.

    Boxes are half-open (lower-closed) cells; the flat index runs fastest
    along axis 0.  Read-only after construction.

    Parameters
    ----------
    counts : sequence of int
        Boxes per axis ``(n_1, ..., n_d)``.
    domain : array_like, shape (d, 2)
        Per-axis ``[lo, hi]``.
    periodic : sequence of bool, optional
        Per-axis periodicity; boundary faces on periodic axes wrap around.
    """

    def __init__(self, counts, domain, periodic=None):
        self.counts = tuple(int(c) for c in np.atleast_1d(counts))
        if any(c < 1 for c in self.counts):
            raise ValueError("box counts must be >= 1")
        self.domain = np.atleast_2d(np.asarray(domain, dtype=float))
        if self.domain.shape != (len(self.counts), 2):
            raise ValueError("domain shape must be (d, 2) matching counts")
        d = len(self.counts)
        self.periodic = tuple(bool(p) for p in (periodic if periodic is not None else [False] * d))
        if len(self.periodic) != d:
            raise ValueError("periodic flags must match dimension")
        self.widths = (self.domain[:, 1] - self.domain[:, 0]) / np.array(self.counts)

    @classmethod
    def for_field(cls, field, counts):
        """Partition matching a field's domain and periodicity flags."""
        return cls(counts, field.domain, field.periodic)

    @property
    def dim(self):
        return len(self.counts)

    @property
    def n_boxes(self):
        return int(np.prod(self.counts))

    @property
    def lo(self):
        return self.domain[:, 0]

    @property
    def hi(self):
        return self.domain[:, 1]

    @property
    def box_volume(self):
        return float(np.prod(self.widths))

    def multi_index(self, flat):
        """Per-axis indices of a flat box index (axis 0 fastest)."""
        return np.unravel_index(flat, self.counts, order="F")

    def flat_index(self, multi):
        return np.ravel_multi_index(multi, self.counts, order="F")

    def centroid(self, flat):
        multi = np.array(self.multi_index(flat), dtype=float)
        return self.lo + (multi + 0.5) * self.widths

    def centroids(self):
        """All box centroids, shape ``(n_boxes, d)``, in flat-index order."""
        axes = [self.lo[a] + (np.arange(self.counts[a]) + 0.5) * self.widths[a]
                for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel(order="F") for m in mesh], axis=1)

    def locate(self, x):
        """Flat index of the box containing ``x`` (point or ``(n, d)`` array).

        Periodic axes wrap first.  Interior shared faces resolve to the box
        whose lower edge carries the point (lower-closed cells); the exact
        upper domain boundary of a non-periodic axis belongs to the last box.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        idx = []
        for a in range(self.dim):
            xa = pts[:, a]
            lo, hi, w = self.domain[a, 0], self.domain[a, 1], self.widths[a]
            if self.periodic[a]:
                xa = lo + np.mod(xa - lo, hi - lo)
            elif np.any((xa < lo) | (xa > hi)):
                bad = xa[(xa < lo) | (xa > hi)][0]
                raise DomainError(f"coordinate {bad} outside [{lo}, {hi}] on non-periodic axis {a}")
            ia = np.floor((xa - lo) / w).astype(np.int64)
            np.clip(ia, 0, self.counts[a] - 1, out=ia)
            idx.append(ia)
        flat = self.flat_index(tuple(idx))
        return int(flat[0]) if single else flat

    def neighbor(self, flat, axis, side):
        """Neighbor flat index across the face ``(axis, side)``; -1 past a wall.

        ``side`` is -1 for the lower face, +1 for the upper face.
        """
        multi = list(self.multi_index(flat))
        multi[axis] = multi[axis] + (1 if side > 0 else -1)
        n = self.counts[axis]
        if multi[axis] < 0 or multi[axis] >= n:
            if not self.periodic[axis]:
                return -1
            multi[axis] %= n
        return int(self.flat_index(tuple(multi)))

    def faces(self, flat):
        """The ``2 d`` faces of a box as ``(axis, side, neighbor)`` tuples."""
        out = []
        for axis in range(self.dim):
            for side in (-1, +1):
                out.append((axis, side, self.neighbor(flat, axis, side)))
        return out

    def face_quadrature(self, flat, axis, side, q):
        """Tensor Gauss-Legendre rule on one box face.

        Returns ``(points, weights)`` with points of shape ``(q**(d-1), d)``
        and weights summing to the face's (d-1)-volume.  In one dimension the
        face is a point with counting-measure weight 1.  Nodes depend only on
        the grid plane, so the two boxes sharing a face see identical points.
        """
        if q < 1:
            raise ValueError("quadrature order must be >= 1")
        multi = self.multi_index(flat)
        coord = self.lo[axis] + (multi[axis] + (1 if side > 0 else 0)) * self.widths[axis]
        other = [a for a in range(self.dim) if a != axis]
        if not other:
            return np.array([[coord]]), np.array([1.0])
        rules = []
        for a in other:
            a_lo = self.lo[a] + multi[a] * self.widths[a]
            rules.append(gauss_legendre_panel(a_lo, a_lo + self.widths[a], q))
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        n_nodes = grids[0].size
        pts = np.empty((n_nodes, self.dim))
        pts[:, axis] = coord
        for a, g in zip(other, grids):
            pts[:, a] = g.ravel()
        w = np.ones(n_nodes)
        for wg in wgrids:
            w *= wg.ravel()
        return pts, w

    def __repr__(self):
        return f"BoxPartition(counts={self.counts}, periodic={self.periodic})"


@dataclass(frozen=True)
class UlamTime:
    """Uniform time slicing with ``n_slices`` slabs of width ``tau / n_slices``."""

    n_slices: int

    def __post_init__(self):
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")


@dataclass(frozen=True)
class CollocationTime:
    """Equidistant Fourier collocation with an odd number of modes."""

    modes: int

    def __post_init__(self):
        if self.modes < 1 or self.modes % 2 == 0:
            raise ValueError("collocation mode count must be odd and >= 1")


class AugmentedGrid:
    """Product of a spatial box partition with a time discretization.

    The flat augmented index is slice-major: ``g = slice * n_boxes + box``.
    """

    def __init__(self, partition, time, period):
        if not isinstance(time, (UlamTime, CollocationTime)):
            raise TypeError("time must be UlamTime or CollocationTime")
        self.partition = partition
        self.time = time
        self.period = float(period)

    @classmethod
    def for_field(cls, field, counts, time):
        return cls(BoxPartition.for_field(field, counts), time, field.period)

    @property
    def n_slices(self):
        return self.time.n_slices if isinstance(self.time, UlamTime) else self.time.modes

    @property
    def n_boxes(self):
        return self.partition.n_boxes

    @property
    def size(self):
        return self.n_slices * self.n_boxes

    @property
    def slice_width(self):
        return self.period / self.n_slices

    @property
    def slice_times(self):
        """Slice anchor times ``t_l = l * tau / n`` (left endpoints resp. nodes)."""
        return self.period * np.arange(self.n_slices) / self.n_slices

    def flatten(self, slice_index, box_index):
        return slice_index * self.n_boxes + box_index

    def unflatten(self, g):
        return divmod(g, self.n_boxes)

    def slice_of_time(self, t):
        """Index of the nearest slice to time ``t`` (mod period)."""
        pos = np.mod(t, self.period) / self.slice_width
        return int(np.rint(pos)) % self.n_slices

    def __repr__(self):
        return (f"AugmentedGrid({self.partition!r}, {self.time!r}, "
                f"period={self.period})")
