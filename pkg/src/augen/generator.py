"""Upwind finite-volume drift and central-difference diffusion generators.

The spatial generator ``G = G_drift + G_diff`` acts on coefficient vectors
with respect to the normalized box indicators ``1_B / m(B)`` and multiplies
them from the left.  Off-diagonal entries are box-to-box probability flow
rates, diagonals the negated total outflow, so columns conserve mass exactly.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp

from .grid import gauss_legendre_panel

__all__ = ["GeneratorMatrix", "assemble_drift", "assemble_diffusion", "assemble"]


@dataclass(frozen=True)
class GeneratorMatrix:
    """Sparse spatial generator with its assembly metadata.

    ``matrix`` multiplies coefficient vectors (normalized-indicator basis)
    from the left.  Off-diagonals are >= 0, diagonals <= 0, and every column
    sums to zero up to roundoff.  Immutable; safe for concurrent matvecs.
    """

    matrix: sp.csr_matrix
    partition: object
    t: float
    eps: float
    quadrature: int
    meta: dict = dc_field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        return self.matrix @ other

    def mass_column_sums(self):
        """Volume-weighted column sums; zero for a mass-conserving generator."""
        return self.partition.box_volume * np.asarray(self.matrix.sum(axis=0)).ravel()


def _plane_geometry(partition, axis):
    """Coordinates of the coupling planes and the box indices on both sides."""
    n = partition.counts[axis]
    planes = np.arange(1, n)
    lower = planes - 1
    upper = planes.copy()
    if partition.periodic[axis]:
        planes = np.concatenate([[0], planes])
        lower = np.concatenate([[n - 1], lower])
        upper = np.concatenate([[0], upper])
    coords = partition.lo[axis] + planes * partition.widths[axis]
    return coords, lower, upper


def _face_nodes(partition, axis):
    """Face layout orthogonal to ``axis``: multi-indices and offset origins.

    Returns ``(face_multi, origins)`` where ``face_multi`` is a tuple of
    per-other-axis index arrays of length ``n_faces`` and ``origins`` the
    matching lower corners, shape ``(n_faces, #other)``.
    """
    other = [b for b in range(partition.dim) if b != axis]
    if not other:
        return (), np.zeros((1, 0))
    grids = np.meshgrid(*[np.arange(partition.counts[b]) for b in other], indexing="ij")
    face_multi = tuple(g.ravel() for g in grids)
    origins = np.stack(
        [partition.lo[b] + face_multi[j] * partition.widths[b] for j, b in enumerate(other)],
        axis=1,
    )
    return face_multi, origins


def _face_rule(partition, axis, q):
    """Per-face tensor Gauss offsets and weights, shapes ``(qq, #other)``, ``(qq,)``."""
    other = [b for b in range(partition.dim) if b != axis]
    if not other:
        return np.zeros((1, 0)), np.array([1.0])
    rules = [gauss_legendre_panel(0.0, partition.widths[b], q) for b in other]
    offs = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    ws = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    offsets = np.stack([o.ravel() for o in offs], axis=1)
    weights = np.ones(offsets.shape[0])
    for w in ws:
        weights *= w.ravel()
    return offsets, weights


def _drift_coo(partition, field, time_pairs, q):
    """COO triplets of the drift generator averaged over ``time_pairs``."""
    d = partition.dim
    m = partition.box_volume
    n = partition.n_boxes
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for axis in range(d):
        coords, lower_i, upper_i = _plane_geometry(partition, axis)
        if coords.size == 0:
            continue
        face_multi, origins = _face_nodes(partition, axis)
        offsets, w = _face_rule(partition, axis, q)
        n_faces, qq = origins.shape[0], offsets.shape[0]
        other = [b for b in range(d) if b != axis]
        # all (plane, face, node) combinations in one field evaluation
        pts = np.empty((coords.size, n_faces, qq, d))
        pts[..., axis] = coords[:, None, None]
        for j, b in enumerate(other):
            pts[..., b] = origins[None, :, j, None] + offsets[None, None, :, j]
        pts = pts.reshape(-1, d)
        fplus = np.zeros(pts.shape[0])
        fminus = np.zeros_like(fplus)
        for t, wt in time_pairs:
            vn = field.evaluate(t, pts)[:, axis]
            fplus += wt * np.maximum(vn, 0.0)
            fminus += wt * np.maximum(-vn, 0.0)
        fplus = (fplus.reshape(coords.size, n_faces, qq) * w).sum(axis=2)
        fminus = (fminus.reshape(coords.size, n_faces, qq) * w).sum(axis=2)
        # flat indices of the boxes on both sides of every (plane, face)
        lo_multi = [None] * d
        hi_multi = [None] * d
        for j, b in enumerate(other):
            lo_multi[b] = np.broadcast_to(face_multi[j], (coords.size, n_faces))
            hi_multi[b] = lo_multi[b]
        lo_multi[axis] = np.broadcast_to(lower_i[:, None], (coords.size, n_faces))
        hi_multi[axis] = np.broadcast_to(upper_i[:, None], (coords.size, n_faces))
        lo_flat = partition.flat_index(tuple(lo_multi)).ravel()
        hi_flat = partition.flat_index(tuple(hi_multi)).ravel()
        fplus = fplus.ravel() / m
        fminus = fminus.ravel() / m
        rows += [hi_flat, lo_flat]
        cols += [lo_flat, hi_flat]
        vals += [fplus, fminus]
        np.add.at(diag, lo_flat, -fplus)
        np.add.at(diag, hi_flat, -fminus)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def assemble_drift(partition, field, t, q=4, time_pairs=None):
    """Upwind drift generator at time ``t``.

    Entry ``(i, j)``, ``i != j``, is the outflow rate of the positive face
    flux from box ``j`` into neighbor ``i``; the diagonal collects the total
    outflow.  Faces on non-periodic domain boundaries carry no flux, so the
    discrete flow conserves mass exactly.

    ``time_pairs`` optionally replaces the point evaluation at ``t`` with a
    weighted average of fluxes over ``[(t_k, w_k), ...]`` (weights summing
    to 1), used for time-slab averaged assembly.
    """
    if field.dim != partition.dim:
        raise ValueError("field and partition dimensions differ")
    pairs = time_pairs if time_pairs is not None else [(float(t), 1.0)]
    rows, cols, vals = _drift_coo(partition, field, pairs, q)
    n = partition.n_boxes
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mat.eliminate_zeros()
    return GeneratorMatrix(mat, partition, float(t), 0.0, int(q))


def assemble_diffusion(partition, eps):
    """Diffusion generator ``(eps^2 / 2) * Lap`` on the centroid grid.

    Second-order central differences with mirrored-ghost (zero-flux) closure
    on non-periodic boundaries and wrap-around coupling on periodic axes;
    all rows sum to zero.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    n = partition.n_boxes
    if eps == 0.0:
        return GeneratorMatrix(sp.csr_matrix((n, n)), partition, 0.0, 0.0, 0)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    d = partition.dim
    for axis in range(d):
        _, lower_i, upper_i = _plane_geometry(partition, axis)
        if lower_i.size == 0:
            continue
        other = [b for b in range(d) if b != axis]
        if other:
            counts = [partition.counts[b] for b in other]
            grids = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
            o_multi = [g.ravel() for g in grids]
            n_other = o_multi[0].size
        else:
            o_multi, n_other = [], 1
        c = 1.0 / partition.widths[axis] ** 2
        lo_multi = [None] * d
        hi_multi = [None] * d
        for j, b in enumerate(other):
            lo_multi[b] = np.tile(o_multi[j], lower_i.size)
            hi_multi[b] = lo_multi[b]
        lo_multi[axis] = np.repeat(lower_i, n_other)
        hi_multi[axis] = np.repeat(upper_i, n_other)
        lo_flat = partition.flat_index(tuple(lo_multi))
        hi_flat = partition.flat_index(tuple(hi_multi))
        coup = np.full(lo_flat.size, c)
        rows += [hi_flat, lo_flat]
        cols += [lo_flat, hi_flat]
        vals += [coup, coup]
        np.add.at(diag, lo_flat, -coup)
        np.add.at(diag, hi_flat, -coup)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    mat = (eps**2 / 2.0) * sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return GeneratorMatrix(mat.tocsr(), partition, 0.0, float(eps), 0)


def assemble(partition, field, t, eps, q=4, time_pairs=None):
    """Full spatial generator ``G_drift(t) + G_diff`` with assembly metadata."""
    drift = assemble_drift(partition, field, t, q=q, time_pairs=time_pairs)
    if eps == 0.0:
        return GeneratorMatrix(drift.matrix, partition, float(t), 0.0, int(q))
    diff = assemble_diffusion(partition, eps)
    return GeneratorMatrix(
        (drift.matrix + diff.matrix).tocsr(), partition, float(t), float(eps), int(q)
    )
