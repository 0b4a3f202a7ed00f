"""Generators on time-augmented phase space.

Two discretizations of the autonomous generator ``-d/dtheta + G(theta)`` on
the product of the time circle with the spatial box grid:

* ``ulam``: backward finite differences in time, so the assembled matrix is
  block-diagonal in the per-slice spatial generators plus a circulant
  time-coupling ``T`` with ``T[l, l] = -1/h`` and ``T[l, l-1] = +1/h``.
* ``hybrid``: Fourier spectral collocation in time; the coupling is the dense
  antisymmetric differentiation matrix of the trigonometric Lagrange basis at
  the equidistant nodes.

The matrix is kept as per-slice sparse blocks plus the coupling and only
assembled into one sparse matrix on demand.
"""

import concurrent.futures as cf
import math

import numpy as np
import scipy.sparse as sp

from .generator import assemble
from .grid import CollocationTime, UlamTime, gauss_legendre_panel

__all__ = [
    "AugmentedGenerator",
    "assemble_ulam",
    "assemble_hybrid",
    "fourier_diff_matrix",
]


def fourier_diff_matrix(modes, period):
    """Spectral differentiation matrix for an odd equidistant Fourier basis.

    ``D[l, m]`` is the derivative of the m-th trigonometric Lagrange basis
    function at node ``t_l``; closed form
    ``(pi / period) * (-1)^(l-m) / sin(pi (l-m) / M)`` off the diagonal.
    Exact on the span of frequencies up to ``(M-1)/2``.
    """
    M = int(modes)
    if M % 2 == 0 or M < 1:
        raise ValueError("mode count must be odd and >= 1")
    l = np.arange(M)
    diff = l[:, None] - l[None, :]
    D = np.zeros((M, M))
    off = diff != 0
    D[off] = (math.pi / period) * (-1.0) ** diff[off] / np.sin(math.pi * diff[off] / M)
    return D


class AugmentedGenerator:
    """Discretized augmented generator stored as slice blocks plus coupling.

    Vectors are slice-major: entry ``l * n_boxes + b`` is the coefficient of
    box ``b`` at time slice ``l``.
    """

    def __init__(self, grid, blocks, scheme, eps, quadrature, meta=None):
        self.grid = grid
        self.blocks = list(blocks)
        self.scheme = scheme
        self.eps = float(eps)
        self.quadrature = int(quadrature)
        self.meta = dict(meta or {})
        if scheme == "ulam":
            self._D = None
        elif scheme == "hybrid":
            self._D = fourier_diff_matrix(grid.n_slices, grid.period)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        if len(self.blocks) != grid.n_slices:
            raise ValueError("one spatial block per time slice required")

    @property
    def shape(self):
        return (self.grid.size, self.grid.size)

    @property
    def coupling_matrix(self):
        """Time-coupling matrix ``C``; the full operator is ``blockdiag + C (x) I``.

        For the ulam scheme ``C`` is the backward-difference circulant with
        ``-1/h`` on the diagonal and ``+1/h`` on the cyclic subdiagonal; for
        the hybrid scheme it is the negated spectral differentiation matrix.
        """
        ns = self.grid.n_slices
        if self.scheme == "hybrid":
            return -self._D
        h = self.grid.slice_width
        T = np.zeros((ns, ns))
        idx = np.arange(ns)
        T[idx, idx] = -1.0 / h
        T[idx, (idx - 1) % ns] = 1.0 / h
        return T

    def matvec(self, v):
        """Apply the augmented generator without materializing the Kronecker form."""
        v = np.asarray(v)
        if v.shape != (self.grid.size,):
            raise ValueError(f"vector length {v.shape} does not match {self.grid.size}")
        ns, n = self.grid.n_slices, self.grid.n_boxes
        V = v.reshape(ns, n)
        out = np.empty_like(V, dtype=np.result_type(v.dtype, float))
        for l, B in enumerate(self.blocks):
            out[l] = B.matrix @ V[l]
        if self.scheme == "ulam":
            h = self.grid.slice_width
            out += (np.roll(V, 1, axis=0) - V) / h
        else:
            out -= self._D @ V
        return out.ravel()

    def to_sparse(self, fmt="csc"):
        """Assemble the full sparse matrix (blocks plus time coupling)."""
        n = self.grid.n_boxes
        A = sp.block_diag([B.matrix for B in self.blocks], format="csr")
        C = sp.csr_matrix(self.coupling_matrix)
        A = A + sp.kron(C, sp.identity(n, format="csr"), format="csr")
        return A.asformat(fmt)

    def slice_values(self, v, l):
        """Slice ``l`` of an augmented vector."""
        n = self.grid.n_boxes
        return np.asarray(v)[l * n:(l + 1) * n]

    def __repr__(self):
        return (f"AugmentedGenerator(scheme={self.scheme!r}, slices={self.grid.n_slices}, "
                f"boxes={self.grid.n_boxes}, eps={self.eps})")


def _slice_blocks(grid, field, eps, q, slice_pairs, threads):
    def build(pairs):
        t0 = pairs[0][0]
        return assemble(grid.partition, field, t0, eps, q=q, time_pairs=pairs)

    if threads and threads != 1:
        workers = None if threads == 0 else threads
        with cf.ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(build, slice_pairs))
    return [build(p) for p in slice_pairs]


def assemble_ulam(grid, field, eps, q=4, time_rule="left", threads=1):
    """Backward-difference augmented generator on an Ulam time grid.

    ``time_rule`` selects how each slab's spatial generator samples the
    field: ``"left"`` evaluates at the slab's left endpoint ``l * h``,
    ``"midpoint"`` at its center, and ``"average"`` integrates the face
    fluxes over the slab with a 4-point Gauss rule.
    """
    if not isinstance(grid.time, UlamTime):
        raise ValueError("assemble_ulam requires an AugmentedGrid with UlamTime")
    h = grid.slice_width
    pairs = []
    for t0 in grid.slice_times:
        if time_rule == "left":
            pairs.append([(t0, 1.0)])
        elif time_rule == "midpoint":
            pairs.append([(t0 + 0.5 * h, 1.0)])
        elif time_rule == "average":
            tq, tw = gauss_legendre_panel(t0, t0 + h, 4)
            pairs.append(list(zip(tq, tw / h)))
        else:
            raise ValueError(f"unknown time_rule {time_rule!r}")
    blocks = _slice_blocks(grid, field, eps, q, pairs, threads)
    return AugmentedGenerator(grid, blocks, "ulam", eps, q,
                              meta={"time_rule": time_rule, "field": field.name})


def assemble_hybrid(grid, field, eps, q=4, threads=1):
    """Fourier-collocation-in-time augmented generator (odd mode count)."""
    if not isinstance(grid.time, CollocationTime):
        raise ValueError("assemble_hybrid requires an AugmentedGrid with CollocationTime")
    pairs = [[(t0, 1.0)] for t0 in grid.slice_times]
    blocks = _slice_blocks(grid, field, eps, q, pairs, threads)
    return AugmentedGenerator(grid, blocks, "hybrid", eps, q, meta={"field": field.name})
