"""Coherent families extracted from augmented-generator eigenvectors.

A :class:`CoherentFamily` turns an eigenvector over the time-augmented grid
into a time-parametrized scalar field ``f_t`` (nearest-slice lookup for the
ulam scheme, trigonometric interpolation for the hybrid scheme) together
with the sign-set family it induces.  For a complex eigenvalue
``mu = alpha + beta*i`` the family carries a phase that rotates with angular
frequency ``beta``, generally incommensurate with the driving period.
"""

import numpy as np

__all__ = ["CoherentFamily", "family_from_eigenpair", "evolve_slice", "decay_rate_bound"]


def _dirichlet_weights(grid, t):
    """Periodic-sinc interpolation weights through the collocation slices."""
    M = grid.n_slices
    tau = grid.period
    dt = np.mod(t - grid.slice_times, tau)
    w = np.empty(M)
    for l, d in enumerate(dt):
        if d < 1e-14 * tau or tau - d < 1e-14 * tau:
            w[:] = 0.0
            w[l] = 1.0
            return w
        w[l] = np.sin(M * np.pi * d / tau) / (M * np.sin(np.pi * d / tau))
    return w


class CoherentFamily:
    """Time-parametrized signed field and its sign-set family.

    Parameters
    ----------
    grid : AugmentedGrid
    eigenvalue : complex
        Decay rate ``alpha = Re mu`` and phase frequency ``beta = Im mu``.
    slices : ndarray, shape (n_slices, n_boxes)
        Time slices of the (complex) eigenvector.
    scheme : str
        ``"ulam"`` or ``"hybrid"``; selects the slice interpolation rule.
    phase : float
        Phase angle in ``[0, 2 pi)``; only meaningful for ``beta != 0``.
    anchor : float
        Anchor time ``s`` from which the phase rotates.
    """

    def __init__(self, grid, eigenvalue, slices, scheme, phase=0.0, anchor=0.0):
        slices = np.asarray(slices)
        if slices.shape != (grid.n_slices, grid.n_boxes):
            raise ValueError(
                f"slices shape {slices.shape} does not match grid "
                f"({grid.n_slices}, {grid.n_boxes})"
            )
        self.grid = grid
        self.eigenvalue = complex(eigenvalue)
        self.slices = slices
        if scheme not in ("ulam", "hybrid"):
            raise ValueError(f"unknown scheme {scheme!r}")
        self.scheme = scheme
        self.phase = float(phase) % (2.0 * np.pi)
        self.anchor = float(anchor)

    @property
    def alpha(self):
        return self.eigenvalue.real

    @property
    def beta(self):
        return self.eigenvalue.imag

    @property
    def phase_period(self):
        """Period ``2 pi / beta`` of the family's phase (inf for real mu)."""
        return np.inf if self.beta == 0.0 else 2.0 * np.pi / abs(self.beta)

    def slice_values(self, t):
        """Complex eigenvector slice ``f_t`` at any time (tau-periodic)."""
        if self.scheme == "ulam":
            return self.slices[self.grid.slice_of_time(t)]
        w = _dirichlet_weights(self.grid, t)
        return w @ self.slices

    def sign_field(self, t):
        """Real field whose sign defines the sets at time ``t``.

        ``Re(exp(i phase + i beta (t - s)) f_t)``; the positive decay factor
        is dropped since it cannot change signs.
        """
        rot = np.exp(1j * (self.phase + self.beta * (t - self.anchor)))
        return np.real(rot * self.slice_values(t))

    def sets(self, t, level=0.0):
        """Box masks ``(plus, minus)`` of ``{f >= level}`` and ``{-f >= level}``.

        With the default level both sets cover every box and overlap exactly
        on boxes whose value is zero.
        """
        f = self.sign_field(t)
        return f >= level, -f >= level

    def membership(self, sign):
        """Indicator ``(t, boxes) -> bool`` for the plus (+1) or minus (-1) family."""
        s = 1.0 if sign > 0 else -1.0

        def member(t, boxes):
            return s * self.sign_field(t)[boxes] >= 0.0

        return member


def family_from_eigenpair(pair, grid, scheme, phase=0.0, anchor=0.0):
    """Build a coherent family from a converged eigenpair over ``grid``."""
    if not pair.converged:
        raise ValueError("eigenpair did not converge; refusing to build a family")
    v = np.asarray(pair.vector)
    if v.size != grid.size:
        raise ValueError(f"eigenvector length {v.size} does not match grid size {grid.size}")
    slices = v.reshape(grid.n_slices, grid.n_boxes)
    return CoherentFamily(grid, pair.eigenvalue, slices, scheme, phase=phase, anchor=anchor)


def evolve_slice(family, s, t):
    """Predicted transfer-operator push-forward of the anchor-``s`` slice to ``t``.

    Spectral evolution without time integration: the phase-rotated slice at
    ``s`` evolves to ``Re(exp(i phase + mu (t - s)) f_t)`` including the
    real decay factor.
    """
    if t < s:
        raise ValueError("t must be >= s")
    factor = np.exp(1j * family.phase + family.eigenvalue * (t - s))
    return np.real(factor * family.slice_values(t))


def decay_rate_bound(family):
    """Upper bound ``-Re mu`` on the escape rate from the family's sets."""
    return -family.alpha
