"""Time-periodic velocity fields on rectangular domains.

A :class:`VectorField` bundles a vectorized evaluation callable with the
geometry it lives on (domain box, per-axis periodicity) and its driving
period.  The built-ins cover the standard benchmark flows; user fields are
plain callables wrapped in the same container.
"""

import math

import numpy as np

__all__ = [
    "VectorField",
    "double_gyre",
    "bickley_jet",
    "rotating_interval",
    "finite_difference_divergence",
]


class VectorField:
    """A velocity field ``v(t, x)`` that is periodic in time.

    Parameters
    ----------
    func : callable
        ``func(t, pts)`` with ``t`` a scalar and ``pts`` of shape ``(n, d)``
        returning velocities of shape ``(n, d)``.  Must be pure (no state);
        evaluation is assumed safe from concurrent threads.
    domain : array_like, shape (d, 2)
        Per-axis ``[lo, hi]`` bounds of the rectangular state space.
    period : float
        Driving period ``tau``; ``func(t + tau, x) == func(t, x)``.
    periodic : sequence of bool, optional
        Per-axis spatial periodicity flags.  Defaults to all non-periodic.
    name : str
        Identifier used in configs and output headers.
    params : dict, optional
        Parameter values recorded for provenance.
    """

    def __init__(self, func, domain, period, periodic=None, name="custom", params=None):
        self._func = func
        self.domain = np.atleast_2d(np.asarray(domain, dtype=float))
        if self.domain.shape[1] != 2:
            raise ValueError("domain must have shape (d, 2)")
        if not np.all(self.domain[:, 1] > self.domain[:, 0]):
            raise ValueError("domain must have hi > lo on every axis")
        self.period = float(period)
        if not self.period > 0:
            raise ValueError("period must be positive")
        d = self.domain.shape[0]
        self.periodic = tuple(bool(p) for p in (periodic if periodic is not None else [False] * d))
        if len(self.periodic) != d:
            raise ValueError("periodic flags must match the domain dimension")
        self.name = name
        self.params = dict(params or {})

    @property
    def dim(self):
        return self.domain.shape[0]

    @property
    def lo(self):
        return self.domain[:, 0]

    @property
    def hi(self):
        return self.domain[:, 1]

    @property
    def widths(self):
        return self.domain[:, 1] - self.domain[:, 0]

    def wrap(self, x):
        """Wrap periodic coordinates into ``[lo, hi)``; other axes untouched."""
        x = np.array(x, dtype=float, copy=True)
        pts = np.atleast_2d(x)
        for a, per in enumerate(self.periodic):
            if per:
                lo, w = self.domain[a, 0], self.widths[a]
                pts[:, a] = lo + np.mod(pts[:, a] - lo, w)
        return pts.reshape(np.shape(x))

    def evaluate(self, t, x):
        """Velocity at time ``t`` and point(s) ``x`` of shape ``(d,)`` or ``(n, d)``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = self.wrap(np.atleast_2d(x))
        v = np.asarray(self._func(float(t), pts), dtype=float)
        if v.shape != pts.shape:
            raise ValueError(f"field '{self.name}' returned shape {v.shape}, expected {pts.shape}")
        return v[0] if single else v

    __call__ = evaluate

    def __repr__(self):
        return f"VectorField({self.name!r}, d={self.dim}, period={self.period})"


def double_gyre(amplitude=0.25, perturbation=0.25, omega=2.0 * math.pi):
    """Periodically driven double-gyre flow on ``[0, 2] x [0, 1]``.

    Two counter-rotating gyres with the vertical interface oscillating at
    angular frequency ``omega``; the field is divergence-free and tangential
    on the domain boundary.
    """
    if not np.isfinite([amplitude, perturbation, omega]).all():
        raise ValueError("double_gyre parameters must be finite")
    if omega <= 0:
        raise ValueError("omega must be positive")
    A, alpha = float(amplitude), float(perturbation)

    def func(t, pts):
        x, y = pts[:, 0], pts[:, 1]
        s = math.sin(omega * t)
        f = alpha * s * x**2 + (1.0 - 2.0 * alpha * s) * x
        dfdx = 2.0 * alpha * s * x + 1.0 - 2.0 * alpha * s
        u = -math.pi * A * np.sin(math.pi * f) * np.cos(math.pi * y)
        w = math.pi * A * np.cos(math.pi * f) * np.sin(math.pi * y) * dfdx
        return np.stack([u, w], axis=1)

    return VectorField(
        func,
        domain=[[0.0, 2.0], [0.0, 1.0]],
        period=2.0 * math.pi / omega,
        periodic=[False, False],
        name="double_gyre",
        params={"amplitude": A, "perturbation": alpha, "omega": float(omega)},
    )


def bickley_jet(u0=5.4138, length=1.77, a2=0.1, a3=0.3, r_e=6.371, c2=None, c3=None):
    """Perturbed Bickley jet: a zonal jet with two superimposed traveling waves.

    Stream-function flow on ``[0, pi*r_e] x [-4, 4]``, periodic in ``x``.
    Lengths are in Mm and time in days.  The default phase speeds are chosen
    so the two waves complete exactly 1 and 3 cycles in 9 days, making the
    field 9-periodic to machine precision (``c2/u0 = 0.2054``,
    ``c3/u0 = 0.4108`` to four decimals).
    """
    if r_e <= 0:
        raise ValueError("r_e must be positive")
    if not np.isfinite([u0, length, a2, a3, r_e]).all():
        raise ValueError("bickley_jet parameters must be finite")
    tau = 9.0
    k2, k3 = 4.0 / r_e, 6.0 / r_e
    if c2 is None:
        c2 = 2.0 * math.pi / (tau * k2)
    if c3 is None:
        c3 = 3.0 * 2.0 * math.pi / (tau * k3)
    U0, L = float(u0), float(length)

    def func(t, pts):
        x, y = pts[:, 0], pts[:, 1]
        sech2 = 1.0 / np.cosh(y / L) ** 2
        tanh = np.tanh(y / L)
        p2 = k2 * (x - c2 * t)
        p3 = k3 * (x - c3 * t)
        wave = a2 * np.cos(p2) + a3 * np.cos(p3)
        u = U0 * sech2 + 2.0 * U0 * tanh * sech2 * wave
        v = -U0 * L * sech2 * (a2 * k2 * np.sin(p2) + a3 * k3 * np.sin(p3))
        return np.stack([u, v], axis=1)

    return VectorField(
        func,
        domain=[[0.0, math.pi * r_e], [-4.0, 4.0]],
        period=tau,
        periodic=[True, False],
        name="bickley_jet",
        params={"u0": U0, "length": L, "a2": float(a2), "a3": float(a3),
                "r_e": float(r_e), "c2": float(c2), "c3": float(c3)},
    )


def rotating_interval():
    """One-dimensional oscillating drift ``v(t, x) = 0.3 cos(t)`` on the unit circle."""

    def func(t, pts):
        return np.full_like(pts, 0.3 * math.cos(t))

    return VectorField(
        func,
        domain=[[0.0, 1.0]],
        period=2.0 * math.pi,
        periodic=[True],
        name="rotating_interval",
        params={},
    )


_BUILTINS = {
    "double_gyre": double_gyre,
    "bickley_jet": bickley_jet,
    "rotating_interval": rotating_interval,
}


def make_field(name, params=None):
    """Instantiate a built-in field by name with a parameter map."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown field {name!r}; built-ins: {sorted(_BUILTINS)}") from None
    return factory(**(params or {}))


def finite_difference_divergence(field, t, x, step=1e-5):
    """Central-difference divergence of ``field`` at ``(t, x)``.

    Independent consistency check for stream-function and other
    divergence-free fields; returns a scalar (or array for ``(n, d)`` input).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    div = np.zeros(x.shape[0])
    for a in range(field.dim):
        xp = x.copy()
        xm = x.copy()
        xp[:, a] += step
        xm[:, a] -= step
        div += (field.evaluate(t, xp)[:, a] - field.evaluate(t, xm)[:, a]) / (2.0 * step)
    return div if div.size > 1 else float(div[0])
