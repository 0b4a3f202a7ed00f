"""Deterministic transport: boundary fluxes, survivor sets, escape rates.

Two independent routes to the one-period outflow from a moving family of
sets: a direct space-time quadrature of the relative flux through the moving
boundary, and a surface integral over the time-extended boundary in
augmented space.  Their equality is a theorem; the code paths share nothing
but the boundary parametrization, so comparing them exercises both.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import gauss_legendre_panel

__all__ = [
    "BoundaryPatch",
    "MovingBoundaryFamily",
    "NumericalDegeneracyError",
    "cumulative_outflow",
    "instantaneous_augmented_outflow",
    "box_family_flux",
    "survivor_evolve",
    "SurvivorRecord",
    "bordered_gram_identity_check",
    "interval_family",
    "circle_family",
]


class NumericalDegeneracyError(RuntimeError):
    """A boundary parametrization degenerated (vanishing Gram determinant)."""


_FD_STEP = 1e-6


class BoundaryPatch:
    """One smooth parametrized piece of a moving boundary.

    Parameters
    ----------
    param : callable
        ``param(t, r) -> points`` with ``r`` of shape ``(m, d-1)`` (an
        ``(m, 0)`` array in one dimension) returning ``(m, d)`` points.
    param_domain : array_like, shape (d-1, 2)
        Rectangle of parameter values (empty for d = 1).
    normal : callable, optional
        ``normal(t, r) -> (m, d)`` outward unit normals.  Required for
        d = 1 (`orientation` +-1 works too) and d > 2; for d = 2 it defaults
        to the tangent rotated by ``orientation``.
    velocity : callable, optional
        Analytic ``d param / dt``; finite differences otherwise.
    tangents : callable, optional
        Analytic ``d param / dr``, shape ``(m, d, d-1)``; finite differences
        otherwise.
    orientation : int
        For d = 1, the outward direction (+1 upper endpoint, -1 lower); for
        d = 2, the sense in which the tangent is rotated to get the normal.
    """

    def __init__(self, param, param_domain, normal=None, velocity=None,
                 tangents=None, orientation=+1):
        self.param = param
        self.param_domain = np.asarray(param_domain, dtype=float).reshape(-1, 2)
        self._normal = normal
        self._velocity = velocity
        self._tangents = tangents
        self.orientation = int(orientation)

    @property
    def param_dim(self):
        return self.param_domain.shape[0]

    def points(self, t, r):
        return np.asarray(self.param(t, r), dtype=float)

    def velocity(self, t, r):
        if self._velocity is not None:
            return np.asarray(self._velocity(t, r), dtype=float)
        return (self.points(t + _FD_STEP, r) - self.points(t - _FD_STEP, r)) / (2 * _FD_STEP)

    def tangents(self, t, r):
        if self._tangents is not None:
            return np.asarray(self._tangents(t, r), dtype=float)
        m = r.shape[0]
        d = self.points(t, r[:1]).shape[1]
        out = np.empty((m, d, self.param_dim))
        for j in range(self.param_dim):
            dr = np.zeros((1, self.param_dim))
            dr[0, j] = _FD_STEP
            out[:, :, j] = (self.points(t, r + dr) - self.points(t, r - dr)) / (2 * _FD_STEP)
        return out

    def normal(self, t, r):
        if self._normal is not None:
            n = np.asarray(self._normal(t, r), dtype=float)
            return n / np.linalg.norm(n, axis=1, keepdims=True)
        d = self.points(t, r[:1] if r.size else r).shape[1]
        if d == 1:
            return np.full((max(r.shape[0], 1), 1), float(self.orientation))
        if d == 2:
            tg = self.tangents(t, r)[:, :, 0]
            n = np.stack([tg[:, 1], -tg[:, 0]], axis=1) * self.orientation
            norms = np.linalg.norm(n, axis=1, keepdims=True)
            if np.any(norms < 1e-300):
                raise NumericalDegeneracyError("zero tangent in boundary parametrization")
            return n / norms
        raise ValueError("normals must be supplied analytically for d > 2")


@dataclass
class MovingBoundaryFamily:
    """Tau-periodic family of sets described by boundary patches."""

    patches: list
    period: float


def _patch_quadrature(patch, panels, order):
    """Tensor composite Gauss nodes over the patch's parameter rectangle."""
    if patch.param_dim == 0:
        return np.zeros((1, 0)), np.array([1.0])
    axes = []
    for lo, hi in patch.param_domain:
        edges = np.linspace(lo, hi, panels + 1)
        xs, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre_panel(a, b, order)
            xs.append(x)
            ws.append(w)
        axes.append((np.concatenate(xs), np.concatenate(ws)))
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    r = np.stack([g.ravel() for g in grids], axis=1)
    w = np.ones(r.shape[0])
    for wg in wgrids:
        w *= wg.ravel()
    return r, w


def _time_nodes(period, panels, order):
    edges = np.linspace(0.0, period, panels + 1)
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre_panel(a, b, order)
        ts.append(x)
        ws.append(w)
    return np.concatenate(ts), np.concatenate(ws)


def _gram_det(T):
    """sqrt(det(T^T T)) for tangent stacks of shape (m, d, p); 1 for p = 0."""
    if T.shape[2] == 0:
        return np.ones(T.shape[0])
    G = np.einsum("mdp,mdq->mpq", T, T)
    det = np.linalg.det(G)
    if np.any(det <= 1e-300):
        raise NumericalDegeneracyError("vanishing Gram determinant on the boundary")
    return np.sqrt(det)


def cumulative_outflow(family, field, surface_quad=(64, 4), time_quad=(256, 4)):
    """One-period outflow flux through the moving boundary.

    Integrates the positive part of the relative normal velocity
    ``<v - w, n>`` over the boundary and over one period, with tensor
    composite Gauss rules ``(panels, order)`` in the surface parameters and
    in time.
    """
    tnodes, tweights = _time_nodes(family.period, *time_quad)
    total = 0.0
    for patch in family.patches:
        r, wr = _patch_quadrature(patch, *surface_quad)
        for t, wt in zip(tnodes, tweights):
            x = patch.points(t, r)
            n = patch.normal(t, r)
            w = patch.velocity(t, r)
            g = _gram_det(patch.tangents(t, r)) if patch.param_dim else np.ones(x.shape[0])
            rel = np.einsum("md,md->m", field.evaluate(t, x) - w, n)
            total += wt * np.sum(np.maximum(rel, 0.0) * g * wr)
    return float(total)


def instantaneous_augmented_outflow(family, field, surface_quad=(64, 4), time_quad=(256, 4)):
    """Outflow as a surface integral over the time-extended boundary.

    The boundary of the time-extended set is parametrized by ``(t, r) ->
    (t, a(t, r))``; its outward normal is proportional to
    ``(-<n, w>, n)`` and the surface measure carries the augmented Gram
    determinant.  Equal to :func:`cumulative_outflow` up to quadrature.
    """
    tnodes, tweights = _time_nodes(family.period, *time_quad)
    total = 0.0
    for patch in family.patches:
        r, wr = _patch_quadrature(patch, *surface_quad)
        m = r.shape[0]
        for t, wt in zip(tnodes, tweights):
            x = patch.points(t, r)
            n = patch.normal(t, r)
            w = patch.velocity(t, r)
            d = x.shape[1]
            Tspace = patch.tangents(t, r) if patch.param_dim else np.zeros((m, d, 0))
            # time-extended tangents: (1, w) plus (0, dr a); Gram det of the stack
            That = np.concatenate(
                [np.concatenate([np.ones((m, 1, 1)), w[:, :, None]], axis=1),
                 np.concatenate([np.zeros((m, 1, Tspace.shape[2])), Tspace], axis=1)],
                axis=2,
            )
            ghat = _gram_det(That)
            nw = np.einsum("md,md->m", n, w)
            vhat_dot = -nw + np.einsum("md,md->m", field.evaluate(t, x), n)
            total += wt * np.sum(np.maximum(vhat_dot, 0.0) * ghat / np.sqrt(1.0 + nw**2) * wr)
    return float(total)


def box_family_flux(aug, inside):
    """Box-level outflow rate summed from augmented-generator entries.

    ``inside`` is a boolean array of shape ``(n_slices, n_boxes)`` marking
    the family's boxes per time slice.  Sums ``m(B_j) * G(t_l)[i, j]`` over
    spatial transitions from inside boxes ``j`` to outside boxes ``i`` and
    weights each slice by the slab width; time-advance coupling entries are
    not flux rates and are excluded.  Cost is linear in the stored nonzeros.
    """
    if aug.scheme != "ulam":
        raise ValueError("box-level flux requires the ulam scheme (hybrid coupling "
                         "entries are not signed transition rates)")
    inside = np.asarray(inside, dtype=bool)
    ns, n = aug.grid.n_slices, aug.grid.n_boxes
    if inside.shape != (ns, n):
        raise ValueError(f"mask shape {inside.shape} != ({ns}, {n})")
    m = aug.grid.partition.box_volume
    h = aug.grid.slice_width
    total = 0.0
    for l, block in enumerate(aug.blocks):
        mask = inside[l]
        if not mask.any() or mask.all():
            continue
        sub = block.matrix[~mask][:, mask]
        total += h * m * float(sub.sum())
    return total


@dataclass
class SurvivorRecord:
    """Monte Carlo survivor evolution of one ensemble.

    ``mask`` marks points alive at the final time under dense membership
    checking, ``period_mask`` under checking only at whole periods; the
    latter is always a superset.  ``measures`` are Lebesgue estimates
    ``vol(X) * alive / N`` at the sample times.
    """

    anchor: float
    times: np.ndarray
    measures: np.ndarray
    mask: np.ndarray
    period_mask: np.ndarray
    points: np.ndarray
    meta: dict = dc_field(default_factory=dict)


def _rk4_step(field, x, t, h):
    k1 = field.evaluate(t, x)
    k2 = field.evaluate(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = field.evaluate(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = field.evaluate(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def survivor_evolve(field, indicator, s, t, n_points=100_000, step=None, seed=0):
    """Evolve a uniform ensemble and intersect with the moving family.

    ``indicator(t, pts) -> bool`` defines membership in ``A_t``.  Points are
    advected with fixed-step RK4 and membership is checked at every substep
    (dense sampling); a second mask only checks at whole periods past the
    anchor.  Volume is preserved by the flow, so surviving fractions estimate
    the survivor-set measure.
    """
    if step is None:
        step = field.period / 500.0
    if step <= 0:
        raise ValueError("step must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = field.lo, field.hi
    pts = lo + rng.random((n_points, field.dim)) * (hi - lo)
    vol = float(np.prod(hi - lo))
    alive = np.asarray(indicator(s, pts), dtype=bool).copy()
    period_alive = alive.copy()
    n_steps = int(np.ceil((t - s) / step))
    times = [s]
    measures = [vol * alive.mean()]
    x = pts.copy()
    tau = field.period
    next_period = s + tau
    tk = s
    for _ in range(n_steps):
        hk = min(step, t - tk)
        x = _rk4_step(field, x, tk, hk)
        for a, per in enumerate(field.periodic):
            if per:
                x[:, a] = lo[a] + np.mod(x[:, a] - lo[a], hi[a] - lo[a])
        tk = tk + hk
        member = np.asarray(indicator(tk, x), dtype=bool)
        alive &= member
        if tk >= next_period - 1e-12:
            period_alive &= member
            next_period += tau
        times.append(tk)
        measures.append(vol * alive.mean())
        if tk >= t - 1e-12:
            break
    return SurvivorRecord(
        anchor=float(s),
        times=np.array(times),
        measures=np.array(measures),
        mask=alive,
        period_mask=period_alive,
        points=pts,
        meta={"seed": seed, "n_points": n_points, "step": step},
    )


def _random_full_rank(rng, k):
    while True:
        M = rng.standard_normal((k, k - 1))
        if np.linalg.matrix_rank(M) == k - 1:
            return M


def bordered_gram_identity_check(k, trials=1000, tol=1e-10, seed=0):
    """Randomized check of the bordered Gram determinant identity.

    For random full-rank ``M`` (k x k-1), random ``m``, and the unit normal
    ``n`` of ``range(M)``: ``(1 + (n.m)^2) det(M^T M)`` must equal the
    determinant of the bordered matrix ``[[1 + m.m, m^T M], [M^T m, M^T M]]``.
    Returns a report dict with the worst relative error and any failures.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = []
    for trial in range(trials):
        M = _random_full_rank(rng, k)
        m = rng.standard_normal(k)
        Q = np.linalg.qr(M, mode="complete")[0]
        n = Q[:, -1]
        lhs = (1.0 + (n @ m) ** 2) * np.linalg.det(M.T @ M)
        top = np.concatenate([[1.0 + m @ m], m @ M])
        bottom = np.concatenate([(M.T @ m)[:, None], M.T @ M], axis=1)
        bordered = np.vstack([top, bottom])
        rhs = np.linalg.det(bordered)
        rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
        worst = max(worst, rel)
        if rel > tol:
            failures.append({"trial": trial, "rel_error": rel})
    return {"k": k, "trials": trials, "tol": tol, "max_rel_error": worst,
            "failures": failures, "passed": not failures}


def interval_family(lower, upper, period, lower_velocity=None, upper_velocity=None):
    """1-D moving interval ``[lower(t), upper(t)]`` as a two-patch family.

    Endpoint velocities may be given analytically; finite differences are the
    fallback.  The boundary "surface" is a point, so the patches carry an
    empty parameter domain and counting-measure weight.
    """

    def endpoint(pos, vel, orientation):
        def param(t, r):
            return np.full((max(r.shape[0], 1), 1), pos(t))

        velocity = None
        if vel is not None:
            def velocity(t, r):
                return np.full((max(r.shape[0], 1), 1), vel(t))

        return BoundaryPatch(param, np.zeros((0, 2)), velocity=velocity,
                             orientation=orientation)

    return MovingBoundaryFamily(
        [endpoint(lower, lower_velocity, -1), endpoint(upper, upper_velocity, +1)],
        period,
    )


def circle_family(center, radius, period, center_velocity=None):
    """2-D circle of fixed radius with a moving center, parametrized by angle.

    ``center(t) -> (2,)``; the outward normal and tangents are analytic, the
    boundary velocity is the center velocity (finite differences if not
    given).
    """

    def param(t, r):
        c = np.asarray(center(t), dtype=float)
        th = r[:, 0]
        return c[None, :] + radius * np.stack([np.cos(th), np.sin(th)], axis=1)

    def tangents(t, r):
        th = r[:, 0]
        return radius * np.stack([-np.sin(th), np.cos(th)], axis=1)[:, :, None]

    def normal(t, r):
        th = r[:, 0]
        return np.stack([np.cos(th), np.sin(th)], axis=1)

    velocity = None
    if center_velocity is not None:
        def velocity(t, r):
            return np.broadcast_to(np.asarray(center_velocity(t), dtype=float),
                                   (r.shape[0], 2)).copy()

    patch = BoundaryPatch(param, [[0.0, 2.0 * np.pi]], normal=normal,
                          velocity=velocity, tangents=tangents)
    return MovingBoundaryFamily([patch], period)
