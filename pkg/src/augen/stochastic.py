"""Euler-Maruyama simulation, escape-rate estimation, sampled transfer matrices.

All randomness flows through counter-based Philox streams keyed by
``(seed, step index)``, so runs are bit-reproducible and independent of
batching order.  Reflecting boundaries are realized by folding excursions
back into the domain; periodic axes wrap.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "EnsembleSpec",
    "TransferMatrix",
    "em_step",
    "escape_estimate",
    "EscapeResult",
    "sample_transfer_matrix",
]


class StepTooLargeError(RuntimeError):
    """Reflection failed to terminate; the proposed step dwarfs the domain."""


@dataclass(frozen=True)
class EnsembleSpec:
    """Monte Carlo ensemble description: size, seeding, step, and time window."""

    n: int
    seed: int
    step: float
    start: float
    end: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("ensemble size must be >= 1")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.end <= self.start:
            raise ValueError("end time must exceed start time")


@dataclass
class TransferMatrix:
    """Column-stochastic sampled transfer matrix with sampling metadata."""

    matrix: sp.csc_matrix
    partition: object
    meta: dict = dc_field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape


def _normals(seed, step_index, shape):
    """Standard normals from a Philox stream keyed by (seed, step index)."""
    bg = np.random.Philox(key=np.uint64(seed), counter=[0, 0, 0, np.uint64(step_index)])
    return np.random.Generator(bg).standard_normal(shape)


def _uniforms(seed, step_index, shape):
    bg = np.random.Philox(key=np.uint64(seed), counter=[0, 0, 0, np.uint64(step_index)])
    return np.random.Generator(bg).random(shape)


def _fold(x, lo, hi, max_folds=100):
    """Reflect out-of-domain coordinates back into [lo, hi] by folding."""
    for _ in range(max_folds):
        below = x < lo
        above = x > hi
        if not (below.any() or above.any()):
            return x
        x = np.where(below, 2.0 * lo - x, x)
        x = np.where(above, 2.0 * hi - x, x)
    raise StepTooLargeError("reflection did not terminate in 100 folds; reduce the step")


def apply_boundaries(field, x):
    """Wrap periodic axes and reflect non-periodic ones, in place."""
    lo, hi = field.lo, field.hi
    for a, per in enumerate(field.periodic):
        if per:
            x[:, a] = lo[a] + np.mod(x[:, a] - lo[a], hi[a] - lo[a])
        else:
            x[:, a] = _fold(x[:, a], lo[a], hi[a])
    return x


def em_step(field, eps, x, t, h, noise=None, seed=0, step_index=0):
    """One Euler-Maruyama step with reflecting/periodic boundary handling.

    ``x`` has shape ``(n, d)``; ``noise`` may supply the standard normal
    increments, otherwise they come from the ``(seed, step_index)`` stream.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if noise is None:
        noise = _normals(seed, step_index, x.shape)
    prop = x + h * field.evaluate(t, x)
    if eps > 0.0:
        prop = prop + eps * np.sqrt(h) * noise
    return apply_boundaries(field, prop)


def seed_uniform(field, n, seed, mask=None, partition=None):
    """Uniform points over the domain, optionally rejection-filtered to a box set."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    lo, hi = field.lo, field.hi
    pts = lo + rng.random((n, field.dim)) * (hi - lo)
    if mask is not None:
        keep = np.asarray(mask(pts), dtype=bool)
        pts = pts[keep]
    return pts


@dataclass
class EscapeResult:
    """Escape-rate estimate with its survival curve and provenance."""

    rate: float
    times: np.ndarray
    survival: np.ndarray
    n_start: int
    n_survive: int
    flags: tuple = ()
    meta: dict = dc_field(default_factory=dict)


def escape_estimate(field, eps, membership, spec, partition=None, start_level=None,
                    start_field=None):
    """Monte Carlo escape-rate estimate for one family of sets.

    ``membership(t, boxes or pts) -> bool``: when ``partition`` is given the
    callable receives located box indices, otherwise raw points.  Points are
    seeded uniformly over the domain, restricted to the starting set (with an
    optional seeding threshold ``start_field(pts) >= start_level``), advected
    by Euler-Maruyama with membership checked at every step time, and the
    rate is ``-log(survivors / starters) / (end - start)``.
    """
    n_steps = int(round((spec.end - spec.start) / spec.step))
    pts = seed_uniform(field, spec.n, spec.seed)

    def member(t, x):
        if partition is not None:
            return np.asarray(membership(t, partition.locate(x)), dtype=bool)
        return np.asarray(membership(t, x), dtype=bool)

    keep = member(spec.start, pts)
    if start_level is not None and start_field is not None:
        keep &= np.asarray(start_field(pts) >= start_level)
    x = pts[keep]
    n_start = int(x.shape[0])
    if n_start == 0:
        raise ValueError("no ensemble points start inside the family")
    alive = np.ones(n_start, dtype=bool)
    times = [spec.start]
    survival = [1.0]
    t = spec.start
    for k in range(n_steps):
        noise = _normals(spec.seed, k + 1, x.shape) if eps > 0 else None
        x[alive] = em_step(field, eps, x[alive], t, spec.step,
                           noise=noise[alive] if noise is not None else None)
        t = spec.start + (k + 1) * spec.step
        alive[alive] = member(t, x[alive])
        times.append(t)
        survival.append(alive.sum() / n_start)
    n_survive = int(alive.sum())
    flags = ()
    if n_survive == 0:
        rate = np.inf
        flags = ("no_survivors",)
    else:
        rate = -np.log(n_survive / n_start) / (spec.end - spec.start)
    return EscapeResult(float(rate), np.array(times), np.array(survival),
                        n_start, n_survive, flags,
                        meta={"seed": spec.seed, "n": spec.n, "step": spec.step})


def sample_transfer_matrix(field, eps, partition, s, t, points_per_box, step, seed=0):
    """Column-stochastic transfer matrix sampled by per-box test points.

    Every box seeds ``points_per_box`` uniform points at time ``s``; the
    entry ``(i, j)`` is the fraction of box ``j``'s points landing in box
    ``i`` at time ``t`` under Euler-Maruyama with the given step.
    """
    if t < s:
        raise ValueError("t must be >= s")
    n = partition.n_boxes
    npb = int(points_per_box)
    n_steps = int(round((t - s) / step))
    centroids = partition.centroids()
    widths = partition.widths
    # uniform points in every box from one counter-based draw
    u = _uniforms(seed, 0, (n, npb, partition.dim))
    x = (centroids[:, None, :] + (u - 0.5) * widths[None, None, :]).reshape(-1, partition.dim)
    tk = s
    for k in range(n_steps):
        noise = _normals(seed, k + 1, x.shape) if eps > 0 else None
        x = em_step(field, eps, x, tk, step, noise=noise)
        tk = s + (k + 1) * step
    landed = partition.locate(x)
    cols = np.repeat(np.arange(n), npb)
    # integer counts first so columns sum to exactly one after one division
    P = sp.csc_matrix((np.ones(x.shape[0]), (landed, cols)), shape=(n, n))
    P.sum_duplicates()
    P.data /= npb
    return TransferMatrix(P, partition, meta={
        "points_per_box": npb, "step": step, "s": s, "t": t, "seed": seed, "eps": eps,
    })
