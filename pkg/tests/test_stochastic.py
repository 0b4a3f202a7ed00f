import math

import numpy as np
import pytest

from augen import BoxPartition, em_step, rotating_interval, sample_transfer_matrix
from augen.fields import VectorField
from augen.stochastic import (
    EnsembleSpec,
    StepTooLargeError,
    _fold,
    escape_estimate,
    seed_uniform,
)


def still_field_1d(lo=0.0, hi=1.0, periodic=False):
    return VectorField(lambda t, p: np.zeros_like(p), [[lo, hi]], 1.0,
                       periodic=[periodic])


def test_em_step_no_motion():
    fld = still_field_1d()
    x = np.array([[0.25], [0.75]])
    out = em_step(fld, 0.0, x, 0.0, 0.1)
    np.testing.assert_array_equal(out, x)


def test_em_step_reflection_fold():
    fld = VectorField(lambda t, p: np.ones_like(p), [[0, 1]], 1.0)
    out = em_step(fld, 0.0, np.array([[0.9]]), 0.0, 0.2)
    assert out[0, 0] == pytest.approx(0.9)  # proposal 1.1 folds back to 0.9


def test_em_step_periodic_wrap():
    fld = VectorField(lambda t, p: np.ones_like(p), [[0, 1]], 1.0, periodic=[True])
    out = em_step(fld, 0.0, np.array([[0.9]]), 0.0, 0.2)
    assert out[0, 0] == pytest.approx(0.1)


def test_fold_moderate_excursion():
    y = _fold(np.array([2.3]), 0.0, 1.0)
    assert 0.0 <= y[0] <= 1.0
    assert y[0] == pytest.approx(0.3)  # 2.3 -> -0.3 -> 0.3


def test_fold_guard_raises():
    with pytest.raises(StepTooLargeError):
        _fold(np.array([1e9]), 0.0, 1.0, max_folds=100)


def test_brownian_variance_law():
    # away from boundaries the ensemble variance grows like eps^2 K h per axis
    fld = VectorField(lambda t, p: np.zeros_like(p), [[-50, 50], [-50, 50]], 1.0)
    eps, h, K, n = 0.1, 0.01, 100, 100_000
    x = np.zeros((n, 2))
    for k in range(K):
        x = em_step(fld, eps, x, k * h, h, seed=9, step_index=k)
    target = eps**2 * K * h
    for axis in range(2):
        assert x[:, axis].var() == pytest.approx(target, rel=0.05)


def test_escape_whole_domain_zero_rate():
    fld = rotating_interval()
    spec = EnsembleSpec(n=5000, seed=3, step=0.05, start=0.0, end=2.0)
    res = escape_estimate(fld, 0.05, lambda t, p: np.ones(p.shape[0], dtype=bool),
                          spec)
    assert res.rate == 0.0
    assert res.n_survive == res.n_start == 5000


def test_escape_zero_starters_rejected():
    fld = rotating_interval()
    spec = EnsembleSpec(n=100, seed=3, step=0.05, start=0.0, end=1.0)
    with pytest.raises(ValueError, match="start inside"):
        escape_estimate(fld, 0.05, lambda t, p: np.zeros(p.shape[0], dtype=bool), spec)


def test_escape_no_survivors_flagged():
    fld = rotating_interval()
    spec = EnsembleSpec(n=200, seed=3, step=0.05, start=0.0, end=1.0)

    def vanish(t, pts):
        return np.full(pts.shape[0], t == 0.0)

    res = escape_estimate(fld, 0.05, vanish, spec)
    assert math.isinf(res.rate)
    assert "no_survivors" in res.flags


def test_escape_reproducible():
    fld = rotating_interval()

    def band(t, pts):
        x = pts[:, 0]
        return (x >= 0.2) & (x <= 0.8)

    spec = EnsembleSpec(n=20_000, seed=77, step=0.02, start=0.0, end=3.0)
    a = escape_estimate(fld, 0.1, band, spec)
    b = escape_estimate(fld, 0.1, band, spec)
    assert a.rate == b.rate
    np.testing.assert_array_equal(a.survival, b.survival)


def test_escape_poincare_sampling_slower():
    # killing only at whole periods keeps more of the same realizations alive
    fld = rotating_interval()

    def band(t, pts):
        x = np.mod(pts[:, 0], 1.0)
        lo = 0.3 + 0.2 * math.sin(t)
        hi = 0.7 + 0.2 * math.sin(t)
        return (x >= lo) & (x <= hi)

    tau = fld.period

    def band_periodic(t, pts):
        k = round(t / tau)
        if abs(t - k * tau) < 1e-9:
            return band(t, pts)
        return np.ones(pts.shape[0], dtype=bool)

    spec = EnsembleSpec(n=30_000, seed=5, step=tau / 200, start=0.0, end=3 * tau)
    dense = escape_estimate(fld, 0.05, band, spec)
    sparse = escape_estimate(fld, 0.05, band_periodic, spec)
    assert sparse.rate <= dense.rate
    assert sparse.n_survive >= dense.n_survive


def test_transfer_matrix_identity_cases():
    fld = still_field_1d()
    part = BoxPartition.for_field(fld, (10,))
    P = sample_transfer_matrix(fld, 0.0, part, 0.0, 0.0, 50, 0.1, seed=1)
    np.testing.assert_array_equal(P.matrix.toarray(), np.eye(10))  # t == s
    P2 = sample_transfer_matrix(fld, 0.0, part, 0.0, 1.0, 50, 0.1, seed=1)
    np.testing.assert_array_equal(P2.matrix.toarray(), np.eye(10))  # no drift, no noise


def test_transfer_matrix_columns_stochastic():
    fld = rotating_interval()
    part = BoxPartition.for_field(fld, (25,))
    P = sample_transfer_matrix(fld, 0.1, part, 0.0, 2.0, 200, 0.05, seed=12)
    cols = np.asarray(P.matrix.sum(axis=0)).ravel()
    np.testing.assert_allclose(cols, 1.0, atol=1e-12)
    assert P.matrix.data.min() >= 0.0
    assert P.matrix.data.max() <= 1.0


def test_transfer_matrix_reproducible():
    fld = rotating_interval()
    part = BoxPartition.for_field(fld, (25,))
    P1 = sample_transfer_matrix(fld, 0.1, part, 0.0, 1.0, 100, 0.05, seed=3)
    P2 = sample_transfer_matrix(fld, 0.1, part, 0.0, 1.0, 100, 0.05, seed=3)
    assert (P1.matrix != P2.matrix).nnz == 0
    P3 = sample_transfer_matrix(fld, 0.1, part, 0.0, 1.0, 100, 0.05, seed=4)
    assert (P1.matrix != P3.matrix).nnz > 0


def test_seed_uniform_covers_domain():
    fld = VectorField(lambda t, p: np.zeros_like(p), [[0, 2], [0, 1]], 1.0)
    pts = seed_uniform(fld, 10_000, 9)
    assert pts.shape == (10_000, 2)
    assert pts[:, 0].min() >= 0 and pts[:, 0].max() <= 2
    assert abs(pts[:, 0].mean() - 1.0) < 0.02
    masked = seed_uniform(fld, 10_000, 9, mask=lambda p: p[:, 0] < 1.0)
    assert masked.shape[0] == pytest.approx(5000, abs=200)
    assert (masked[:, 0] < 1.0).all()


def test_ensemble_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(n=0, seed=1, step=0.1, start=0.0, end=1.0)
    with pytest.raises(ValueError):
        EnsembleSpec(n=10, seed=1, step=-0.1, start=0.0, end=1.0)
    with pytest.raises(ValueError):
        EnsembleSpec(n=10, seed=1, step=0.1, start=1.0, end=1.0)
