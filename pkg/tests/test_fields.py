import math

import numpy as np
import pytest

from augen import bickley_jet, double_gyre, make_field, rotating_interval
from augen.fields import VectorField, finite_difference_divergence

ALL_BUILTINS = [double_gyre, bickley_jet, rotating_interval]


def test_double_gyre_interface_point():
    # at the unperturbed interface x=1, t=0: horizontal velocity vanishes and
    # the flow is purely vertical with speed pi*A
    fld = double_gyre()
    v = fld.evaluate(0.0, np.array([1.0, 0.5]))
    assert abs(v[0]) < 1e-12
    assert v[1] == pytest.approx(-math.pi * 0.25, abs=1e-12)


def test_double_gyre_period():
    assert double_gyre(omega=2 * math.pi).period == pytest.approx(1.0)


def test_double_gyre_divergence_free_pointwise():
    fld = double_gyre()
    div = finite_difference_divergence(fld, 0.3, np.array([0.7, 0.2]))
    speed = np.linalg.norm(fld.evaluate(0.3, np.array([0.7, 0.2])))
    assert abs(div) <= 1e-6 * (1.0 + speed)


def test_double_gyre_rejects_bad_omega():
    with pytest.raises(ValueError):
        double_gyre(omega=0.0)
    with pytest.raises(ValueError):
        double_gyre(omega=-1.0)


def test_bickley_period_and_defaults():
    fld = bickley_jet()
    assert fld.period == 9.0
    # displayed phase-speed ratios from the exact periodic choice
    assert fld.params["c2"] / fld.params["u0"] == pytest.approx(0.2054, abs=5e-5)
    assert fld.params["c3"] / fld.params["u0"] == pytest.approx(0.4108, abs=5e-5)


def test_bickley_jet_core_speed():
    # tanh(0) = 0 kills the wave contribution to u; sech(0) = 1 leaves U0
    fld = bickley_jet()
    for t in (0.0, 2.7, 5.3):
        v = fld.evaluate(t, np.array([[1.0, 0.0], [7.0, 0.0]]))
        np.testing.assert_allclose(v[:, 0], 5.4138, rtol=1e-12)


def test_bickley_rejects_bad_radius():
    with pytest.raises(ValueError):
        bickley_jet(r_e=0.0)


def test_bickley_x_wrap():
    fld = bickley_jet()
    width = fld.hi[0] - fld.lo[0]
    x = np.array([[1.2, 0.7]])
    np.testing.assert_allclose(fld.evaluate(0.4, x), fld.evaluate(0.4, x + [[width, 0]]))


def test_rotating_interval_values():
    fld = rotating_interval()
    assert fld.evaluate(0.0, np.array([0.5]))[0] == pytest.approx(0.3)
    for x in (0.0, 0.3, 0.9):
        assert abs(fld.evaluate(math.pi / 2, np.array([x]))[0]) < 1e-12
        assert fld.evaluate(2 * math.pi, np.array([x]))[0] == pytest.approx(
            fld.evaluate(0.0, np.array([x]))[0])


@pytest.mark.parametrize("factory", ALL_BUILTINS)
def test_builtin_time_periodicity(factory):
    fld = factory()
    rng = np.random.default_rng(42)
    pts = fld.lo + rng.random((100, fld.dim)) * (fld.hi - fld.lo)
    ts = rng.random(100) * 3 * fld.period
    for t, x in zip(ts, pts):
        v0 = fld.evaluate(t, x)
        v1 = fld.evaluate(t + fld.period, x)
        assert np.all(np.abs(v1 - v0) <= 1e-12 * (1.0 + np.abs(v0)))


@pytest.mark.parametrize("factory", ALL_BUILTINS)
def test_builtin_divergence_free(factory):
    fld = factory()
    if fld.dim == 1:
        pytest.skip("1-D drift is spatially constant; divergence is trivially zero")
    rng = np.random.default_rng(7)
    # keep a margin from non-periodic boundaries for the central differences
    span = fld.hi - fld.lo
    pts = fld.lo + (0.05 + 0.9 * rng.random((50, fld.dim))) * span
    ts = rng.random(50) * fld.period
    for t, x in zip(ts, pts):
        div = finite_difference_divergence(fld, t, x)
        speed = np.linalg.norm(fld.evaluate(t, x))
        assert abs(div) <= 1e-6 * (1.0 + speed)


def test_make_field_unknown_name():
    with pytest.raises(ValueError, match="unknown field"):
        make_field("vortex_soup")


def test_custom_field_shape_check():
    fld = VectorField(lambda t, p: p[:, :1], [[0, 1], [0, 1]], 1.0)
    with pytest.raises(ValueError, match="returned shape"):
        fld.evaluate(0.0, np.array([0.5, 0.5]))


def test_wrap_only_periodic_axes():
    fld = VectorField(lambda t, p: np.zeros_like(p), [[0, 1], [0, 1]], 1.0,
                      periodic=[True, False])
    wrapped = fld.wrap(np.array([[1.25, 0.75]]))
    np.testing.assert_allclose(wrapped, [[0.25, 0.75]])
