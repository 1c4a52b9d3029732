import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate as sint

from opvd_lab import gauge_geometry as gg
from opvd_lab import pu_testfn as pu
from opvd_lab.errors import DimensionMismatchError, InvalidGeometryError, ResolutionError, UncoveredPointError


@pytest.mark.parametrize("profile", pu.PROFILES)
def test_bump_plateau_support_and_integral(profile):
    f = pu.make_bump((0.2,), 0.3, 1.0, profile)
    assert f(np.array([0.2, 0.45])).tolist() == [1.0, 1.0]
    assert f(np.array([1.2, -0.8, 5.0])).tolist() == [0.0, 0.0, 0.0]
    oracle = sint.quad(lambda x: float(f(np.array([x]))[0]), -0.8, 1.2, points=[-0.1, 0.5], epsabs=1e-14)[0]
    assert f.integral() == pytest.approx(oracle, abs=1e-11)
    assert f.normalized().integral() == pytest.approx(1.0, abs=1e-12)


def test_bump_derivative_matches_finite_difference():
    f = pu.make_bump((0.0,), 0.3, 1.0)
    x = np.linspace(-0.95, 0.95, 41)
    h = 1e-6
    fd = (f(x + h) - f(x - h)) / (2 * h)
    assert np.max(np.abs(np.asarray(f.derivative(x)).reshape(-1) - fd)) < 1e-6


def test_invalid_geometry_and_dimension():
    with pytest.raises(InvalidGeometryError):
        pu.make_bump((0.0,), 1.0, 0.5)
    with pytest.raises(InvalidGeometryError):
        pu.make_gaussian((0.0,), -1.0)
    with pytest.raises(DimensionMismatchError):
        pu.make_bump((0.0, 0.0), 0.3, 1.0)(np.zeros((3, 3)))


def test_roundtrip_dict():
    f = pu.make_bump((0.1, -0.2), 0.3, 0.9, "exp_bump")
    g = pu.TestFunction.from_dict(f.to_dict())
    x = np.random.default_rng(0).uniform(-1, 1, size=(20, 2))
    assert np.array_equal(f(x), g(x))


covers = st.lists(st.tuples(st.floats(-0.2, 1.0), st.floats(0.15, 0.5)), min_size=2, max_size=6)


@settings(max_examples=40, deadline=None)
@given(covers, st.floats(0.2, 0.8))
def test_pu_sums_to_one_property(cover, frac):
    intervals = [(c - w, c + w) for c, w in cover]
    try:
        P = pu.make_pu(intervals, (0.0, 1.0), frac)
    except UncoveredPointError:
        assume(False)
    assert pu.pu_sum_deviation(P) <= 1e-12
    grid = pu.domain_grid(P.domain, 512)
    vals = P(grid)
    assert np.all(vals >= 0) and np.all(vals <= 1)


def test_uncovered_gap_is_reported():
    with pytest.raises(UncoveredPointError):
        pu.make_pu([(-0.1, 0.4), (0.6, 1.1)], (0.0, 1.0))


def test_two_dimensional_pu():
    P = pu.make_pu([((0.0, 0.0), 0.8), ((0.6, 0.6), 0.8), ((0.0, 0.6), 0.8), ((0.6, 0.0), 0.8)],
                   ((0.0, 0.0), (0.6, 0.6)), points_per_axis=32)
    assert pu.pu_sum_deviation(P) <= 1e-12


def test_power_check_exact_outside_transition():
    P = pu.make_pu([(-0.1, 0.4), (0.3, 0.7), (0.6, 1.1)], (0.0, 1.0))
    r = pu.pu_power_check(P, 3, {"member": 0, "support": [0.0, 0.05], "amplitudes": [1.0, 2.0j]})
    assert r.exact_equal_everywhere_outside_transition and r.transition_points > 0
    assert all(m["fn_below_f"] for m in r.per_member)
    assert r.spectral_support_in_plateau and r.dressing_deviation == 0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 2.0), st.floats(-1.0, 1.0), st.sampled_from(["angular", "symmetric"]))
def test_gaussian_transform_property(w, c, conv):
    f = pu.make_gaussian((c,), w)
    p = np.linspace(-2, 2, 9)
    num = pu.fourier_transform(f, p, conv, check_support=False).values
    assert np.max(np.abs(num - pu.gaussian_transform(f, p, conv))) < 1e-10


def test_radial_transform_in_four_dimensions():
    # 4-d gaussian: transform (2 pi w^2)^2 exp(-w^2 k^2 / 2) at unit amplitude
    f = pu.make_gaussian((0.0,) * 4, 0.7)
    k = np.array([[0.0, 0, 0, 0], [1.0, 0, 0, 0], [0.5, 0.5, 0.5, 0.5]])
    num = pu.fourier_transform(f, k).values
    assert np.allclose(num, pu.gaussian_transform(f, k), atol=1e-10)


def test_transform_resolution_error():
    f = pu.make_bump((0.0,), 0.3, 1.0)
    with pytest.raises(ResolutionError):
        pu.fourier_transform(f, np.linspace(-50, 50, 11))


def test_decay_seminorms_finite():
    f = pu.make_bump((0.0,), 0.3, 1.0)
    t = pu.decay_seminorms(f, np.linspace(-1.5, 1.5, 3001), 3)
    assert np.all(np.isfinite(t)) and t[0, 0] == 1.0


def test_horizontal_projection_idempotent():
    base = pu.make_bump((0.0,) * 4, 0.5, 2.0)
    tf = pu.tensor_test_function(base, [1.0, 1.0, 1.0, 1.0])
    P = gg.u1_projector_family()
    once = pu.horizontal_project(tf, P)
    twice = pu.horizontal_project(once, P)
    p = np.array([[0.3, 0.2, -0.1, 0.4], [0.4, 0.0, 0.0, 0.0]])  # second point on the plateau
    assert np.allclose(once(p), twice(p), atol=1e-14)
    assert np.allclose(once(p)[1], [0, 1, 1, 1])
    assert abs(once(p)[0] @ p[0]) < 1e-14
