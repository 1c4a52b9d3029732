import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opvd_lab import convolve as cv
from opvd_lab import pu_testfn as pu
from opvd_lab.errors import ChartDomainError, DimensionMismatchError, IncompatibilityError, UnsupportedError

RHO = pu.make_bump((0.0,), 0.3, 1.0).normalized()
AX = np.linspace(-3, 3, 121)


def test_delta_gives_reflected_kernel():
    # (delta_a * rho)(x) = rho(a - x)
    out = cv.convolve_flat(cv.delta_field(AX, 0.4), RHO)
    assert np.max(np.abs(out.values - RHO(0.4 - AX))) < 1e-12


def test_constant_survives_normalised_kernel():
    out = cv.convolve_flat(cv.constant_field(AX, 2.5), RHO)
    assert np.max(np.abs(out.values - 2.5)) < 1e-8
    assert out.route_deviation is not None and out.route_deviation < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.floats(-4.0, 4.0))
def test_plane_wave_multiplied_by_transform(k):
    # int e^{iky} rho(y - x) dy = e^{ikx} rho~(-k)
    out = cv.convolve_flat(cv.mode_field(AX, [(1.0, (k,))]), RHO)
    expected = np.exp(1j * k * AX) * pu.fourier_transform(RHO, np.array([-k]), check_support=False).values[0]
    assert np.max(np.abs(out.values - expected)) < 1e-7


def test_heaviside_smoothing_order_two():
    out = cv.convolve_flat(cv.heaviside_field(np.linspace(-3, 3, 201)), RHO)
    assert out.route_deviation < 1e-8
    rep = cv.smoothness_report(out)
    assert abs(rep.convergence_order - 2) < 0.2
    assert not rep.unbounded


def test_raw_heaviside_reported_unbounded():
    rep = cv.smoothness_report(cv.heaviside_field(np.linspace(-3, 3, 201)))
    assert rep.unbounded


def test_derivative_commutation_delta():
    rep = cv.derivative_commutation_check(cv.delta_field(AX, 0.2), RHO)
    assert rep.method == "analytic" and rep.max_deviation < 1e-8


def test_derivative_commutation_modes_second_order():
    devs = []
    for n in (121, 241):
        ax = np.linspace(-3, 3, n)
        rep = cv.derivative_commutation_check(cv.mode_field(ax, [(1.0, (1.5,)), (0.5j, (-0.7,))]), RHO)
        assert rep.pairwise["conv(dphi)-conv(drho)"] < 1e-10
        devs.append(rep.max_deviation)
    assert 3.5 < devs[0] / devs[1] < 4.5


def test_dimension_and_chart_errors():
    with pytest.raises(DimensionMismatchError):
        cv.convolve_flat(cv.delta_field(AX), pu.make_bump((0.0, 0.0), 0.3, 1.0))
    circ = cv.regular_field(np.linspace(0, 2 * math.pi, 64, endpoint=False), np.cos, chart=cv.Chart("circle", 1))
    with pytest.raises(UnsupportedError):
        cv.convolve_flat(circ, RHO)


def test_killing_flow_full_turn_and_isometry():
    flow = cv.KillingFlow("plane_rotation")
    pts = np.array([[1.0, 0.0], [0.3, -0.7], [-2.0, 0.5]])
    assert np.max(np.abs(flow(pts, 2 * math.pi) - pts)) < 1e-10
    assert cv.metric_distortion(flow, cv.Chart("flat", 2), pts, 1.3) < 1e-10


def circle_atlas(lo, hi, margin):
    patch = cv.ChartPatch(cv.Chart("circle", 1), (lo,), (hi,), (cv.interval_localizer(lo, hi, margin),))
    return cv.ChartAtlas((patch,))


def test_local_convolution_on_circle():
    grid = np.linspace(0, 2 * math.pi, 1024, endpoint=False)
    field = cv.regular_field(grid, lambda y: np.ones_like(y), chart=cv.Chart("circle", 1))
    f = pu.make_bump((0.0,), 0.1, 0.3).normalized()
    atlas = circle_atlas(-0.5, 3.5, 0.25)
    v = cv.convolve_local(field, atlas, f, cv.KillingFlow(), 1.5, t=0.4, chart_index=0)
    assert abs(v - 1) < 1e-6
    other = circle_atlas(-0.6, 3.7, 0.3)
    assert cv.localizer_independence_check(field, atlas, other, f, 1.5).deviation < 1e-12
    with pytest.raises(ChartDomainError):
        cv.convolve_local(field, atlas, f, None, 3.4, chart_index=0)


def test_recollect_agreement_and_mismatch():
    a = cv.sampled_field(np.arange(0, 11) * 0.1, np.arange(0, 11) * 0.1)
    b = cv.sampled_field(np.arange(8, 20) * 0.1, np.arange(8, 20) * 0.1)
    glued = cv.recollect([a, b])
    assert glued.values.size == 20
    c = cv.sampled_field(np.arange(8, 20) * 0.1, np.arange(8, 20) * 0.1 + 1.0)
    with pytest.raises(IncompatibilityError):
        cv.recollect([a, c])
