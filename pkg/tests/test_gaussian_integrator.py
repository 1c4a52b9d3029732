import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint

from opvd_lab import gauge_geometry as gg
from opvd_lab import gaussian_integrator as gi
from opvd_lab.errors import (DivergenceError, GaugeDegenerateError, PreconditionError, QuadratureError,
                             SingularMapError, UnsupportedError)


def spd(rng, n):
    A = rng.normal(size=(n, n))
    return A @ A.T / n + np.eye(n)


def test_one_dimensional_identity_against_scipy_quad():
    # int exp(-pi q x^2 / s - 2 pi i x' x) sqrt(q/s) dx = exp(-pi s x'^2 / q)
    q, s, xp = 1.7, 0.6, 0.35
    re = sint.quad(lambda x: math.cos(2 * math.pi * xp * x) * math.exp(-math.pi * q * x * x / s), -np.inf, np.inf)[0]
    oracle = math.sqrt(q / s) * re
    spec = gi.GaussianSpec(1, [[q]], s)
    F = gi.gaussian_integrand([xp])
    assert abs(gi.integrate(spec, F).value - oracle) < 1e-12
    assert abs(gi.integrate(spec, F, "quadrature").value - oracle) < 1e-12


def test_normalisation_is_unit_mass():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3):
        spec = gi.GaussianSpec(n, spd(rng, n), 0.8)
        r = gi.integrate(spec, gi.gaussian_integrand(n=n), "quadrature")
        assert abs(r.value - 1) < 1e-12


def test_wick_moments():
    C = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert gi.wick_moment(C, (4, 0)) == pytest.approx(3 * 4.0)
    assert gi.wick_moment(C, (2, 2)) == pytest.approx(2.0 * 1.0 + 2 * 0.25)
    assert gi.wick_moment(C, (1, 2)) == 0


def test_polynomial_closed_form_matches_quadrature():
    rng = np.random.default_rng(4)
    spec = gi.GaussianSpec(2, spd(rng, 2))
    F = gi.IntegrandFunctional("polynomial_times_gaussian", {"terms": [[1.0, [2, 0]], [0.5, [1, 3]], [2.0, [0, 0]]]})
    a = gi.integrate(spec, F).value
    b = gi.integrate(spec, F, "quadrature").value
    assert abs(a - b) < 1e-12


def test_monte_carlo_three_sigma_and_reproducible():
    rng = np.random.default_rng(5)
    spec = gi.GaussianSpec(5, spd(rng, 5))
    xp = rng.normal(size=5) * 0.3
    F = gi.gaussian_integrand(xp)
    r1 = gi.integrate(spec, F, "monte_carlo", seed=7, samples=50000)
    r2 = gi.integrate(spec, F, "monte_carlo", seed=7, samples=50000)
    assert r1.value == r2.value
    assert abs(r1.value - gi.defining_identity_value(spec, xp)) < 3 * r1.error_estimate


def test_monte_carlo_needs_seed():
    with pytest.raises(PreconditionError):
        gi.integrate(gi.GaussianSpec(1, [[1.0]]), gi.gaussian_integrand(n=1), "monte_carlo")


def test_oscillatory_boundary_closed_form_only():
    spec = gi.GaussianSpec(1, [[1.0]], 1j)
    v = gi.integrate(spec, gi.gaussian_integrand([0.5])).value
    assert abs(v - np.exp(-math.pi * 1j * 0.25)) < 1e-14
    with pytest.raises(UnsupportedError):
        gi.integrate(spec, gi.gaussian_integrand([0.5]), "quadrature")
    with pytest.raises(PreconditionError):
        gi.GaussianSpec(1, [[-1.0]], 1.0)


def test_nondecaying_integrand_is_rejected():
    spec = gi.GaussianSpec(1, [[1.0]])
    F = gi.IntegrandFunctional("exp_quadratic_linear", {"xprime": [0.0], "R": [[-2.0]]})
    with pytest.raises(DivergenceError):
        gi.integrate(spec, F)


def test_spec_roundtrip():
    spec = gi.GaussianSpec(2, [[2.0, 0.3], [0.3, 1.0]], 0.5)
    again = gi.GaussianSpec.from_dict(spec.to_dict())
    assert np.array_equal(again.Q, spec.Q) and again.s == spec.s


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_translation_invariance_property(a, b):
    spec = gi.GaussianSpec(2, np.eye(2))
    r = gi.translation_invariance_check(spec, lambda x: np.exp(-math.pi * np.sum(x**2, -1)), [a, b])
    assert r["deviation"] < 1e-9


def test_translation_of_nonintegrable_function():
    with pytest.raises(DivergenceError):
        gi.translation_invariance_check(gi.GaussianSpec(1, [[1.0]]), lambda x: np.ones(x.shape[:-1]), [0.5])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(-1.0, 1.0))
def test_linear_change_of_variables(scale, shear):
    spec = gi.GaussianSpec(2, np.eye(2))
    M, Mp = gi.linear_map([[scale, shear], [0.0, 1.0]])
    # the pulled-back integrand stretches by 1/scale along x1, so widen the box to match
    r = gi.change_of_variables_check(spec, M, Mp, lambda y: np.exp(-math.pi * np.sum(y**2, -1)),
                                     half_width=8.0 / min(scale, 1.0))
    assert r["deviation"] < 1e-8


def test_nonlinear_change_of_variables_and_singular_map():
    M, Mp = gi.rotation_shear_map()
    r = gi.change_of_variables_check(gi.GaussianSpec(2, np.eye(2)), M, Mp,
                                     lambda y: np.exp(-math.pi * np.sum(y**2, -1)))
    assert r["deviation"] < 1e-8
    M, Mp = gi.linear_map([[1.0, 2.0], [0.5, 1.0]])
    with pytest.raises(SingularMapError):
        gi.change_of_variables_check(gi.GaussianSpec(2, np.eye(2)), M, Mp, lambda y: np.exp(-np.sum(y**2, -1)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fubini_exact(seed):
    rng = np.random.default_rng(seed)
    mx = [Fraction(int(v), 3) for v in rng.integers(1, 9, 5)]
    my = [Fraction(int(v), 5) for v in rng.integers(1, 9, 4)]
    a, b, c = gi.fubini_check(mx, my, rng.random((5, 4)) < 0.5)
    assert a == b == c


def test_jtensor_rejects_non_involution():
    from opvd_lab.errors import InvalidTensorError

    with pytest.raises(InvalidTensorError):
        gi.JTensor(2, np.array([[1.0, 1.0], [1.0, 0.0]]))


def test_toy_quartic_against_dblquad():
    # Z = int int exp(-|x+y|^2 - |x-y|^2 - (x-y)^4) dx dy, n = 1
    oracle = sint.dblquad(lambda y, x: math.exp(-(x + y) ** 2 - (x - y) ** 2 - (x - y) ** 4), -8, 8, -8, 8,
                          epsabs=1e-13, epsrel=1e-13)[0]
    r = gi.gauge_toy_factorize(1, "quartic", method="quadrature")
    for z in (r.Z_direct, r.Z_factorized, r.Z_gaugefixed):
        assert abs(z - oracle) < 1e-8
    assert r.jacobian == 2.0


def test_toy_closed_forms():
    assert gi.gauge_toy_factorize(1, "zero", method="quadrature").Z_factorized == pytest.approx(math.pi / 2, abs=1e-12)
    # S = |z|^2: int exp(-4 z^2 - 4 z^2) = sqrt(pi/8); Z = 2 sqrt(pi/4) sqrt(pi/8)
    r = gi.gauge_toy_factorize(1, "quadratic", method="quadrature")
    assert r.Z_direct == pytest.approx(2 * math.sqrt(math.pi / 4) * math.sqrt(math.pi / 8), abs=1e-12)


def test_toy_monte_carlo_reproducible():
    a = gi.gauge_toy_factorize(2, "quartic", seed=3, method="monte_carlo", samples=20000)
    b = gi.gauge_toy_factorize(2, "quartic", seed=3, method="monte_carlo", samples=20000)
    assert a.Z_direct == b.Z_direct
    assert abs(a.Z_direct - a.Z_factorized) < 3 * a.errors["direct"]


def test_refine_reports_trace():
    with pytest.raises(QuadratureError) as exc:
        gi._refine(lambda m: float(m), [1, 2, 3], 1e-12, "diverging rule")
    assert len(exc.value.trace) == 3


def model(K, C):
    K = np.asarray(K, float)
    return gg.FiniteGaugeModel(K.shape[0], K, np.eye(K.shape[0]), np.asarray(C, float))


def test_fp_measure_split_planes():
    for K, C in (([[0.0], [1.0]], [[0.0, 1.0]]), ([[1.0], [1.0]], [[0.3, 1.0]]),
                 ([[1.0], [0.0], [1.0]], [[1.0, 0.2, 0.5]])):
        r = gi.fp_measure_split(model(K, C))
        assert abs(r.lhs - r.rhs) < 1e-8 * abs(r.rhs)
        n = gi.fp_measure_split(model(K, C), normalized=True)
        assert n.lhs == pytest.approx(1.0, abs=1e-8)


def test_fp_measure_split_degenerate_and_warning():
    with pytest.raises(GaugeDegenerateError):
        gi.fp_measure_split(model([[0.0], [1.0]], [[1.0, 0.0]]))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        gi.fp_measure_split(model([[0.0], [1.0]], [[1.0, 1e-4]]))
    assert any("tangent" in str(x.message) for x in w)
