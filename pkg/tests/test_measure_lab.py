import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opvd_lab import measure_lab as ml
from opvd_lab import pu_testfn as pu
from opvd_lab.errors import AbsoluteContinuityError

EPS = [0.25, 0.125, 0.0625, 0.03125]


def test_unit_square_and_interval():
    sq = ml.CoveredSet.from_boxes([((0, 0), (1, 1))])
    est = ml.hausdorff_estimate(sq, ml.MeasureGauge(2.0), EPS)
    assert abs(est.limit - 1) < 0.05 and est.monotone
    seg = ml.CoveredSet.from_boxes([((0.0,), (0.75,))])
    assert ml.hausdorff_estimate(seg, ml.MeasureGauge(1.0), EPS).limit == pytest.approx(0.75, rel=0.05)


def test_euclidean_gauge_needs_coefficient():
    # sup-norm cells of side s have euclidean diameter s sqrt 2, so phi = r^2 / 2 recovers area
    sq = ml.CoveredSet.from_boxes([((0, 0), (1, 1))])
    est = ml.hausdorff_estimate(sq, ml.MeasureGauge(2.0, 0.5, "euclidean"), EPS)
    assert est.limit == pytest.approx(1.0, rel=0.05)


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_translation_invariance_property(a, b):
    E = ml.CoveredSet.from_boxes([((0, 0), (0.5, 1)), ((0.5, 0), (1, 0.5))])
    r = ml.isometry_invariance_check(E, ml.MeasureGauge(2.0), EPS, translation=[a, b])
    assert r.deviation <= r.tolerance


def test_bad_gauge_and_box():
    with pytest.raises(ValueError):
        ml.MeasureGauge(-1.0)
    with pytest.raises(ValueError):
        ml.CoveredSet.from_boxes([((0, 0), (0, 1))])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_bochner_minlos_positive_property(seed, m):
    rng = np.random.default_rng(seed)
    fns = [pu.make_gaussian([rng.uniform(-2, 2)], rng.uniform(0.3, 1.5), rng.uniform(-1.5, 1.5)) for _ in range(m)]
    r = ml.bochner_minlos_positivity(fns)
    assert r.symmetric and r.min_eigenvalue >= -1e-10
    assert np.allclose(np.diag(r.matrix), 1.0)


@pytest.mark.parametrize("density,params,s,exact", [
    ("exponential", (2.0,), 0.5, 2.0 / 2.5),
    ("exponential", (1.0,), 1j, 1 / (1 + 1j)),
    ("gaussian", (0.3, 0.5), 0.7, math.exp(-0.7 * 0.3 + 0.5 * 0.25 * 0.49)),
    ("laplace", (2.0,), 0.5, 4.0 / (4.0 - 0.25)),
    ("uniform", (0.0, 2.0), 1.0, (1 - math.exp(-2)) / 2),
])
def test_laplace_transform_closed_forms(density, params, s, exact):
    r = ml.laplace_stieltjes(ml.StieltjesMeasure(density, params=params), s)
    assert abs(r.value - exact) < 1e-9
    assert r.relative_deviation < 1e-8


def test_laplace_at_zero_is_mass():
    r = ml.laplace_stieltjes(ml.StieltjesMeasure("gaussian", params=(0.0, 1.0)), 0.0)
    assert r.value == pytest.approx(1.0, abs=1e-10)


def test_radon_nikodym_exact():
    mu = {"a": Fraction(1, 3), "b": Fraction(1, 6), "c": Fraction(1, 2)}
    nu = {"a": Fraction(1, 9), "b": Fraction(2, 3), "c": 0}
    r = ml.radon_nikodym_density(mu, nu)
    assert r.density == {"a": Fraction(1, 3), "b": Fraction(4), "c": Fraction(0)}
    assert r.subsets_checked == 8
    with pytest.raises(AbsoluteContinuityError):
        ml.radon_nikodym_density({"a": 1}, {"a": 1, "b": Fraction(1, 2)})


def test_dirac_limit_quadratic_probe():
    # E[(phi0 + sigma Z)^2] - phi0^2 = sigma^2 exactly
    r = ml.dirac_limit_check(0.7, [1.0, 0.5, 0.25, 0.125], lambda x: x**2)
    assert r.strictly_decreasing
    assert np.allclose(r.errors, [1.0, 0.25, 0.0625, 0.015625], rtol=1e-12)


def test_schwartz_distance_metric():
    f = pu.make_gaussian([0.0], 1.0)
    g = pu.make_gaussian([0.1], 1.0)
    assert ml.schwartz_distance(f, f) == 0
    d = ml.schwartz_distance(f, g)
    assert 0 < d < 2
    assert d == pytest.approx(ml.schwartz_distance(g, f))
