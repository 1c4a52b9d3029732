import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from opvd_lab import gauge_geometry as gg
from opvd_lab import pu_testfn as pu
from opvd_lab.errors import NormalizationError, SingularMomentumError, UnsupportedAlgebraError

finite = st.floats(-3, 3, allow_nan=False)


def test_structure_constant_values():
    su2 = gg.structure_constants("su2")
    assert su2.structure_constants[0, 1, 2] == pytest.approx(1.0, abs=1e-15)
    su3 = gg.structure_constants("su3")
    f = su3.structure_constants
    assert f[0, 1, 2] == pytest.approx(1.0, abs=1e-15)
    assert f[3, 4, 7] == pytest.approx(math.sqrt(3) / 2, abs=1e-15)
    assert f[0, 3, 6] == pytest.approx(0.5, abs=1e-15)
    assert np.all(gg.structure_constants("u1").structure_constants == 0)
    with pytest.raises(UnsupportedAlgebraError):
        gg.structure_constants("so5")


@pytest.mark.parametrize("name", ["u1", "su2", "su3"])
def test_algebra_residuals(name):
    alg = gg.structure_constants(name)
    assert alg.antisymmetry_residual() < 1e-14
    assert alg.jacobi_residual() < 1e-14
    assert alg.commutator_residual() < 1e-14


def test_u1_projector_on_constant_covector():
    P = gg.u1_transverse_matrix([1.0, 0, 0, 0])
    assert np.allclose(P @ np.ones(4), [0, 1, 1, 1], atol=1e-15)
    with pytest.raises(SingularMomentumError):
        gg.u1_transverse_matrix(np.zeros(4))
    with pytest.raises(SingularMomentumError):
        gg.u1_transverse_matrix([1.0, 1.0, 0, 0], "minkowski")


@settings(max_examples=50, deadline=None)
@given(arrays(float, 4, elements=finite).filter(lambda p: np.linalg.norm(p) > 0.1))
def test_u1_projector_properties(p):
    P = gg.u1_transverse_projector(p)
    assert P.idempotence_residual() < 1e-12
    assert np.max(np.abs(P.at() @ p)) < 1e-12
    assert abs(np.trace(P.at()) - 3) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_split_and_duality_properties(seed, N):
    rng = np.random.default_rng(seed)
    g = int(rng.integers(1, N))
    A = rng.normal(size=(N, N))
    model = gg.FiniteGaugeModel(N, rng.normal(size=(N, g)), A @ A.T + N * np.eye(N))
    r = gg.split_residuals(model)
    for key in ("horiz_vert", "sum", "horiz_K", "idem_h", "idem_v"):
        assert r[key] < 1e-10, key
    assert abs(r["trace_v"] - g) < 1e-10
    d = gg.one_form_duality_check(model)
    assert d.deviation < 1e-10 and d.projector_idempotence < 1e-10


def test_gauge_transform_order_two_for_su2_exact_for_u1():
    f = pu.make_bump((0.0,), 0.3, 1.0).normalized()
    r = gg.gauge_transform_order(gg.structure_constants("su2"), f)
    assert abs(r["order"] - 2) < 0.3
    r = gg.gauge_transform_order(gg.structure_constants("u1"), f)
    assert max(r["deviations"]) < 1e-12


def test_gauge_transform_finite_difference_derivative():
    alg = gg.structure_constants("su2")
    f = pu.make_bump((0.0,), 0.3, 1.0).normalized()
    a0 = np.array([0.2, -0.1, 0.4])
    vk = np.array([0.05, 0.02, -0.03])
    A = lambda y: a0[:, None, None] * np.ones_like(y)  # noqa: E731
    v = lambda y: vk[:, None, None] * np.sin(y)  # noqa: E731
    x = np.linspace(-1, 1, 5)
    exact = gg.gauge_transform_convoluted(A, v, f, x, alg, dv=lambda y: vk[:, None, None] * np.cos(y))
    approx = gg.gauge_transform_convoluted(A, v, f, x, alg)
    assert np.max(np.abs(exact.transformed - approx.transformed)) < 1e-8


def test_landau_dewitt_projection_order_two():
    alg = gg.structure_constants("su2")
    rng = np.random.default_rng(2)
    Abg = np.zeros((3, 2))
    Abg[2] = [0.3, 0.1]
    proj = gg.project_landau_dewitt({(1, 0): rng.normal(size=(3, 2)), (0, 1): rng.normal(size=(3, 2))}, Abg, alg)
    res = []
    for n in (16, 32):
        h, A = gg.synthesize(proj, n, 2, alg)
        res.append(np.max(np.abs(gg.landau_dewitt_residual(A, Abg, alg, h))))
    assert 3.5 < res[0] / res[1] < 4.5


def test_chi_squared_gauge_invariant():
    alg = gg.structure_constants("su2")
    rng = np.random.default_rng(0)
    assert gg.chi_squared_variation(rng.normal(size=3), rng.normal(size=3), alg) < 1e-12


def test_fp_blocks_against_lattice_oracle_and_doublers():
    alg = gg.structure_constants("su2")
    Abg = np.zeros((3, 4))
    Abg[2] = [0.3, 0.1, 0.0, 0.2]
    r = gg.faddeev_popov_Q(Abg, alg, 4, 4)
    o = gg.lattice_fp_blocks(Abg, alg, 4, 4)
    assert np.max(np.abs(r.blocks - o)) < 1e-12 * np.max(np.abs(o))
    # on an n = 4 torus every component in {0, 2} has sin(k h) = 0
    assert len(r.doublers) == 2**4 - 1
    assert r.zero_mode["k"] == [0, 0, 0, 0]


def test_fp_zero_background_is_laplacian():
    alg = gg.structure_constants("su2")
    r = gg.faddeev_popov_Q(np.zeros((3, 4)), alg, 4, 4, symbol="continuum")
    k2 = np.sum(r.momenta.astype(float) ** 2, axis=1)
    assert np.allclose(r.blocks[:, 0, 0].real, k2)


def unit4(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


vec4 = arrays(float, 4, elements=finite).filter(lambda v: np.linalg.norm(v) > 0.1)


@settings(max_examples=60, deadline=None)
@given(vec4, st.floats(0, 2 * math.pi))
def test_hopf_properties(v, theta):
    x = unit4(v)
    assert abs(np.linalg.norm(gg.hopf_map(x)) - 1) < 1e-12
    assert np.max(np.abs(gg.hopf_map(gg.fibre_rotate(x, theta), check=False) - gg.hopf_map(x))) < 1e-12
    assert np.max(np.abs(gg.frame_gram(x) - np.eye(4))) < 1e-12


def test_hopf_rejects_non_unit():
    with pytest.raises(NormalizationError):
        gg.hopf_map([1.0, 1.0, 0, 0])


def test_windings():
    assert gg.circle_hopf_winding() == pytest.approx(1.0, abs=1e-12)
    assert abs(abs(gg.hopf_transition_winding()) - 1) < 1e-12


def test_vilkovisky_planar_model():
    model = gg.planar_rotation_model()
    assert gg.abelian_covariant_constancy(model, [0.7, -0.4]) < 1e-8
    slope, drifts = gg.drift_order()
    assert abs(slope - 2) < 0.3
    assert gg.vilkovisky_toy(direction=(1.0, 0.0), step=1e-3).drift < 1e-10
    rk4 = gg.vilkovisky_toy(step=0.01, scheme="rk4")
    assert rk4.drift < gg.vilkovisky_toy(step=0.01).drift
