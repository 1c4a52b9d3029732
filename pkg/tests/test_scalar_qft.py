import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from opvd_lab import pu_testfn as pu
from opvd_lab import scalar_qft as qft
from opvd_lab.errors import OffShellError, PoleError, PreconditionError, ResolutionError, UnsupportedError

BUMP = pu.make_bump((0.0,), 1.0, 2.0)


def test_log_z_massless_gaussian_closed_form():
    # J = f = exp(-p^2 / 2 w^2), m = 0: log Z = -1/2 * 2 pi^2 int r f^4 dr = -pi^2 w^2 / 4
    w = 0.8
    f = pu.make_gaussian([0.0], w)
    spec = qft.PropagatorSpec(0.0, 0.0, f)
    Z = qft.generating_functional(qft.radial_source(f, np.linspace(0, 12, 6001)), spec)
    assert math.log(Z.real) == pytest.approx(-math.pi**2 * w * w / 4, abs=1e-9)


def test_log_z_bump_radial_and_cartesian_routes():
    spec = qft.PropagatorSpec(1.0, 0.0, BUMP)
    oracle = qft.log_z_oracle(BUMP, spec)
    assert oracle == pytest.approx(-3.753043893889917, abs=1e-12)  # frozen adaptive quad value
    Z = qft.generating_functional(qft.radial_source(BUMP, np.linspace(0, 2, 4001)), spec)
    assert abs(math.log(Z.real) - oracle) < 1e-8
    ax = np.linspace(-2.1, 2.1, 43)
    P = np.stack(np.meshgrid(*[ax] * 4, indexing="ij"), -1)
    J = qft.radial_value(BUMP, np.linalg.norm(P, axis=-1))
    Zc = qft.generating_functional(qft.SourceConfig(J, axes=(ax,) * 4), spec)
    assert abs(math.log(Zc.real) - oracle) < 1e-5


def test_zero_source_and_unit_interval():
    spec = qft.PropagatorSpec(1.0, 0.0, BUMP)
    r = np.linspace(0, 2, 401)
    assert qft.generating_functional(qft.SourceConfig(np.zeros_like(r), r=r), spec) == 1
    Z = qft.generating_functional(qft.radial_source(lambda x: 0.3 * qft.radial_value(BUMP, x), r), spec)
    assert 0 < Z.real <= 1


def test_resolution_and_signature_errors():
    spec = qft.PropagatorSpec(1.0, 0.0, BUMP)
    with pytest.raises(ResolutionError):
        qft.generating_functional(qft.radial_source(BUMP, np.linspace(0, 2, 5)), spec)
    with pytest.raises(ResolutionError):
        qft.generating_functional(qft.radial_source(BUMP, np.linspace(0, 1.5, 401)), spec)
    mink = qft.PropagatorSpec(1.0, 0.1, BUMP, "minkowski")
    with pytest.raises(UnsupportedError):
        qft.generating_functional(qft.radial_source(BUMP, np.linspace(0, 2, 401)), mink)
    with pytest.raises(PreconditionError):
        qft.PropagatorSpec(1.0, 0.0, pu.make_bump((0.5,), 1.0, 2.0))


def test_propagator_values_and_poles():
    e = qft.PropagatorSpec(1.0)
    assert qft.dressed_propagator([1.0, 0, 0, 0], e) == pytest.approx(0.5)
    assert qft.dressed_propagator([3.0, 0, 0, 0], qft.PropagatorSpec(1.0, 0.0, BUMP)) == 0.0
    with pytest.raises(PoleError):
        qft.dressed_propagator(np.zeros(4), qft.PropagatorSpec(0.0))
    on_shell = [math.sqrt(1 + 0.25), 0.5, 0, 0]
    with pytest.raises(PoleError):
        qft.dressed_propagator(on_shell, qft.PropagatorSpec(1.0, 0.0, None, "minkowski"))
    v = qft.dressed_propagator(on_shell, qft.PropagatorSpec(1.0, 0.01, None, "minkowski"))
    assert v.imag < 0 and v == pytest.approx(1 / 0.01j)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 4, elements=st.floats(-3, 3)), st.floats(0.05, 1.0))
def test_minkowski_imaginary_part_sign(p, eps):
    spec = qft.PropagatorSpec(1.0, eps, None, "minkowski")
    assert qft.dressed_propagator(p, spec).imag <= 0


@settings(max_examples=50, deadline=None)
@given(arrays(float, 4, elements=st.floats(-3, 3)))
def test_euclidean_dressing_bounded_by_bare(p):
    bare = qft.dressed_propagator(p, qft.PropagatorSpec(1.0))
    dressed = qft.dressed_propagator(p, qft.PropagatorSpec(1.0, 0.0, BUMP))
    assert 0 <= dressed <= bare


def test_npoint_wick_and_mode_oracle():
    spec = qft.PropagatorSpec(1.0, 0.0, BUMP)
    p = np.array([0.5, 0.2, 0, 0])
    q = np.array([0, 0.7, 0.1, 0])
    D = lambda k: qft.dressed_propagator(k, spec)  # noqa: E731
    assert qft.npoint_function([p, -p], spec) == pytest.approx(D(p))
    assert qft.npoint_function([p, -p, q], spec) == 0
    assert qft.npoint_function([p, -p, q, -q], spec) == pytest.approx(D(p) * D(q))
    # four copies of one mode: 3 D^2
    assert qft.npoint_function([p, -p, p, -p], spec) == pytest.approx(3 * D(p) ** 2)
    assert qft.mode_moment_oracle([D(p)], [0, 0, 0, 0]) == pytest.approx(3 * D(p) ** 2)


def test_klein_gordon_order_two_and_off_shell():
    modes = qft.on_shell_modes([[0.3, 0.5, 0.2], [0.6, 0.8, 0.0]], 1.0)
    r = qft.klein_gordon_residual(modes, pu.make_bump((0.0,), 2.0, 4.0), [0.1, 0.05, 0.025], 1.0)
    assert all(abs(x - 4) < 0.5 for x in r["ratios"])
    bad = [{"k": [0.3, 0, 0], "omega": 2.0}]
    with pytest.raises(OffShellError):
        qft.klein_gordon_residual(bad, None, [0.1], 1.0)


def test_tadpole_dressed_stable_undressed_quadratic():
    r = qft.oneloop_tadpole(qft.PropagatorSpec(1.0, 0.0, BUMP))
    assert r["verdict"] == "finite" and r["relative_spread"] < 1e-6
    assert abs(r["growth_exponent"] - 2) < 0.1
    assert np.allclose(r["undressed"], r["undressed_closed_form"], rtol=1e-12)
    assert r["undressed_verdict"] == "divergent"
