import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint

from opvd_lab import nuclearity as nu
from opvd_lab.errors import IndexRangeError, NumericalInconsistencyError, PreconditionError


def test_standard_basis_orthonormal():
    assert nu.HermiteBasis(30).gram_deviation() < 1e-12
    assert nu.HermiteBasis(30).orthonormal


def test_printed_convention_is_not_orthonormal():
    # <e_n, e_n> for pi^{-1/4} (k!)^{-1/2} e^{-x^2/2} H_k(sqrt 2 x), checked by adaptive quad
    for n in (1, 2, 3, 4):
        oracle = sint.quad(lambda x: nu.hermite_eval(n, x, "paper") ** 2, -np.inf, np.inf)[0]
        assert nu.HermiteBasis(4, "paper").gram()[n - 1, n - 1] == pytest.approx(oracle, rel=1e-10)
    audit = nu.convention_audit(6)
    assert audit["paper_diagonal"][:4] == pytest.approx([1, 4, 18, 88], rel=1e-10)
    assert audit["selected"] == "standard"
    assert not nu.HermiteBasis(6, "paper").orthonormal


def test_index_range():
    with pytest.raises(IndexRangeError):
        nu.hermite_eval(0, 0.0)
    with pytest.raises(IndexRangeError):
        nu.hermite_eval(5, 0.0, max_order=4)
    with pytest.raises(PreconditionError):
        nu.translation_matrix(1.0, 1, 1, convention="paper")


def test_tau11_closed_form():
    for x in (-2.0, 0.3, 1.0, 4.0):
        assert nu.translation_matrix(x, 1, 1) == pytest.approx(math.exp(-x * x / 4), abs=1e-14)


@pytest.mark.parametrize("m,n", [(1, 2), (2, 1), (3, 3), (2, 5), (6, 4)])
def test_translation_matrix_against_adaptive_quad(m, n):
    x = 0.7
    oracle = sint.quad(lambda y: nu.hermite_eval(m, y) * nu.hermite_eval(n, y - x), -np.inf, np.inf,
                       epsabs=1e-14)[0]
    assert nu.translation_matrix(x, m, n) == pytest.approx(oracle, abs=1e-12)


def test_route_agreement():
    assert nu.route_agreement((-4, -1.5, 0.5, 2, 4), 32) < 1e-9


def test_route_disagreement_raises():
    with pytest.raises(NumericalInconsistencyError):
        nu.translation_matrix(1.0, 3, 2, tol=-1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.integers(1, 20), st.integers(1, 20))
def test_reflection_symmetry(x, m, n):
    assert nu.translation_matrix(x, m, n, route="closed_form") == pytest.approx(
        nu.translation_matrix(-x, n, m, route="closed_form"), abs=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 4))
def test_diagonal_bounded_by_one(x):
    d = nu.diagonal(x, 60)
    assert np.all(np.abs(d) < 1)
    assert np.allclose(d[:10], [nu.translation_matrix(x, k, k, route="closed_form") for k in range(1, 11)], atol=1e-13)


def test_nuclearity_partial_sums_grow():
    # tau_x is unitary: the diagonal does not decay fast enough to be summable
    for x in (0.5, 1.0, 2.0):
        r = nu.nuclearity_sum(x)
        assert r.bound_holds and not r.boundary_case
        assert not r.cauchy
        assert r.final_increment > 1.0
        assert r.partial_sums == sorted(r.partial_sums)
    assert nu.nuclearity_sum(0.0).boundary_case


@pytest.mark.parametrize("x", [0.5, 1.0, 2.0])
def test_unitarity_on_truncation(x):
    lk = nu.unitarity_leakage(x, 64, 0.3, 0.8)
    assert abs(lk["norm_v"] - 1) < 1e-12
    assert lk["leakage"] < 1e-6 and lk["excess"] < 1e-12
    assert nu.inverse_check(x, 64) < 1e-6


def test_inverse_truncation_leaks_at_large_shift():
    assert nu.inverse_check(4.0, 64) > 1e-3
