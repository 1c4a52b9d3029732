"""Acceptance criteria at their stated tolerances and time budgets.

Each test records a PASS/FAIL line printed in the terminal summary.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from opvd_lab import cli, ops


def run(module, name, params=None, seed=0):
    fn, defaults = ops.REGISTRY[module][name]
    t = time.perf_counter()
    res = fn(ops.bind(defaults, params or {}), seed)
    return res, time.perf_counter() - t


def details(res):
    return "; ".join(f"{i.name}={'ok' if i.passed else 'FAIL'} {i.detail}".strip() for i in res.invariants)


def test_01_gaussian_defining_identity(criterion):
    res, dt = run("gaussian_integrator", "defining_identity", seed=11)
    ok = res.passed and dt < 30
    criterion("01 Gaussian defining identity", ok, f"{dt:.1f}s")
    assert ok, details(res)


def test_02_toy_factorization(criterion):
    q, t1 = run("gaussian_integrator", "gauge_toy", {"n": 1, "action": "quartic", "method": "quadrature"})
    q2, t2 = run("gaussian_integrator", "gauge_toy", {"n": 1, "action": "quadratic", "method": "quadrature"})
    mc, t3 = run("gaussian_integrator", "gauge_toy", {"n": 2, "action": "quartic", "method": "monte_carlo"}, seed=5)
    dt = t1 + t2 + t3
    ok = q.passed and q2.passed and mc.passed and dt < 60
    criterion("02 toy factorization", ok, f"{details(mc)}; {dt:.1f}s")
    assert ok, details(q) + details(mc)


def test_03_projector_suite(criterion):
    res, dt = run("gauge_geometry", "projectors", seed=3)
    ok = res.passed and dt < 5
    criterion("03 projector suite", ok, f"{dt:.2f}s")
    assert ok, details(res)


def test_04_partition_of_unity(criterion):
    res, dt = run("pu_testfn", "make_pu")
    ok = res.passed and dt < 5
    criterion("04 partition of unity", ok, f"{details(res)}; {dt:.2f}s")
    assert ok


def test_05_convolution_smoothing(criterion):
    res, dt = run("convolve", "smooth_heaviside")
    ok = res.passed and dt < 30
    criterion("05 convolution smoothing", ok, f"{details(res)}; {dt:.1f}s")
    assert ok


def test_06_klein_gordon(criterion):
    res, dt = run("scalar_qft", "klein_gordon")
    ok = res.passed and dt < 30
    criterion("06 Klein-Gordon residual", ok, f"{details(res)}; {dt:.2f}s")
    assert ok


def test_07_tadpole(criterion):
    res, dt = run("scalar_qft", "oneloop_tadpole")
    ok = res.passed and dt < 10
    criterion("07 one-loop tadpole", ok, f"{details(res)}; {dt:.2f}s")
    assert ok


def test_08_hausdorff(criterion):
    res, dt = run("measure_lab", "hausdorff")
    ok = res.passed and dt < 60
    criterion("08 Hausdorff estimator", ok, f"limit {res.record['limit']:.6g}; {dt:.2f}s")
    assert ok, details(res)


def test_09_positivity(criterion):
    res, dt = run("measure_lab", "positivity", seed=9)
    ok = res.passed and dt < 5
    criterion("09 Bochner-Minlos positivity", ok, f"{details(res)}; {dt:.2f}s")
    assert ok


def test_10_faddeev_popov(criterion):
    res, dt = run("gauge_geometry", "faddeev_popov")
    ok = res.passed and dt < 120
    criterion("10 Faddeev-Popov blocks", ok, f"{details(res)}; {dt:.2f}s")
    assert ok


def test_11_hopf(criterion):
    res, dt = run("gauge_geometry", "hopf", seed=1)
    ok = res.passed and dt < 5
    criterion("11 Hopf map", ok, f"{dt:.2f}s")
    assert ok, details(res)


def test_12a_nuclearity_bound_and_routes(criterion):
    s, t1 = run("nuclearity", "nuclearity_sum")
    r, t2 = run("nuclearity", "translation_matrix", {"N": 50})
    bounds = [i for i in s.invariants if i.name.startswith("term_bound")]
    ok = all(i.passed for i in bounds) and r.passed and t1 + t2 < 30
    criterion("12a nuclearity term bound and route agreement", ok, f"{details(r)}; {t1 + t2:.2f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason="tau_x is unitary, not trace class: sum |tau_nn| grows without bound")
def test_12b_nuclearity_cauchy(criterion):
    s, _ = run("nuclearity", "nuclearity_sum")
    cauchy = [i for i in s.invariants if i.name.startswith("partial_sums_cauchy")]
    ok = all(i.passed for i in cauchy)
    criterion("12b nuclearity partial sums Cauchy (expected to fail)", ok,
              "; ".join(i.detail for i in cauchy))
    assert ok


def test_13_vilkovisky(criterion):
    res, dt = run("gauge_geometry", "vilkovisky")
    ok = res.passed and dt < 10
    criterion("13 Vilkovisky drift order", ok, f"order {res.record['order']:.4f}; {dt:.2f}s")
    assert ok, details(res)


SEEDED = [("gaussian_integrator", "integrate", {"method": "monte_carlo", "n": 3}),
          ("gaussian_integrator", "gauge_toy", {"n": 2, "action": "quartic", "method": "monte_carlo",
                                                "samples": 20000}),
          ("measure_lab", "positivity", {"draws": 10}),
          ("gauge_geometry", "projectors", {"instances": 5}),
          ("scalar_qft", "oneloop_tadpole", {})]


def test_14_determinism(criterion, tmp_path):
    same = True
    for fmt in ("json", "csv"):
        for mod, name, params in SEEDED:
            a, pa = cli.run_op(mod, name, params, 42, tmp_path / "a", fmt)
            b, pb = cli.run_op(mod, name, params, 42, tmp_path / "b", fmt)
            same &= pa.read_bytes() == pb.read_bytes()
    for d in ("a", "b"):
        cli.report(tmp_path / d)
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    same &= all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)
    criterion("14 determinism", same, f"{len(names)} files compared")
    assert same
