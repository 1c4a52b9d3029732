"""Named operations runnable from the command line.

Every operation takes a parameter dict (validated against its defaults) and
a seed and returns an :class:`OpResult` with invariants checked.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import convolve as cv
from . import gauge_geometry as gg
from . import gaussian_integrator as gi
from . import measure_lab as ml
from . import nuclearity as nu
from . import pu_testfn as pu
from . import scalar_qft as qft
from .errors import UsageError
from .records import Invariant, OpResult

MODULE_ALIASES = {
    "pu": "pu_testfn",
    "conv": "convolve",
    "measure": "measure_lab",
    "gauss": "gaussian_integrator",
    "qft": "scalar_qft",
    "gauge": "gauge_geometry",
    "nuclear": "nuclearity",
}

# topic labels for the report, keyed by module.op
TOPICS = {
    "pu_testfn": "partitions of unity and momentum test functions",
    "convolve": "convolution smoothing of distribution-valued fields",
    "measure_lab": "Hausdorff, Stieltjes and Gaussian measures",
    "gaussian_integrator": "Gaussian integrators and gauge-orbit factorisation",
    "scalar_qft": "free scalar field with dressed propagators",
    "gauge_geometry": "gauge algebra, projectors, Faddeev-Popov operator and Hopf maps",
    "nuclearity": "Hermite basis and nuclearity of translations",
}

REGISTRY: dict = {}


def op(module: str, op_name: str, **defaults):
    def deco(fn):
        REGISTRY.setdefault(module, {})[op_name] = (fn, defaults)
        return fn

    return deco


def resolve_module(name: str) -> str:
    mod = MODULE_ALIASES.get(name, name)
    if mod not in REGISTRY:
        raise UsageError(f"unknown module {name!r}; choose from {sorted(REGISTRY) + sorted(MODULE_ALIASES)}")
    return mod


def lookup(module: str, name: str):
    mod = resolve_module(module)
    if name not in REGISTRY[mod]:
        raise UsageError(f"unknown operation {name!r} for {mod}; choose from {sorted(REGISTRY[mod])}")
    return mod, REGISTRY[mod][name]


def bind(defaults: dict, params: dict) -> dict:
    unknown = sorted(set(params) - set(defaults))
    if unknown:
        raise UsageError(f"unknown parameters {unknown}; accepted: {sorted(defaults)}")
    out = dict(defaults)
    out.update(params)
    return out


def check(name, ok, detail="") -> Invariant:
    return Invariant(name, bool(ok), detail)


def _bump(p, key="testfn", dim=1):
    spec = p.get(key) or {}
    c = spec.get("center", [0.0] * dim)
    if spec.get("kind", "bump") == "gaussian":
        return pu.make_gaussian(c, spec.get("width", 1.0))
    f = pu.make_bump(c, spec.get("r", 0.3), spec.get("R", 1.0), spec.get("profile", "smooth_step"))
    return f.normalized() if spec.get("normalized", False) else f


# ---------------------------------------------------------------------------
# pu_testfn


@op("pu_testfn", "make_pu", cover=[[-0.1, 0.4], [0.3, 0.7], [0.6, 1.1]], domain=[0.0, 1.0], plateau_fraction=0.5,
    profile="smooth_step", points=1024)
def _make_pu(p, seed):
    P = pu.make_pu([tuple(c) for c in p["cover"]], tuple(p["domain"]), p["plateau_fraction"], p["profile"], p["points"])
    grid = pu.domain_grid(P.domain, p["points"])
    vals = P(grid)
    dev = float(np.max(np.abs(vals.sum(0) - 1.0)))
    bumps = np.stack([m.siblings[m.member_index](grid) for m in P.members])
    alone = (bumps > 0).sum(0) == 1
    plateau_ok = all(np.all(vals[j][alone & (bumps[j] > 0)] == 1.0) for j in range(len(P.members)))
    zero_ok = all(np.all(vals[j][bumps[j] == 0] == 0.0) for j in range(len(P.members)))
    cols = ["x"] + [f"f{j}" for j in range(len(P.members))] + ["sum"]
    rows = [[float(x)] + [float(v) for v in vals[:, i]] + [float(vals[:, i].sum())] for i, x in enumerate(grid)]
    return OpResult({"sum_deviation": dev, "members": len(P.members)},
                    [check("sum_equals_one", dev <= 1e-12, f"max deviation {dev:.3g}"),
                     check("plateau_values_exact", plateau_ok), check("zero_values_exact", zero_ok)],
                    (cols, rows), {"sum": 1e-12},
                    {"x": "x", "y": cols[1:], "title": "partition of unity", "xlabel": "x", "ylabel": "f_j"})


@op("pu_testfn", "fourier", width=0.7, center=0.3, momenta=[-4.0, -1.0, 0.0, 0.5, 2.0, 5.0])
def _fourier(p, seed):
    f = pu.make_gaussian([p["center"]], p["width"])
    k = np.asarray(p["momenta"], float)
    num = pu.fourier_transform(f, k, check_support=False).values
    exact = pu.gaussian_transform(f, k)
    dev = float(np.max(np.abs(num - exact)))
    rows = [[float(a), complex(b).real, complex(b).imag, complex(c).real, complex(c).imag] for a, b, c in zip(k, num, exact)]
    return OpResult({"deviation": dev}, [check("transform_matches_closed_form", dev < 1e-10, f"{dev:.3g}")],
                    (["p", "re", "im", "re_exact", "im_exact"], rows), {"transform": 1e-10})


@op("pu_testfn", "power_check", cover=[[-0.1, 0.4], [0.3, 0.7], [0.6, 1.1]], domain=[0.0, 1.0], n=3)
def _power(p, seed):
    P = pu.make_pu([tuple(c) for c in p["cover"]], tuple(p["domain"]))
    rep = pu.pu_power_check(P, int(p["n"]))
    return OpResult({"exact_points": rep.exact_points, "transition_points": rep.transition_points,
                     "max_transition_deviation": rep.max_transition_deviation},
                    [check("power_exact_outside_transition", rep.exact_equal_everywhere_outside_transition)])


# ---------------------------------------------------------------------------
# convolve


@op("convolve", "smooth_heaviside", r=0.3, R=1.0, half_width=3.0, points=201, refinements=3)
def _smooth_heaviside(p, seed):
    f = pu.make_bump((0.0,), p["r"], p["R"]).normalized()
    ax = np.linspace(-p["half_width"], p["half_width"], int(p["points"]))
    out = cv.convolve_flat(cv.heaviside_field(ax), f)
    rep = cv.smoothness_report(out, refinements=int(p["refinements"]))
    order = rep.convergence_order or math.nan
    rows = [[h, e] for h, e in zip(rep.refinement_spacings, rep.derivative_errors)]
    return OpResult({"route_deviation": out.route_deviation, "convergence_order": order,
                     "derivative_errors": rep.derivative_errors},
                    [check("derivative_order_2", abs(order - 2.0) <= 0.2, f"order {order:.3f}"),
                     check("route_agreement", out.route_deviation is not None and out.route_deviation < 1e-8,
                           f"{out.route_deviation}")],
                    (["h", "derivative_error"], rows), {"order": 0.2, "routes": 1e-8},
                    {"x": "h", "y": ["derivative_error"], "logx": True, "logy": True, "title": "smoothed step derivative"})


@op("convolve", "derivative_commutation", k=2.0, points=161, half_width=2.0)
def _commutation(p, seed):
    f = pu.make_bump((0.0,), 0.3, 1.0).normalized()
    ax = np.linspace(-p["half_width"], p["half_width"], int(p["points"]))
    rep = cv.derivative_commutation_check(cv.mode_field(ax, [(1.0, (p["k"],))]), f)
    h = ax[1] - ax[0]
    tol = 10 * h * h * p["k"] ** 3
    return OpResult({"pairwise": rep.pairwise, "max_deviation": rep.max_deviation},
                    [check("derivative_commutes", rep.max_deviation < tol, f"{rep.max_deviation:.3g} < {tol:.3g}")],
                    tolerances={"commutation": tol})


# ---------------------------------------------------------------------------
# measure_lab


@op("measure_lab", "hausdorff", boxes=[[[0.0, 0.0], [1.0, 1.0]]], exponent=2.0, metric="sup",
    eps=[0.25, 0.125, 0.0625, 0.03125], translation=[0.3, -0.7])
def _hausdorff(p, seed):
    E = ml.CoveredSet.from_boxes([(tuple(a), tuple(b)) for a, b in p["boxes"]])
    g = ml.MeasureGauge(p["exponent"], 1.0, p["metric"])
    est = ml.hausdorff_estimate(E, g, p["eps"])
    iso = ml.isometry_invariance_check(E, g, p["eps"], translation=p["translation"])
    rows = [[e, v] for e, v in zip(est.eps, est.estimates)]
    return OpResult({"limit": est.limit, "tolerance": est.tolerance, "translation_deviation": iso.deviation,
                     "translation_tolerance": iso.tolerance},
                    [check("unit_square_within_5pct", abs(est.limit - 1.0) <= 0.05, f"{est.limit:.6g}"),
                     check("translation_invariant", iso.deviation <= iso.tolerance,
                           f"{iso.deviation:.3g} <= {iso.tolerance:.3g}")],
                    (["eps", "estimate"], rows), {"relative": 0.05},
                    {"x": "eps", "y": ["estimate"], "logx": True, "title": "dyadic Hausdorff estimates"})


@op("measure_lab", "positivity", draws=100, max_m=8)
def _positivity(p, seed):
    rng = np.random.default_rng(seed)
    grid = np.linspace(-8, 8, 1601)
    worst = math.inf
    for _ in range(int(p["draws"])):
        m = int(rng.integers(1, int(p["max_m"]) + 1))
        fns = [pu.make_gaussian([rng.uniform(-2, 2)], rng.uniform(0.3, 1.5), rng.uniform(-1.5, 1.5)) for _ in range(m)]
        worst = min(worst, ml.bochner_minlos_positivity(fns, grid).min_eigenvalue)
    return OpResult({"min_eigenvalue": worst, "draws": int(p["draws"])},
                    [check("positive_semidefinite", worst >= -1e-10, f"{worst:.3g}")], tolerances={"eigenvalue": -1e-10})


@op("measure_lab", "laplace", density="exponential", params=[1.0], s=[0.5, 0.0])
def _laplace(p, seed):
    F = ml.StieltjesMeasure(p["density"], params=tuple(p["params"]))
    s = complex(*p["s"])
    r = ml.laplace_stieltjes(F, s)
    return OpResult({"value": r.value, "stieltjes": r.stieltjes, "relative_deviation": r.relative_deviation},
                    [check("routes_agree", r.relative_deviation < 1e-8, f"{r.relative_deviation:.3g}")],
                    tolerances={"relative": 1e-8})


# ---------------------------------------------------------------------------
# gaussian_integrator


def _spec(p):
    n = int(p["n"])
    Q = np.eye(n) if p.get("Q") is None else np.asarray(p["Q"], float)
    s = p.get("s", 1.0)
    s = complex(*s) if isinstance(s, list) else s
    return gi.GaussianSpec(n, Q, s)


@op("gaussian_integrator", "integrate", n=1, Q=None, s=1.0, xprime=None, powers=None, method="closed_form",
    samples=100000)
def _integrate(p, seed):
    spec = _spec(p)
    if p["powers"] is not None:
        F = gi.IntegrandFunctional("polynomial_times_gaussian", {"powers": p["powers"]})
        ref = complex(gi.integrate(spec, F).value)
    else:
        xp = np.zeros(spec.n) if p["xprime"] is None else np.asarray(p["xprime"], float)
        F = gi.gaussian_integrand(xp)
        ref = gi.defining_identity_value(spec, xp)
    r = gi.integrate(spec, F, p["method"], seed=seed, samples=int(p["samples"]))
    dev = abs(complex(r.value) - ref)
    if p["method"] == "monte_carlo":
        inv = check("monte_carlo_within_3_sigma", dev <= 3 * r.error_estimate, f"{dev:.3g} vs 3 sigma {3 * r.error_estimate:.3g}")
    else:
        inv = check("defining_identity", dev <= 1e-10, f"{dev:.3g}")
    return OpResult({**r.to_dict(), "reference": ref, "deviation": dev, "spec": spec.to_dict()}, [inv],
                    tolerances={"closed_form": 1e-10, "monte_carlo_sigma": 3})


@op("gaussian_integrator", "defining_identity", max_n_quadrature=4, max_n_monte_carlo=8, samples=100000)
def _defining_identity(p, seed):
    rng = np.random.default_rng(seed)
    rows, invs = [], []
    for n in range(1, int(p["max_n_monte_carlo"]) + 1):
        A = rng.normal(size=(n, n))
        spec = gi.GaussianSpec(n, A @ A.T / n + np.eye(n))
        xp = rng.normal(size=n) * 0.4
        F = gi.gaussian_integrand(xp)
        exact = gi.defining_identity_value(spec, xp)
        cf = complex(gi.integrate(spec, F).value)
        row = [n, exact.real, abs(cf - exact)]
        if n <= int(p["max_n_quadrature"]):
            q = complex(gi.integrate(spec, F, "quadrature").value)
            row.append(abs(q - cf))
            invs.append(check(f"quadrature_n{n}", abs(q - cf) < 1e-10, f"{abs(q - cf):.3g}"))
        else:
            row.append(math.nan)
        mc = gi.integrate(spec, F, "monte_carlo", seed=seed + n, samples=int(p["samples"]))
        z = abs(complex(mc.value) - cf) / mc.error_estimate
        row.append(z)
        invs.append(check(f"monte_carlo_n{n}", z <= 3.0, f"{z:.2f} sigma"))
        invs.append(check(f"closed_form_n{n}", abs(cf - exact) < 1e-10))
        rows.append(row)
    return OpResult({"rows": rows}, invs, (["n", "exact", "closed_form_dev", "quadrature_dev", "mc_sigma"], rows),
                    {"quadrature": 1e-10, "monte_carlo_sigma": 3})


@op("gaussian_integrator", "translation_invariance", n=2, shift=None)
def _translation(p, seed):
    n = int(p["n"])
    shift = np.random.default_rng(seed).normal(size=n) if p["shift"] is None else np.asarray(p["shift"], float)
    spec = gi.GaussianSpec(n, np.eye(n))
    r = gi.translation_invariance_check(spec, lambda x: np.exp(-math.pi * np.sum(x**2, axis=-1)), shift)
    return OpResult({**r, "shift": shift}, [check("translation_invariant", r["deviation"] < 1e-9, f"{r['deviation']:.3g}")],
                    tolerances={"deviation": 1e-9})


@op("gaussian_integrator", "change_of_variables", angle=0.4)
def _change(p, seed):
    spec = gi.GaussianSpec(2, np.eye(2))
    M, Mp = gi.rotation_shear_map(p["angle"])
    r = gi.change_of_variables_check(spec, M, Mp, lambda y: np.exp(-math.pi * np.sum(y**2, axis=-1)))
    return OpResult(r, [check("determinant_restores_equality", r["deviation"] < 1e-8, f"{r['deviation']:.3g}")],
                    tolerances={"deviation": 1e-8})


@op("gaussian_integrator", "fubini", size=20, density=0.4)
def _fubini(p, seed):
    rng = np.random.default_rng(seed)
    k = int(p["size"])
    mx = [Fraction(int(v), 7) for v in rng.integers(1, 50, size=k)]
    my = [Fraction(int(v), 11) for v in rng.integers(1, 50, size=k)]
    E = rng.random((k, k)) < p["density"]
    a, b, c = gi.fubini_check(mx, my, E)
    return OpResult({"m_E": a, "iterated_x": b, "iterated_y": c}, [check("three_orders_equal", a == b == c)])


@op("gaussian_integrator", "jtensor", n=4)
def _jtensor(p, seed):
    rng = np.random.default_rng(seed)
    n = int(p["n"])
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    Pp, Pm = gi.jtensor_projectors(gi.JTensor(n, np.eye(n) - 2 * np.outer(v, v)))
    res = {"idempotent_plus": float(np.max(np.abs(Pp @ Pp - Pp))), "idempotent_minus": float(np.max(np.abs(Pm @ Pm - Pm))),
           "annihilate": float(np.max(np.abs(Pp @ Pm))), "complete": float(np.max(np.abs(Pp + Pm - np.eye(n)))),
           "ranks": [int(round(np.trace(Pp))), int(round(np.trace(Pm)))]}
    worst = max(v for k, v in res.items() if k != "ranks")
    return OpResult(res, [check("projector_identities", worst < 1e-12, f"{worst:.3g}"),
                          check("ranks_sum_to_n", sum(res["ranks"]) == n)], tolerances={"identity": 1e-12})


@op("gaussian_integrator", "gauge_toy", n=1, action="quadratic", method="auto", samples=200000)
def _gauge_toy(p, seed):
    r = gi.gauge_toy_factorize(int(p["n"]), p["action"], seed=seed, method=p["method"], samples=int(p["samples"]))
    rec = {"Z_direct": r.Z_direct, "Z_factorized": r.Z_factorized, "Z_gaugefixed": r.Z_gaugefixed, "errors": r.errors,
           "method": r.method, "jacobian": r.jacobian}
    if r.method == "quadrature":
        d = max(abs(r.Z_direct - r.Z_factorized), abs(r.Z_direct - r.Z_gaugefixed), abs(r.Z_factorized - r.Z_gaugefixed))
        invs = [check("three_routes_within_1e-8", d < 1e-8, f"{d:.3g}")]
    else:
        z = abs(r.Z_direct - r.Z_factorized) / r.errors["direct"]
        d = abs(r.Z_factorized - r.Z_gaugefixed)
        invs = [check("direct_vs_factorized_3_sigma", z <= 3, f"{z:.2f} sigma"),
                check("factorized_vs_gaugefixed", d < 1e-8, f"{d:.3g}")]
    return OpResult(rec, invs, tolerances={"quadrature": 1e-8, "monte_carlo_sigma": 3})


@op("gaussian_integrator", "fp_measure_split", K=[[0.0], [1.0]], C=[[0.0, 1.0]], metric=None, G=None, normalized=False)
def _fp_split(p, seed):
    K = np.asarray(p["K"], float)
    N = K.shape[0]
    model = gg.FiniteGaugeModel(N, K, np.eye(N) if p["metric"] is None else np.asarray(p["metric"], float),
                                np.asarray(p["C"], float))
    r = gi.fp_measure_split(model, None if p["G"] is None else np.asarray(p["G"], float), normalized=p["normalized"])
    dev = abs(r.lhs - r.rhs) / abs(r.rhs)
    return OpResult(r.__dict__, [check("measure_split", dev < 1e-8, f"{dev:.3g}")], tolerances={"relative": 1e-8})


# ---------------------------------------------------------------------------
# scalar_qft


def _prop_spec(p):
    f = None if p.get("testfn") is False else _bump(p) if p.get("testfn") else pu.make_bump((0.0,), 1.0, 2.0)
    return qft.PropagatorSpec(p["mass"], p.get("epsilon", 0.0), f, p.get("signature", "euclidean"))


@op("scalar_qft", "dressed_propagator", p=[0.0, 0.0, 0.0, 0.0], mass=1.0, epsilon=0.0, signature="euclidean",
    testfn=None)
def _propagator(p, seed):
    spec = _prop_spec(p)
    v = qft.dressed_propagator(p["p"], spec)
    invs = []
    if spec.signature == "minkowski" and spec.epsilon > 0:
        invs.append(check("minus_i_epsilon_sign", complex(v).imag <= 0))
    return OpResult({"value": v, "spec": spec.to_dict()}, invs)


@op("scalar_qft", "generating_functional", mass=1.0, points=4001, testfn=None)
def _zj(p, seed):
    spec = _prop_spec(p)
    f = spec.testfn
    r = np.linspace(0, f.support_radius, int(p["points"]))
    Z = qft.generating_functional(qft.radial_source(f, r), spec)
    oracle = qft.log_z_oracle(f, spec)
    dev = abs(math.log(Z.real) - oracle)
    return OpResult({"Z": Z, "log_Z": math.log(Z.real), "oracle_log_Z": oracle, "deviation": dev},
                    [check("log_z_matches_radial_oracle", dev < 1e-8, f"{dev:.3g}"), check("Z_in_unit_interval", 0 < Z.real <= 1)],
                    tolerances={"log_Z": 1e-8})


@op("scalar_qft", "npoint", momenta=[[1.0, 0.2, 0.0, 0.0], [-1.0, -0.2, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0],
                                     [0.0, -1.0, 0.0, 0.0]], mass=1.0, testfn=None)
def _npoint(p, seed):
    spec = _prop_spec(p)
    ps = [np.asarray(q, float) for q in p["momenta"]]
    v = qft.npoint_function(ps, spec)
    # mode oracle: label each momentum by its +-class
    labels, reps = [], []
    for q in ps:
        for i, r in enumerate(reps):
            if np.allclose(q, r) or np.allclose(q, -r):
                labels.append(i)
                break
        else:
            reps.append(q)
            labels.append(len(reps) - 1)
    oracle = qft.mode_moment_oracle([qft.dressed_propagator(r, spec) for r in reps], labels)
    dev = abs(complex(v) - oracle)
    return OpResult({"value": v, "oracle": oracle, "deviation": dev},
                    [check("wick_matches_mode_oracle", dev < 1e-12 * max(1.0, abs(oracle)), f"{dev:.3g}")])


@op("scalar_qft", "klein_gordon", ks=[[0.3, 0.5, 0.2], [0.7, -0.1, 0.4]], mass=1.0, h=[0.1, 0.05, 0.025])
def _kg(p, seed):
    modes = qft.on_shell_modes(p["ks"], p["mass"])
    r = qft.klein_gordon_residual(modes, pu.make_bump((0.0,), 2.0, 4.0), p["h"], p["mass"])
    ok = all(abs(x - 4.0) <= 0.5 for x in r["ratios"])
    return OpResult(r, [check("ratio_4_under_halving", ok, f"ratios {r['ratios']}")],
                    (["h", "residual"], [[h, e] for h, e in zip(r["h"], r["residual"])]), {"ratio": 0.5},
                    {"x": "h", "y": ["residual"], "logx": True, "logy": True, "title": "Klein-Gordon residual"})


@op("scalar_qft", "oneloop_tadpole", mass=1.0, cutoffs=[4.0, 8.0, 16.0, 32.0], testfn=None)
def _tadpole(p, seed):
    spec = _prop_spec(p)
    r = qft.oneloop_tadpole(spec, p["cutoffs"])
    rows = [[c, d, u] for c, d, u in zip(r["cutoffs"], r["dressed"], r["undressed"])]
    return OpResult(r, [check("dressed_value_stable", r["verdict"] == "finite", f"spread {r['relative_spread']:.3g}"),
                        check("undressed_growth_exponent_2", abs(r["growth_exponent"] - 2.0) <= 0.1,
                              f"{r['growth_exponent']:.3f}")],
                    (["cutoff", "dressed", "undressed"], rows), {"stability": 1e-6, "exponent": 0.1},
                    {"x": "cutoff", "y": ["dressed", "undressed"], "logx": True, "logy": True, "title": "one-loop tadpole"})


# ---------------------------------------------------------------------------
# gauge_geometry


@op("gauge_geometry", "structure_constants", algebra="su2")
def _structure(p, seed):
    alg = gg.structure_constants(p["algebra"])
    res = {"antisymmetry": alg.antisymmetry_residual(), "jacobi": alg.jacobi_residual(),
           "commutator": alg.commutator_residual()}
    return OpResult({**alg.to_dict(), **res}, [check(k, v < 1e-12, f"{v:.3g}") for k, v in res.items()],
                    tolerances={"residual": 1e-12})


@op("gauge_geometry", "projectors", instances=100, N=5, g=2)
def _projectors(p, seed):
    rng = np.random.default_rng(seed)
    worst = {"u1_idempotent": 0.0, "u1_annihilates_p": 0.0, "u1_trace": 0.0, "split": 0.0, "trace_vertical": 0.0,
             "duality": 0.0}
    for _ in range(int(p["instances"])):
        q = rng.normal(size=4)
        P = gg.u1_transverse_projector(q).matrix
        worst["u1_idempotent"] = max(worst["u1_idempotent"], float(np.max(np.abs(P @ P - P))))
        worst["u1_annihilates_p"] = max(worst["u1_annihilates_p"], float(np.max(np.abs(q @ gg.u1_transverse_matrix(q, lower=True)))),
                                        float(np.max(np.abs(P @ q))))
        worst["u1_trace"] = max(worst["u1_trace"], abs(np.trace(P) - 3))
        A = rng.normal(size=(p["N"], p["N"]))
        model = gg.FiniteGaugeModel(p["N"], rng.normal(size=(p["N"], p["g"])), A @ A.T + p["N"] * np.eye(p["N"]))
        s = gg.split_residuals(model)
        worst["split"] = max(worst["split"], *(s[k] for k in ("horiz_vert", "sum", "horiz_K", "idem_h", "idem_v")))
        worst["trace_vertical"] = max(worst["trace_vertical"], abs(s["trace_v"] - p["g"]))
        worst["duality"] = max(worst["duality"], gg.one_form_duality_check(model).deviation)
    return OpResult(worst, [check(k, v < 1e-12, f"{v:.3g}") for k, v in worst.items()], tolerances={"identity": 1e-12})


@op("gauge_geometry", "gauge_transform", algebra="su2", epsilons=[0.1, 0.05, 0.025])
def _gauge_transform(p, seed):
    alg = gg.structure_constants(p["algebra"])
    r = gg.gauge_transform_order(alg, pu.make_bump((0.0,), 0.3, 1.0).normalized(), p["epsilons"], seed)
    ok = abs(r["order"] - 2.0) <= 0.3 if math.isfinite(r["order"]) else max(r["deviations"]) < 1e-12
    return OpResult(r, [check("agreement_order_2", ok, f"order {r['order']}")],
                    (["epsilon", "deviation"], [[e, d] for e, d in zip(r["epsilons"], r["deviations"])]), {"order": 0.3})


@op("gauge_geometry", "landau_dewitt", grids=[8, 16, 32], background=[0.3, 0.1])
def _landau_dewitt(p, seed):
    alg = gg.structure_constants("su2")
    rng = np.random.default_rng(seed)
    Abg = np.zeros((3, 2))
    Abg[2] = p["background"]
    modes = {(1, 0): rng.normal(size=(3, 2)), (0, 2): rng.normal(size=(3, 2)), (1, -1): rng.normal(size=(3, 2))}
    proj = gg.project_landau_dewitt(modes, Abg, alg)
    res = []
    for n in p["grids"]:
        h, A = gg.synthesize(proj, int(n), 2, alg)
        res.append(float(np.max(np.abs(gg.landau_dewitt_residual(A, Abg, alg, h)))))
    order = float(np.polyfit(np.log([2 * math.pi / n for n in p["grids"]]), np.log(res), 1)[0])
    var = max(gg.chi_squared_variation(rng.normal(size=3), rng.normal(size=3), alg) for _ in range(100))
    return OpResult({"residuals": res, "order": order, "chi2_variation": var},
                    [check("residual_order_2", abs(order - 2) <= 0.3, f"{order:.3f}"),
                     check("chi2_invariant", var < 1e-12, f"{var:.3g}")],
                    (["n", "residual"], [[n, r] for n, r in zip(p["grids"], res)]), {"order": 0.3, "variation": 1e-12})


@op("gauge_geometry", "faddeev_popov", n=8, background=[0.3, 0.1, 0.0, 0.2])
def _fp(p, seed):
    alg = gg.structure_constants("su2")
    Abg = np.zeros((3, 4))
    Abg[2] = p["background"]
    r = gg.faddeev_popov_Q(Abg, alg, int(p["n"]), 4)
    o = gg.lattice_fp_blocks(Abg, alg, int(p["n"]), 4)
    rel = float(np.max(np.abs(r.blocks - o)) / np.max(np.abs(o)))
    return OpResult({"log_abs_det": r.log_abs_det, "zero_mode_eigenvalues": r.zero_mode["eigenvalues"],
                     "doublers": len(r.doublers), "relative_deviation": rel},
                    [check("blocks_match_lattice_oracle", rel < 1e-6, f"{rel:.3g}")], tolerances={"relative": 1e-6})


@op("gauge_geometry", "hopf", points=1000, angles=12)
def _hopf(p, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(int(p["points"]), 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    norm_dev = float(np.max(np.abs(np.linalg.norm(gg.hopf_map(x), axis=1) - 1)))
    fib = gg.fibre_invariance(x, np.linspace(0, 2 * math.pi, int(p["angles"]), endpoint=False))
    w = gg.circle_hopf_winding()
    wt = gg.hopf_transition_winding()
    gram = float(np.max(np.abs(gg.frame_gram(x) - np.eye(4))))
    return OpResult({"norm_deviation": norm_dev, "fibre_deviation": fib, "circle_winding": w, "transition_winding": wt,
                     "frame_gram_deviation": gram},
                    [check("unit_norm", norm_dev < 1e-12, f"{norm_dev:.3g}"), check("fibre_invariance", fib < 1e-12, f"{fib:.3g}"),
                     check("circle_winding_one", round(w) == 1 and abs(w - 1) < 1e-9, f"{w}"),
                     check("frame_orthonormal", gram < 1e-12, f"{gram:.3g}")], tolerances={"identity": 1e-12})


@op("gauge_geometry", "vilkovisky", start=[1.0, 0.0], direction=[0.6, 0.8], steps=[0.02, 0.01, 0.005], T=1.0)
def _vilkovisky(p, seed):
    order, drifts = gg.drift_order(p["steps"], start=p["start"], direction=p["direction"], T=p["T"])
    radial = gg.vilkovisky_toy(start=p["start"], direction=[1.0, 0.0], step=1e-3, T=p["T"])
    vert = gg.vilkovisky_toy(start=[1.0, 0.0], direction=[0.0, 1.0], step=p["steps"][-1], T=p["T"])
    return OpResult({"order": order, "drifts": drifts, "radial_drift": radial.drift,
                     "vertical_radius_deviation": vert.radius_deviation},
                    [check("drift_order_2", abs(order - 2) <= 0.3, f"{order:.3f}"),
                     check("radial_start_stays_radial", radial.drift < 1e-8, f"{radial.drift:.3g}"),
                     check("vertical_start_stays_in_orbit", vert.radius_deviation < 10 * p["steps"][-1] ** 2,
                           f"{vert.radius_deviation:.3g}")],
                    (["step", "drift"], [[s, d] for s, d in zip(p["steps"], drifts)]), {"order": 0.3},
                    {"x": "step", "y": ["drift"], "logx": True, "logy": True, "title": "horizontality drift"})


# ---------------------------------------------------------------------------
# nuclearity


@op("nuclearity", "hermite_audit", max_order=10)
def _hermite(p, seed):
    a = nu.convention_audit(int(p["max_order"]))
    a.pop("paper_gram")
    return OpResult(a, [check("standard_orthonormal", a["standard_deviation"] < 1e-8, f"{a['standard_deviation']:.3g}")],
                    tolerances={"gram": 1e-8})


@op("nuclearity", "translation_matrix", xs=[-4.0, -1.5, 0.5, 1.0, 2.0, 4.0], N=32)
def _tmatrix(p, seed):
    dev = nu.route_agreement(p["xs"], int(p["N"]))
    t11 = max(abs(nu.translation_matrix(x, 1, 1) - math.exp(-x * x / 4)) for x in p["xs"])
    return OpResult({"route_deviation": dev, "tau11_deviation": t11},
                    [check("routes_agree", dev < 1e-9, f"{dev:.3g}"), check("tau11_closed_form", t11 < 1e-12)],
                    tolerances={"routes": 1e-9})


@op("nuclearity", "nuclearity_sum", xs=[0.5, 1.0, 2.0], N_schedule=[10, 20, 30, 40, 50])
def _nsum(p, seed):
    reps = [nu.nuclearity_sum(x, p["N_schedule"]) for x in p["xs"]]
    rows = [[N] + [r.partial_sums[i] for r in reps] for i, N in enumerate(reps[0].N_schedule)]
    invs = []
    for r in reps:
        invs.append(check(f"term_bound_x{r.x:g}", r.bound_holds, f"max {r.max_abs_term:.6g}"))
        invs.append(check(f"partial_sums_cauchy_x{r.x:g}", r.cauchy, f"final increment {r.final_increment:.3g}"))
    return OpResult({"reports": [r.to_dict() for r in reps]}, invs,
                    (["N"] + [f"S_x{x:g}" for x in p["xs"]], rows), {"cauchy": 1e-8},
                    {"x": "N", "y": [f"S_x{x:g}" for x in p["xs"]], "title": "partial sums of |tau_nn|"})


@op("nuclearity", "leakage", xs=[0.5, 1.0, 2.0], N=64)
def _leakage(p, seed):
    out = {}
    invs = []
    for x in p["xs"]:
        lk = nu.unitarity_leakage(x, int(p["N"]), 0.3, 0.8)
        inv = nu.inverse_check(x, int(p["N"]))
        out[f"x{x:g}"] = {**lk, "inverse_deviation": inv}
        invs.append(check(f"leakage_x{x:g}", lk["leakage"] < 1e-6 and lk["excess"] < 1e-12, f"{lk['leakage']:.3g}"))
        invs.append(check(f"inverse_x{x:g}", inv < 1e-6, f"{inv:.3g}"))
    return OpResult(out, invs, tolerances={"leakage": 1e-6})
