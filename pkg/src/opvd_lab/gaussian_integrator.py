"""Finite-dimensional Gaussian integrators and the gauge-orbit toy.

The volume element is D(x) = det(Q/s)^{1/2} dx, which makes

    int exp(-(pi/s) Q(x) - 2 pi i <x', x>) D(x) = exp(-pi s W(x'))

exact for every n. Against the Gaussian weight the integrator is the
expectation under N(0, C) with C = (s / 2 pi) W.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import (
    DivergenceError,
    GaugeDegenerateError,
    InvalidTensorError,
    PreconditionError,
    QuadratureError,
    SingularMapError,
    UnsupportedError,
)
from .gauge_geometry import FiniteGaugeModel, horizontal_vertical_split

MC_CHUNK = 1 << 14


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("OPVD_LAB_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# specs and integrands


@dataclass(frozen=True)
class GaussianSpec:
    n: int
    Q: np.ndarray
    s: complex = 1.0

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, float))
        if Q.shape != (self.n, self.n):
            raise PreconditionError(f"Q must be {self.n}x{self.n}")
        if np.max(np.abs(Q - Q.T)) > 1e-12 * max(1.0, np.max(np.abs(Q))):
            raise PreconditionError("Q must be symmetric")
        object.__setattr__(self, "Q", Q)
        s = complex(self.s)
        if s == 0:
            raise PreconditionError("s must be nonzero")
        if s.real == 0:
            # s = +-i: oscillatory boundary case, admitted for the closed forms
            if np.min(np.linalg.eigvalsh(Q)) <= 0:
                raise PreconditionError("Q must be positive definite")
        elif np.min(np.linalg.eigvalsh(_herm(Q / s))) <= 0:
            raise PreconditionError("Re(Q/s) must be positive definite")

    @property
    def W(self) -> np.ndarray:
        return np.linalg.inv(self.Q)

    @property
    def is_real(self) -> bool:
        return complex(self.s).imag == 0 and complex(self.s).real > 0

    @property
    def covariance(self):
        c = self.s / (2 * math.pi) * self.W
        return np.real(c) if self.is_real else c

    @property
    def normalization(self) -> complex:
        """det(Q/s)^{1/2} as a product of principal square roots of eigenvalues."""
        return _sqrt_det(self.Q / self.s)

    def to_dict(self) -> dict:
        s = complex(self.s)
        return {"n": self.n, "Q": self.Q.tolist(), "s": [s.real, s.imag]}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianSpec":
        s = d.get("s", 1.0)
        s = complex(*s) if isinstance(s, (list, tuple)) else complex(s)
        if s.imag == 0:
            s = s.real
        return cls(int(d["n"]), np.asarray(d.get("Q", np.eye(int(d["n"]))), float), s)


def _herm(A):
    return np.real(0.5 * (A + A.conj().T))


def _sqrt_det(A) -> complex:
    ev = np.linalg.eigvals(np.asarray(A, complex))
    out = complex(np.prod(np.sqrt(ev)))
    return out.real if abs(out.imag) < 1e-15 * abs(out) and np.isrealobj(A) else out


@dataclass(frozen=True)
class IntegrandFunctional:
    """F multiplying the Gaussian weight.

    kinds and parameters:
      exp_quadratic_linear: xprime (vector), R (optional PSD matrix):
          F = exp(-pi x.R.x - 2 pi i <x', x>)
      polynomial_times_gaussian: terms [[coef, powers], ...] or powers:
          F = sum coef prod x_i^p_i
      bounded_callable: fn (vectorised over (..., n)), optional bound
    """

    kind: str
    parameters: dict = field(default_factory=dict)

    KINDS = ("exp_quadratic_linear", "polynomial_times_gaussian", "bounded_callable")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise UnsupportedError(f"unknown integrand kind {self.kind!r}")

    def terms(self):
        p = self.parameters
        if "terms" in p:
            return [(complex(c), tuple(int(k) for k in pw)) for c, pw in p["terms"]]
        return [(1.0, tuple(int(k) for k in p["powers"]))]

    def __call__(self, x):
        x = np.asarray(x)
        p = self.parameters
        if self.kind == "exp_quadratic_linear":
            xp = np.asarray(p.get("xprime", np.zeros(x.shape[-1])), float)
            val = -2j * math.pi * (x @ xp)
            if p.get("R") is not None:
                R = np.asarray(p["R"], float)
                val = val - math.pi * np.einsum("...i,ij,...j->...", x, R, x)
            return np.exp(val)
        if self.kind == "polynomial_times_gaussian":
            out = 0.0
            for c, pw in self.terms():
                out = out + c * np.prod(x ** np.asarray(pw), axis=-1)
            return out
        return p["fn"](x)

    def to_dict(self) -> dict:
        p = {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v) for k, v in self.parameters.items()
             if k != "fn"}
        if "terms" in p:
            p["terms"] = [[[complex(c).real, complex(c).imag], list(pw)] for c, pw in self.terms()]
        return {"kind": self.kind, "parameters": p}


@dataclass
class IntegrationResult:
    value: complex
    error_estimate: float
    method: str
    seed: int | None = None
    samples: int | None = None

    def to_dict(self) -> dict:
        v = complex(self.value)
        return {"value": [v.real, v.imag], "error_estimate": float(self.error_estimate), "method": self.method,
                "seed": self.seed, "samples": self.samples}


# ---------------------------------------------------------------------------
# closed forms


def wick_moment(C: np.ndarray, powers) -> complex:
    """E[prod x_i^{p_i}] for x ~ N(0, C) by recursion over pairings."""
    C = np.asarray(C)
    powers = tuple(int(p) for p in powers)
    if sum(powers) % 2:
        return 0.0

    @lru_cache(maxsize=None)
    def rec(counts):
        if not any(counts):
            return 1.0
        i = next(k for k, c in enumerate(counts) if c)
        rest = list(counts)
        rest[i] -= 1
        total = 0.0
        for j, cj in enumerate(rest):
            if cj:
                nxt = list(rest)
                nxt[j] -= 1
                total = total + cj * C[i, j] * rec(tuple(nxt))
        return total

    return rec(powers)


def _closed_form(spec: GaussianSpec, F: IntegrandFunctional) -> complex:
    if F.kind == "exp_quadratic_linear":
        xp = np.asarray(F.parameters.get("xprime", np.zeros(spec.n)), float)
        R = F.parameters.get("R")
        if R is None:
            return complex(np.exp(-math.pi * spec.s * (xp @ spec.W @ xp)))
        A = spec.Q / spec.s + np.asarray(R, float)
        if np.min(np.linalg.eigvalsh(_herm(A))) <= 0:
            raise DivergenceError("exponent is not decaying: Re(Q/s + R) is not positive definite")
        Ai = np.linalg.inv(A)
        return complex(spec.normalization / _sqrt_det(A) * np.exp(-math.pi * (xp @ Ai @ xp)))
    if F.kind == "polynomial_times_gaussian":
        C = spec.covariance
        return complex(sum(c * wick_moment(C, pw) for c, pw in F.terms()))
    raise UnsupportedError("closed form is not available for bounded callables")


def defining_identity_value(spec: GaussianSpec, xprime) -> complex:
    xp = np.asarray(xprime, float)
    return complex(np.exp(-math.pi * spec.s * (xp @ spec.W @ xp)))


# ---------------------------------------------------------------------------
# numeric routes


def _check_tail(spec: GaussianSpec, F: IntegrandFunctional) -> None:
    """Reject integrands that outgrow the Gaussian weight along principal axes."""
    if F.kind == "exp_quadratic_linear" and F.parameters.get("R") is not None:
        A = spec.Q / spec.s + np.asarray(F.parameters["R"], float)
        if np.min(np.linalg.eigvalsh(_herm(A))) <= 0:
            raise DivergenceError("exponent is not decaying: Re(Q/s + R) is not positive definite")
    if F.kind != "bounded_callable":
        return
    lam, vec = np.linalg.eigh(np.real(spec.Q / spec.s))
    for lk, vk in zip(lam, vec.T):
        sig = 1 / math.sqrt(2 * math.pi * lk)
        radii = sig * np.array([4.0, 8.0, 16.0])
        for sign in (1, -1):
            pts = sign * radii[:, None] * vk[None, :]
            vals = np.abs(np.asarray(F(pts), complex)) * np.exp(-math.pi * lk * radii**2)
            if not np.all(np.isfinite(vals)) or vals[-1] > max(vals[0], 1e-300):
                raise DivergenceError("integrand grows faster than the Gaussian weight decays")
    bound = F.parameters.get("bound")
    if bound is not None:
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(256, spec.n)) * 4
        if np.max(np.abs(F(pts))) > bound * (1 + 1e-12):
            raise DivergenceError("callable exceeds its declared bound")


def _gh_nodes(n: int) -> int:
    return {1: 80, 2: 48, 3: 24, 4: 14}.get(n, 6 if n <= 6 else 5)


def _quadrature(spec: GaussianSpec, F: IntegrandFunctional, nodes: int | None = None):
    if spec.n > 8:
        raise UnsupportedError("quadrature supports n <= 8")
    if not spec.is_real:
        raise UnsupportedError("complex s is handled by the closed form only")
    m = nodes or _gh_nodes(spec.n)

    def rule(m):
        u, w = np.polynomial.hermite.hermgauss(m)
        B = math.sqrt(spec.s / math.pi) * np.real(linalg.sqrtm(np.linalg.inv(spec.Q)))
        U = np.stack(np.meshgrid(*([u] * spec.n), indexing="ij"), axis=-1).reshape(-1, spec.n)
        Wt = np.prod(np.stack(np.meshgrid(*([w] * spec.n), indexing="ij"), axis=-1).reshape(-1, spec.n), axis=1)
        return complex(np.sum(Wt * F(U @ B.T))) * math.pi ** (-spec.n / 2)

    full = rule(m)
    coarse = rule(max(2, (2 * m) // 3))
    return full, abs(full - coarse)


def _mc_chunk(seq, size, spec: GaussianSpec, F: IntegrandFunctional, L):
    rng = np.random.Generator(np.random.Philox(seq))
    x = rng.standard_normal((size, spec.n)) @ L.T
    v = np.asarray(F(x), complex)
    return v.sum(), np.sum(v.real**2), np.sum(v.imag**2)


def _monte_carlo(spec: GaussianSpec, F: IntegrandFunctional, seed: int, samples: int):
    if spec.n > 64:
        raise UnsupportedError("Monte Carlo supports n <= 64")
    if not spec.is_real:
        raise UnsupportedError("complex s is handled by the closed form only")
    L = np.linalg.cholesky(spec.covariance)
    sizes = [MC_CHUNK] * (samples // MC_CHUNK) + ([samples % MC_CHUNK] if samples % MC_CHUNK else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(seqs, sizes))
    threads = thread_count()
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda j: _mc_chunk(j[0], j[1], spec, F, L), jobs))
    else:
        parts = [_mc_chunk(s, k, spec, F, L) for s, k in jobs]
    total = sum(p[0] for p in parts)  # fixed chunk order
    mean = total / samples
    var = (sum(p[1] for p in parts) / samples - mean.real**2) + (sum(p[2] for p in parts) / samples - mean.imag**2)
    return mean, math.sqrt(max(var, 0.0) / samples)


def integrate(spec: GaussianSpec, F: IntegrandFunctional, method: str = "closed_form", seed: int | None = None,
              samples: int = 100_000, nodes: int | None = None) -> IntegrationResult:
    """int F(x) exp(-(pi/s) Q(x)) D(x) by closed form, Gauss-Hermite quadrature or Monte Carlo."""
    _check_tail(spec, F)
    if method == "closed_form":
        return IntegrationResult(_closed_form(spec, F), 0.0, method)
    if method == "quadrature":
        v, e = _quadrature(spec, F, nodes)
        return IntegrationResult(v, e, method)
    if method == "monte_carlo":
        if seed is None:
            raise PreconditionError("Monte Carlo needs an explicit seed")
        v, e = _monte_carlo(spec, F, int(seed), int(samples))
        return IntegrationResult(v, e, method, int(seed), int(samples))
    raise UnsupportedError(f"unknown method {method!r}")


def gaussian_integrand(xprime=None, n: int | None = None) -> IntegrandFunctional:
    xp = np.zeros(n) if xprime is None else np.asarray(xprime, float)
    return IntegrandFunctional("exp_quadratic_linear", {"xprime": xp})


# ---------------------------------------------------------------------------
# translation invariance and change of variables


def _box_grid(lo, hi, points: int):
    axes = [np.linspace(a, b, points) for a, b in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    w1 = [np.full(points, ax[1] - ax[0]) for ax in axes]
    for w in w1:
        w[0] = w[-1] = 0.5 * w[0]
    W = w1[0]
    for w in w1[1:]:
        W = np.multiply.outer(W, w)
    return mesh, W


def _box_integral(fn, lo, hi, points):
    mesh, W = _box_grid(lo, hi, points)
    return complex(np.sum(np.asarray(fn(mesh.reshape(-1, mesh.shape[-1])), complex).reshape(W.shape) * W))


def _points_per_axis(n: int) -> int:
    return {1: 4001, 2: 601, 3: 121}[n]


def _check_absolutely_integrable(fn, n: int, L: float, points: int) -> float:
    inner = _box_integral(lambda x: np.abs(fn(x)), [-L] * n, [L] * n, points).real
    outer = _box_integral(lambda x: np.abs(fn(x)), [-2 * L] * n, [2 * L] * n, points).real
    if not math.isfinite(outer) or outer - inner > 1e-9 * max(inner, 1e-300) + 1e-14:
        raise DivergenceError("integrand is not absolutely integrable over R^n (mass outside the box)")
    return inner


def translation_invariance_check(spec: GaussianSpec, F: Callable, shift, half_width: float = 8.0,
                                 points: int | None = None) -> dict:
    """Compare int F(x + shift) D(x) with int F(x) D(x) on a trapezoid box.

    F must carry its own decay (the Gaussian weight lives in the integrand);
    the volume element is a constant multiple of dx.
    """
    shift = np.asarray(shift, float).reshape(-1)
    n = spec.n
    if n > 3:
        raise UnsupportedError("translation check supports n <= 3")
    pts = points or _points_per_axis(n)
    L = half_width + float(np.max(np.abs(shift)))
    _check_absolutely_integrable(F, n, L, pts)
    norm = spec.normalization
    base = norm * _box_integral(F, [-L] * n, [L] * n, pts)
    moved = norm * _box_integral(lambda x: F(x + shift), [-L] * n, [L] * n, pts)
    return {"value": base, "shifted": moved, "deviation": abs(moved - base)}


def rotation_shear_map(angle: float = 0.4):
    """M = R(angle) o T with T(x) = (x1 + 0.2 x1^3, 0.5 x2 + 0.3 x1^2); det M' = 0.5 (1 + 0.6 x1^2)."""
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s], [s, c]])

    def M(x):
        t = np.stack([x[..., 0] + 0.2 * x[..., 0] ** 3, 0.5 * x[..., 1] + 0.3 * x[..., 0] ** 2], axis=-1)
        return t @ R.T

    def Mp(x):
        J = np.zeros(x.shape[:-1] + (2, 2))
        J[..., 0, 0] = 1 + 0.6 * x[..., 0] ** 2
        J[..., 1, 0] = 0.6 * x[..., 0]
        J[..., 1, 1] = 0.5
        return R @ J

    return M, Mp


def linear_map(A):
    A = np.atleast_2d(np.asarray(A, float))
    return (lambda x: x @ A.T), (lambda x: np.broadcast_to(A, x.shape[:-1] + A.shape))


def change_of_variables_check(spec: GaussianSpec, M: Callable, Mprime: Callable, F: Callable,
                              half_width: float = 8.0, points: int | None = None) -> dict:
    """int F(M(x)) |Det M'(x)| D(x) against int F(y) D(y) on trapezoid boxes."""
    n = spec.n
    if n > 3:
        raise UnsupportedError("change of variables check supports n <= 3")
    pts = points or _points_per_axis(n)
    mesh, W = _box_grid([-half_width] * n, [half_width] * n, pts)
    X = mesh.reshape(-1, n)
    J = np.asarray(Mprime(X), float).reshape(-1, n, n)
    det = np.linalg.det(J)
    scale = max(1.0, float(np.max(np.abs(J))) ** n)
    if np.min(np.abs(det)) < 1e-12 * scale or (np.any(det > 0) and np.any(det < 0)):
        raise SingularMapError("Det M' vanishes or changes sign on the integration region")
    norm = spec.normalization
    lhs = norm * complex(np.sum(np.asarray(F(M(X)), complex) * np.abs(det) * W.reshape(-1)))
    rhs = norm * _box_integral(F, [-half_width] * n, [half_width] * n, pts)
    return {"lhs": lhs, "rhs": rhs, "deviation": abs(lhs - rhs), "min_det": float(np.min(np.abs(det)))}


# ---------------------------------------------------------------------------
# product measures


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def fubini_check(mu_x, mu_y, E) -> tuple:
    """(m(E), sum_x mu(x) nu(E_x), sum_y nu(y) mu(E^y)) as exact fractions."""
    mx = [_frac(v) for v in mu_x]
    my = [_frac(v) for v in mu_y]
    E = np.asarray(E, bool)
    if E.shape != (len(mx), len(my)):
        raise PreconditionError("E must be a boolean mask on the product grid")
    cells = sum((mx[i] * my[j] for i, j in zip(*np.nonzero(E))), Fraction(0))
    iter_x = sum((mx[i] * sum((my[j] for j in np.nonzero(E[i])[0]), Fraction(0)) for i in range(len(mx))), Fraction(0))
    iter_y = sum((my[j] * sum((mx[i] for i in np.nonzero(E[:, j])[0]), Fraction(0)) for j in range(len(my))), Fraction(0))
    return cells, iter_x, iter_y


@dataclass(frozen=True)
class JTensor:
    n: int
    J: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.J, float)
        if J.shape != (self.n, self.n):
            raise InvalidTensorError("J has the wrong shape")
        if np.max(np.abs(J - J.T)) > 1e-12 or np.max(np.abs(J @ J - np.eye(self.n))) > 1e-12:
            raise InvalidTensorError("J must be symmetric with J^2 = 1")
        object.__setattr__(self, "J", J)


def jtensor_projectors(J: JTensor):
    I = np.eye(J.n)
    return 0.5 * (I + J.J), 0.5 * (I - J.J)


# ---------------------------------------------------------------------------
# gauge orbit toy


def toy_action(name: str) -> Callable:
    if name == "zero":
        return lambda z: np.zeros(z.shape[:-1])
    if name == "quadratic":
        return lambda z: np.sum(z**2, axis=-1)
    if name == "quartic":
        return lambda z: np.sum(z**2, axis=-1) ** 2
    raise UnsupportedError(f"unknown toy action {name!r}")


def _gh_product(n: int, m: int, scale: float):
    """Nodes and weights for int exp(-scale |z|^2) g(z) dz over R^n."""
    u, w = np.polynomial.hermite.hermgauss(m)
    U = np.stack(np.meshgrid(*([u] * n), indexing="ij"), axis=-1).reshape(-1, n) / math.sqrt(scale)
    Wt = np.prod(np.stack(np.meshgrid(*([w] * n), indexing="ij"), axis=-1).reshape(-1, n), axis=1)
    return U, Wt * scale ** (-n / 2)


def integrate_nd(g, n: int, L: float, tol: float):
    """Iterated adaptive quadrature of g over [-L, L]^n."""
    from scipy import integrate as sint

    val, err = sint.nquad(g, [[-L, L]] * n, opts={"epsabs": tol * 1e-2, "epsrel": 1e-13, "limit": 200})
    if err > tol:
        raise QuadratureError("adaptive quadrature did not reach the tolerance", [("adaptive", val, err)])
    return val, err, None


def _refine(fn, schedule, tol, what):
    trace = []
    for m in schedule:
        trace.append((m, fn(m)))
        if len(trace) > 1 and abs(trace[-1][1] - trace[-2][1]) <= tol * max(1.0, abs(trace[-1][1])):
            return trace[-1][1], abs(trace[-1][1] - trace[-2][1]), trace
    raise QuadratureError(f"{what} did not converge", trace)


@dataclass
class ToyResult:
    Z_direct: float
    Z_factorized: float
    Z_gaugefixed: float
    errors: dict
    method: str
    seed: int | None
    jacobian: float
    traces: dict


def gauge_toy_factorize(n: int, S: Callable | str = "quadratic", seed: int | None = None, method: str = "auto",
                        samples: int = 200_000, tol: float = 1e-10) -> ToyResult:
    """Z = int int exp(-|x+y|^2 - |x-y|^2 - S(x-y)) dx dy computed three ways.

    * direct: 2n-dimensional Gauss-Hermite (or Monte Carlo with a control variate);
    * factorised: z = (x +- y)/2, dx dy = 2^n dz+ dz-, so
      Z = 2^n int exp(-4|z+|^2) dz+ * int exp(-4|z-|^2 - S(2 z-)) dz-;
    * gauge fixed: orbits (x, y) -> (x + L, y + L), condition x + y = 0 with
      Faddeev-Popov factor 2^n, so Z = 2^n int exp(-4|L|^2) dL * int g(x, -x) dx,
      the slice integral by trapezoid rule.
    """
    name = S if isinstance(S, str) else None
    S = toy_action(S) if isinstance(S, str) else S
    if method == "auto":
        method = "quadrature" if n == 1 else "monte_carlo"
    if method == "quadrature" and n > 3:
        raise UnsupportedError("quadrature route supports n <= 3")
    traces = {}

    # factorised: the z- factor by adaptive quadrature (n <= 2) or GH (n = 3)
    if n <= 2:
        def g(*z):
            return float(np.exp(-4 * sum(t * t for t in z) - S(2 * np.array([z]))[0]))

        zm, zm_err, info = integrate_nd(g, n, 7.0, tol)
        traces["factorized"] = [("adaptive", zm, zm_err)]
    else:
        def zminus(m):
            U, W = _gh_product(n, m, 4.0)
            return float(np.sum(W * np.exp(-S(2 * U))))

        zm, zm_err, traces["factorized"] = _refine(zminus, [10, 16, 24, 32, 40], tol, "factorised integral")
    zplus = (math.pi / 4) ** (n / 2)
    jac = 2.0**n
    Z_fact = jac * zplus * zm

    # gauge fixed: slice x + y = 0 by trapezoid
    def slice_int(points):
        L = 7.0
        return _box_integral(lambda x: np.exp(-4 * np.sum(x**2, axis=-1) - S(2 * x)), [-L] * n, [L] * n, points).real

    sched = [201, 401, 801] if n == 1 else ([101, 161, 241] if n == 2 else [41, 61, 81])
    sl, sl_err, traces["gaugefixed"] = _refine(slice_int, sched, max(tol, 1e-12), "gauge-fixed slice integral")
    lam_factor = (math.pi / 4) ** (n / 2)
    Z_gf = jac * lam_factor * sl

    # direct
    if method == "quadrature":

        def direct(m):
            U, W = _gh_product(2 * n, m, 2.0)
            x, y = U[:, :n], U[:, n:]
            return float(np.sum(W * np.exp(-S(x - y))))

        sched = [20, 40, 60, 80, 120] if n == 1 else ([12, 20, 28, 36] if n == 2 else [8, 12, 16])
        Z_dir, dir_err, traces["direct"] = _refine(direct, sched, tol, "direct integral")
    elif method == "monte_carlo":
        if seed is None:
            raise PreconditionError("Monte Carlo needs an explicit seed")
        Z_dir, dir_err = _toy_monte_carlo(n, S, int(seed), samples, control=(name in ("quadratic", "quartic")))
    else:
        raise UnsupportedError(f"unknown method {method!r}")
    return ToyResult(Z_dir, Z_fact, Z_gf, {"direct": dir_err, "factorized": jac * zplus * zm_err,
                                            "gaugefixed": jac * lam_factor * sl_err},
                     method, seed if method == "monte_carlo" else None, jac, traces)


def _toy_monte_carlo(n, S, seed, samples, control=True):
    """(x, y) ~ N(0, 1/4) per component; Z = (pi/2)^n E[exp(-S(x - y))].

    The control variate is |z|^4 with z = x - y (variance 1/2 per component),
    whose mean is n (n + 2) / 4.
    """
    sizes = [MC_CHUNK] * (samples // MC_CHUNK) + ([samples % MC_CHUNK] if samples % MC_CHUNK else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))

    def chunk(job):
        seq, size = job
        rng = np.random.Generator(np.random.Philox(seq))
        xy = 0.5 * rng.standard_normal((size, 2 * n))
        z = xy[:, :n] - xy[:, n:]
        return np.exp(-S(z)), np.sum(z**2, axis=-1) ** 2

    jobs = list(zip(seqs, sizes))
    threads = thread_count()
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(chunk, jobs))
    else:
        parts = [chunk(j) for j in jobs]
    y = np.concatenate([p[0] for p in parts])
    h = np.concatenate([p[1] for p in parts])
    if control:
        mh = n * (n + 2) / 4
        hc = h - mh
        beta = float(np.dot(y - y.mean(), hc) / np.dot(hc, hc))
        y = y - beta * hc
    pref = (math.pi / 2) ** n
    return pref * float(y.mean()), pref * float(y.std(ddof=1) / math.sqrt(len(y)))


# ---------------------------------------------------------------------------
# measure split for finite gauge models


@dataclass
class MeasureSplit:
    lhs: float
    rhs: float
    ratio: float
    det_Q: float
    det_gamma_perp: float
    det_G: float
    vertical_factor: float


def _orthonormal_kernel(C):
    _, s, vt = np.linalg.svd(C)
    rank = int(np.sum(s > 1e-12 * max(1.0, s.max())))
    return vt[rank:].T


def fp_measure_split(model: FiniteGaugeModel, G: np.ndarray | None = None, point=None, normalized: bool = False,
                     points: int | None = None, cond_tol: float = 1e-3) -> MeasureSplit:
    """Faddeev-Popov factorisation of int (det g)^{1/2} F d^N A for Gaussian F.

    F(A) = exp(-1/2 (P A).G.(P A)) exp(-1/2 |Q^-1 C A|^2) with P the horizontal
    projector and Q = C K. Writing A = B u + K xi (B an orthonormal basis of
    ker C) gives

        lhs = (2 pi)^{g/2} |det Q| / sqrt(det C C^T) int (det g)^{1/2} exp(-1/2 (P B u).G.(P B u)) du.

    Both sides are trapezoid integrals. With ``normalized`` the Gaussian
    factors are divided by their exact masses so the ratio tests F = 1.
    """
    N = model.N
    if N > 3:
        raise UnsupportedError("measure split quadrature supports N <= 3")
    C = np.atleast_2d(np.asarray(model.gauge_condition, float))
    K = model.generators(point)
    gam = np.asarray(model.metric, float)
    g = K.shape[1]
    Q = C @ K
    detQ = float(np.linalg.det(Q))
    scale = (np.linalg.norm(C) * np.linalg.norm(K)) ** g
    if abs(detQ) < 1e-14 * scale:
        raise GaugeDegenerateError("det Q = 0: the gauge condition does not cut the orbits (Gribov-type degeneracy)")
    if abs(detQ) < cond_tol * scale:
        warnings.warn(f"gauge condition nearly tangent to the orbits: |det Q| = {abs(detQ):.3g}", RuntimeWarning,
                      stacklevel=2)
    H, _ = horizontal_vertical_split(model, point)
    P = H.matrix
    Gm = np.eye(N) if G is None else np.asarray(G, float)
    Qi_C = np.linalg.solve(Q, C)
    B = _orthonormal_kernel(C)
    sqrt_detg = math.sqrt(np.linalg.det(gam))

    slice_form = (P @ B).T @ Gm @ (P @ B)
    full_form = P.T @ Gm @ P + Qi_C.T @ Qi_C
    mass_slice = (2 * math.pi) ** ((N - g) / 2) / math.sqrt(np.linalg.det(slice_form)) if N > g else 1.0
    mass_h = (2 * math.pi) ** (g / 2)

    def quad_form_integral(form, dim, pts):
        if dim == 0:
            return 1.0
        lam = np.linalg.eigvalsh(form)
        if lam.min() <= 0:
            raise PreconditionError("F does not decay along every direction")
        L = 10.0 / math.sqrt(lam.min())
        return _box_integral(lambda x: np.exp(-0.5 * np.einsum("...i,ij,...j->...", x, form, x)), [-L] * dim, [L] * dim,
                             pts).real

    pts = points or {1: 801, 2: 401, 3: 161}[N]
    lhs = sqrt_detg * quad_form_integral(full_form, N, pts)
    rhs = mass_h * abs(detQ) / math.sqrt(np.linalg.det(C @ C.T)) * sqrt_detg * quad_form_integral(
        slice_form, N - g, {0: 1, 1: 801, 2: 401}[N - g])
    if normalized:
        lhs /= mass_h * mass_slice * abs(detQ) / math.sqrt(np.linalg.det(C @ C.T)) * sqrt_detg
        rhs /= mass_h * mass_slice * abs(detQ) / math.sqrt(np.linalg.det(C @ C.T)) * sqrt_detg
    det_perp = float(np.linalg.det((P @ B).T @ gam @ (P @ B))) if N > g else 1.0
    det_G = float(np.linalg.det(K.T @ gam @ K))
    return MeasureSplit(lhs, rhs, lhs / rhs, detQ, det_perp, det_G, mass_h)
