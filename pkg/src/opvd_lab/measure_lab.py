"""Finite shadows of measure-theoretic constructions.

Hausdorff measures are estimated over dyadic coverings of box unions, the
Schwartz metric is evaluated with finite-difference seminorms, Laplace
transforms are computed from the density and from the cumulative function,
and positivity of the Gaussian characteristic functional is tested on
finite families of functions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import AbsoluteContinuityError, CoverageError, DivergenceError, NonIsometryError
from .pu_testfn import TestFunction

# ---------------------------------------------------------------------------
# Hausdorff-type measures


@dataclass(frozen=True)
class MeasureGauge:
    """phi(r) = coefficient * r**exponent with a choice of metric."""

    exponent: float
    coefficient: float = 1.0
    metric: str = "sup"

    def __post_init__(self):
        if self.metric not in ("sup", "euclidean"):
            raise ValueError("metric must be 'sup' or 'euclidean'")
        if self.exponent <= 0 or self.coefficient <= 0:
            raise ValueError("gauge must vanish at 0 and be nondecreasing")

    def __call__(self, r):
        return self.coefficient * np.asarray(r, float) ** self.exponent

    def cell_diameter(self, side: float, n: int) -> float:
        return side if self.metric == "sup" else side * math.sqrt(n)


@dataclass(frozen=True)
class CoveredSet:
    """Finite union of closed axis-aligned boxes ``[(lo, hi), ...]``."""

    boxes: tuple
    n: int

    @classmethod
    def from_boxes(cls, boxes, n: int | None = None) -> "CoveredSet":
        norm = []
        for lo, hi in boxes:
            lo = tuple(np.atleast_1d(np.asarray(lo, float)).tolist())
            hi = tuple(np.atleast_1d(np.asarray(hi, float)).tolist())
            if len(lo) != len(hi) or any(b <= a for a, b in zip(lo, hi)):
                raise ValueError(f"box {lo}-{hi} must have positive volume")
            norm.append((lo, hi))
        if n is None:
            if not norm:
                raise ValueError("dimension needed for the empty set")
            n = len(norm[0][0])
        if any(len(b[0]) != n for b in norm):
            raise ValueError("boxes have mixed dimensions")
        return cls(tuple(norm), n)

    @property
    def empty(self) -> bool:
        return len(self.boxes) == 0

    def transformed(self, matrix, shift) -> "CoveredSet":
        A = np.asarray(matrix, float)
        v = np.asarray(shift, float)
        out = []
        for lo, hi in self.boxes:
            a = A @ np.asarray(lo) + v
            b = A @ np.asarray(hi) + v
            out.append((tuple(np.minimum(a, b)), tuple(np.maximum(a, b))))
        return CoveredSet(tuple(out), self.n)


def dyadic_cell_count(E: CoveredSet, level: int, budget: int = 1 << 24) -> int:
    """Number of closed dyadic cells of side 2^-level meeting E in positive volume."""
    if E.empty:
        return 0
    s = 2.0**-level
    lo_all = np.min([b[0] for b in E.boxes], axis=0)
    hi_all = np.max([b[1] for b in E.boxes], axis=0)
    k0 = np.floor(lo_all / s).astype(np.int64)
    k1 = np.ceil(hi_all / s).astype(np.int64)
    shape = tuple((k1 - k0).tolist())
    if int(np.prod(shape, dtype=np.float64)) > budget:
        raise CoverageError(f"level {level} needs {np.prod(shape, dtype=np.float64):.3g} cells, budget is {budget}")
    mark = np.zeros(shape, dtype=bool)
    for lo, hi in E.boxes:
        # cell k = [k s, (k+1) s] meets (lo, hi) in positive volume iff k s < hi and (k+1) s > lo
        a = np.floor(np.asarray(lo) / s).astype(np.int64)
        b = np.ceil(np.asarray(hi) / s).astype(np.int64)
        mark[tuple(slice(ai - k, bi - k) for ai, bi, k in zip(a, b, k0))] = True
    return int(mark.sum())


@dataclass
class HausdorffEstimate:
    eps: list
    levels: list
    estimates: list
    limit: float
    tolerance: float
    monotone: bool


def _levels_for(eps: float, g: MeasureGauge, n: int) -> int:
    """Coarsest dyadic level whose cells have diameter <= eps."""
    factor = 1.0 if g.metric == "sup" else math.sqrt(n)
    return max(0, int(math.ceil(math.log2(factor / eps) - 1e-12)))


def hausdorff_estimate(E: CoveredSet, g: MeasureGauge, eps_schedule: Sequence[float], extra_levels: int = 2,
                       budget: int = 1 << 24) -> HausdorffEstimate:
    """H_eps estimates over dyadic coverings and a Richardson extrapolated limit.

    For each eps the infimum runs over dyadic levels whose cells have
    diameter <= eps (the coarsest admissible level and ``extra_levels``
    finer ones, within the cell budget). The admissible family shrinks as
    eps decreases, so the estimates are nondecreasing by construction.
    """
    eps = [float(e) for e in eps_schedule]
    if len(eps) < 3 or any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
        raise ValueError("eps_schedule must be strictly decreasing, positive, length >= 3")
    if E.empty:
        return HausdorffEstimate(eps, [None] * len(eps), [0.0] * len(eps), 0.0, 0.0, True)
    cache: dict = {}

    def cover_sum(level):
        if level not in cache:
            cnt = dyadic_cell_count(E, level, budget)
            cache[level] = cnt * float(g(g.cell_diameter(2.0**-level, E.n)))
        return cache[level]

    ests, lev = [], []
    for e in eps:
        l0 = _levels_for(e, g, E.n)
        cand = []
        for lv in range(l0, l0 + extra_levels + 1):
            try:
                cand.append((cover_sum(lv), lv))
            except CoverageError:
                if not cand:
                    raise
                break
        best = min(cand)
        ests.append(best[0])
        lev.append(best[1])
    # Richardson on the two finest distinct levels, error linear in the cell side
    pairs = sorted({(lv, est) for lv, est in zip(lev, ests)})
    if len(pairs) >= 2:
        (lc, sc), (lf, sf) = pairs[-2], pairs[-1]
        hc, hf = 2.0**-lc, 2.0**-lf
        limit = (hc * sf - hf * sc) / (hc - hf)
        tol = abs(sf - sc) + abs(limit - sf) + 1e-12 * max(1.0, abs(sf))
    else:
        limit = ests[-1]
        tol = 1e-12 * max(1.0, abs(limit))
    mono = all(b >= a - 1e-15 * max(1.0, abs(a)) for a, b in zip(ests, ests[1:]))
    return HausdorffEstimate(eps, lev, ests, float(limit), float(tol), mono)


@dataclass
class IsometryReport:
    deviation: float
    tolerance: float
    original: HausdorffEstimate
    image: HausdorffEstimate


def isometry_invariance_check(E: CoveredSet, g: MeasureGauge, eps_schedule, translation=None,
                              permutation=None, matrix=None) -> IsometryReport:
    """Relative deviation of the Hausdorff estimate under an isometry.

    Supported isometries are translations and signed coordinate
    permutations; both preserve the sup and the euclidean metric and map box
    unions to box unions. Anything else is rejected.
    """
    n = E.n
    A = np.eye(n)
    v = np.zeros(n) if translation is None else np.asarray(translation, float)
    if permutation is not None:
        A = np.eye(n)[list(permutation)]
    if matrix is not None:
        A = np.asarray(matrix, float) @ A
    if A.shape != (n, n) or v.shape != (n,):
        raise NonIsometryError("isometry dimension does not match the set")
    signed_perm = np.all(np.isin(A, (-1.0, 0.0, 1.0))) and np.all(np.abs(A).sum(0) == 1) and np.all(np.abs(A).sum(1) == 1)
    if not signed_perm:
        orth = np.allclose(A.T @ A, np.eye(n), atol=1e-12)
        if orth and g.metric == "euclidean":
            raise NonIsometryError("rotation is a euclidean isometry but does not map box unions to box unions")
        raise NonIsometryError("map is not an isometry of the chosen metric (only translations and signed permutations)")
    a = hausdorff_estimate(E, g, eps_schedule)
    b = hausdorff_estimate(E.transformed(A, v), g, eps_schedule)
    scale = max(abs(a.limit), 1e-300)
    dev = abs(b.limit - a.limit) / scale if a.limit != 0 else abs(b.limit)
    tol = (a.tolerance + b.tolerance) / scale if a.limit != 0 else a.tolerance + b.tolerance
    return IsometryReport(float(dev), float(tol), a, b)


# ---------------------------------------------------------------------------
# Schwartz metric


def _values_on(f, grid):
    return np.asarray(f(grid) if callable(f) else f, dtype=float)


def schwartz_seminorms(h: np.ndarray, grid: np.ndarray, M: int) -> np.ndarray:
    """N_m(h) = sup (1+|x|)^m sum_{b<=m} |d^b h| for m = 0..M on a 1-d grid."""
    ders = [np.asarray(h, float)]
    for _ in range(M):
        ders.append(np.gradient(ders[-1], grid, edge_order=2))
    weight = 1.0 + np.abs(grid)
    out = np.empty(M + 1)
    acc = np.zeros_like(grid)
    for m in range(M + 1):
        acc = acc + np.abs(ders[m])
        out[m] = np.max(weight**m * acc)
    return out


def schwartz_distance(f, g, M: int = 4, grid=None) -> float:
    """d(f, g) = sum_{m<=M} 2^-m min(1, N_m(f - g)); always in [0, 2)."""
    grid = np.linspace(-10, 10, 2001) if grid is None else np.asarray(grid, float)
    diff = _values_on(f, grid) - _values_on(g, grid)
    if not np.any(diff):
        return 0.0
    N = schwartz_seminorms(diff, grid, M)
    return float(sum(2.0**-m * min(1.0, N[m]) for m in range(M + 1)))


# ---------------------------------------------------------------------------
# Laplace-Stieltjes transform

NAMED_DENSITIES = ("exponential", "gaussian", "laplace", "uniform")


@dataclass(frozen=True)
class StieltjesMeasure:
    """Finite measure with density on an interval.

    ``density`` is a TestFunction, a callable, or one of the named densities
    with ``params``: exponential(rate) on [0, inf), gaussian(mean, sigma),
    laplace(rate) two-sided, uniform(a, b).
    """

    density: object
    domain: tuple = (-math.inf, math.inf)
    params: tuple = ()

    def rho(self, x):
        x = np.asarray(x, float)
        d = self.density
        if isinstance(d, str):
            if d == "exponential":
                lam = self.params[0] if self.params else 1.0
                return np.where(x >= 0, lam * np.exp(-lam * np.maximum(x, 0)), 0.0)
            if d == "gaussian":
                mu, sig = self.params[:2] if len(self.params) >= 2 else (0.0, 1.0)
                return np.exp(-0.5 * ((x - mu) / sig) ** 2) / (sig * math.sqrt(2 * math.pi))
            if d == "laplace":
                lam = self.params[0] if self.params else 1.0
                return 0.5 * lam * np.exp(-lam * np.abs(x))
            if d == "uniform":
                a, b = self.params
                return np.where((x >= a) & (x <= b), 1.0 / (b - a), 0.0)
            raise ValueError(f"unknown density {d!r}")
        return np.asarray(d(x), float)

    def bounds(self):
        lo, hi = self.domain
        d = self.density
        if isinstance(d, str):
            if d == "exponential":
                lo = max(lo, 0.0)
            if d == "uniform":
                lo, hi = max(lo, self.params[0]), min(hi, self.params[1])
        elif isinstance(d, TestFunction):
            a, b = d.support_box()
            lo, hi = max(lo, float(a[0])), min(hi, float(b[0]))
        return float(lo), float(hi)

    def _natural_domain(self) -> bool:
        return isinstance(self.density, str) and self.domain == (-math.inf, math.inf)

    def cdf(self, x: float) -> float:
        """F(x) = mu((lo, x]); closed forms for named densities on their natural domain."""
        lo, hi = self.bounds()
        x = min(max(float(x), lo), hi)
        d = self.density
        if self._natural_domain():
            if d == "exponential":
                lam = self.params[0] if self.params else 1.0
                return float(-math.expm1(-lam * max(x, 0.0)))
            if d == "gaussian":
                mu, sig = self.params[:2] if len(self.params) >= 2 else (0.0, 1.0)
                return float(0.5 * special.erfc(-(x - mu) / (sig * math.sqrt(2))))
            if d == "laplace":
                lam = self.params[0] if self.params else 1.0
                return float(0.5 * math.exp(lam * x)) if x < 0 else float(1 - 0.5 * math.exp(-lam * x))
        if x == lo:
            return 0.0
        val, _ = integrate.quad(lambda t: float(self.rho(t)), lo, x, epsabs=1e-15, epsrel=1e-13, limit=400)
        return val

    def mass(self) -> float:
        lo, hi = self.bounds()
        if math.isinf(hi):
            return 1.0 if self._natural_domain() else self._mass_quad()
        return self.cdf(hi)

    def _mass_quad(self):
        lo, hi = self.bounds()
        val, _ = integrate.quad(lambda t: float(self.rho(t)), lo, hi, epsabs=1e-15, epsrel=1e-13, limit=400)
        return val


def _cquad(fn, a, b, **kw):
    re, _ = integrate.quad(lambda t: fn(t).real, a, b, limit=400, epsabs=1e-15, epsrel=1e-12, **kw)
    im, _ = integrate.quad(lambda t: fn(t).imag, a, b, limit=400, epsabs=1e-15, epsrel=1e-12, **kw)
    return complex(re, im)


def _safe_exp_times(s: complex, x, w):
    """exp(-s x) * w with exact zeros where w underflows."""
    w = np.asarray(w)
    with np.errstate(over="ignore", invalid="ignore"):
        v = np.exp(-s * np.asarray(x, float)) * w
    return np.where(w == 0, 0.0, v)


def _probe_tail(s: complex, rho: Callable, direction: float) -> None:
    """Raise DivergenceError unless |exp(-sx) rho(x)| x^2 decays along x = +-2^k.

    Probing stops where rho underflows, so growth is seen before it is
    masked by a zero density.
    """
    vals = []
    for k in range(64):
        x = direction * 2.0**k
        r = float(rho(x))
        if r == 0.0:
            break
        vals.append(abs(complex(_safe_exp_times(s, x, r))) * x * x)
    if not vals:
        return
    big = max(vals)
    if not math.isfinite(big) or vals[-1] > 1e-6 * big and len(vals) > 3 and vals[-1] >= vals[-2]:
        raise DivergenceError(f"transform diverges: integrand does not decay as x -> {'+' if direction > 0 else '-'}inf")


@dataclass
class LaplaceResult:
    value: complex
    direct: complex
    stieltjes: complex
    relative_deviation: float


def laplace_stieltjes(F: StieltjesMeasure, s: complex) -> LaplaceResult:
    """L(s) = int exp(-s x) dF(x) by two routes.

    The direct route integrates ``exp(-sx) rho(x)``. The Stieltjes route
    integrates the cumulative function by parts, split at an interior
    point c: F itself on the left, the tail G = F - M on the right, so each
    boundary term vanishes at its infinite end.
    """
    s = complex(s)
    if s.real < 0:
        raise ValueError("Re s must be >= 0")
    lo, hi = F.bounds()

    def integrand(x):
        return _safe_exp_times(s, x, F.rho(x))

    for end, direction in ((hi, 1.0), (lo, -1.0)):
        if math.isinf(end):
            _probe_tail(s, F.rho, direction)
    direct = _cquad(lambda t: complex(integrand(t)), lo, hi)
    M = F.mass()
    if s == 0:
        stieltjes = complex(M)
    else:
        c = 0.0 if lo < 0 < hi else (lo if math.isfinite(lo) else 0.0) + (0.5 * (hi - lo) if math.isfinite(hi - lo) else 1.0)
        c = min(max(c, lo), hi)
        left = 0j
        if c > lo:
            # int_lo^c e^{-sx} dF = e^{-sc} F(c) - e^{-s lo} F(lo) + s int_lo^c e^{-sx} F dx, F(lo) = 0
            left = np.exp(-s * c) * F.cdf(c) + s * _cquad(lambda t: complex(_safe_exp_times(s, t, F.cdf(t))), lo, c)
        right = 0j
        if hi > c:
            G = lambda t: F.cdf(t) - M  # noqa: E731
            tail = 0j if math.isinf(hi) else complex(_safe_exp_times(s, hi, G(hi)))
            right = tail - np.exp(-s * c) * G(c) + s * _cquad(lambda t: complex(_safe_exp_times(s, t, G(t))), c, hi)
        stieltjes = complex(left + right)
    rel = abs(direct - stieltjes) / max(abs(direct), 1e-300)
    return LaplaceResult(direct, direct, stieltjes, float(rel))


# ---------------------------------------------------------------------------
# Bochner-Minlos positivity


@dataclass
class PositivityReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    min_eigenvalue: float
    symmetric: bool


def l2_norm_sq(v: np.ndarray, grid: np.ndarray) -> float:
    return float(np.trapezoid(np.abs(v) ** 2, grid))


def bochner_minlos_positivity(test_fns: Sequence, grid=None) -> PositivityReport:
    """Minimum eigenvalue of [chi(phi_j - phi_k)] with chi(phi) = exp(-|phi|^2 / 2)."""
    grid = np.linspace(-8, 8, 1601) if grid is None else np.asarray(grid, float)
    vals = [_values_on(f, grid) for f in test_fns]
    m = len(vals)
    if m == 0:
        raise ValueError("need at least one function")
    mat = np.empty((m, m))
    for j in range(m):
        for k in range(m):
            mat[j, k] = math.exp(-0.5 * l2_norm_sq(vals[j] - vals[k], grid))
    sym = bool(np.array_equal(mat, mat.T))
    ev = np.linalg.eigvalsh(mat)
    return PositivityReport(mat, ev, float(ev[0]), sym)


# ---------------------------------------------------------------------------
# Radon-Nikodym on finite sets


def _exact(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


@dataclass
class DensityResult:
    density: dict  # point -> Fraction
    as_float: dict
    subsets_checked: int


def radon_nikodym_density(mu: dict, nu: dict, check_subsets: bool = True) -> DensityResult:
    """h = d nu / d mu pointwise on the support of mu, in exact rationals.

    Every subset of the support (up to 16 points) is checked to satisfy
    sum_E h mu = nu(E) exactly.
    """
    pts = list(dict.fromkeys(list(mu) + list(nu)))
    m = {p: _exact(mu.get(p, 0)) for p in pts}
    n = {p: _exact(nu.get(p, 0)) for p in pts}
    for p in pts:
        if m[p] < 0 or n[p] < 0:
            raise ValueError("measures must be nonnegative")
        if m[p] == 0 and n[p] != 0:
            raise AbsoluteContinuityError(p)
    h = {p: n[p] / m[p] for p in pts if m[p] != 0}
    checked = 0
    if check_subsets:
        support = [p for p in pts if m[p] != 0]
        if len(support) <= 16:
            for r in range(len(support) + 1):
                for E in itertools.combinations(support, r):
                    if sum((h[p] * m[p] for p in E), Fraction(0)) != sum((n[p] for p in E), Fraction(0)):
                        raise AssertionError("reconstruction failed")  # unreachable in exact arithmetic
                    checked += 1
    return DensityResult(h, {p: float(v) for p, v in h.items()}, checked)


# ---------------------------------------------------------------------------
# Gaussian to Dirac limit


@dataclass
class DiracLimitReport:
    sigmas: list
    values: list
    errors: list
    strictly_decreasing: bool
    final_error: float
    floor: float
    notes: list = field(default_factory=list)


def dirac_limit_check(phi0: float, sigma_schedule: Sequence[float], probe: Callable, nodes: int = 80) -> DiracLimitReport:
    """Normalised Gaussian average of ``probe`` around ``phi0`` as sigma shrinks.

    Uses Gauss-Hermite quadrature (``nodes`` points). Errors at or below the
    roundoff floor 1e-14 * max(1, |probe(phi0)|) count as converged when
    checking strict decrease.
    """
    sig = [float(s) for s in sigma_schedule]
    if any(b >= a for a, b in zip(sig, sig[1:])):
        raise ValueError("sigma_schedule must be strictly decreasing")
    x, w = np.polynomial.hermite.hermgauss(nodes)
    target = float(probe(phi0))
    floor = 1e-14 * max(1.0, abs(target))
    vals, errs = [], []
    for s in sig:
        v = float(np.dot(w, probe(phi0 + math.sqrt(2) * s * x)) / math.sqrt(math.pi))
        vals.append(v)
        errs.append(abs(v - target))
    ok = all((b < a) or (b <= floor and a <= floor) or (b <= floor) for a, b in zip(errs, errs[1:]))
    notes = []
    if all(e <= floor for e in errs):
        notes.append("probe averages exactly to its centre value (odd or linear probe)")
    return DiracLimitReport(sig, vals, errs, ok, errs[-1], floor, notes)
