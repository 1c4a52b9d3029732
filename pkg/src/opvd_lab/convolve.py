"""Convolution smoothing of sampled and symbolic distributions.

The convolution is ``(Phi * rho)(x) = int phi(y) rho(y - x) dy``. Its dual
form is ``(1/2pi) int phi~(p) rho~(-p) exp(ipx) dp`` with the angular
Fourier convention of :mod:`opvd_lab.pu_testfn`.

Delta, heaviside and plane-wave mode fields are carried as exact tags and
convolved analytically; regular fields are integrated by quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import (
    ChartDomainError,
    DimensionMismatchError,
    IncompatibilityError,
    NumericalInconsistencyError,
    PreconditionError,
    UnsupportedError,
)
from .pu_testfn import TestFunction, fourier_transform, gaussian_transform, make_bump

TAG_KINDS = ("regular", "delta", "heaviside", "mode_set")
CHART_KINDS = ("flat", "circle", "polar", "sphere")


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class Chart:
    """Coordinate chart: flat box, unit circle, plane in polar or sphere patch.

    ``circle`` uses the angle, ``polar`` uses (r, theta) and ``sphere`` uses
    (theta, phi) on the unit sphere with theta the polar angle.
    """

    kind: str = "flat"
    dimension: int = 1

    def __post_init__(self):
        if self.kind not in CHART_KINDS:
            raise ValueError(f"unknown chart kind {self.kind!r}")

    @property
    def embed_dimension(self) -> int:
        return {"flat": self.dimension, "circle": 1, "polar": 2, "sphere": 3}[self.kind]

    def volume_factor(self, y):
        """kappa(y): the metric volume density in chart coordinates."""
        y = np.asarray(y, float)
        if self.kind == "polar":
            return y[..., 0]
        if self.kind == "sphere":
            return np.sin(y[..., 0])
        return np.ones(y.shape[:-1] if y.ndim > 1 else y.shape)

    def embed(self, y):
        y = np.asarray(y, float)
        if self.kind == "polar":
            r, t = y[..., 0], y[..., 1]
            return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
        if self.kind == "sphere":
            th, ph = y[..., 0], y[..., 1]
            return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
        return y

    def displacement(self, p, y):
        """Vector from p to y fed to the test function.

        Flat charts subtract coordinates, the circle wraps angles to
        (-pi, pi], polar and sphere charts subtract embedded positions.
        """
        p = np.asarray(p, float)
        y = np.asarray(y, float)
        if self.kind == "circle":
            d = y - p
            return np.mod(d + math.pi, 2 * math.pi) - math.pi
        if self.kind in ("polar", "sphere"):
            return self.embed(y) - self.embed(p)
        return y - p


FLAT1 = Chart("flat", 1)


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True)
class DistributionTag:
    kind: str = "regular"
    point: tuple = ()
    axis: int = 0
    modes: tuple = ()  # ((amplitude, (k_1, ..., k_d)), ...)

    def __post_init__(self):
        if self.kind not in TAG_KINDS:
            raise ValueError(f"unknown distribution tag {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("delta", "heaviside"):
            d["point"] = list(self.point)
            d["axis"] = self.axis
        if self.kind == "mode_set":
            d["modes"] = [
                {"amplitude": [complex(a).real, complex(a).imag], "k": list(k)} for a, k in self.modes
            ]
        return d


@dataclass(frozen=True, eq=False)
class SampledField:
    chart: Chart
    axes: tuple
    values: np.ndarray
    tag: DistributionTag = DistributionTag()
    source: Callable | None = None
    derivative_source: Callable | None = None
    routes: dict | None = None
    route_deviation: float | None = None
    provenance: tuple | None = None

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def spacing(self):
        return tuple(float(a[1] - a[0]) for a in self.axes)

    @property
    def dimension(self) -> int:
        return len(self.axes)

    def points(self):
        if self.dimension == 1:
            return np.asarray(self.axes[0], float)
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def resample(self, axes) -> "SampledField":
        """The same field definition evaluated on other axes."""
        axes = tuple(np.asarray(a, float) for a in axes)
        if self.provenance is not None and self.provenance[0] == "convolve_flat":
            _, base, f, kw = self.provenance
            return convolve_flat(base.resample(axes), f, **kw)
        if self.tag.kind == "regular":
            if self.source is None:
                raise UnsupportedError("sampled-only field cannot be resampled")
            return regular_field(axes, self.source, self.derivative_source, self.chart)
        return _tagged(self.chart, axes, self.tag)


def _check_axes(axes):
    axes = tuple(np.asarray(a, float) for a in axes)
    for a in axes:
        if a.ndim != 1 or a.size < 3:
            raise ValueError("each axis needs at least three points")
        d = np.diff(a)
        if not np.allclose(d, d[0], rtol=1e-9, atol=0):
            raise ValueError("grid spacing must be uniform per axis")
    return axes


def _mesh(axes):
    if len(axes) == 1:
        return axes[0]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def regular_field(axes, fn: Callable, dfn: Callable | None = None, chart: Chart | None = None) -> SampledField:
    """Field given by an exact pointwise function (and optional derivative)."""
    axes = _check_axes(axes if isinstance(axes, (tuple, list)) and np.ndim(axes[0]) == 1 else (axes,))
    chart = chart or Chart("flat", len(axes))
    vals = np.asarray(fn(_mesh(axes)), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise ValueError("field values must be finite")
    return SampledField(chart, axes, vals, DistributionTag("regular"), fn, dfn)


def sampled_field(axes, values, chart: Chart | None = None) -> SampledField:
    axes = _check_axes(axes if isinstance(axes, (tuple, list)) and np.ndim(axes[0]) == 1 else (axes,))
    vals = np.asarray(values, dtype=complex).reshape(tuple(len(a) for a in axes))
    if not np.all(np.isfinite(vals)):
        raise ValueError("field values must be finite")
    return SampledField(chart or Chart("flat", len(axes)), axes, vals)


def _tagged(chart, axes, tag):
    pts = _mesh(axes)
    if tag.kind == "delta":
        vals = np.zeros(pts.shape if len(axes) == 1 else pts.shape[:-1], dtype=complex)
    elif tag.kind == "heaviside":
        c = pts if len(axes) == 1 else pts[..., tag.axis]
        vals = np.where(c > tag.point[0], 1.0, np.where(c == tag.point[0], 0.5, 0.0)).astype(complex)
    else:
        vals = _mode_values(tag.modes, pts, len(axes))
    return SampledField(chart, axes, vals, tag)


def _mode_values(modes, pts, dim):
    pts = np.asarray(pts, float)
    x = pts[..., None] if dim == 1 else pts
    out = np.zeros(x.shape[:-1], dtype=complex)
    for a, k in modes:
        out += complex(a) * np.exp(1j * (x @ np.asarray(k, float)))
    return out


def delta_field(axes, at=0.0) -> SampledField:
    axes = _check_axes(axes if isinstance(axes, (tuple, list)) and np.ndim(axes[0]) == 1 else (axes,))
    return _tagged(Chart("flat", len(axes)), axes, DistributionTag("delta", tuple(np.atleast_1d(at).astype(float))))


def heaviside_field(axes, at: float = 0.0, axis: int = 0) -> SampledField:
    axes = _check_axes(axes if isinstance(axes, (tuple, list)) and np.ndim(axes[0]) == 1 else (axes,))
    if len(axes) != 1:
        raise UnsupportedError("heaviside fields are one-dimensional")
    return _tagged(Chart("flat", 1), axes, DistributionTag("heaviside", (float(at),), axis))


def mode_field(axes, modes: Sequence) -> SampledField:
    """Superposition of plane waves ``sum a exp(i k.x)``; ``modes`` holds (a, k)."""
    axes = _check_axes(axes if isinstance(axes, (tuple, list)) and np.ndim(axes[0]) == 1 else (axes,))
    norm = tuple((complex(a), tuple(np.atleast_1d(k).astype(float).tolist())) for a, k in modes)
    return _tagged(Chart("flat", len(axes)), axes, DistributionTag("mode_set", modes=norm))


def constant_field(axes, value: complex = 1.0) -> SampledField:
    """A constant is the k = 0 plane wave."""
    axes = _check_axes(axes if isinstance(axes, (tuple, list)) and np.ndim(axes[0]) == 1 else (axes,))
    return mode_field(axes, [(value, (0.0,) * len(axes))])


# ---------------------------------------------------------------------------
# helpers on test functions


def rho_tilde(f: TestFunction, k) -> np.ndarray:
    """Angular transform of f at momenta k (closed form for gaussians)."""
    if f.kind == "gaussian":
        return gaussian_transform(f, k)
    return fourier_transform(f, k, check_support=False).values


def _rho_tilde_cutoff(f: TestFunction, rel: float = 1e-14) -> float:
    """Momentum beyond which |rho~| stays below rel * |rho~(0)|."""
    if f.kind == "gaussian":
        return math.sqrt(2 * math.log(1 / rel)) / f.width
    m0 = abs(f.integral())
    width = f.outer_radius - getattr(f, "inner_radius", 0.0)
    p = 10.0 / width
    for _ in range(40):
        probe = np.linspace(p, 2 * p, 64)
        pts = probe if f.dimension == 1 else np.column_stack([probe] + [np.zeros_like(probe)] * (f.dimension - 1))
        if np.max(np.abs(rho_tilde(f, pts))) < rel * m0:
            return p
        p *= 2
    return p


def _cdf_tail(f: TestFunction, t: np.ndarray) -> np.ndarray:
    """int_t^inf rho(u) du for a one-dimensional test function."""
    if f.kind == "gaussian":
        z = (np.asarray(t, float) - f.center[0]) / (math.sqrt(2) * f.width)
        return 0.5 * f.integral() * special.erfc(z)
    lo, hi = f.support_box()
    lo, hi = float(lo[0]), float(hi[0])
    total = f.integral()
    out = np.empty(np.shape(t))
    flat = np.ravel(t)
    res = out.reshape(-1)
    cache: dict = {}
    for i, ti in enumerate(flat):
        if ti <= lo:
            res[i] = total
        elif ti >= hi:
            res[i] = 0.0
        else:
            key = float(ti)
            if key not in cache:
                val, _ = integrate.quad(lambda u: float(f(np.r_[u])[0]), key, hi, epsabs=1e-15, epsrel=1e-13, limit=200)
                cache[key] = val
            res[i] = cache[key]
    return out


def _mode_transform_direct(f: TestFunction, k) -> complex:
    """int exp(i k.u) rho(u) du by adaptive quadrature (d = 1) or radial reduction."""
    k = np.atleast_1d(np.asarray(k, float))
    if not np.any(k):
        return complex(f.integral())
    if f.dimension == 1:
        lo, hi = f.support_box()
        g = lambda u: float(f(np.r_[u])[0])  # noqa: E731
        re, _ = integrate.quad(g, lo[0], hi[0], weight="cos", wvar=k[0], epsabs=1e-14, limit=400)
        im, _ = integrate.quad(g, lo[0], hi[0], weight="sin", wvar=k[0], epsabs=1e-14, limit=400)
        return complex(re, im)
    return complex(rho_tilde(f, -k[None, :])[0])


def _u_grid(f: TestFunction, n: int):
    """Quadrature nodes and weights covering the support of f (tensor trapezoid)."""
    lo, hi = f.support_box()
    axes = [np.linspace(lo[i], hi[i], n) for i in range(f.dimension)]
    w1 = [np.full(n, a[1] - a[0]) for a in axes]
    for w in w1:
        w[0] *= 0.5
        w[-1] *= 0.5
    if f.dimension == 1:
        return axes[0][:, None], w1[0]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, f.dimension)
    wm = np.prod(np.stack(np.meshgrid(*w1, indexing="ij"), axis=-1).reshape(-1, f.dimension), axis=1)
    return mesh, wm


# ---------------------------------------------------------------------------
# flat convolution


def _direct_route(field: SampledField, f: TestFunction, quad_points: int):
    tag = field.tag
    x = field.points()
    d = field.dimension
    if tag.kind == "delta":
        a = np.asarray(tag.point, float)
        if d == 1:
            return f(a[0] - x).astype(complex)
        return f(a - x).astype(complex)
    if tag.kind == "heaviside":
        return _cdf_tail(f, tag.point[0] - x).astype(complex)
    if tag.kind == "mode_set":
        xx = x[..., None] if d == 1 else x
        out = np.zeros(xx.shape[:-1], dtype=complex)
        for a, k in tag.modes:
            out += a * np.exp(1j * (xx @ np.asarray(k))) * _mode_transform_direct(f, k)
        return out
    if field.source is not None:
        # int phi(x + u) rho(u) du, nodes on the support of rho
        u, w = _u_grid(f, quad_points)
        rho_w = f(u if d > 1 else u[:, 0]) * w
        xf = x.reshape(-1, d) if d > 1 else x.reshape(-1, 1)
        out = np.empty(xf.shape[0], dtype=complex)
        for i, xi in enumerate(xf):
            y = xi + u
            out[i] = np.dot(np.asarray(field.source(y if d > 1 else y[:, 0]), dtype=complex), rho_w)
        return out.reshape(field.shape if d > 1 else (-1,))
    # sampled values: trapezoid sum over the grid with exact rho
    if d != 1:
        raise UnsupportedError("direct route for sampled-only fields is one-dimensional")
    y = field.axes[0]
    h = field.spacing[0]
    w = np.full(y.size, h)
    w[0] = w[-1] = 0.5 * h
    ker = f(y[None, :] - y[:, None])
    return ker @ (w * field.values)


def _dual_integral(f: TestFunction, x: np.ndarray, phase_fn, reach: float):
    """(1/2pi) int phase_fn(p) rho~(-p) exp(ipx) dp on an adaptive trapezoid grid (d = 1)."""
    P = _rho_tilde_cutoff(f)
    dp = math.pi / (2.0 * (reach + f.support_radius + 1.0))
    n = int(math.ceil(P / dp))
    p = np.arange(-n, n + 1) * dp
    rt = rho_tilde(f, -p)
    integrand = phase_fn(p) * rt
    return (np.exp(1j * np.outer(x, p)) @ integrand) * dp / (2 * math.pi)


def _dual_route(field: SampledField, f: TestFunction, tol: float = 1e-8):
    tag = field.tag
    d = field.dimension
    x = field.points()
    if tag.kind == "mode_set":
        xx = x[..., None] if d == 1 else x
        out = np.zeros(xx.shape[:-1], dtype=complex)
        for a, k in tag.modes:
            kk = np.asarray(k, float)
            rt = rho_tilde(f, -kk if d > 1 else -kk[:1])
            out += a * np.exp(1j * (xx @ kk)) * complex(np.ravel(rt)[0])
        return out
    if d != 1 and tag.kind != "regular":
        return None
    if tag.kind == "delta":
        a = tag.point[0]
        reach = float(np.max(np.abs(x - a)))
        return _dual_integral(f, x, lambda p: np.exp(-1j * p * a), reach)
    if tag.kind == "heaviside":
        if abs(f.center[0]) > 0:
            return None  # the sine representation needs a reflection-symmetric rho
        t = tag.point[0] - x
        P = _rho_tilde_cutoff(f)
        reach = float(np.max(np.abs(t))) + f.support_radius + 1.0
        dp = math.pi / (2.0 * reach)
        p = np.arange(1, int(math.ceil(P / dp)) + 1) * dp
        rt = np.real(rho_tilde(f, p))
        # (1/pi) int_0^inf rho~(p) sin(pt)/p dp; the p = 0 node carries weight dp/2 and value t rho~(0)
        half = 0.5 * dp * t * f.integral()
        body = (np.sin(np.outer(t, p)) / p) @ rt * dp
        return 0.5 * f.integral() - (half + body) / math.pi + 0j
    # regular field: FFT of the samples, analytic rho~, zero padded against wrap-around
    vals = field.values
    edge = max(np.max(np.abs(np.take(vals, [0, -1], axis=ax))) for ax in range(d))
    if edge * max(1.0, abs(f.integral())) > 1e-3 * tol:
        return None  # non-decaying field: no periodic dual representation
    hs = field.spacing
    pads = [int(2 ** math.ceil(math.log2(n + 2 * math.ceil(f.support_radius / h) + 2))) for n, h in zip(field.shape, hs)]
    spec = np.fft.fftn(vals, s=pads)
    ks = [2 * math.pi * np.fft.fftfreq(n, h) for n, h in zip(pads, hs)]
    if d == 1:
        rt = rho_tilde(f, -ks[0])
    else:
        km = np.stack(np.meshgrid(*ks, indexing="ij"), axis=-1).reshape(-1, d)
        rt = rho_tilde(f, -km).reshape(pads)
    # phi~(p) rho~(-p) with phi~ = h sum v e^{-ipy}; inverse DFT brings (1/2pi) int dp
    out = np.fft.ifftn(spec * rt, s=pads)
    sl = tuple(slice(0, n) for n in field.shape)
    # undo the origin offset: phi~ used y_n = n h, result is rho centred at grid offset 0
    return out[sl]


def convolution_tolerance(field: SampledField) -> float:
    h = max(field.spacing)
    return max(1e-8, 10.0 * h * h)


def convolve_flat(field: SampledField, f: TestFunction, tol: float | None = None,
                  quad_points: int = 1025, require_dual: bool = False) -> SampledField:
    """Smooth ``field`` with ``f``; direct and dual-space routes are both attached.

    Raises :class:`NumericalInconsistencyError` if the routes differ by more
    than ``tol`` (default ``max(1e-8, 10 h^2)``). The dual route is omitted
    when the field has no Fourier representation on the grid (non-decaying
    regular fields, heaviside with an off-centre rho, tags in d > 1).
    """
    if field.chart.kind != "flat":
        raise UnsupportedError("convolve_flat needs a flat chart; use convolve_local")
    if f.dimension != field.dimension:
        raise DimensionMismatchError("test function and field dimensions differ")
    direct = np.asarray(_direct_route(field, f, quad_points))
    tol = convolution_tolerance(field) if tol is None else tol
    dual = _dual_route(field, f, tol if math.isfinite(tol) else 1e-8)
    dev = None
    if dual is None and require_dual:
        raise UnsupportedError("no dual-space route for this field")
    if dual is not None:
        dual = np.asarray(dual).reshape(direct.shape)
        dev = float(np.max(np.abs(direct - dual)))
        if dev > tol:
            raise NumericalInconsistencyError(
                f"direct and dual routes differ by {dev:.3e} (tolerance {tol:.1e})", deviation=dev
            )
    routes = {"direct": direct, "dual": dual}
    kw = {"tol": tol if tol != convolution_tolerance(field) else None, "quad_points": quad_points}
    return SampledField(field.chart, field.axes, direct, DistributionTag("regular"), None, None,
                        routes, dev, ("convolve_flat", field, f, kw))


def convolve_at(field: SampledField, f: TestFunction, x, quad_points: int = 257) -> complex:
    """Direct-route convolution at one arbitrary point of a flat chart."""
    one = replace(field, axes=tuple(np.array([xi - 1, xi, xi + 1], float) for xi in np.atleast_1d(x)))
    if field.tag.kind == "regular" and field.source is None:
        raise UnsupportedError("pointwise evaluation needs an exact source")
    vals = _direct_route(one, f, quad_points)
    idx = (1,) * field.dimension
    return complex(np.asarray(vals)[idx])


# ---------------------------------------------------------------------------
# smoothness under refinement


@dataclass
class SmoothnessReport:
    order: int
    spacing: float
    max_derivatives: list
    refinement_spacings: list
    derivative_errors: list  # error of the first derivative per refinement
    convergence_order: float | None
    quotient_growth: float | None  # log2 ratio of max |D_h| under halving
    unbounded: bool
    reference: str
    notes: list = field(default_factory=list)


def _central_derivatives(v, h, order):
    out = []
    cur = np.asarray(v)
    for _ in range(order):
        cur = np.gradient(cur, h, edge_order=2)
        out.append(cur)
    return out


def smoothness_report(field: SampledField, order: int = 3, refinements: int = 3,
                      exact_derivative: Callable | None = None, margin: float | None = None) -> SmoothnessReport:
    """Finite-difference derivatives and their convergence under grid halving.

    The first-derivative error is measured against ``exact_derivative`` when
    given (or known: the smoothed heaviside has derivative rho(a - x)),
    otherwise by self-convergence between successive grids. A raw
    (unsmoothed) heaviside is reported as unbounded because its difference
    quotients grow like 1/h.
    """
    if field.dimension != 1:
        raise UnsupportedError("smoothness_report works on one-dimensional fields")
    x0 = field.axes[0]
    lo, hi = float(x0[0]), float(x0[-1])
    margin = (hi - lo) * 0.05 if margin is None else margin
    ref_name = "self-convergence"
    if exact_derivative is None and field.provenance is not None:
        _, base, f, _ = field.provenance
        if base.tag.kind == "heaviside":
            a = base.tag.point[0]
            exact_derivative = lambda x: f(a - x)  # noqa: E731
        elif base.tag.kind == "delta":
            a = base.tag.point[0]
            exact_derivative = lambda x: -f.derivative(a - x)  # noqa: E731
    if exact_derivative is not None:
        ref_name = "exact derivative"
    ders = _central_derivatives(field.values, field.spacing[0], order)
    maxes = [float(np.max(np.abs(field.values)))] + [float(np.max(np.abs(d))) for d in ders]
    n0 = x0.size
    spacings, firsts, grids, maxd1 = [], [], [], []
    for j in range(refinements):
        n = (n0 - 1) * 2**j + 1
        axis = np.linspace(lo, hi, n)
        fj = field if j == 0 else field.resample((axis,))
        d1 = np.gradient(np.real(fj.values) if np.isrealobj(fj.values) else fj.values, axis[1] - axis[0], edge_order=2)
        spacings.append(float(axis[1] - axis[0]))
        firsts.append(d1)
        grids.append(axis)
        maxd1.append(float(np.max(np.abs(d1))))
    common = grids[0]
    inner = (common >= lo + margin) & (common <= hi - margin)
    errs = []
    if exact_derivative is not None:
        for j in range(refinements):
            sub = firsts[j][:: 2**j][inner]
            errs.append(float(np.max(np.abs(sub - exact_derivative(common[inner])))))
    else:
        for j in range(refinements - 1):
            a = firsts[j][:: 2**j][inner]
            b = firsts[j + 1][:: 2 ** (j + 1)][inner]
            errs.append(float(np.max(np.abs(a - b))))
    conv = None
    if len(errs) >= 2 and errs[-1] > 0 and errs[-2] > 0:
        conv = float(np.log2(errs[-2] / errs[-1]))
    growth = float(np.log2(maxd1[-1] / maxd1[-2])) if len(maxd1) >= 2 and maxd1[-2] > 0 else None
    unbounded = growth is not None and growth > 0.5
    notes = []
    if unbounded:
        notes.append(f"difference quotients grow like h^-{growth:.2f}: field is not smooth on this grid")
    return SmoothnessReport(order, field.spacing[0], maxes, spacings, errs, conv, growth, unbounded, ref_name, notes)


# ---------------------------------------------------------------------------
# derivative commutation


@dataclass
class CommutationReport:
    max_deviation: float
    pairwise: dict
    routes: dict
    method: str


def _convolve_with_derivative_kernel(field: SampledField, f: TestFunction, quad_points: int):
    """(Phi * rho')(x) = int phi(y) rho'(y - x) dy  (d = 1)."""
    x = field.points()
    tag = field.tag
    if tag.kind == "delta":
        return f.derivative(tag.point[0] - x).astype(complex)
    if tag.kind == "heaviside":
        return -f(tag.point[0] - x).astype(complex)
    if tag.kind == "mode_set":
        out = np.zeros(x.shape, dtype=complex)
        for a, k in tag.modes:
            # int e^{iky} rho'(y - x) dy = -ik e^{ikx} rho~(-k)
            out += a * (-1j * k[0]) * np.exp(1j * k[0] * x) * _mode_transform_direct(f, k)
        return out
    if field.source is None:
        y = field.axes[0]
        h = field.spacing[0]
        w = np.full(y.size, h)
        w[0] = w[-1] = 0.5 * h
        return f.derivative(y[None, :] - y[:, None]) @ (w * field.values)
    u, w = _u_grid(f, quad_points)
    du = f.derivative(u[:, 0]) * w
    return np.array([np.dot(np.asarray(field.source(xi + u[:, 0]), dtype=complex), du) for xi in x])


def _convolve_derivative_field(field: SampledField, f: TestFunction, quad_points: int):
    """(Phi' * rho)(x)."""
    x = field.points()
    tag = field.tag
    if tag.kind == "delta":
        # <delta'_a, rho(. - x)> = -rho'(a - x)
        return -f.derivative(tag.point[0] - x).astype(complex)
    if tag.kind == "heaviside":
        # H' = delta_a
        return f(tag.point[0] - x).astype(complex)
    if tag.kind == "mode_set":
        out = np.zeros(x.shape, dtype=complex)
        for a, k in tag.modes:
            out += a * (1j * k[0]) * np.exp(1j * k[0] * x) * _mode_transform_direct(f, k)
        return out
    if field.derivative_source is None:
        raise UnsupportedError("regular field needs derivative_source for the Phi' route")
    u, w = _u_grid(f, quad_points)
    rw = f(u[:, 0]) * w
    return np.array([np.dot(np.asarray(field.derivative_source(xi + u[:, 0]), dtype=complex), rw) for xi in x])


def derivative_commutation_check(field: SampledField, f: TestFunction, method: str = "auto",
                                 margin: int = 2, quad_points: int = 2049) -> CommutationReport:
    """Compare d/dx (Phi*rho), Phi'*rho and -(Phi*rho').

    With the ``rho(y - x)`` convention differentiating in x moves onto the
    kernel with a minus sign. The first route is a central finite
    difference (``fd``) or, for delta fields, the exact derivative of the
    output rho(a - x) (``analytic``); ``auto`` picks analytic for deltas.
    """
    if field.dimension != 1:
        raise UnsupportedError("derivative commutation is checked in one dimension")
    x = field.points()
    if method == "auto":
        method = "analytic" if field.tag.kind == "delta" else "fd"
    if method == "analytic":
        if field.tag.kind == "delta":
            r1 = -f.derivative(field.tag.point[0] - x).astype(complex)
        elif field.tag.kind == "heaviside":
            r1 = f(field.tag.point[0] - x).astype(complex)
        else:
            raise UnsupportedError("analytic output derivative is available for delta and heaviside tags")
    else:
        conv = convolve_flat(field, f, quad_points=quad_points, tol=np.inf).values
        r1 = np.gradient(conv, field.spacing[0], edge_order=2)
    r2 = _convolve_derivative_field(field, f, quad_points)
    r3 = -_convolve_with_derivative_kernel(field, f, quad_points)
    sl = slice(margin, -margin if margin else None)
    pair = {
        "d(conv)-conv(dphi)": float(np.max(np.abs(r1[sl] - r2[sl]))),
        "d(conv)-conv(drho)": float(np.max(np.abs(r1[sl] - r3[sl]))),
        "conv(dphi)-conv(drho)": float(np.max(np.abs(r2[sl] - r3[sl]))),
    }
    return CommutationReport(max(pair.values()), pair, {"d_conv": r1, "conv_dphi": r2, "neg_conv_drho": r3}, method)


# ---------------------------------------------------------------------------
# flows and local convolution


GENERATORS = {
    "circle_rotation": (lambda y: np.ones_like(y)),
    "plane_rotation": (lambda y: np.stack([-y[..., 1], y[..., 0]], axis=-1)),
    "polar_rotation": (lambda y: np.stack([np.zeros_like(y[..., 0]), np.ones_like(y[..., 1])], axis=-1)),
    "sphere_rotation": (lambda y: np.stack([np.zeros_like(y[..., 0]), np.ones_like(y[..., 1])], axis=-1)),
}


@dataclass(frozen=True)
class KillingFlow:
    """Flow of a metric-preserving vector field, integrated by fixed-step RK4.

    The default step 2 pi / 2048 returns points of the Cartesian plane
    rotation to their start within 1e-10 after a full revolution.
    """

    generator: str | Callable = "circle_rotation"
    step: float = 2 * math.pi / 2048
    scheme: str = "rk4"

    def vector(self, y):
        g = GENERATORS[self.generator] if isinstance(self.generator, str) else self.generator
        return g(np.asarray(y, float))

    def __call__(self, y, t: float):
        """Image of the points ``y`` after flowing for time ``t``."""
        y = np.asarray(y, float).copy()
        if t == 0:
            return y
        n = max(1, int(math.ceil(abs(t) / self.step - 1e-12)))
        h = t / n
        v = self.vector
        for _ in range(n):
            if self.scheme == "rk4":
                k1 = v(y)
                k2 = v(y + 0.5 * h * k1)
                k3 = v(y + 0.5 * h * k2)
                k4 = v(y + h * k3)
                y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            elif self.scheme == "euler":
                y = y + h * v(y)
            else:
                raise ValueError(f"unknown scheme {self.scheme!r}")
        return y


def metric_distortion(flow: KillingFlow, chart: Chart, points, t: float) -> float:
    """max | |F(a) - F(b)| - |a - b| | over point pairs, distances in the embedding."""
    pts = np.asarray(points, float)
    img = flow(pts, t)
    e0 = chart.embed(pts) if chart.kind != "circle" else np.stack([np.cos(pts), np.sin(pts)], -1)
    e1 = chart.embed(img) if chart.kind != "circle" else np.stack([np.cos(img), np.sin(img)], -1)
    e0 = e0.reshape(e0.shape[0], -1)
    e1 = e1.reshape(e1.shape[0], -1)
    d0 = np.linalg.norm(e0[:, None, :] - e0[None, :, :], axis=-1)
    d1 = np.linalg.norm(e1[:, None, :] - e1[None, :, :], axis=-1)
    return float(np.max(np.abs(d1 - d0)))


@dataclass(frozen=True)
class ChartPatch:
    """One chart of an atlas: a coordinate box and a product localizer.

    ``localizer`` holds one 1-d test function per coordinate; their product
    is alpha. For the circle the box is an arc (lo, hi) in angle.
    """

    chart: Chart
    lower: tuple
    upper: tuple
    localizer: tuple

    def alpha(self, y):
        y = np.asarray(y, float)
        if len(self.localizer) == 1:
            yy = y if y.ndim == 1 or y.shape[-1] != 1 else y[..., 0]
            if self.chart.kind == "circle":
                c = self.localizer[0].center[0]
                yy = c + np.mod(yy - c + math.pi, 2 * math.pi) - math.pi
            return self.localizer[0](yy)
        out = np.ones(y.shape[:-1])
        for i, a in enumerate(self.localizer):
            out = out * a(y[..., i])
        return out

    def shrunk_contains(self, p, margin: float) -> bool:
        p = np.atleast_1d(np.asarray(p, float))
        lo = np.asarray(self.lower) + margin
        hi = np.asarray(self.upper) - margin
        if self.chart.kind == "circle":
            c = 0.5 * (lo + hi)
            pw = c + np.mod(p - c + math.pi, 2 * math.pi) - math.pi
            return bool(np.all((pw >= lo) & (pw <= hi)))
        return bool(np.all((p >= lo) & (p <= hi)))


def interval_localizer(lower: float, upper: float, plateau_margin: float, profile: str = "smooth_step"):
    """Bump equal to one on [lower + margin, upper - margin], zero outside (lower, upper)."""
    c = 0.5 * (lower + upper)
    R = 0.5 * (upper - lower)
    return make_bump(c, R - plateau_margin, R, profile)


@dataclass(frozen=True)
class ChartAtlas:
    patches: tuple
    overlaps: tuple = ()

    def to_dict(self) -> dict:
        return {
            "charts": [
                {"kind": p.chart.kind, "lower": list(p.lower), "upper": list(p.upper),
                 "localizer": [a.to_dict() for a in p.localizer]}
                for p in self.patches
            ]
        }


def _chart_radius(patch: ChartPatch, f: TestFunction, p) -> np.ndarray:
    """Per-coordinate half-widths of a box holding {y : |disp(p, y)| < r}."""
    r = f.support_radius
    k = patch.chart.kind
    p = np.atleast_1d(np.asarray(p, float))
    if k in ("circle", "flat"):
        return np.full(p.size, r)
    if k == "polar":
        rp = p[0]
        return np.array([r, math.asin(r / rp) if r < rp else math.inf])
    ang = 2 * math.asin(min(1.0, r / 2))
    s = math.sin(p[0])
    return np.array([ang, math.asin(min(1.0, math.sin(ang) / s)) if math.sin(ang) < s else math.inf])


def _find_patch(atlas: ChartAtlas, f: TestFunction, p):
    for j, patch in enumerate(atlas.patches):
        rad = _chart_radius(patch, f, p)
        if np.all(np.isfinite(rad)) and patch.shrunk_contains(p, 2 * rad):
            return j, patch, rad
    raise ChartDomainError(f"point {np.atleast_1d(p).tolist()} lies outside every shrunken chart")


def _field_source(field: SampledField):
    if field.source is not None:
        return field.source
    if field.tag.kind == "mode_set":
        return lambda y: _mode_values(field.tag.modes, y, field.dimension)
    if field.tag.kind == "regular" and field.dimension == 1:
        from scipy.interpolate import CubicSpline

        spl = CubicSpline(field.axes[0], field.values, bc_type="periodic" if field.chart.kind == "circle" else "not-a-knot")
        return spl
    raise UnsupportedError("local convolution needs a regular field with a source or 1-d samples")


def convolve_local(field: SampledField, atlas: ChartAtlas, f: TestFunction, flow: KillingFlow | None,
                   p, t: float = 0.0, chart_index: int | None = None, nodes: int | None = None) -> complex:
    """Local convolution at chart point ``p``, test function transported by ``t``.

    Evaluates int alpha(y) phi(y) rho(disp(p, f_{-t}(y))) kappa(y) dy on the
    field grid of the chart (trapezoid, periodic on the circle). ``nodes``
    overrides the grid with a uniform one of that many points per axis.
    """
    if chart_index is None:
        j, patch, rad = _find_patch(atlas, f, p)
    else:
        patch = atlas.patches[chart_index]
        rad = _chart_radius(patch, f, p)
        if not (np.all(np.isfinite(rad)) and patch.shrunk_contains(p, 2 * rad)):
            raise ChartDomainError(f"point {np.atleast_1d(p).tolist()} is outside chart {chart_index} shrunk by 2r")
    chart = patch.chart
    src = _field_source(field)
    if nodes is None:
        axes = field.axes
    else:
        if chart.kind == "circle":
            axes = (np.linspace(0, 2 * math.pi, nodes, endpoint=False),)
        else:
            axes = tuple(np.linspace(patch.lower[i], patch.upper[i], nodes) for i in range(len(patch.lower)))
    y = _mesh(axes)
    pts = y if len(axes) > 1 else y[:, None]
    pulled = pts if (flow is None or t == 0) else flow(pts if len(axes) > 1 else pts[:, 0], -t)
    pulled = pulled if len(axes) > 1 else np.asarray(pulled).reshape(-1, 1)
    disp = chart.displacement(np.atleast_1d(p), pulled)
    rho = f(disp if disp.shape[-1] > 1 else disp[:, 0])
    vals = np.asarray(src(y), dtype=complex)
    kappa = chart.volume_factor(pts)
    alpha = patch.alpha(y if len(axes) > 1 else y)
    integrand = alpha * vals * rho * kappa
    w = 1.0
    for ax in axes:
        h = ax[1] - ax[0]
        wa = np.full(ax.size, h)
        if chart.kind != "circle":
            wa[0] = wa[-1] = 0.5 * h
        w = np.multiply.outer(w, wa) if np.ndim(w) else wa
    return complex(np.sum(w * integrand))


@dataclass
class LocalizerReport:
    deviation: float
    values: tuple


def localizer_independence_check(field: SampledField, atlas_a: ChartAtlas, atlas_b: ChartAtlas,
                                 f: TestFunction, p, flow: KillingFlow | None = None,
                                 chart_index: int = 0, probe_points: int = 257) -> LocalizerReport:
    """Local convolutions with two localizers that share the plateau.

    Both localizers must equal one on the chart shrunk by r; otherwise a
    :class:`PreconditionError` is raised.
    """
    vals = []
    for atlas in (atlas_a, atlas_b):
        patch = atlas.patches[chart_index]
        rad = _chart_radius(patch, f, p)
        lo = np.asarray(patch.lower) + rad
        hi = np.asarray(patch.upper) - rad
        grids = [np.linspace(lo[i], hi[i], probe_points) for i in range(lo.size)]
        mesh = _mesh(tuple(grids))
        a = patch.alpha(mesh)
        if np.any(a != 1.0):
            bad = float(np.max(np.abs(a - 1.0)))
            raise PreconditionError(f"localizer departs from 1 by {bad:.3e} on the chart shrunk by r")
        vals.append(convolve_local(field, atlas, f, flow, p, chart_index=chart_index))
    return LocalizerReport(float(abs(vals[0] - vals[1])), tuple(vals))


# ---------------------------------------------------------------------------
# recollection


def recollect(pieces: Sequence, period: float | None = None, tol: float = 1e-9) -> SampledField:
    """Glue one-dimensional local fields sampled on a common lattice.

    ``pieces`` is a list of :class:`SampledField` (or ``(chart, field)``
    pairs). Points are matched by lattice index; ``period`` wraps indices
    (for the circle). Overlap values must agree within ``tol``.
    """
    fields = [pc[1] if isinstance(pc, tuple) else pc for pc in pieces]
    if not fields:
        raise ValueError("nothing to recollect")
    h = fields[0].spacing[0]
    origin = float(fields[0].axes[0][0])
    nper = None
    if period is not None:
        nper = int(round(period / h))
        if abs(nper * h - period) > 1e-9 * period:
            raise IncompatibilityError("lattice spacing does not divide the period")
    store: dict = {}
    worst = (0.0, None)
    for fl in fields:
        if fl.dimension != 1 or abs(fl.spacing[0] - h) > 1e-12 * abs(h):
            raise IncompatibilityError("pieces must share one-dimensional lattice spacing")
        idx_f = (fl.axes[0] - origin) / h
        idx = np.rint(idx_f).astype(np.int64)
        if np.max(np.abs(idx_f - idx)) > 1e-6:
            raise IncompatibilityError("piece grid is off the common lattice")
        if nper is not None:
            idx = np.mod(idx, nper)
        for i, v in zip(idx.tolist(), fl.values.tolist()):
            if i in store:
                dev = abs(store[i] - v)
                if dev > worst[0]:
                    worst = (dev, i)
            else:
                store[i] = v
    if worst[0] > tol:
        pt = origin + worst[1] * h
        raise IncompatibilityError(
            f"pieces disagree by {worst[0]:.3e} at x={pt:.12g} (tolerance {tol:.1e})", point=pt, deviation=worst[0]
        )
    keys = sorted(store)
    axis = origin + np.asarray(keys, float) * h
    vals = np.asarray([store[k] for k in keys], dtype=complex)
    if nper is None and np.any(np.diff(keys) != 1):
        raise IncompatibilityError("pieces leave a hole in the union")
    chart = fields[0].chart
    return SampledField(chart, (axis,), vals, DistributionTag("regular"))
