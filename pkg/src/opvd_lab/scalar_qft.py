"""Free scalar field with test-function dressed propagators.

Momentum-space test functions are radial: f is evaluated at the Euclidean
length of the 4-momentum components. Integrated quantities are computed in
Euclidean signature only, where 4-d radial integrals carry the angular
volume 2 pi^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import OffShellError, PoleError, PreconditionError, ResolutionError, UnsupportedError
from .pu_testfn import TestFunction

ANGULAR_4D = 2 * math.pi**2


@dataclass(frozen=True)
class PropagatorSpec:
    mass: float = 1.0
    epsilon: float = 0.0
    testfn: TestFunction | None = None
    signature: str = "euclidean"

    def __post_init__(self):
        if self.mass < 0:
            raise PreconditionError("mass must be nonnegative")
        if self.signature not in ("euclidean", "minkowski"):
            raise PreconditionError("signature must be 'euclidean' or 'minkowski'")
        if self.epsilon < 0:
            raise PreconditionError("epsilon must be nonnegative")
        f = self.testfn
        if f is not None:
            if f.kind not in ("bump", "gaussian") or np.any(np.asarray(f.center) != 0):
                raise PreconditionError("momentum test function must be radial about the origin")

    def profile(self, r):
        """f at radius r; identically 1 without a test function."""
        r = np.asarray(r, float)
        if self.testfn is None:
            return np.ones_like(r)
        return radial_value(self.testfn, r)

    @property
    def support_radius(self) -> float:
        return math.inf if self.testfn is None else self.testfn.support_radius

    def to_dict(self) -> dict:
        return {"mass": self.mass, "epsilon": self.epsilon, "signature": self.signature,
                "testfn": None if self.testfn is None else self.testfn.to_dict()}


def radial_value(f: TestFunction, r):
    r = np.asarray(r, float)
    pts = np.zeros(r.shape + (f.dimension,))
    pts[..., 0] = r
    return f(pts) if f.dimension > 1 else f(r)


def _split(p):
    p = np.asarray(p, float)
    if p.shape[-1] != 4:
        raise PreconditionError("momenta are 4-vectors")
    return p


def dressed_propagator(p, spec: PropagatorSpec):
    """f^2/(p^2 + m^2) (euclidean) or f^2/(p^2 - m^2 + i eps) (minkowski, p^2 = p0^2 - |p|^2)."""
    p = _split(p)
    f2 = spec.profile(np.linalg.norm(p, axis=-1)) ** 2
    m2 = spec.mass**2
    if spec.signature == "euclidean":
        den = np.sum(p**2, axis=-1) + m2
        if np.any((den == 0) & (f2 != 0)):
            raise PoleError("massless propagator at p = 0")
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(f2 == 0, 0.0, f2 / np.where(den == 0, 1.0, den))
        return out if out.ndim else float(out)
    p2 = p[..., 0] ** 2 - np.sum(p[..., 1:] ** 2, axis=-1)
    den = p2 - m2 + 1j * spec.epsilon
    if spec.epsilon == 0 and np.any((np.abs(den) <= 1e-14 * max(1.0, m2)) & (f2 != 0)):
        raise PoleError("on-shell momentum with epsilon = 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(f2 == 0, 0.0, f2 / np.where(den == 0, 1.0, den))
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# generating functional


@dataclass(frozen=True)
class SourceConfig:
    """Radial source J(|p|) on r, or a Cartesian 4-d grid with axes."""

    values: np.ndarray
    r: np.ndarray | None = None
    axes: tuple | None = None

    def __post_init__(self):
        if (self.r is None) == (self.axes is None):
            raise PreconditionError("give either a radial grid r or Cartesian axes")
        if self.axes is not None:
            v = np.asarray(self.values)
            flipped = np.conj(v[::-1, ::-1, ::-1, ::-1])
            symmetric = all(np.allclose(ax, -ax[::-1], atol=1e-12) for ax in self.axes)
            if symmetric and np.max(np.abs(v - flipped)) > 1e-12 * max(1.0, np.max(np.abs(v))):
                raise PreconditionError("source must satisfy J(-p) = conj J(p)")


def radial_source(f_or_fn, r) -> SourceConfig:
    r = np.asarray(r, float)
    vals = radial_value(f_or_fn, r) if isinstance(f_or_fn, TestFunction) else np.asarray(f_or_fn(r))
    return SourceConfig(vals, r=r)


def _check_resolution(spec: PropagatorSpec, spacing: float, edge_weight: float):
    f = spec.testfn
    if f is not None:
        width = (f.outer_radius - f.inner_radius) if f.kind == "bump" else f.width
        if spacing > width / 8:
            raise ResolutionError(f"grid spacing {spacing:.3g} does not resolve the test function "
                                  f"(needs <= {width / 8:.3g})", required_spacing=width / 8)
    if edge_weight > 1e-12:
        raise ResolutionError("source times test function does not vanish at the grid edge")


def generating_functional(J: SourceConfig, spec: PropagatorSpec) -> complex:
    """Z(J) = exp[-1/2 int d^4p |J(p)|^2 f^2/(p^2 + m^2)] in Euclidean signature."""
    if spec.signature != "euclidean":
        raise UnsupportedError("integrated quantities are evaluated in euclidean signature only")
    vals = np.asarray(J.values)
    if not np.any(vals):
        return 1.0 + 0j
    if J.r is not None:
        r = np.asarray(J.r, float)
        weight = np.abs(vals) ** 2 * spec.profile(r) ** 2
        _check_resolution(spec, float(np.max(np.diff(r))), float(weight[-1]))
        with np.errstate(divide="ignore", invalid="ignore"):
            kernel = np.where(r > 0, r**3 / (r**2 + spec.mass**2), 0.0)
        expo = -0.5 * ANGULAR_4D * integrate.simpson(kernel * weight, x=r)
    else:
        axes = [np.asarray(a, float) for a in J.axes]
        P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        D = dressed_propagator(P, spec)
        rim = max(float(np.max(np.abs(np.take(vals**2 * D, i, axis=ax)))) for ax in range(4) for i in (0, -1))
        _check_resolution(spec, max(float(a[1] - a[0]) for a in axes), rim)
        w = [np.full(a.size, a[1] - a[0]) for a in axes]
        for wk in w:
            wk[0] = wk[-1] = 0.5 * wk[0]
        W = np.einsum("i,j,k,l->ijkl", *w)
        expo = -0.5 * float(np.sum(W * np.abs(vals) ** 2 * D))
    return complex(math.exp(expo))


def log_z_oracle(f: TestFunction, spec: PropagatorSpec) -> float:
    """Adaptive radial quadrature of log Z for J = f, panels split at the bump radii."""
    def g(r):
        v = float(radial_value(f, np.array([r]))[0]) * float(spec.profile(np.array([r]))[0])
        return ANGULAR_4D * r**3 * v * v / (r * r + spec.mass**2)

    edges = [0.0, f.inner_radius, f.outer_radius] if f.kind == "bump" else [0.0, f.support_radius]
    edges = sorted(set(e for e in edges if e >= 0))
    total = sum(integrate.quad(g, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)[0] for a, b in zip(edges, edges[1:]))
    return -0.5 * total


# ---------------------------------------------------------------------------
# n-point functions


def _pairings(idx):
    if not idx:
        yield []
        return
    a = idx[0]
    for k in range(1, len(idx)):
        rest = idx[1:k] + idx[k + 1:]
        for tail in _pairings(rest):
            yield [(a, idx[k])] + tail


def contraction(p, q, spec: PropagatorSpec, tol: float = 1e-12):
    """Propagator between field modes labelled p and q: D(p) when q = +-p, else 0."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    if np.max(np.abs(p + q)) <= tol or np.max(np.abs(p - q)) <= tol:
        return dressed_propagator(p, spec)
    return 0.0


def npoint_function(momenta: Sequence, spec: PropagatorSpec) -> complex:
    """Wick sum over pairings of dressed propagators; odd n gives 0."""
    ps = [np.asarray(p, float) for p in momenta]
    if len(ps) % 2:
        return 0.0
    total = 0.0
    for pairing in _pairings(list(range(len(ps)))):
        term = 1.0
        for a, b in pairing:
            term = term * contraction(ps[a], ps[b], spec)
            if term == 0:
                break
        total = total + term
    return total


def mode_moment_oracle(variances: Sequence[float], labels: Sequence[int], nodes: int = 20) -> float:
    """E[prod_k phi_{labels[k]}] for independent modes with the given variances, by Gauss-Hermite."""
    u, w = np.polynomial.hermite.hermgauss(nodes)
    total = 1.0
    for mode, var in enumerate(variances):
        power = sum(1 for l in labels if l == mode)
        x = math.sqrt(2 * var) * u
        total *= float(np.sum(w * x**power) / math.sqrt(math.pi))
    return total


# ---------------------------------------------------------------------------
# Klein-Gordon residual


def _mode_value(modes, X, f: TestFunction | None):
    out = np.zeros(X.shape[:-1])
    for md in modes:
        k = np.asarray(md["k"], float)
        om = float(md["omega"])
        dress = 1.0 if f is None else float(radial_value(f, np.array([math.sqrt(om * om + k @ k)]))[0])
        phase = om * X[..., 0] - X[..., 1:] @ k + float(md.get("phase", 0.0))
        out += float(md.get("amplitude", 1.0)) * dress * np.cos(phase)
    return out


def on_shell_modes(ks, m: float, phases=None):
    ks = [np.asarray(k, float) for k in ks]
    phases = phases or [0.0] * len(ks)
    return [{"k": k.tolist(), "omega": math.sqrt(k @ k + m * m), "amplitude": 1.0, "phase": ph} for k, ph in zip(ks, phases)]


def klein_gordon_residual(modes: Sequence[dict], f: TestFunction | None, h_schedule: Sequence[float], m: float,
                          points=None) -> dict:
    """Max |(box_h + m^2) phi| at sample points for each spacing h, box = d_t^2 - laplacian.

    Each mode is a dict with k (3-vector), omega, amplitude, phase and must
    satisfy omega^2 = |k|^2 + m^2.
    """
    for md in modes:
        k = np.asarray(md["k"], float)
        om = float(md["omega"])
        if abs(om**2 - k @ k - m * m) > 1e-12 * max(1.0, om**2):
            raise OffShellError(f"mode k={k.tolist()} has omega^2 - k^2 - m^2 = {om**2 - k @ k - m * m:.3g}")
    if points is None:
        points = np.random.default_rng(0).uniform(-1, 1, size=(16, 4))
    X = np.asarray(points, float)
    res = []
    sign = np.array([1.0, -1.0, -1.0, -1.0])
    for h in h_schedule:
        c = _mode_value(modes, X, f)
        box = np.zeros(len(X))
        for mu in range(4):
            e = np.zeros(4)
            e[mu] = h
            box += sign[mu] * (_mode_value(modes, X + e, f) - 2 * c + _mode_value(modes, X - e, f)) / h**2
        res.append(float(np.max(np.abs(box + m * m * c))))
    hs = np.asarray(h_schedule, float)
    ratios = [res[i] / res[i + 1] for i in range(len(res) - 1)]
    order = float(np.polyfit(np.log(hs), np.log(res), 1)[0]) if len(res) > 1 else math.nan
    return {"h": hs.tolist(), "residual": res, "ratios": ratios, "order": order}


# ---------------------------------------------------------------------------
# one-loop tadpole


def _tadpole_dressed(spec: PropagatorSpec, cutoff: float) -> float:
    f = spec.testfn
    m2 = spec.mass**2

    def g(r):
        v = float(spec.profile(np.array([r]))[0])
        return r**3 * v * v / (r * r + m2) if m2 > 0 else r * v * v

    edges = [0.0, cutoff]
    if f is not None and f.kind == "bump":
        edges = sorted({0.0, min(f.inner_radius, cutoff), min(f.outer_radius, cutoff), cutoff})
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        if b > a:
            total += integrate.quad(g, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
    return ANGULAR_4D * total


def _tadpole_undressed(m: float, cutoff: float) -> float:
    """2 pi^2 int_0^L r^3/(r^2 + m^2) dr = pi^2 [L^2 - m^2 log(1 + L^2/m^2)]."""
    if m == 0:
        return math.pi**2 * cutoff**2
    return math.pi**2 * (cutoff**2 - m * m * math.log1p(cutoff**2 / (m * m)))


def oneloop_tadpole(spec: PropagatorSpec, cutoffs: Sequence[float] = (4, 8, 16, 32), stable_tol: float = 1e-6) -> dict:
    """Tadpole with and without the test function for each cutoff, with verdicts and a growth fit."""
    if spec.signature != "euclidean":
        raise UnsupportedError("tadpole is evaluated in euclidean signature only")
    cut = [float(c) for c in cutoffs]
    dressed = [_tadpole_dressed(spec, c) for c in cut] if spec.testfn is not None else None
    bare_spec = PropagatorSpec(spec.mass, spec.epsilon, None, "euclidean")
    bare = [_tadpole_dressed(bare_spec, c) for c in cut]
    bare_closed = [_tadpole_undressed(spec.mass, c) for c in cut]
    exponent = float(np.polyfit(np.log(cut), np.log(bare), 1)[0]) if len(cut) > 1 else math.nan
    out = {"cutoffs": cut, "undressed": bare, "undressed_closed_form": bare_closed, "growth_exponent": exponent,
           "undressed_verdict": "divergent" if exponent > 0.5 else "finite"}
    if dressed is not None:
        beyond = [d for c, d in zip(cut, dressed) if c >= spec.support_radius]
        spread = (max(beyond) - min(beyond)) / abs(beyond[0]) if len(beyond) > 1 else math.nan
        out.update(dressed=dressed, relative_spread=spread,
                   verdict="finite" if math.isfinite(spread) and spread < stable_tol else "unstable")
    return out
