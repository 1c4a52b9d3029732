"""Partition-of-unity test functions.

Bumps are radial: identically one on the inner ball of radius ``r``, zero
outside the outer ball of radius ``R`` and smooth in between. A partition of
unity is built from bumps on a cover by normalising, ``f_j = b_j / sum_k b_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import (
    DimensionMismatchError,
    InvalidGeometryError,
    ResolutionError,
    UncoveredPointError,
    UnsupportedError,
)

PROFILES = ("smooth_step", "exp_bump")
KINDS = ("bump", "gaussian", "pu_member")

# Gaussians are treated as supported on |x - c| <= GAUSS_CUT * width when
# sampling; exp(-GAUSS_CUT**2 / 2) is far below double precision.
GAUSS_CUT = 12.0


def _g(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _g_prime(t):
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    out[pos] = np.exp(-1.0 / tp) / tp**2
    return out


def transition(s, profile: str = "smooth_step"):
    """Profile value at normalised radius ``s``; 1 for s <= 0, 0 for s >= 1.

    ``smooth_step`` is the C-infinity step g(1-s) / (g(1-s) + g(s)) with
    g(t) = exp(-1/t). ``exp_bump`` is exp(1 - 1/(1 - s^2)), which is flat to
    first order at s = 0 only.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    out[s <= 0] = 1.0
    mid = (s > 0) & (s < 1)
    sm = s[mid]
    if profile == "smooth_step":
        a = _g(1.0 - sm)
        b = _g(sm)
        out[mid] = a / (a + b)
    elif profile == "exp_bump":
        out[mid] = np.exp(1.0 - 1.0 / (1.0 - sm * sm))
    else:
        raise ValueError(f"unknown profile {profile!r}; choose from {PROFILES}")
    return out


def transition_prime(s, profile: str = "smooth_step"):
    """Derivative of :func:`transition` with respect to ``s``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    mid = (s > 0) & (s < 1)
    sm = s[mid]
    if profile == "smooth_step":
        a, b = _g(1.0 - sm), _g(sm)
        da, db = -_g_prime(1.0 - sm), _g_prime(sm)
        out[mid] = (da * b - a * db) / (a + b) ** 2
    elif profile == "exp_bump":
        v = np.exp(1.0 - 1.0 / (1.0 - sm * sm))
        out[mid] = v * (-2.0 * sm / (1.0 - sm * sm) ** 2)
    else:
        raise ValueError(f"unknown profile {profile!r}")
    return out


@dataclass(frozen=True)
class TestFunction:
    """Smooth rapidly decreasing scalar map with its support metadata.

    For ``kind='gaussian'`` the function is ``amplitude * exp(-|x-c|^2 / 2w^2)``
    and the radii are (0, inf). For ``kind='pu_member'`` the value is the
    ``member_index``-th normalised bump of ``siblings``.
    """

    __test__ = False  # not a pytest class

    dimension: int
    kind: str
    center: tuple
    inner_radius: float
    outer_radius: float
    profile: str = "smooth_step"
    tensor_rank: int = 0
    amplitude: float = 1.0
    width: float = 1.0
    siblings: tuple = ()
    member_index: int = -1

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        if self.dimension == 1:
            # arrays of scalars; an explicit trailing axis of length 1 is accepted too
            return x if (x.ndim >= 2 and x.shape[-1] == 1) else x[..., None]
        if x.shape[-1] != self.dimension:
            raise DimensionMismatchError(
                f"points have {x.shape[-1]} coordinates, function has dimension {self.dimension}"
            )
        return x

    def radius(self, x):
        pts = self._points(x)
        return np.linalg.norm(pts - np.asarray(self.center, dtype=float), axis=-1)

    def __call__(self, x):
        if self.kind == "pu_member":
            bumps = np.stack([b(x) for b in self.siblings])
            total = bumps.sum(axis=0)
            own = bumps[self.member_index]
            out = np.zeros_like(total)
            ok = total > 0
            out[ok] = own[ok] / total[ok]
            return out
        rad = self.radius(x)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-0.5 * (rad / self.width) ** 2)
        s = (rad - self.inner_radius) / (self.outer_radius - self.inner_radius)
        return self.amplitude * transition(s, self.profile)

    def radial_derivative(self, rad):
        """d f / d|x| as a function of the radius (bump and gaussian kinds)."""
        rad = np.asarray(rad, dtype=float)
        if self.kind == "gaussian":
            return -self.amplitude * rad / self.width**2 * np.exp(-0.5 * (rad / self.width) ** 2)
        if self.kind == "bump":
            span = self.outer_radius - self.inner_radius
            return self.amplitude * transition_prime((rad - self.inner_radius) / span, self.profile) / span
        raise UnsupportedError("pu members are not radial")

    def derivative(self, x):
        """First derivative in one dimension, analytic for radial kinds."""
        if self.dimension != 1:
            raise UnsupportedError("analytic derivative provided for d=1 only")
        x = np.asarray(x, dtype=float)
        if self.kind == "pu_member":
            vals = np.stack([b(x) for b in self.siblings])
            ders = np.stack([b.derivative(x) for b in self.siblings])
            tot, dtot = vals.sum(0), ders.sum(0)
            out = np.zeros_like(tot)
            ok = tot > 0
            j = self.member_index
            out[ok] = (ders[j][ok] * tot[ok] - vals[j][ok] * dtot[ok]) / tot[ok] ** 2
            return out
        d = x - self.center[0]
        return self.radial_derivative(np.abs(d)) * np.sign(d)

    @property
    def support_radius(self) -> float:
        if self.kind == "gaussian":
            return GAUSS_CUT * self.width
        if self.kind == "pu_member":
            return self.siblings[self.member_index].outer_radius
        return self.outer_radius

    def support_box(self):
        if self.kind == "pu_member":
            own = self.siblings[self.member_index]
            c = np.asarray(own.center, float)
            return c - own.outer_radius, c + own.outer_radius
        c = np.asarray(self.center, float)
        return c - self.support_radius, c + self.support_radius

    def integral(self) -> float:
        """Integral over R^d (closed form for gaussians, radial quadrature otherwise)."""
        d = self.dimension
        if self.kind == "gaussian":
            return self.amplitude * (2 * math.pi * self.width**2) ** (d / 2)
        if self.kind == "pu_member":
            lo, hi = self.support_box()
            if d != 1:
                raise UnsupportedError("pu member integral provided for d=1 only")
            xs = np.linspace(lo[0], hi[0], 4097)
            return float(np.trapezoid(self(xs), xs))
        from scipy import integrate

        span = self.outer_radius - self.inner_radius
        val, _ = integrate.quad(
            lambda r: r ** (d - 1) * float(transition(np.r_[(r - self.inner_radius) / span], self.profile)[0]),
            self.inner_radius, self.outer_radius, epsabs=1e-15, epsrel=1e-13, limit=200,
        )
        area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
        return self.amplitude * area * (self.inner_radius**d / d + val)

    def normalized(self) -> "TestFunction":
        """Copy rescaled to unit integral."""
        total = self.integral()
        return _replace(self, amplitude=self.amplitude / total)

    def to_dict(self) -> dict:
        d = {
            "dimension": self.dimension,
            "kind": self.kind,
            "center": list(map(float, self.center)),
            "inner_radius": float(self.inner_radius),
            "outer_radius": float(self.outer_radius) if math.isfinite(self.outer_radius) else "inf",
            "transition_profile": self.profile,
            "tensor_rank": self.tensor_rank,
            "amplitude": float(self.amplitude),
        }
        if self.kind == "gaussian":
            d["width"] = float(self.width)
        if self.kind == "pu_member":
            d["member_index"] = self.member_index
            d["siblings"] = [s.to_dict() for s in self.siblings]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TestFunction":
        outer = d.get("outer_radius", "inf")
        outer = math.inf if outer == "inf" else float(outer)
        sib = tuple(cls.from_dict(s) for s in d.get("siblings", ()))
        return cls(
            dimension=int(d["dimension"]),
            kind=d["kind"],
            center=tuple(float(c) for c in d["center"]),
            inner_radius=float(d.get("inner_radius", 0.0)),
            outer_radius=outer,
            profile=d.get("transition_profile", "smooth_step"),
            tensor_rank=int(d.get("tensor_rank", 0)),
            amplitude=float(d.get("amplitude", 1.0)),
            width=float(d.get("width", 1.0)),
            siblings=sib,
            member_index=int(d.get("member_index", -1)),
        )


def _replace(tf: TestFunction, **changes) -> TestFunction:
    import dataclasses

    return dataclasses.replace(tf, **changes)


def _as_center(center) -> tuple:
    c = np.atleast_1d(np.asarray(center, dtype=float))
    return tuple(float(v) for v in c)


def make_bump(center, r: float, R: float, profile: str = "smooth_step") -> TestFunction:
    """Radial bump equal to 1 on ``|x - center| <= r`` and 0 for ``>= R``."""
    if not (0 < r < R) or not math.isfinite(R):
        raise InvalidGeometryError(f"need 0 < r < R < inf, got r={r}, R={R}")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {PROFILES}")
    c = _as_center(center)
    return TestFunction(len(c), "bump", c, float(r), float(R), profile)


def make_gaussian(center, width: float, amplitude: float = 1.0, normalized: bool = False) -> TestFunction:
    if width <= 0:
        raise InvalidGeometryError("gaussian width must be positive")
    c = _as_center(center)
    if normalized:
        amplitude = 1.0 / (2 * math.pi * width**2) ** (len(c) / 2)
    return TestFunction(len(c), "gaussian", c, 0.0, math.inf, "gaussian", amplitude=amplitude, width=width)


@dataclass(frozen=True)
class PartitionOfUnity:
    members: tuple
    cover: tuple
    domain: tuple  # (lower corner, upper corner)

    def __call__(self, x):
        return np.stack([m(x) for m in self.members])

    def to_dict(self) -> dict:
        return {
            "cover": [[list(c[0]), float(c[1])] for c in self.cover],
            "domain": [list(self.domain[0]), list(self.domain[1])],
            "members": [m.to_dict() for m in self.members],
        }


def _normalise_cover(cover) -> list:
    """Accept 1-d intervals (a, b) or balls (center, radius)."""
    balls = []
    for el in cover:
        a, b = el
        if np.ndim(a) == 0 and np.ndim(b) == 0 and not isinstance(el, dict):
            a, b = float(a), float(b)
            if b <= a:
                raise InvalidGeometryError(f"empty interval ({a}, {b})")
            balls.append(((0.5 * (a + b),), 0.5 * (b - a)))
        else:
            c = _as_center(a)
            if float(b) <= 0:
                raise InvalidGeometryError("ball radius must be positive")
            balls.append((c, float(b)))
    return balls


def domain_grid(domain, points_per_axis: int = 1024):
    lo = np.atleast_1d(np.asarray(domain[0], float))
    hi = np.atleast_1d(np.asarray(domain[1], float))
    axes = [np.linspace(lo[i], hi[i], points_per_axis) for i in range(lo.size)]
    if lo.size == 1:
        return axes[0]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def make_pu(cover, domain, plateau_fraction: float = 0.5, profile: str = "smooth_step",
            points_per_axis: int | None = None) -> PartitionOfUnity:
    """Normalised bumps on ``cover``; checks that the domain is covered.

    ``domain`` is ``(lo, hi)`` with scalars in 1-d or corner vectors. Each
    cover element carries a bump with outer radius equal to the element
    radius and plateau radius ``plateau_fraction`` times that.
    """
    balls = _normalise_cover(cover)
    dim = len(balls[0][0])
    if points_per_axis is None:
        points_per_axis = 1024 if dim == 1 else 64
    bumps = tuple(make_bump(c, plateau_fraction * R, R, profile) for c, R in balls)
    grid = domain_grid(domain, points_per_axis)
    total = np.sum([b(grid) for b in bumps], axis=0)
    bad = total <= 0
    if bad.any():
        raise UncoveredPointError(_gap_witness(grid, bad))
    members = tuple(
        TestFunction(dim, "pu_member", bumps[j].center, bumps[j].inner_radius, bumps[j].outer_radius,
                     profile, siblings=bumps, member_index=j)
        for j in range(len(bumps))
    )
    lo = tuple(np.atleast_1d(np.asarray(domain[0], float)).tolist())
    hi = tuple(np.atleast_1d(np.asarray(domain[1], float)).tolist())
    return PartitionOfUnity(members, tuple(balls), (lo, hi))


def _gap_witness(grid, bad):
    """Middle of the longest run of uncovered points (1-d) or first bad point."""
    if grid.ndim == 1:
        idx = np.flatnonzero(bad)
        runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
        longest = max(runs, key=len)
        return float(0.5 * (grid[longest[0]] + grid[longest[-1]]))
    return tuple(grid[np.flatnonzero(bad)[0]].tolist())


def pu_sum_deviation(pu: PartitionOfUnity, points_per_axis: int | None = None) -> float:
    """max |sum_j f_j - 1| over the domain grid."""
    ppa = points_per_axis or (1024 if len(pu.domain[0]) == 1 else 64)
    grid = domain_grid(pu.domain, ppa)
    return float(np.max(np.abs(pu(grid).sum(axis=0) - 1.0)))


# ---------------------------------------------------------------------------
# Fourier transform


@dataclass(frozen=True)
class DualSample:
    """Samples of a transform on a momentum grid."""

    momenta: np.ndarray
    values: np.ndarray
    convention: str
    spatial_spacing: float


def _momentum_array(grid, dim):
    p = np.asarray(grid, dtype=float)
    if dim == 1:
        return p.reshape(-1)
    return p.reshape(-1, dim)


def fourier_transform(f: TestFunction, grid, convention: str = "angular",
                      samples: int | None = None, check_support: bool = True) -> DualSample:
    """Transform ``f`` to momentum space.

    ``angular``: f~(p) = int f(x) exp(-i<p,x>) dx.
    ``symmetric``: f^(xi) = int f(x) exp(-2 pi i <xi,x>) dx, the unitary
    2 pi-symmetric variant.

    One-dimensional functions are integrated by the trapezoid rule over their
    support; radial functions in d > 1 go through the Hankel reduction.
    """
    if convention not in ("angular", "symmetric"):
        raise ValueError("convention must be 'angular' or 'symmetric'")
    p = _momentum_array(grid, f.dimension)
    scale = 2 * math.pi if convention == "symmetric" else 1.0
    k = p * scale  # angular momenta actually used
    L = 2 * f.support_radius
    kmax = float(np.max(np.abs(k))) if k.size else 0.0
    samples = samples or max(1025, int(8 * kmax * L / math.pi) + 1)
    h = L / (samples - 1)
    if kmax * h > math.pi:
        raise ResolutionError(
            f"spatial spacing {h:g} under-resolves momentum {kmax:g}", required_spacing=math.pi / kmax
        )
    if check_support and f.kind != "gaussian" and f.dimension == 1 and p.size > 2:
        dp = np.diff(np.sort(k))
        dp = dp[dp > 0]
        if dp.size and dp.max() > 2 * math.pi / L * (1 + 1e-12):
            raise ResolutionError(
                f"momentum spacing {dp.max():g} does not resolve support of length {L:g}",
                required_spacing=2 * math.pi / L / scale,
            )
    if f.dimension == 1:
        lo, hi = f.support_box()
        xs = np.linspace(lo[0], hi[0], samples)
        fx = f(xs)
        w = np.full(samples, h)
        w[0] = w[-1] = 0.5 * h
        wf = w * fx
        vals = np.empty(k.size, dtype=complex)
        # blocks of momenta bound the memory; each row sums in a fixed order
        for i in range(0, k.size, 256):
            vals[i:i + 256] = np.exp(-1j * np.outer(k[i:i + 256], xs)) @ wf
        return DualSample(p, vals, convention, h)
    if f.kind == "pu_member":
        raise UnsupportedError("pu members in d > 1 are not radial; transform them by sampling")
    d = f.dimension
    r = np.linspace(0.0, f.support_radius, samples)
    h = r[1] - r[0]
    fr = f(np.column_stack([r] + [np.zeros_like(r)] * (d - 1)) + np.asarray(f.center))
    kn = np.linalg.norm(k, axis=-1)
    nu = d / 2 - 1
    vals = np.empty(kn.shape, dtype=complex)
    w = np.full(samples, h)
    w[0] = w[-1] = 0.5 * h
    area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    for i, kk in enumerate(kn):
        if kk == 0:
            vals[i] = area * np.sum(w * fr * r ** (d - 1))
        else:
            kr = kk * r
            # (2pi)^{d/2} k^{-nu} int f(r) J_nu(kr) r^{d/2} dr
            vals[i] = (2 * math.pi) ** (d / 2) * kk ** (-nu) * np.sum(w * fr * special.jv(nu, kr) * r ** (d / 2))
    vals = vals * np.exp(-1j * k @ np.asarray(f.center))
    return DualSample(p, vals, convention, h)


def gaussian_transform(f: TestFunction, p, convention: str = "angular"):
    """Closed-form transform of a gaussian-kind test function."""
    if f.kind != "gaussian":
        raise UnsupportedError("closed form available for gaussians only")
    scale = 2 * math.pi if convention == "symmetric" else 1.0
    k = _momentum_array(p, f.dimension) * scale
    k2 = k**2 if f.dimension == 1 else np.sum(k**2, axis=-1)
    kc = k * f.center[0] if f.dimension == 1 else k @ np.asarray(f.center)
    return f.integral() * np.exp(-0.5 * f.width**2 * k2 - 1j * kc)


# ---------------------------------------------------------------------------
# powers of PU members


@dataclass
class PowerReport:
    n: int
    exact_points: int
    transition_points: int
    max_transition_deviation: float
    exact_equal_everywhere_outside_transition: bool
    dressing_deviation: float | None
    spectral_support_in_plateau: bool | None
    per_member: list = field(default_factory=list)


def pu_power_check(pu: PartitionOfUnity, n: int, field_spec: dict | None = None,
                   points_per_axis: int = 1024) -> PowerReport:
    """Compare f^n with f for every member.

    ``field_spec`` optionally gives spectral data ``{"member": j,
    "support": momenta, "amplitudes": values}``; the field is dressed by
    f_j and by f_j^n and the two dressings are compared.
    """
    if n < 2:
        raise ValueError("power must be >= 2")
    grid = domain_grid(pu.domain, points_per_axis)
    exact = trans = 0
    worst = 0.0
    all_exact = True
    per = []
    for j, m in enumerate(pu.members):
        v = m(grid)
        vn = v**n
        fixed = (v == 0.0) | (v == 1.0)
        exact += int(fixed.sum())
        trans += int((~fixed).sum())
        all_exact &= bool(np.all(vn[fixed] == v[fixed]))
        dev = float(np.max(np.abs(v - vn)[~fixed])) if (~fixed).any() else 0.0
        worst = max(worst, dev)
        per.append({"member": j, "max_deviation": dev, "fn_below_f": bool(np.all(vn[~fixed] < v[~fixed]))})
    dress_dev = None
    in_plateau = None
    if field_spec is not None:
        m = pu.members[int(field_spec.get("member", 0))]
        supp = np.asarray(field_spec["support"], float)
        amp = np.asarray(field_spec["amplitudes"], dtype=complex)
        fv = m(supp)
        in_plateau = bool(np.all(fv == 1.0))
        dress_dev = float(np.max(np.abs(fv * amp - fv**n * amp)))
    return PowerReport(n, exact, trans, worst, all_exact, dress_dev, in_plateau, per)


# ---------------------------------------------------------------------------
# numerical smoothness and decay


def derivative_bounds(f: Callable, grid, order: int = 4) -> list:
    """Max |d^j f / dx^j| on a 1-d grid for j = 0..order by repeated central differences."""
    xs = np.asarray(grid, float)
    v = np.asarray(f(xs), dtype=float)
    out = [float(np.max(np.abs(v)))]
    for _ in range(order):
        v = np.gradient(v, xs, edge_order=2)
        out.append(float(np.max(np.abs(v))))
    return out


def decay_seminorms(f: Callable, grid, order: int = 4) -> np.ndarray:
    """Table sup |x|^m |d^b f| for m, b <= order on a 1-d grid."""
    xs = np.asarray(grid, float)
    v = np.asarray(f(xs), dtype=float)
    ders = [v]
    for _ in range(order):
        ders.append(np.gradient(ders[-1], xs, edge_order=2))
    table = np.empty((order + 1, order + 1))
    for m in range(order + 1):
        for b in range(order + 1):
            table[m, b] = np.max(np.abs(xs) ** m * np.abs(ders[b]))
    return table


# ---------------------------------------------------------------------------
# tensor-valued test functions


@dataclass(frozen=True)
class TensorTestFunction:
    """Scalar profile times a constant component vector, optionally projected.

    The profile is read as a momentum-space function; ``projector`` is either
    ``None``, a constant matrix, or an object with ``at(p)`` returning the
    momentum-dependent projection matrix.
    """

    base: TestFunction
    components: tuple
    projector: object = None

    @property
    def tensor_rank(self) -> int:
        return 1

    def _matrix(self, p):
        if self.projector is None:
            return np.eye(len(self.components))
        if hasattr(self.projector, "at"):
            return np.asarray(self.projector.at(p))
        return np.asarray(self.projector)

    def __call__(self, p) -> np.ndarray:
        """Component values at momenta ``p`` with shape (npts, ncomp)."""
        pts = np.asarray(p, dtype=float)
        single = pts.ndim == 1 and self.base.dimension > 1
        pts = np.atleast_2d(pts) if self.base.dimension > 1 else pts.reshape(-1)
        c = np.asarray(self.components, dtype=float)
        scal = self.base(pts)
        out = np.empty((scal.size, c.size))
        for i in range(scal.size):
            out[i] = scal[i] * (self._matrix(pts[i]) @ c)
        return out[0] if single else out


def tensor_test_function(base: TestFunction, components: Sequence[float]) -> TensorTestFunction:
    return TensorTestFunction(base, tuple(float(c) for c in components))


def horizontal_project(f: TensorTestFunction, projector) -> TensorTestFunction:
    """Apply a projector componentwise in momentum space.

    Projectors compose: projecting an already projected function multiplies
    the matrices, so idempotent projectors leave the result unchanged.
    """
    ncomp = len(f.components)
    dim = getattr(projector, "dimension", None)
    if dim is None:
        dim = np.asarray(projector).shape[0]
    if dim != ncomp:
        raise DimensionMismatchError(f"projector acts on {dim} components, function has {ncomp}")
    if f.projector is None:
        return TensorTestFunction(f.base, f.components, projector)
    return TensorTestFunction(f.base, f.components, _Composed(projector, f.projector))


@dataclass(frozen=True)
class _Composed:
    outer: object
    inner: object

    @property
    def dimension(self):
        return getattr(self.outer, "dimension", None) or np.asarray(self.outer).shape[0]

    def at(self, p):
        def m(P):
            return np.asarray(P.at(p)) if hasattr(P, "at") else np.asarray(P)

        return m(self.outer) @ m(self.inner)
