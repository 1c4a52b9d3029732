"""Gauge algebra, projectors and small geometric models.

Generators are anti-hermitian with Tr(T_a T_b) = -1/2 delta_ab, so that
[T_a, T_b] = f_abc T_c with f_abc = -2 Tr([T_a, T_b] T_c).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateOrbitError,
    DimensionMismatchError,
    GaugeDegenerateError,
    NormalizationError,
    SingularMomentumError,
    UnsupportedAlgebraError,
)
from .pu_testfn import TestFunction

NORMALIZATION = "Tr(T_a T_b) = -1/2 delta_ab, T anti-hermitian"

# ---------------------------------------------------------------------------
# Lie algebras

_PAULI = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]],
    dtype=complex,
)


def gell_mann() -> np.ndarray:
    lam = np.zeros((8, 3, 3), dtype=complex)
    lam[0][0, 1] = lam[0][1, 0] = 1
    lam[1][0, 1], lam[1][1, 0] = -1j, 1j
    lam[2][0, 0], lam[2][1, 1] = 1, -1
    lam[3][0, 2] = lam[3][2, 0] = 1
    lam[4][0, 2], lam[4][2, 0] = -1j, 1j
    lam[5][1, 2] = lam[5][2, 1] = 1
    lam[6][1, 2], lam[6][2, 1] = -1j, 1j
    lam[7] = np.diag([1, 1, -2]) / math.sqrt(3)
    return lam


@dataclass(frozen=True)
class LieAlgebraData:
    name: str
    dim: int
    generators: np.ndarray  # (dim, n, n)
    structure_constants: np.ndarray  # f[a, b, c]
    normalization: str = NORMALIZATION

    def antisymmetry_residual(self) -> float:
        f = self.structure_constants
        return float(max(np.max(np.abs(f + f.transpose(1, 0, 2))), np.max(np.abs(f + f.transpose(0, 2, 1))), 0.0))

    def jacobi_residual(self) -> float:
        f = self.structure_constants
        # f_abe f_ecd + f_bce f_ead + f_cae f_ebd
        j = (np.einsum("abe,ecd->abcd", f, f) + np.einsum("bce,ead->abcd", f, f) + np.einsum("cae,ebd->abcd", f, f))
        return float(np.max(np.abs(j))) if j.size else 0.0

    def commutator_residual(self) -> float:
        T = self.generators
        f = self.structure_constants
        comm = np.einsum("aij,bjk->abik", T, T) - np.einsum("bij,ajk->abik", T, T)
        recon = np.einsum("abc,cik->abik", f, T)
        return float(np.max(np.abs(comm - recon)))

    def bracket(self, x, y):
        """Component form of [x, y]^c = f_abc x^a y^b along the leading axis."""
        return np.einsum("abc,a...,b...->c...", self.structure_constants, x, y)

    def matrix(self, comps):
        """sum_a comps[a] T_a for comps of shape (dim, ...) -> (..., n, n)."""
        return np.einsum("a...,aij->...ij", np.asarray(comps, dtype=complex), self.generators)

    def components(self, mat):
        """Inverse of :meth:`matrix`: x^a = -2 Tr(M T_a)."""
        return np.real(-2 * np.einsum("...ij,aji->a...", mat, self.generators))

    def to_dict(self) -> dict:
        f = self.structure_constants
        nz = [[int(a), int(b), int(c), float(f[a, b, c])] for a, b, c in zip(*np.nonzero(np.abs(f) > 1e-15)) if a < b < c]
        return {"name": self.name, "dim": self.dim, "normalization": self.normalization, "f_nonzero": nz}


def structure_constants(name: str) -> LieAlgebraData:
    """Generators and structure constants of u1, su2 or su3."""
    if name == "u1":
        T = np.array([[[-1j / math.sqrt(2)]]])
    elif name == "su2":
        T = -0.5j * _PAULI
    elif name == "su3":
        T = -0.5j * gell_mann()
    else:
        raise UnsupportedAlgebraError(f"algebra {name!r} not supported (u1, su2, su3)")
    comm = np.einsum("aij,bjk->abik", T, T) - np.einsum("bij,ajk->abik", T, T)
    f = np.real(-2 * np.einsum("abij,cji->abc", comm, T))
    f[np.abs(f) < 1e-15] = 0.0
    return LieAlgebraData(name, T.shape[0], T, f)


# ---------------------------------------------------------------------------
# projectors


@dataclass(frozen=True)
class Projector:
    """Constant projection matrix or momentum-dependent family ``p -> matrix``."""

    dimension: int
    matrix: np.ndarray | None = None
    family: Callable | None = None

    def at(self, p=None) -> np.ndarray:
        if self.family is not None:
            return np.asarray(self.family(p))
        return np.asarray(self.matrix)

    def idempotence_residual(self, p=None) -> float:
        P = self.at(p)
        return float(np.max(np.abs(P @ P - P)))


def _metric(signature: str, n: int = 4) -> np.ndarray:
    if signature == "euclidean":
        return np.eye(n)
    if signature == "minkowski":
        return np.diag([1.0] + [-1.0] * (n - 1))
    raise ValueError("signature must be 'euclidean' or 'minkowski'")


def u1_transverse_matrix(p, signature: str = "euclidean", lower: bool = False) -> np.ndarray:
    p = np.asarray(p, float)
    g = _metric(signature, p.size)
    p_low = g @ p
    p2 = float(p @ p_low)
    if not np.any(p) or abs(p2) < 1e-300:
        raise SingularMomentumError("transverse projector undefined at p = 0 or on the light cone")
    mixed = np.eye(p.size) - np.outer(p, p_low) / p2  # Pi^mu_nu
    if lower:
        return g - np.outer(p_low, p_low) / p2  # Pi_{mu nu}
    return mixed


def u1_transverse_projector(p, signature: str = "euclidean") -> Projector:
    """Pi^mu_nu = delta^mu_nu - p^mu p_nu / p^2; annihilates p."""
    P = u1_transverse_matrix(p, signature)
    return Projector(P.shape[0], P)


def u1_projector_family(signature: str = "euclidean", n: int = 4) -> Projector:
    return Projector(n, None, lambda p: u1_transverse_matrix(p, signature))


# ---------------------------------------------------------------------------
# finite gauge models


@dataclass(frozen=True)
class FiniteGaugeModel:
    """Field space R^N with metric, orbit generators K (N x g) and linear gauge condition C (g x N)."""

    N: int
    K: object  # array (N, g) or callable x -> (N, g)
    metric: np.ndarray
    gauge_condition: np.ndarray | None = None

    def generators(self, x=None) -> np.ndarray:
        if callable(self.K):
            return np.asarray(self.K(np.asarray(x, float)), float).reshape(self.N, -1)
        return np.asarray(self.K, float).reshape(self.N, -1)

    @property
    def g(self) -> int:
        return self.generators(np.ones(self.N)).shape[1]


def _orbit_gram(model: FiniteGaugeModel, x):
    K = model.generators(x)
    gamma = np.asarray(model.metric, float)
    gt = K.T @ gamma @ K
    if np.linalg.cond(gt) > 1e12:
        raise DegenerateOrbitError("orbit Gram matrix K^T g K is singular")
    return K, gamma, gt


def horizontal_vertical_split(model: FiniteGaugeModel, point=None):
    """(horizontal, vertical) projectors: vert = K (K^T g K)^-1 K^T g, horiz = 1 - vert."""
    K, gamma, gt = _orbit_gram(model, point)
    vert = K @ np.linalg.solve(gt, K.T @ gamma)
    horiz = np.eye(model.N) - vert
    return Projector(model.N, horiz), Projector(model.N, vert)


def split_residuals(model: FiniteGaugeModel, point=None) -> dict:
    H, V = horizontal_vertical_split(model, point)
    h, v = H.matrix, V.matrix
    K = model.generators(point)
    return {
        "horiz_vert": float(np.max(np.abs(h @ v))),
        "sum": float(np.max(np.abs(h + v - np.eye(model.N)))),
        "horiz_K": float(np.max(np.abs(h @ K))),
        "idem_h": float(np.max(np.abs(h @ h - h))),
        "idem_v": float(np.max(np.abs(v @ v - v))),
        "trace_v": float(np.trace(v)),
        "rank": K.shape[1],
    }


def one_form(model: FiniteGaugeModel, point=None) -> np.ndarray:
    """omega = G K^T gamma with G the Green function of F = -K^T gamma K.

    G is taken with the sign that makes omega . K = 1, i.e. G = -F^{-1}.
    """
    K, gamma, gt = _orbit_gram(model, point)
    F = -gt
    G = -np.linalg.inv(F)
    return G @ K.T @ gamma


@dataclass
class DualityReport:
    deviation: float
    projector_idempotence: float
    omega: np.ndarray


def one_form_duality_check(model: FiniteGaugeModel, point=None) -> DualityReport:
    K = model.generators(point)
    om = one_form(model, point)
    dev = float(np.max(np.abs(om @ K - np.eye(K.shape[1]))))
    Pi = np.eye(model.N) - K @ om
    return DualityReport(dev, float(np.max(np.abs(Pi @ Pi - Pi))), om)


# ---------------------------------------------------------------------------
# gauge transformation of convoluted fields (one space dimension)


def _dexp_term(alg: LieAlgebraData, v, dv, terms: int = 30):
    """U d(U^-1) for U = exp(v): -sum_k (ad_v)^k dv / (k+1)!  (components)."""
    out = np.zeros_like(dv)
    cur = np.array(dv, dtype=float)
    fact = 1.0
    for k in range(terms):
        fact *= k + 1
        out -= cur / fact
        cur = alg.bracket(v, cur)
        if np.max(np.abs(cur)) / fact < 1e-18:
            break
    return out


def _adjoint_action(alg: LieAlgebraData, v, A):
    """Components of exp(v) A exp(-v)."""
    Vm = alg.matrix(v)
    Am = alg.matrix(A)
    U = np.stack([linalg.expm(m) for m in Vm.reshape(-1, *Vm.shape[-2:])]).reshape(Vm.shape)
    Ui = np.stack([linalg.expm(-m) for m in Vm.reshape(-1, *Vm.shape[-2:])]).reshape(Vm.shape)
    return alg.components(U @ Am @ Ui)


@dataclass
class GaugeTransformReport:
    deviation: float  # |conv(transformed A) - (conv A - D conv v)|
    commutator_mismatch: float  # |conv([A, v]) - [conv A, conv v]|
    transformed: np.ndarray
    linearised: np.ndarray


def _smear(fn, f: TestFunction, x, nodes: int, derivative: bool = False):
    """int F(x + u) rho(u) du for component fields F(x) of shape (g, n)."""
    lo, hi = f.support_box()
    u = np.linspace(lo[0], hi[0], nodes)
    w = np.full(nodes, u[1] - u[0])
    w[0] = w[-1] = 0.5 * w[0]
    ker = (f.derivative(u) if derivative else f(u)) * w
    vals = fn((x[:, None] + u[None, :]))  # (g, nx, nu)
    out = vals @ ker
    return -out if derivative else out


def gauge_transform_convoluted(A: Callable, v: Callable, f: TestFunction, x, algebra: LieAlgebraData,
                               dv: Callable | None = None, nodes: int = 1025) -> GaugeTransformReport:
    """Compare convolution after the finite transformation with the linearised rule.

    ``A``, ``v`` and ``dv`` map an array of positions to component arrays of
    shape (dim g, ...); without ``dv`` the derivative of v is a central
    difference with step 1e-5. The transformation is U = exp(v):
    A -> U A U^-1 + U d U^-1. The linearised rule on smoothed fields is
    conv(A) - D conv(v) with D w = dw + [conv(A), w]. ``f`` must be
    normalised for constant backgrounds to pass through unchanged.
    """
    x = np.asarray(x, float)
    alg = algebra
    if dv is None:
        def dv(y, h=1e-5):
            return (v(y + h) - v(y - h)) / (2 * h)

    def transformed(y):
        vv, AA, dd = v(y), A(y), dv(y)
        return _adjoint_action(alg, vv, AA) + _dexp_term(alg, vv, dd)

    conv_T = _smear(transformed, f, x, nodes)
    cA = _smear(A, f, x, nodes)
    cv = _smear(v, f, x, nodes)
    dcv = _smear(v, f, x, nodes, derivative=True)  # d/dx (v * rho) = -(v * rho')
    lin = cA - (dcv + alg.bracket(cA, cv))
    comm_conv = _smear(lambda y: alg.bracket(A(y), v(y)), f, x, nodes)
    mismatch = float(np.max(np.abs(comm_conv - alg.bracket(cA, cv))))
    return GaugeTransformReport(float(np.max(np.abs(conv_T - lin))), mismatch, conv_T, lin)


def gauge_transform_order(algebra: LieAlgebraData, f: TestFunction, epsilons=(0.1, 0.05, 0.025),
                          seed: int = 0, x=None) -> dict:
    """Fit the order in eps of the mismatch for a constant background and v = eps (c + k sin y)."""
    rng = np.random.default_rng(seed)
    g = algebra.dim
    a0, vc, vk = rng.normal(size=(3, g))
    x = np.linspace(-1, 1, 5) if x is None else np.asarray(x, float)
    devs, comms = [], []
    for eps in epsilons:
        r = gauge_transform_convoluted(
            lambda y: a0[:, None, None] * np.ones_like(y),
            lambda y, e=eps: e * (vc[:, None, None] + vk[:, None, None] * np.sin(y)),
            f, x, algebra,
            dv=lambda y, e=eps: e * vk[:, None, None] * np.cos(y),
        )
        devs.append(r.deviation)
        comms.append(r.commutator_mismatch)
    tiny = max(devs) < 1e-13
    slope = math.inf if tiny else float(np.polyfit(np.log(epsilons), np.log(devs), 1)[0])
    return {"epsilons": list(map(float, epsilons)), "deviations": devs, "commutator_mismatch": comms, "order": slope}


# ---------------------------------------------------------------------------
# Landau-DeWitt gauge on a periodic grid


def covariant_symbol(alg: LieAlgebraData, k, A_bg) -> np.ndarray:
    """(nabla_mu)_ac = i k_mu delta_ac + f_abc A^b_mu for one mode; shape (d, g, g)."""
    k = np.asarray(k, float)
    A_bg = np.asarray(A_bg, float).reshape(alg.dim, -1)
    f = alg.structure_constants
    d = k.size
    out = np.empty((d, alg.dim, alg.dim), dtype=complex)
    for mu in range(d):
        out[mu] = 1j * k[mu] * np.eye(alg.dim) + np.einsum("abc,b->ac", f, A_bg[:, mu])
    return out


def _periodic_axes(n: int, d: int, L: float = 2 * math.pi):
    h = L / n
    ax = np.arange(n) * h
    return h, np.meshgrid(*([ax] * d), indexing="ij")


def project_landau_dewitt(A_modes: dict, A_bg, alg: LieAlgebraData) -> dict:
    """Project quantum-field Fourier modes onto the gauge-condition kernel.

    ``A_modes`` maps integer wave vectors to coefficient arrays (g, d). For
    each mode the projector 1 - K K^+ with K = stack_mu nabla_mu removes the
    pure-gauge part, so the continuum condition holds exactly.
    """
    out = {}
    for kv, coef in A_modes.items():
        nab = covariant_symbol(alg, kv, A_bg)  # (d, g, g)
        d = nab.shape[0]
        K = np.concatenate([nab[mu] for mu in range(d)], axis=0)  # rows mu-major
        vec = np.asarray(coef, dtype=complex).T.reshape(-1)  # mu-major (mu, a)
        P = np.eye(K.shape[0]) - K @ np.linalg.pinv(K)
        out[kv] = (P @ vec).reshape(d, alg.dim).T
    return out


def synthesize(A_modes: dict, n: int, d: int, alg: LieAlgebraData):
    """Real field A^a_mu(x) = sum_k Re[c exp(ikx)] on an n^d periodic grid of [0, 2pi)^d."""
    h, X = _periodic_axes(n, d)
    A = np.zeros((alg.dim, d) + (n,) * d)
    for kv, coef in A_modes.items():
        phase = np.exp(1j * sum(kv[m] * X[m] for m in range(d)))
        c = np.asarray(coef)
        A += np.real(c.reshape(c.shape + (1,) * d) * phase)
    return h, A


def landau_dewitt_residual(A_qt: np.ndarray, A_bg, algebra: LieAlgebraData, h: float) -> np.ndarray:
    """chi^a = d_mu A^a_mu + f_abc A^b_bg,mu A^c_mu by periodic central differences.

    ``A_qt`` has shape (g, d, n, ..., n); ``A_bg`` is constant with shape (g, d).
    """
    A_qt = np.asarray(A_qt, float)
    g, d = A_qt.shape[:2]
    A_bg = np.asarray(A_bg, float).reshape(g, d)
    chi = np.zeros((g,) + A_qt.shape[2:])
    f = algebra.structure_constants
    for mu in range(d):
        comp = A_qt[:, mu]
        chi += (np.roll(comp, -1, axis=1 + mu) - np.roll(comp, 1, axis=1 + mu)) / (2 * h)
        chi += np.einsum("abc,b,c...->a...", f, A_bg[:, mu], comp)
    return chi


def chi_squared_variation(chi: np.ndarray, xi: np.ndarray, algebra: LieAlgebraData) -> float:
    """max |delta(chi^a chi_a)| under chi -> chi + [chi, xi]; zero by antisymmetry of f."""
    dchi = algebra.bracket(chi, xi)
    return float(np.max(np.abs(2 * np.einsum("a...,a...->...", chi, dchi))))


# ---------------------------------------------------------------------------
# Faddeev-Popov operator at constant background


@dataclass
class FPResult:
    momenta: np.ndarray  # integer wave vectors (M, d)
    blocks: np.ndarray  # (M, g, g)
    log_abs_det: float
    zero_mode: dict
    skipped_modes: int
    symbol: str
    eigenvalues: np.ndarray
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    doublers: list = field(default_factory=list)


def lattice_momenta(n: int, d: int, L: float = 2 * math.pi):
    m = np.fft.fftfreq(n, 1.0 / n).astype(int)
    mesh = np.stack(np.meshgrid(*([m] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return mesh, L / n


def faddeev_popov_Q(A_bg, algebra: LieAlgebraData, n: int, d: int = 4, f: TestFunction | None = None,
                    symbol: str = "lattice", L: float = 2 * math.pi) -> FPResult:
    """Per-mode blocks Q(k) = -sum_mu nabla_mu(k)^2 * f(|k|) on an n^d torus.

    ``symbol='lattice'`` uses k~ = sin(k h)/h (central differences),
    ``'continuum'`` uses k itself. The k = 0 mode is excluded from the log
    determinant and reported separately, as are lattice doublers whose
    symbol sin(k h)/h vanishes; modes where f vanishes are skipped.
    Any other vanishing determinant raises :class:`GaugeDegenerateError`.
    """
    ms, h = lattice_momenta(n, d, L)
    kphys = ms * (2 * math.pi / L)
    ksym = np.sin(kphys * h) / h if symbol == "lattice" else kphys
    weights = np.ones(len(ms)) if f is None else f(np.linalg.norm(kphys, axis=1)[:, None] if f.dimension == 1 else kphys)
    weights = np.asarray(weights, float).reshape(-1)
    g = algebra.dim
    blocks = np.zeros((len(ms), g, g), dtype=complex)
    eigs = np.zeros((len(ms), g))
    logdet = 0.0
    zero = {}
    doublers = []
    skipped = 0
    scale = max(1.0, float(np.max(np.abs(A_bg))) ** 2)
    for i, (mv, kv) in enumerate(zip(ms, ksym)):
        nab = covariant_symbol(algebra, kv, A_bg)
        Q = -np.einsum("mab,mbc->ac", nab, nab) * weights[i]
        blocks[i] = Q
        ev = np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))
        eigs[i] = ev
        if not np.any(mv):
            zero = {"k": mv.tolist(), "eigenvalues": ev.tolist(), "block": Q}
            continue
        if not np.any(np.abs(kv) > 1e-12 * max(1.0, 1.0 / h)):
            doublers.append(mv.tolist())  # sin(k h) = 0 away from k = 0
            continue
        if weights[i] == 0.0:
            skipped += 1
            continue
        det = np.prod(ev)
        if abs(det) <= 1e-12 * (scale * max(1.0, float(np.sum(kv**2)))) ** g * weights[i] ** g:
            raise GaugeDegenerateError(f"Faddeev-Popov block is singular at k={mv.tolist()} (Gribov-type degeneracy)",
                                       where=mv.tolist())
        logdet += float(np.sum(np.log(np.abs(ev))))
    return FPResult(ms, blocks, logdet, zero, skipped, symbol, eigs, weights, doublers)


def lattice_fp_blocks(A_bg, algebra: LieAlgebraData, n: int, d: int = 4, L: float = 2 * math.pi) -> np.ndarray:
    """Oracle: apply the real-space central-difference covariant Laplacian to color deltas, then FFT.

    Returns blocks (M, g, g) in the momentum ordering of :func:`lattice_momenta`.
    """
    g = algebra.dim
    h = L / n
    f = algebra.structure_constants
    A_bg = np.asarray(A_bg, float).reshape(g, d)
    shape = (n,) * d
    out = np.zeros((n**d, g, g), dtype=complex)

    def nabla(phi, mu):
        dphi = (np.roll(phi, -1, axis=1 + mu) - np.roll(phi, 1, axis=1 + mu)) / (2 * h)
        return dphi + np.einsum("abc,b,c...->a...", f, A_bg[:, mu], phi)

    for c in range(g):
        phi = np.zeros((g,) + shape)
        phi[(c,) + (0,) * d] = 1.0
        res = np.zeros_like(phi)
        for mu in range(d):
            res -= nabla(nabla(phi, mu), mu)
        # L exp(ikx) = exp(ikx) sum_z ker(z) exp(-ikz), so the FFT of the delta response is the symbol
        spec = np.fft.fftn(res, axes=tuple(range(1, d + 1)))
        out[:, :, c] = spec.reshape(g, -1).T
    return out


# ---------------------------------------------------------------------------
# S^3 frames and Hopf maps


def _unit(x, name="x"):
    x = np.asarray(x, float)
    if x.shape[-1] != 4:
        raise DimensionMismatchError("expected 4-vectors")
    if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > 1e-12):
        raise NormalizationError(f"{name} must be a unit 4-vector within 1e-12")
    return x


def s3_frame(x):
    """(X, e1, e2, e3) with e1=(-x2,x1,-x4,x3), e2=(-x3,x4,x1,-x2), e3=(-x4,-x3,x2,x1)."""
    x = _unit(x)
    x1, x2, x3, x4 = np.moveaxis(x, -1, 0)
    e1 = np.stack([-x2, x1, -x4, x3], axis=-1)
    e2 = np.stack([-x3, x4, x1, -x2], axis=-1)
    e3 = np.stack([-x4, -x3, x2, x1], axis=-1)
    return x, e1, e2, e3


def frame_gram(x) -> np.ndarray:
    F = np.stack(s3_frame(x), axis=-2)  # (..., 4 vectors, 4 comps)
    return np.einsum("...ik,...jk->...ij", F, F)


def hopf_map(x, check: bool = True):
    """zeta = (2(x1x3 + x2x4), 2(x2x3 - x1x4), x1^2 + x2^2 - x3^2 - x4^2)."""
    x = _unit(x) if check else np.asarray(x, float)
    x1, x2, x3, x4 = np.moveaxis(x, -1, 0)
    return np.stack([2 * (x1 * x3 + x2 * x4), 2 * (x2 * x3 - x1 * x4), x1**2 + x2**2 - x3**2 - x4**2], axis=-1)


def fibre_rotate(x, theta):
    """Common phase on z1 = x1 + i x2 and z2 = x3 + i x4."""
    x = np.asarray(x, float)
    z1 = (x[..., 0] + 1j * x[..., 1]) * np.exp(1j * theta)
    z2 = (x[..., 2] + 1j * x[..., 3]) * np.exp(1j * theta)
    return np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)


def fibre_invariance(x, angles) -> float:
    z0 = hopf_map(x)
    return float(max(np.max(np.abs(hopf_map(fibre_rotate(x, t), check=False) - z0)) for t in angles))


def winding_number(values: np.ndarray) -> float:
    """Accumulated phase / 2 pi along a closed loop of complex samples."""
    ph = np.angle(values)
    d = np.diff(np.concatenate([ph, ph[:1]]))
    d = (d + math.pi) % (2 * math.pi) - math.pi
    return float(np.sum(d) / (2 * math.pi))


def circle_hopf_winding(samples: int = 256) -> float:
    """Winding of theta -> xi^1 + i xi^2 = cos theta + i sin theta."""
    th = np.linspace(0, 2 * math.pi, samples, endpoint=False)
    return winding_number(np.cos(th) + 1j * np.sin(th))


def hopf_transition_winding(samples: int = 256) -> float:
    """Winding of zeta^1 + i zeta^2 along the loop (cos t, sin t, 1, 0)/sqrt 2 of S^3."""
    t = np.linspace(0, 2 * math.pi, samples, endpoint=False)
    x = np.stack([np.cos(t), np.sin(t), np.ones_like(t), np.zeros_like(t)], axis=-1) / math.sqrt(2)
    z = hopf_map(x, check=False)
    return winding_number(z[:, 0] + 1j * z[:, 1])


# ---------------------------------------------------------------------------
# Vilkovisky connection toy


def planar_rotation_model() -> FiniteGaugeModel:
    """R^2 with flat metric; orbits are circles, generator K(x) = (-x2, x1)."""
    return FiniteGaugeModel(2, lambda x: np.array([[-x[1]], [x[0]]]), np.eye(2))


def generator_jacobian(model: FiniteGaugeModel, x, h: float = 1e-5) -> np.ndarray:
    """dK^i_alpha / dx^j by central differences; shape (N, g, N)."""
    x = np.asarray(x, float)
    cols = []
    for j in range(model.N):
        e = np.zeros(model.N)
        e[j] = h
        cols.append((model.generators(x + e) - model.generators(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def vilkovisky_tensor(model: FiniteGaugeModel, x) -> np.ndarray:
    """V^i_jk assembled from dK and omega (flat metric); shape (N, N, N)."""
    K = model.generators(x)
    om = one_form(model, x)  # (g, N)
    dK = generator_jacobian(model, x)  # (i, alpha, j)
    # T^i_{alpha.l} T^l_beta
    dKK = np.einsum("ial,lb->iab", dK, K)
    V = -np.einsum("iaj,ak->ijk", dK, om) - np.einsum("iak,aj->ijk", dK, om)
    V += 0.5 * np.einsum("aj,iab,bk->ijk", om, dKK, om) + 0.5 * np.einsum("ak,iab,bj->ijk", om, dKK, om)
    return V


def abelian_covariant_constancy(model: FiniteGaugeModel, x) -> float:
    """max |T^i_{alpha;j}| = |dK^i_alpha/dx^j + V^i_jk K^k_alpha| (vanishes for abelian orbits)."""
    K = model.generators(x)
    dK = generator_jacobian(model, x)
    V = vilkovisky_tensor(model, x)
    cov = dK + np.einsum("ijk,ka->iaj", V, K)
    return float(np.max(np.abs(cov)))


@dataclass
class GeodesicReport:
    step: float
    steps: int
    drift: float  # max |omega.v(t) - omega.v(0)| / |v(0)|
    horizontal_drift: float  # max |omega.v(t)| |K| / |v| for a horizontal start
    radius_deviation: float  # max | |x(t)| - |x(0)| | (fibre test)
    path_error: float | None  # vs the exact planar solution
    scheme: str
    trajectory: np.ndarray


def _vk_accel(model, x, v):
    V = vilkovisky_tensor(model, x)
    return -np.einsum("ijk,j,k->i", V, v, v)


def vilkovisky_toy(model: FiniteGaugeModel | None = None, start=(1.0, 0.0), direction=(0.6, 0.8),
                   step: float = 1e-2, T: float = 1.0, scheme: str = "heun") -> GeodesicReport:
    """Integrate x'' = -V(x', x') and report how the vertical component drifts.

    The metric is flat, so the Christoffel part vanishes. For the planar
    model the exact geodesics have r'' = 0 and constant angular rate, so
    omega.v is conserved; its drift measures the integrator error.
    ``scheme`` is ``heun`` (second order) or ``rk4``.
    """
    model = model or planar_rotation_model()
    x = np.asarray(start, float)
    v = np.asarray(direction, float)
    n = int(round(T / step))
    y = np.concatenate([x, v])
    N = model.N

    def rhs(y):
        return np.concatenate([y[N:], _vk_accel(model, y[:N], y[N:])])

    def vert(y):
        om = one_form(model, y[:N])
        return om @ y[N:]

    w0 = vert(y)
    vn = np.linalg.norm(v)
    r0 = np.linalg.norm(x)
    drift = hdr = rdev = 0.0
    traj = [y.copy()]
    for _ in range(n):
        if scheme == "heun":
            k1 = rhs(y)
            k2 = rhs(y + step * k1)
            y = y + 0.5 * step * (k1 + k2)
        elif scheme == "rk4":
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * step * k1)
            k3 = rhs(y + 0.5 * step * k2)
            k4 = rhs(y + step * k3)
            y = y + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        w = vert(y)
        drift = max(drift, float(np.max(np.abs(w - w0))) / vn)
        K = model.generators(y[:N])
        hdr = max(hdr, float(np.max(np.abs(K @ w))) / max(np.linalg.norm(y[N:]), 1e-300))
        rdev = max(rdev, abs(np.linalg.norm(y[:N]) - r0))
        traj.append(y.copy())
    traj = np.array(traj)
    path_err = None
    if N == 2 and not callable(getattr(model, "_custom", None)):
        t = np.arange(n + 1) * step
        rd = float(x @ v) / r0
        thd = float(x[0] * v[1] - x[1] * v[0]) / r0**2
        th0 = math.atan2(x[1], x[0])
        exact = np.stack([(r0 + rd * t) * np.cos(th0 + thd * t), (r0 + rd * t) * np.sin(th0 + thd * t)], axis=-1)
        path_err = float(np.max(np.linalg.norm(traj[:, :2] - exact, axis=1)))
    return GeodesicReport(step, n, drift, hdr, rdev, path_err, scheme, traj)


def drift_order(steps=(0.02, 0.01, 0.005), **kw) -> tuple:
    """Fitted order of the vertical drift under step refinement."""
    drifts = [vilkovisky_toy(step=s, **kw).drift for s in steps]
    slope = np.polyfit(np.log(steps), np.log(drifts), 1)[0]
    return float(slope), drifts


def conditioning_warning(msg: str) -> None:
    warnings.warn(msg, RuntimeWarning, stacklevel=3)
