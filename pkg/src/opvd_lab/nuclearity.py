"""Hermite functions and matrix elements of the translation operator.

Indices are 1-based as in the basis e_1, e_2, ...: e_n is the oscillator
function of degree n - 1. Matrix elements (tau_x)_{mn} = <e_m, tau_x e_n>
with (tau_x g)(y) = g(y - x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import IndexRangeError, NumericalInconsistencyError, PreconditionError

CONVENTIONS = ("standard", "paper")
GH_NODES = 200
ROUTE_TOL = 1e-9


def _check_index(n: int, max_order: int | None = None):
    if int(n) != n or n < 1 or (max_order is not None and n > max_order):
        raise IndexRangeError(f"index {n} outside 1..{max_order if max_order else 'inf'}")


def hermite_polys(kmax: int, x) -> np.ndarray:
    """Normalised polynomial parts h_k with psi_k(x) = h_k(x) exp(-x^2/2), k = 0..kmax."""
    x = np.asarray(x, float)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = math.pi**-0.25
    if kmax >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, kmax):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def hermite_eval(n: int, x, convention: str = "standard", max_order: int | None = None):
    """e_n(x) in the standard orthonormal convention, or the printed formula

    pi^{-1/4} ((n-1)!)^{-1/2} exp(-x^2/2) H_{n-1}(sqrt(2) x)

    with physicists' Hermite polynomials H for ``convention='paper'``.
    """
    _check_index(n, max_order)
    x = np.asarray(x, float)
    if convention == "standard":
        return hermite_polys(n - 1, x)[n - 1] * np.exp(-0.5 * x * x)
    if convention == "paper":
        k = n - 1
        return math.pi**-0.25 / math.sqrt(math.factorial(k)) * np.exp(-0.5 * x * x) * special.eval_hermite(
            k, math.sqrt(2.0) * x)
    raise PreconditionError(f"unknown convention {convention!r}")


@dataclass(frozen=True)
class HermiteBasis:
    max_order: int
    convention: str = "standard"
    nodes: int = GH_NODES

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise PreconditionError(f"unknown convention {self.convention!r}")

    def __call__(self, n: int, x):
        return hermite_eval(n, x, self.convention, self.max_order)

    def gram(self) -> np.ndarray:
        """<e_a, e_b> by Gauss-Hermite quadrature after taking out exp(-x^2)."""
        u, w = special.roots_hermite(self.nodes)
        # both conventions are exp(-x^2/2) times a polynomial
        P = np.stack([self(n, u) * np.exp(0.5 * u * u) for n in range(1, self.max_order + 1)])
        return (P * w) @ P.T

    def gram_deviation(self) -> float:
        return float(np.max(np.abs(self.gram() - np.eye(self.max_order))))

    @property
    def orthonormal(self) -> bool:
        return self.gram_deviation() < 1e-8


def convention_audit(max_order: int = 10) -> dict:
    """Gram matrices of both conventions; the printed one is reported, not assumed."""
    std = HermiteBasis(max_order, "standard")
    pap = HermiteBasis(max_order, "paper")
    G = pap.gram()
    return {
        "standard_deviation": std.gram_deviation(),
        "paper_deviation": float(np.max(np.abs(G - np.eye(max_order)))),
        "paper_diagonal": np.diag(G).tolist(),
        "paper_offdiagonal_max": float(np.max(np.abs(G - np.diag(np.diag(G))))),
        "paper_gram": G,
        "selected": "standard",
    }


# ---------------------------------------------------------------------------
# translation matrix


def _closed_form(x: float, m: int, n: int) -> float:
    """Displaced-oscillator overlap with alpha = x / sqrt 2 (0-based m, n)."""
    a = x / math.sqrt(2.0)
    if m >= n:
        lo, hi, sgn = n, m, 1.0
    else:
        lo, hi, sgn = m, n, -1.0
    d = hi - lo
    if a == 0.0:
        return 1.0 if d == 0 else 0.0
    logc = 0.5 * (special.gammaln(lo + 1) - special.gammaln(hi + 1))
    val = math.exp(logc - 0.5 * a * a) * (sgn * a) ** d * special.eval_genlaguerre(lo, d, a * a)
    return float(val)


def _quadrature(x: float, m: int, n: int, nodes: int = GH_NODES) -> float:
    """int e_m(y) e_n(y - x) dy with y = u + x/2, so the weight is exp(-u^2 - x^2/4)."""
    u, w = special.roots_hermite(nodes)
    k = max(m, n)
    Pp = hermite_polys(k, u + 0.5 * x)
    Pm = hermite_polys(k, u - 0.5 * x)
    return float(math.exp(-0.25 * x * x) * np.sum(w * Pp[m] * Pm[n]))


def translation_matrix(x: float, m: int, n: int, convention: str = "standard", route: str = "both",
                       tol: float = ROUTE_TOL) -> float:
    """(tau_x)_{mn} for 1-based m, n; ``route`` is closed_form, quadrature or both (cross-checked)."""
    if convention != "standard":
        raise PreconditionError("translation matrix needs the orthonormal (standard) convention")
    _check_index(m)
    _check_index(n)
    if route == "closed_form":
        return _closed_form(x, m - 1, n - 1)
    if route == "quadrature":
        return _quadrature(x, m - 1, n - 1)
    a = _closed_form(x, m - 1, n - 1)
    b = _quadrature(x, m - 1, n - 1)
    if abs(a - b) > tol:
        raise NumericalInconsistencyError(f"routes disagree for (m,n)=({m},{n}), x={x}: {abs(a - b):.3g}",
                                          deviation=abs(a - b))
    return a


def translation_block(x: float, N: int, route: str = "closed_form") -> np.ndarray:
    """N x N truncation of tau_x in the first N basis functions."""
    if route == "quadrature":
        u, w = special.roots_hermite(GH_NODES)
        Pp = hermite_polys(N - 1, u + 0.5 * x)
        Pm = hermite_polys(N - 1, u - 0.5 * x)
        return math.exp(-0.25 * x * x) * (Pp * w) @ Pm.T
    return np.array([[_closed_form(x, i, j) for j in range(N)] for i in range(N)])


def route_agreement(xs: Sequence[float] = (-4, -1.5, 0.5, 2, 4), N: int = 32) -> float:
    return float(max(np.max(np.abs(translation_block(x, N) - translation_block(x, N, "quadrature"))) for x in xs))


# ---------------------------------------------------------------------------
# diagonal sums


def diagonal(x: float, N: int) -> np.ndarray:
    """(tau_x)_{nn} = exp(-x^2/4) L_{n-1}(x^2/2) for n = 1..N."""
    k = np.arange(N)
    return np.exp(-0.25 * x * x) * special.eval_laguerre(k, 0.5 * x * x)


@dataclass
class NuclearityReport:
    x: float
    N_schedule: list
    max_abs_term: float
    bound_holds: bool
    boundary_case: bool
    partial_sums: list
    increments: list
    final_increment: float
    cauchy: bool
    tail_slope: float
    terms: np.ndarray

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}


def nuclearity_sum(x: float, N_schedule: Sequence[int] = (10, 20, 30, 40, 50), cauchy_tol: float = 1e-8,
                   fit_from: int | None = None) -> NuclearityReport:
    """Partial sums of |(tau_x)_{nn}| with a per-term bound check and a tail fit.

    The tail slope is the fitted exponent of the running maximum of
    |tau_nn| against n over the upper half of the range; a summable
    diagonal needs a slope below -1.
    """
    sched = sorted(int(N) for N in N_schedule)
    if sched[0] < 1:
        raise PreconditionError("N_schedule must be positive")
    Nmax = sched[-1]
    t = np.abs(diagonal(x, Nmax))
    csum = np.cumsum(t)
    partial = [float(csum[N - 1]) for N in sched]
    incr = [partial[i + 1] - partial[i] for i in range(len(partial) - 1)]
    boundary = x == 0
    bound = bool(np.all(t <= 1.0 + 1e-15)) if boundary else bool(np.all(t < 1.0))
    start = fit_from or max(2, Nmax // 2)
    n = np.arange(start, Nmax + 1)
    # envelope: |L_n| oscillates, so fit the running maximum from the right
    env = np.maximum.accumulate(t[start - 1:][::-1])[::-1]
    slope = float(np.polyfit(np.log(n), np.log(np.maximum(env, 1e-300)), 1)[0]) if len(n) > 2 else math.nan
    final = incr[-1] if incr else math.nan
    return NuclearityReport(float(x), sched, float(t.max()), bound, boundary, partial, incr, float(final),
                            bool(incr) and abs(final) < cauchy_tol, slope, t)


def unitarity_leakage(x: float, N: int = 64, center: float = 0.0, width: float = 1.0) -> dict:
    """Apply the N x N truncation of tau_x to a normalised Gaussian and measure the lost norm."""
    if not 0 < width <= 1:
        raise PreconditionError("width must lie in (0, 1] for the Gauss-Hermite projection")
    u, w = special.roots_hermite(GH_NODES)
    y = u  # e_k(y) g(y) = h_k(y) exp(-y^2/2) g(y); divide g by exp(-y^2/2) to use the GH weight
    g = np.exp(-0.5 * ((y - center) / width) ** 2 + 0.5 * y * y)
    H = hermite_polys(N - 1, y)
    v = (H * w) @ g
    norm_g = math.sqrt(math.sqrt(math.pi) * width)
    v = v / norm_g
    tv = translation_block(x, N) @ v
    return {"norm_v": float(np.linalg.norm(v)), "norm_tau_v": float(np.linalg.norm(tv)),
            "leakage": float(1.0 - np.linalg.norm(tv)), "excess": float(np.linalg.norm(tv) - np.linalg.norm(v))}


def inverse_check(x: float, N: int = 64) -> float:
    """max |(tau_x tau_-x) - 1| on the first N/2 modes of the N x N truncations."""
    P = translation_block(x, N) @ translation_block(-x, N)
    h = N // 2
    return float(np.max(np.abs(P[:h, :h] - np.eye(h))))
