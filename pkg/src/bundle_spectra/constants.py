"""Explicit constants of the eigensection estimates.

Everything that can exceed double range (the B-type constants and all bound
right-hand sides) is carried as a natural logarithm. Use :meth:`BoundConstants.ledger`
for log10 views.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

__all__ = [
    "GeometricBounds",
    "BoundConstants",
    "MoserSchedule",
    "epsilon_product",
    "gallot_constant",
    "assemble_constants",
    "alpha_exponent",
    "small_lambda_alpha",
    "g_factor",
    "main_bound",
    "sup_norm_factor",
    "sup_norm_bound",
    "moser_rhs",
    "moser_limit_log_factor",
    "holonomy_rhs_log",
    "holonomy_lower_bound",
]

_LOG10 = math.log(10.0)


@dataclass(frozen=True)
class GeometricBounds:
    """Dimension, Ricci lower-bound parameter, diameter bound and bundle curvature bound."""

    n: int
    K: float
    d: float
    r: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"n must be an integer >= 3, got {self.n}")
        if not self.K >= 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if not self.d > 0:
            raise ValueError(f"d must be > 0, got {self.d}")
        if not self.r >= 0:
            raise ValueError(f"r must be >= 0, got {self.r}")

    @property
    def D(self) -> float:
        return math.sqrt(self.K) * self.d


@dataclass(frozen=True)
class BoundConstants:
    epsilon: float
    c_gallot: float
    C: float
    a_log: float
    b: float
    A1: float
    A2: float
    B1_log: float
    B2_log: float
    source_bounds: GeometricBounds

    @property
    def n(self) -> int:
        return self.source_bounds.n

    def ledger(self) -> dict:
        """Plain-dict view with log10 companions for the log-valued entries."""
        b = self.source_bounds
        return {
            "n": b.n,
            "K": b.K,
            "d": b.d,
            "r": b.r,
            "D": b.D,
            "epsilon": self.epsilon,
            "c_gallot": self.c_gallot,
            "C": self.C,
            "a_log": self.a_log,
            "a_log10": self.a_log / _LOG10,
            "b": self.b,
            "A1": self.A1,
            "A2": self.A2,
            "B1_log": self.B1_log,
            "B1_log10": self.B1_log / _LOG10,
            "B2_log": self.B2_log,
            "B2_log10": self.B2_log / _LOG10,
        }


@dataclass(frozen=True)
class MoserSchedule:
    """Exponents k = q**j and Hoelder factors p_j = 1 - q**-j of the iteration."""

    n: int
    j_max: int
    q: float = field(init=False)
    k_values: tuple = field(init=False)
    p_values: tuple = field(init=False)

    def __post_init__(self):
        if self.n < 3 or self.j_max < 1:
            raise ValueError("need n >= 3 and j_max >= 1")
        q = (self.n + 2) / self.n
        js = range(1, self.j_max + 1)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "k_values", tuple(q**j for j in js))
        object.__setattr__(self, "p_values", tuple(1.0 - q ** (-j) for j in js))

    def partial_products(self) -> np.ndarray:
        return np.cumprod(self.p_values)


def _check_n(n):
    if int(n) != n or n < 3:
        raise ValueError(f"n must be an integer >= 3, got {n}")


def epsilon_product(n: int) -> float:
    """Infinite product prod_{i>=1} (1 - (n/(n+2))**i).

    Partial products are accumulated in log-space until the tail factor,
    which lies in [1 - x**(I+1)/(1-x), 1], is within 1e-16 of one.
    """
    _check_n(n)
    x = n / (n + 2)
    terms = []
    i = 1
    while True:
        xi = x**i
        terms.append(math.log1p(-xi))
        if x ** (i + 1) / (1.0 - x) < 1e-16:
            break
        i += 1
    return math.exp(math.fsum(terms))


def gallot_constant(n: int, D: float) -> float:
    """Sobolev constant c(n, D) for Ric >= -(n-1)K, diam <= d, D = sqrt(K) d.

    The integral is taken over s = t/D in [0, 1], which absorbs the 1/D
    prefactor. The e^{(n-1)D} growth is factored out before integrating.
    """
    _check_n(n)
    if not D >= 0:
        raise ValueError(f"D must be >= 0, got {D}")
    if D == 0:
        return (0.5 + 1.0 / n) ** n - 0.5**n
    if not math.isfinite(D):
        raise OverflowError("gallot_constant: D is not finite")

    damp = math.exp(-(n - 1) * D)

    def integrand(s):
        return (0.5 * math.cosh(s * D) + damp * math.sinh(s * D) / (n * D)) ** (n - 1)

    try:
        value, _ = quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200)
    except OverflowError as exc:
        raise OverflowError(f"gallot_constant overflow for n={n}, D={D}") from exc
    if not math.isfinite(value) or value <= 0:
        raise OverflowError(f"gallot_constant overflow for n={n}, D={D}")
    log_c = (n - 1) ** 2 * D + math.log(value)
    if log_c > 709.0:
        raise OverflowError(f"gallot_constant out of double range for n={n}, D={D}")
    return math.exp(log_c)


def assemble_constants(bounds: GeometricBounds) -> BoundConstants:
    n, K, d, r = bounds.n, bounds.K, bounds.d, bounds.r
    eps = epsilon_product(n)
    c = gallot_constant(n, bounds.D)
    C = (2 * n + 2) / n * c * d
    a_log = (n + 2) ** 2 / (4 * n * eps) * math.log((n + 2) / n)
    A1 = (n + 2) * (n + 1) / (n * eps) * c * d
    b = A1 * math.sqrt(2 * ((n - 1) * K + n**2 * (r + r**2)))
    bracket = 1 + math.sqrt(2) * (1 - eps) * math.sqrt(n + 2) / (n * (math.sqrt(n + 2) - math.sqrt(n)))
    A2 = c * d * (n + 2) * (n + 1) / (n + 2 * (1 - eps)) * bracket
    B1_log = a_log + b
    B2_log = eps * n / (n + 2 * (1 - eps)) * B1_log
    return BoundConstants(
        epsilon=eps,
        c_gallot=c,
        C=C,
        a_log=a_log,
        b=b,
        A1=A1,
        A2=A2,
        B1_log=B1_log,
        B2_log=B2_log,
        source_bounds=bounds,
    )


def small_lambda_alpha(n: int, eps: float | None = None) -> float:
    """The exponent eps*n / (2n + 4(1 - eps)) used below lambda = 1."""
    if eps is None:
        eps = epsilon_product(n)
    return eps * n / (2 * n + 4 * (1 - eps))


def alpha_exponent(n: int, lam: float, grad_dominates: bool = False) -> float:
    _check_n(n)
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    if lam >= 1 or grad_dominates:
        return 0.5
    return small_lambda_alpha(n)


def g_factor(bounds: GeometricBounds, lam: float) -> float:
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    n, K, r = bounds.n, bounds.K, bounds.r
    return math.sqrt(2 * (lam + (n - 1) * K + n**2 * (r + r**2)))


def main_bound(constants: BoundConstants, lam: float, case2: bool = False, grad_dominates: bool = False) -> float:
    """Natural log of lambda^alpha * exp(A sqrt(2 lambda)) * B.

    ``case2`` selects the improved constants (A2, B2) valid when the sup of
    the section dominates the sup of its gradient; ``grad_dominates`` forces
    alpha = 1/2 on the (A1, B1) branch.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    n = constants.n
    if case2:
        alpha = small_lambda_alpha(n, constants.epsilon)
        A, B_log = constants.A2, constants.B2_log
    else:
        alpha = alpha_exponent(n, lam, grad_dominates)
        A, B_log = constants.A1, constants.B1_log
    return alpha * math.log(lam) + A * math.sqrt(2 * lam) + B_log


def sup_norm_factor(p: float) -> float:
    """sqrt(p) / ((2 - p)(sqrt(p) - sqrt(2 - p))), the p-dependence of the sup bound."""
    return math.sqrt(p) / ((2 - p) * (math.sqrt(p) - math.sqrt(2 - p)))


def _golden_section(f, lo, hi, rtol=1e-8):
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > rtol * max(abs(a), abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    # endpoints are admissible and may be optimal
    candidates = [(f(x), x) for x in ((a + b) / 2, hi)]
    return min(candidates)[1]


def optimal_sup_exponent(n: int) -> float:
    _check_n(n)
    return _golden_section(sup_norm_factor, 1.0 + 1e-6, n / (n - 1))


def sup_norm_bound(bounds: GeometricBounds, lam: float, p: float | None = None) -> float:
    """Natural log of the sup-norm bound exp(2 sqrt(lam) c d f(p)) on an L2-normalized eigensection."""
    n = bounds.n
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    if p is None:
        p = optimal_sup_exponent(n)
    elif not 1 < p <= n / (n - 1):
        raise ValueError(f"p must lie in (1, {n}/{n - 1}], got {p}")
    c = gallot_constant(n, bounds.D)
    return 2 * math.sqrt(lam) * c * bounds.d * sup_norm_factor(p)


def moser_rhs(constants: BoundConstants, lam: float, k: float, N: float, norm_2k: float) -> float:
    """(1 + k C G)^(1/k) * N^(1/k) * norm_2k^((k-1)/k) for one iteration step."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not N > 0:
        raise ValueError(f"N must be > 0, got {N}")
    if norm_2k < 0:
        raise ValueError("norm_2k must be >= 0")
    G = g_factor(constants.source_bounds, lam)
    log_val = (math.log1p(k * constants.C * G) + math.log(N)) / k
    if norm_2k == 0:
        return 0.0 if k > 1 else math.exp(log_val)
    log_val += (k - 1) / k * math.log(norm_2k)
    return math.exp(log_val)


def moser_limit_log_factor(constants: BoundConstants, lam: float) -> float:
    """Natural log of P = exp(n C G / 2) * ((n+2)/n)^((n^2+2n)/4)."""
    n = constants.n
    G = g_factor(constants.source_bounds, lam)
    return n / 2 * constants.C * G + (n**2 + 2 * n) / 4 * math.log((n + 2) / n)


def holonomy_rhs_log(constants: BoundConstants, beta: float, lam: float) -> float:
    """Natural log of (beta/B1)^(1/alpha) exp(-(A1/alpha) sqrt(2 lam)) with the small-lambda alpha."""
    alpha = small_lambda_alpha(constants.n, constants.epsilon)
    return (math.log(beta) - constants.B1_log) / alpha - constants.A1 / alpha * math.sqrt(2 * lam)


def holonomy_lower_bound(constants: BoundConstants, beta: float) -> float:
    """min{1, lam*} with lam* the fixed point of lam = (beta/B1)^(1/alpha) exp(-(A1/alpha) sqrt(2 lam)).

    Bisection runs on u = log(lam), where u - log(rhs(e^u)) is strictly
    increasing, so the root is unique and relative accuracy is kept even when
    lam* is far below double range.
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    if beta == 0:
        return 0.0
    top = holonomy_rhs_log(constants, beta, 0.0)

    def g(u):
        return u - holonomy_rhs_log(constants, beta, math.exp(u))

    if g(0.0) < 0:
        return 1.0
    hi = min(0.0, top)
    alpha = small_lambda_alpha(constants.n, constants.epsilon)
    lo = top - constants.A1 / alpha * math.sqrt(2 * math.exp(hi)) - 1.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-15 * max(1.0, abs(mid)):
            break
    u = 0.5 * (lo + hi)
    if u < -745.0:
        return 0.0
    return min(1.0, math.exp(u))
