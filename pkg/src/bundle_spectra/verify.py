"""Inequality checks on computed eigenpairs.

Every check returns :class:`VerdictRow` records comparing a measured left-hand
side against a log-space right-hand side. Inequalities that are theorems only
in the continuum get a multiplicative discretization allowance (1 + 5 h) on
top of the 1e-9 relative rounding tolerance; exact discrete identities do not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as K_
from .constants import BoundConstants
from .eigensolver import Eigenpair
from .holonomy import BetaResult
from .lattice import LinkField, TorusSpec
from .operator import covariant_gradient, gradient_magnitude, inner, lp_norm, pointwise_gram

__all__ = [
    "VerdictRow",
    "FrameError",
    "FrameResult",
    "check_eigenpair",
    "check_moser_chain",
    "check_near_orthonormal",
    "check_near_orthonormal_family",
    "gram_schmidt_frame",
    "check_holonomy_bound",
    "check_holonomy_gradient",
    "RELATIVE_TOLERANCE",
]

RELATIVE_TOLERANCE = 1e-9
_LN10 = math.log(10.0)
_EPS = np.finfo(float).eps


@dataclass
class VerdictRow:
    check_id: str
    lhs: float
    rhs_log10: float
    slack_log10: float
    passed: bool
    tolerance_log10: float
    context: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "lhs": self.lhs,
            "rhs_log10": self.rhs_log10,
            "slack_log10": self.slack_log10,
            "pass": self.passed,
            "tolerance_log10": self.tolerance_log10,
            "context": dict(self.context),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VerdictRow":
        return cls(d["check_id"], d["lhs"], d["rhs_log10"], d["slack_log10"], d["pass"],
                   d["tolerance_log10"], dict(d.get("context", {})))


def _log10(x: float) -> float:
    return math.log10(x) if x > 0 else -math.inf


def make_row(check_id: str, lhs: float, rhs_log: float, context: dict | None = None,
             allowance: float = 0.0) -> VerdictRow:
    """Row for lhs <= exp(rhs_log); ``allowance`` is a relative discretization margin."""
    rhs_log10 = rhs_log / _LN10
    if lhs <= 0:
        slack = math.inf
    elif rhs_log10 == -math.inf:
        slack = -math.inf
    else:
        slack = rhs_log10 - math.log10(lhs)
    tol = math.log10(1 + RELATIVE_TOLERANCE) + math.log10(1 + allowance)
    return VerdictRow(check_id, float(lhs), rhs_log10, slack, bool(slack >= -tol), tol, dict(context or {}))


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def discretization_allowance(torus: TorusSpec) -> float:
    return 5 * max(torus.spacing)


@dataclass
class _Measured:
    grad_abs: np.ndarray
    g_inf: float
    g_2: float
    s_inf: float
    s_2: float


def _measure(pair: Eigenpair, links: LinkField, torus: TorusSpec) -> _Measured:
    grad = covariant_gradient(links, pair.section, torus)
    g = gradient_magnitude(grad)
    return _Measured(
        grad_abs=g,
        g_inf=lp_norm(g, math.inf),
        g_2=lp_norm(g, 2),
        s_inf=lp_norm(pair.section, math.inf, grid_ndim=torus.n),
        s_2=lp_norm(pair.section, 2, grid_ndim=torus.n),
    )


def _is_parallel(pair: Eigenpair) -> bool:
    return pair.lam <= 10 * pair.residual + 1e-12


def check_eigenpair(pair: Eigenpair, links: LinkField, torus: TorusSpec, constants: BoundConstants) -> list:
    """Gradient-bound, sup-bound and energy rows for one eigenpair."""
    bounds = constants.source_bounds
    m = _measure(pair, links, torus)
    allow = discretization_allowance(torus)
    lam = pair.lam
    ctx = {"lambda": lam}
    rows = []

    # exact discrete identity <L S, S> = ||grad S||_2^2; rounding enters at eps * lam
    energy_gap = abs(m.g_2**2 - lam * m.s_2**2)
    rounding = 64 * _EPS * max(lam, 1.0)
    rows.append(make_row("energy", energy_gap, _log(pair.residual * m.s_2 + rounding), ctx))

    if _is_parallel(pair):
        rows.append(make_row("parallel", m.g_inf, _log(pair.residual), ctx))
        return rows

    log_s2 = math.log(m.s_2)
    rows.append(make_row("gradient_bound", m.g_inf, K_.main_bound(constants, lam) + log_s2,
                         {**ctx, "case": "A1B1"}, allow))
    grad_dominates = m.g_inf >= m.s_inf
    if grad_dominates:
        rhs = K_.main_bound(constants, lam, case2=False, grad_dominates=True)
        case = "grad_dominates"
    else:
        rhs = K_.main_bound(constants, lam, case2=True)
        case = "section_dominates"
    rows.append(make_row("gradient_bound.case", m.g_inf, rhs + log_s2, {**ctx, "case": case}, allow))
    rows.append(make_row("sup_bound", m.s_inf, K_.sup_norm_bound(bounds, lam) + log_s2,
                         {**ctx, "p": K_.optimal_sup_exponent(bounds.n)}, allow))
    return rows


def check_moser_chain(pair: Eigenpair, links: LinkField, torus: TorusSpec, constants: BoundConstants,
                      j_max: int = 6) -> list:
    """Iteration rows for k = q^j (j = 0..j_max), the Hoelder interpolation row and the limiting sup estimate."""
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    n = constants.n
    q = (n + 2) / n
    m = _measure(pair, links, torus)
    g = m.grad_abs
    N = max(m.g_inf, m.s_inf)
    lam = max(pair.lam, 0.0)
    allow = discretization_allowance(torus)
    rows = []
    for j in range(j_max + 1):
        k = q**j
        lhs = lp_norm(g, 2 * k * q)
        rhs = K_.moser_rhs(constants, lam, k, N, lp_norm(g, 2 * k))
        rows.append(make_row(f"moser_chain[j={j}]", lhs, _log(rhs), {"lambda": pair.lam, "k": k, "N": N}, allow))

    g2q = lp_norm(g, 2 * q)
    holder_rhs = n / (n + 2) * _log(m.g_2) + 2 / (n + 2) * _log(m.g_inf)
    rows.append(make_row("holder", g2q, holder_rhs, {"lambda": pair.lam}))

    eps = constants.epsilon
    ineq_a = K_.moser_limit_log_factor(constants, lam) + (1 - eps) * math.log(N) + eps * _log(g2q)
    rows.append(make_row("moser_limit", m.g_inf, ineq_a, {"lambda": pair.lam, "N": N}, allow))
    return rows


def check_near_orthonormal(pairs, l2_tol: float = 1e-6):
    """Sup deviations D_ij = max_x |<S_i(x), S_j(x)> - delta_ij| and sanity rows.

    There is no closed form for the bounding modulus, so the rows only check
    symmetry of D and the L2-orthonormality the statement presumes.
    """
    sections = [p.section for p in pairs]
    G = pointwise_gram(sections)
    m = len(sections)
    D = np.max(np.abs(G - np.eye(m)), axis=tuple(range(G.ndim - 2)))
    lam_max = max(p.lam for p in pairs)
    rows = [make_row("near_orthonormal.symmetric", float(np.max(np.abs(D - D.T))), _log(1e-14),
                     {"lambda": lam_max})]
    gram_l2 = np.array([[inner(a, b) for b in sections] for a in sections])
    rows.append(make_row("near_orthonormal.l2", float(np.max(np.abs(gram_l2 - np.eye(m)))), _log(l2_tol),
                         {"lambda": lam_max}))
    return D, rows


def check_near_orthonormal_family(family, noise: float = 1e-6) -> list:
    """Monotone-family rows: max_ij D_ij must not grow as the largest eigenvalue shrinks.

    ``family`` is a sequence of eigenpair lists; it is ordered here by
    decreasing largest eigenvalue. ``noise`` absorbs solver-level jitter.
    """
    members = sorted(family, key=lambda pairs: -max(p.lam for p in pairs))
    summary = []
    for pairs in members:
        D, _ = check_near_orthonormal(pairs)
        summary.append((max(p.lam for p in pairs), float(np.max(D))))
    rows = []
    for t in range(1, len(summary)):
        lam_prev, d_prev = summary[t - 1]
        lam_t, d_t = summary[t]
        rows.append(make_row(f"near_orthonormal.monotone[{t}]", d_t, _log(d_prev + noise),
                             {"lambda": lam_t, "lambda_prev": lam_prev, "D_prev": d_prev}))
    return rows


class FrameError(ValueError):
    def __init__(self, site):
        super().__init__(f"pointwise Gram matrix is singular at site {tuple(int(i) for i in site)}; "
                         "no frame from these sections")
        self.site = site


@dataclass(eq=False)
class FrameResult:
    frame: list = field(repr=False)
    deviation: list
    frame_gradient: list
    rows: list


def gram_schmidt_frame(pairs, links: LinkField, torus: TorusSpec, singular_tol: float = 1e-10) -> FrameResult:
    """Pointwise Gram-Schmidt of the sections of ``pairs`` into a unitary frame."""
    k = links.rank
    if len(pairs) != k:
        raise ValueError(f"need exactly rank = {k} sections, got {len(pairs)}")
    frame = []
    for p in pairs:
        v = p.section.astype(complex).copy()
        for e in frame:
            v -= np.sum(np.conj(e) * v, axis=-1, keepdims=True) * e
        norm = np.sqrt(np.sum(np.abs(v) ** 2, axis=-1))
        ref = np.sqrt(np.sum(np.abs(p.section) ** 2, axis=-1))
        bad = norm <= singular_tol * np.maximum(ref, 1.0)
        if np.any(bad):
            raise FrameError(np.argwhere(bad)[0])
        frame.append(v / norm[..., None])

    deviation = [lp_norm(e - p.section, math.inf, grid_ndim=torus.n) for e, p in zip(frame, pairs)]
    frame_grad = [lp_norm(gradient_magnitude(covariant_gradient(links, e, torus)), math.inf) for e in frame]
    G = pointwise_gram(frame)
    defect = float(np.max(np.abs(G - np.eye(k))))
    rows = [make_row("frame.orthonormal", defect, _log(1e-12), {"lambda": max(p.lam for p in pairs)})]
    return FrameResult(frame, deviation, frame_grad, rows)


def check_holonomy_bound(lambda1: float, beta: BetaResult, constants: BoundConstants) -> list:
    """beta against the main bound at lambda1, and lambda1 against the holonomy lower bound."""
    b = beta.beta
    ctx = {"lambda": lambda1, "beta": b, "witness_m": list(beta.witness_m)}
    rows = []
    if lambda1 > 0:
        rhs = K_.main_bound(constants, lambda1)
    else:
        rhs = -math.inf
    rows.append(make_row("holonomy.direct", b, rhs, ctx))

    lower = K_.holonomy_lower_bound(constants, b)
    residual = 0.0
    if 0 < lower < 1:
        fixed = math.exp(K_.holonomy_rhs_log(constants, b, lower))
        residual = abs(lower - fixed)
    rows.append(make_row("holonomy.lower_bound", lower, _log(lambda1),
                         {**ctx, "lower_bound": lower, "fixed_point_residual": residual}))
    return rows


def check_holonomy_gradient(pair: Eigenpair, beta: BetaResult, links: LinkField, torus: TorusSpec) -> VerdictRow:
    """beta ||S||_inf <= ||grad S||_inf on an eigenpair of the same bundle."""
    m = _measure(pair, links, torus)
    return make_row("holonomy.gradient", beta.beta * m.s_inf, _log(m.g_inf),
                    {"lambda": pair.lam, "beta": beta.beta}, discretization_allowance(torus))
