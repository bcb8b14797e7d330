"""Smallest eigenpairs of the discrete connection Laplacian.

The iterative path is implicitly restarted Lanczos (ARPACK via scipy) on the
matrix-free operator, followed by a Rayleigh-Ritz cleanup of the returned
block. Residuals are always recomputed from a fresh operator application.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .lattice import LinkField, TorusSpec
from .operator import apply_laplacian, assemble_laplacian

__all__ = ["Eigenpair", "ConvergenceError", "smallest_eigenpairs", "dense_reference", "DENSE_MAX_DOF"]

log = logging.getLogger(__name__)

DENSE_MAX_DOF = 8192
_TIE = 1e-10


class ConvergenceError(RuntimeError):
    def __init__(self, message, best_residual):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


@dataclass(eq=False)
class Eigenpair:
    """lam, section with ||S||_2 = 1 (volume-normalized), and ||L S - lam S||_2."""

    lam: float
    section: np.ndarray = field(repr=False)
    residual: float


def _certify(links, torus, vectors):
    """Rayleigh-Ritz on the span of ``vectors`` (columns) and residuals of the result."""
    shape = tuple(torus.grid) + (links.rank,)
    Q, _ = np.linalg.qr(vectors)
    LQ = np.column_stack([apply_laplacian(links, q.reshape(shape), torus).ravel() for q in Q.T])
    H = Q.conj().T @ LQ
    H = 0.5 * (H + H.conj().T)
    w, Y = linalg.eigh(H)
    X = Q @ Y
    LX = LQ @ Y
    pairs = []
    sites = torus.sites
    for i in range(X.shape[1]):
        x = X[:, i]
        # deterministic phase: largest component real positive
        pivot = int(np.argmax(np.abs(x) > 0.5 * np.max(np.abs(x))))
        rot = np.conj(x[pivot]) / abs(x[pivot])
        x = x * rot
        lx = LX[:, i] * rot
        lam = float(np.real(np.vdot(x, lx)))
        res = float(np.linalg.norm(lx - lam * x) / np.linalg.norm(x))
        section = (x * np.sqrt(sites) / np.linalg.norm(x)).reshape(shape)
        pairs.append(Eigenpair(lam, section, res))
    return _order(pairs)


def _order(pairs):
    def key(p):
        return int(np.argmax(np.abs(p.section).ravel()))

    pairs = sorted(pairs, key=lambda p: p.lam)
    out, i = [], 0
    while i < len(pairs):
        j = i + 1
        while j < len(pairs) and pairs[j].lam - pairs[i].lam <= _TIE:
            j += 1
        out.extend(sorted(pairs[i:j], key=key))
        i = j
    return out


def smallest_eigenpairs(links: LinkField, torus: TorusSpec, k: int, tol: float = 1e-8,
                        max_iter: int | None = None, seed: int = 0) -> list:
    """k smallest eigenpairs in nondecreasing order, each with residual <= tol."""
    total = torus.sites * links.rank
    if k < 1:
        raise ValueError("k must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if k >= total - 1:
        raise ValueError(f"k = {k} too large for {total} degrees of freedom; use dense_reference")
    shape = tuple(torus.grid) + (links.rank,)

    def matvec(v):
        return apply_laplacian(links, np.asarray(v).reshape(shape), torus).ravel()

    op = LinearOperator((total, total), matvec=matvec, dtype=complex)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(total) + 1j * rng.standard_normal(total)
    maxiter = max_iter or max(1000, 10 * total)
    best = np.inf
    for attempt in range(3):
        ncv = min(total - 1, max(2 * k + 20, 40) * (attempt + 1))
        arpack_tol = tol * 10.0 ** (-2 - 2 * attempt)
        try:
            _, V = eigsh(op, k=k, which="SA", tol=arpack_tol, v0=v0, ncv=ncv, maxiter=maxiter)
        except ArpackNoConvergence as exc:
            V = exc.eigenvectors
            if V is None or V.shape[1] == 0:
                continue
        pairs = _certify(links, torus, V)
        worst = max(p.residual for p in pairs)
        best = min(best, worst)
        if len(pairs) == k and worst <= tol:
            return pairs
        log.debug("eigsh attempt %d: worst residual %.3e", attempt, worst)
    raise ConvergenceError(f"no convergence to tol={tol} for k={k}", best)


def dense_reference(links: LinkField, torus: TorusSpec, k: int) -> list:
    """Full Hermitian diagonalization of the assembled operator; the k smallest pairs."""
    total = torus.sites * links.rank
    if total > DENSE_MAX_DOF:
        raise ValueError(f"dense_reference limited to {DENSE_MAX_DOF} degrees of freedom, got {total}")
    if not 1 <= k <= total:
        raise ValueError(f"k must be in 1..{total}")
    A = assemble_laplacian(links, torus).toarray()
    _, V = linalg.eigh(A, subset_by_index=[0, k - 1])
    return _certify(links, torus, V)


def dense_eigenvalues(links: LinkField, torus: TorusSpec) -> np.ndarray:
    total = torus.sites * links.rank
    if total > DENSE_MAX_DOF:
        raise ValueError(f"dense_reference limited to {DENSE_MAX_DOF} degrees of freedom, got {total}")
    return linalg.eigvalsh(assemble_laplacian(links, torus).toarray())
