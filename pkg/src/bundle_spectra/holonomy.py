"""Parallel transport around lattice loops and the holonomy functional beta."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .lattice import BundleSpec, LinkField, TorusSpec

__all__ = ["LoopSpec", "BetaResult", "loop_holonomy", "beta_flat", "plaquette_loop", "winding_loop"]


@dataclass(frozen=True)
class LoopSpec:
    """A lattice loop: base site plus a sequence of (axis, +1/-1) steps."""

    base: tuple
    steps: tuple

    def __post_init__(self):
        steps = tuple((int(a), int(s)) for a, s in self.steps)
        if not steps:
            raise ValueError("loop must have at least one step")
        for a, s in steps:
            if s not in (1, -1):
                raise ValueError(f"step sign must be +1 or -1, got {s}")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "base", tuple(int(b) for b in self.base))

    def displacement(self, n: int) -> np.ndarray:
        disp = np.zeros(n, dtype=int)
        for a, s in self.steps:
            disp[a] += s
        return disp

    def is_closed(self, grid) -> bool:
        disp = self.displacement(len(grid))
        return all(d % N == 0 for d, N in zip(disp, grid))

    def winding(self, grid) -> tuple:
        return tuple(int(d // N) for d, N in zip(self.displacement(len(grid)), grid))

    def length(self, torus: TorusSpec) -> float:
        h = torus.spacing
        return sum(h[a] for a, _ in self.steps)


def plaquette_loop(base, i: int, j: int) -> LoopSpec:
    return LoopSpec(base, ((i, 1), (j, 1), (i, -1), (j, -1)))


def winding_loop(torus: TorusSpec, m, base=None) -> LoopSpec:
    """Staircase loop winding m_j times around generator j."""
    base = (0,) * torus.n if base is None else base
    steps = []
    for j, mj in enumerate(m):
        sign = 1 if mj >= 0 else -1
        steps += [(j, sign)] * (abs(int(mj)) * torus.grid[j])
    return LoopSpec(base, tuple(steps))


def loop_holonomy(links: LinkField, loop: LoopSpec) -> np.ndarray:
    """Ordered product of links along the loop, adjoints for backward steps."""
    grid = links.grid
    if len(loop.base) != links.n:
        raise ValueError("loop base has wrong dimension")
    if not loop.is_closed(grid):
        raise ValueError(f"loop is not closed: displacement {loop.displacement(links.n).tolist()}")
    x = list(loop.base)
    H = np.eye(links.rank, dtype=complex)
    for a, s in loop.steps:
        if s > 0:
            H = H @ links.U[(a,) + tuple(x)]
            x[a] = (x[a] + 1) % grid[a]
        else:
            x[a] = (x[a] - 1) % grid[a]
            H = H @ np.conj(links.U[(a,) + tuple(x)]).T
    return H


@dataclass(frozen=True)
class BetaResult:
    """beta = inf over unit fiber vectors of sup over loops of |H v - v| / L.

    ``pure_beta`` is the minimum over single fiber lines; ``beta`` also
    optimizes over mixtures of lines, which can only lower it.
    """

    beta: float
    witness_m: tuple
    search_radius: int
    tail_bound: float
    pure_beta: float
    mixture_weights: tuple


def beta_flat(torus: TorusSpec, bundle: BundleSpec, search_radius: int = 8, max_radius: int = 64) -> BetaResult:
    """beta of a diagonal flat bundle via homotopy classes m with shortest loop length |m L|.

    The search box |m_j| <= R grows until every class outside it, whose
    contribution is at most min(2 / ((R+1) min L), ||d / L||_2) with
    d_j = |e^{i theta_j} - 1|, is certified not to exceed the box maximum.
    """
    if bundle.kind != "flat":
        raise ValueError("beta_flat requires a flat bundle")
    if search_radius < 1:
        raise ValueError("search_radius must be >= 1")
    theta = bundle.theta
    L = np.asarray(torus.lengths)
    # |H_m - 1| <= sum_j |m_j| |e^{i theta_j} - 1|, so by Cauchy-Schwarz every
    # class of every line is bounded by ||d / L||_2 regardless of the box
    uniform = float(np.max(np.linalg.norm(2 * np.abs(np.sin(0.5 * theta)) / L, axis=1)))
    R = search_radius
    while True:
        axis = np.arange(-R, R + 1)
        classes = np.stack(np.meshgrid(*([axis] * torus.n), indexing="ij"), axis=-1).reshape(-1, torus.n)
        classes = classes[np.any(classes != 0, axis=1)]
        ell = np.sqrt(np.sum((classes * L) ** 2, axis=1))
        # |H v - v|^2 / L^2 is linear in the line weights |v_c|^2
        disp = 2 * np.abs(np.sin(0.5 * classes @ theta.T))
        sq = (disp / ell[:, None]) ** 2
        per_line = np.sqrt(sq.max(axis=0))
        c_best = int(np.argmin(per_line))
        pure = float(per_line[c_best])
        beta, weights = pure, np.eye(bundle.rank)[c_best]
        if bundle.rank > 1 and pure > 0:
            mix, w = _mixture_min(sq)
            if mix < beta:
                beta, weights = mix, w
        tail = min(2.0 / ((R + 1) * float(L.min())), uniform)
        # classes outside the box cannot exceed what the box already attains
        if tail <= beta * (1 + 1e-12) or beta == 0.0 or R >= max_radius:
            break
        R *= 2
    witness = (0,) * torus.n if beta == 0.0 else classes[int(np.argmax(sq @ weights))]
    return BetaResult(
        beta=beta,
        witness_m=tuple(int(v) for v in witness),
        search_radius=R,
        tail_bound=tail,
        pure_beta=pure,
        mixture_weights=tuple(float(v) for v in weights),
    )


def _mixture_min(sq: np.ndarray):
    """min over the weight simplex of max_m (sq @ w), solved as a linear program."""
    n_cls, rank = sq.shape
    # variables: w_1..w_rank, t ; minimize t s.t. sq w - t <= 0, sum w = 1
    c = np.zeros(rank + 1)
    c[-1] = 1.0
    A_ub = np.hstack([sq, -np.ones((n_cls, 1))])
    b_ub = np.zeros(n_cls)
    A_eq = np.hstack([np.ones((1, rank)), np.zeros((1, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * rank + [(None, None)], method="highs")
    w = np.clip(res.x[:rank], 0, None)
    w /= w.sum()
    return math.sqrt(max(float(np.max(sq @ w)), 0.0)), w
