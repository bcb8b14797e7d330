"""Flat tori, diagonal U(1)^k bundles and their link fields.

A bundle of rank k is a direct sum of complex lines. Each line carries
holonomy angles around the torus generators, optionally integer flux quanta
per coordinate 2-plane, and optionally a zero-net-flux cosine modulated field.
Links are stored densely as (n, *grid, k, k) unitary matrices so that
non-diagonal gauge transforms stay representable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "TorusSpec",
    "LineComponent",
    "BundleSpec",
    "LinkField",
    "build_links",
    "plaquette_curvature",
    "torus_metrics",
    "flat_spectrum",
    "flat_eigensection",
    "SpectrumMode",
    "gauge_transform",
    "magnetic_spectrum",
]


@dataclass(frozen=True)
class TorusSpec:
    lengths: tuple
    grid: tuple

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.lengths)
        grid = tuple(int(x) for x in self.grid)
        if len(lengths) != len(grid):
            raise ValueError("lengths and grid must have the same dimension")
        if len(lengths) < 3:
            raise ValueError(f"torus dimension must be >= 3, got {len(lengths)}")
        for j, (L, N) in enumerate(zip(lengths, grid)):
            if not L > 0 or not math.isfinite(L):
                raise ValueError(f"lengths[{j}] must be positive, got {L}")
            if N < 4:
                raise ValueError(f"grid[{j}] must be >= 4, got {N}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "grid", grid)

    @property
    def n(self) -> int:
        return len(self.grid)

    @property
    def spacing(self) -> tuple:
        return tuple(L / N for L, N in zip(self.lengths, self.grid))

    @property
    def sites(self) -> int:
        return math.prod(self.grid)

    def coordinates(self, axis: int) -> np.ndarray:
        """Coordinate x_axis at every site, broadcastable against the grid."""
        shape = [1] * self.n
        shape[axis] = self.grid[axis]
        return (np.arange(self.grid[axis]) * self.spacing[axis]).reshape(shape)

    def scaled(self, factor: int) -> "TorusSpec":
        return TorusSpec(self.lengths, tuple(N * factor for N in self.grid))


def _as_plane_matrix(values, n, name, integer):
    if values is None:
        return None
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n, n):
        raise ValueError(f"{name} must be an {n}x{n} matrix, got shape {arr.shape}")
    if not np.allclose(arr, -arr.T, atol=0):
        raise ValueError(f"{name} must be antisymmetric")
    if integer and not np.all(arr == np.round(arr)):
        raise ValueError(f"{name} must contain integers (flux quantization)")
    if not np.any(arr):
        return None
    return tuple(tuple(row) for row in (arr.astype(int) if integer else arr).tolist())


@dataclass(frozen=True)
class LineComponent:
    """One complex line of the fiber.

    ``flux[i][j]`` counts flux quanta through the (i, j) plane, giving the
    constant curvature 2 pi flux / (L_i L_j). ``modulation[i][j]`` is the
    amplitude b of a zero-net-flux field b cos(2 pi x_i / L_i) in the (i, j)
    plane (only the i < j entries are used).
    """

    theta: tuple
    flux: tuple | None = None
    modulation: tuple | None = None

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        n = len(theta)
        for t in theta:
            if not -math.pi < t <= math.pi:
                raise ValueError(f"holonomy angles must lie in (-pi, pi], got {t}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "flux", _as_plane_matrix(self.flux, n, "flux", True))
        object.__setattr__(self, "modulation", _as_plane_matrix(self.modulation, n, "modulation", False))

    @property
    def is_flat(self) -> bool:
        return self.flux is None and self.modulation is None

    def curvature_scale(self, lengths) -> float:
        """Largest |F_ij| of this line in the continuum."""
        r = 0.0
        n = len(self.theta)
        for i, j in itertools.combinations(range(n), 2):
            f = abs(self.flux[i][j]) * 2 * math.pi / (lengths[i] * lengths[j]) if self.flux else 0.0
            b = abs(self.modulation[i][j]) if self.modulation else 0.0
            r = max(r, f + b)
        return r


@dataclass(frozen=True)
class BundleSpec:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not 1 <= len(comps) <= 4:
            raise ValueError(f"bundle rank must be in 1..4, got {len(comps)}")
        dims = {len(c.theta) for c in comps}
        if len(dims) != 1:
            raise ValueError("all components must have the same base dimension")
        object.__setattr__(self, "components", comps)

    @classmethod
    def flat(cls, theta) -> "BundleSpec":
        """Diagonal flat bundle; ``theta`` is a (rank, n) array of holonomy angles."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        return cls(tuple(LineComponent(tuple(row)) for row in theta))

    @classmethod
    def magnetic(cls, flux, theta=None) -> "BundleSpec":
        flux = np.asarray(flux)
        n = flux.shape[0]
        theta = (0.0,) * n if theta is None else tuple(theta)
        return cls((LineComponent(theta, flux=flux),))

    @classmethod
    def direct_sum(cls, *bundles: "BundleSpec") -> "BundleSpec":
        return cls(tuple(c for b in bundles for c in b.components))

    @property
    def rank(self) -> int:
        return len(self.components)

    @property
    def n(self) -> int:
        return len(self.components[0].theta)

    @property
    def kind(self) -> str:
        if all(c.is_flat for c in self.components):
            return "flat"
        if self.rank == 1 and self.components[0].modulation is None:
            return "magnetic"
        return "sum"

    @property
    def theta(self) -> np.ndarray:
        return np.array([c.theta for c in self.components])


@dataclass(frozen=True, eq=False)
class LinkField:
    """U[j][x] is the k x k parallel transport along the forward edge x -> x + e_j."""

    U: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def grid(self) -> tuple:
        return self.U.shape[1:-2]

    @property
    def rank(self) -> int:
        return self.U.shape[-1]

    def unitarity_defect(self) -> float:
        k = self.rank
        prod = np.einsum("...ba,...bc->...ac", self.U.conj(), self.U)
        return float(np.max(np.abs(prod - np.eye(k))))


def _line_phases(comp: LineComponent, torus: TorusSpec) -> np.ndarray:
    """Per-direction link phases (n, *grid) for one line."""
    n = torus.n
    h = torus.spacing
    L = torus.lengths
    phases = np.zeros((n,) + torus.grid)
    for j in range(n):
        phases[j] += comp.theta[j] * h[j] / L[j]
    if comp.flux is not None:
        for i, j in itertools.combinations(range(n), 2):
            q = comp.flux[i][j]
            if q == 0:
                continue
            F = 2 * math.pi * q / (L[i] * L[j])
            # Landau gauge: phase on i-links grows with x_j, the wrap-around
            # j-links close the gauge so every plaquette carries F h_i h_j.
            phases[i] += -F * torus.coordinates(j) * h[i]
            wrap = np.zeros(torus.grid)
            idx = [slice(None)] * n
            idx[j] = torus.grid[j] - 1
            wrap[tuple(idx)] = 1.0
            phases[j] += wrap * F * L[j] * torus.coordinates(i)
    if comp.modulation is not None:
        for i, j in itertools.combinations(range(n), 2):
            b = comp.modulation[i][j]
            if b == 0:
                continue
            xi = torus.coordinates(i)
            phases[j] += b * L[i] / (2 * math.pi) * np.sin(2 * math.pi * xi / L[i]) * h[j]
    return phases


def build_links(torus: TorusSpec, bundle: BundleSpec) -> LinkField:
    if bundle.n != torus.n:
        raise ValueError(f"bundle dimension {bundle.n} does not match torus dimension {torus.n}")
    if bundle.kind == "magnetic" and bundle.rank != 1:
        raise ValueError("magnetic bundles must have rank 1")
    k = bundle.rank
    U = np.zeros((torus.n,) + torus.grid + (k, k), dtype=complex)
    for c, comp in enumerate(bundle.components):
        U[..., c, c] = np.exp(1j * _line_phases(comp, torus))
    return LinkField(U)


def gauge_transform(links: LinkField, g: np.ndarray) -> LinkField:
    """U_j(x) -> g(x) U_j(x) g(x + e_j)^dagger for a site field of unitaries g."""
    U = np.empty_like(links.U)
    for j in range(links.n):
        g_next = np.roll(g, -1, axis=j)
        U[j] = g @ links.U[j] @ np.conj(np.swapaxes(g_next, -1, -2))
    return LinkField(U)


def plaquette_holonomies(links: LinkField, i: int, j: int) -> np.ndarray:
    """U_i(x) U_j(x+e_i) U_i(x+e_j)^dagger U_j(x)^dagger at every site."""
    Ui, Uj = links.U[i], links.U[j]

    def dag(A):
        return np.conj(np.swapaxes(A, -1, -2))

    return Ui @ np.roll(Uj, -1, axis=i) @ dag(np.roll(Ui, -1, axis=j)) @ dag(Uj)


def plaquette_curvature(links: LinkField, torus: TorusSpec):
    """Discrete curvature per plane and the bound r = max |F_ij|.

    Returns ``(curvature, r)`` where ``curvature[(i, j)]`` has shape
    (*grid, k) holding the plaquette eigenphases divided by h_i h_j.
    """
    h = torus.spacing
    curvature = {}
    r = 0.0
    for i, j in itertools.combinations(range(torus.n), 2):
        P = plaquette_holonomies(links, i, j)
        if links.rank == 1:
            w = P[..., 0]
        else:
            w = np.linalg.eigvals(P)
        F = np.angle(w) / (h[i] * h[j])
        curvature[(i, j)] = F
        r = max(r, float(np.max(np.abs(F))))
    return curvature, r


def torus_metrics(torus: TorusSpec) -> dict:
    return {
        "diameter": 0.5 * math.sqrt(sum(L * L for L in torus.lengths)),
        "volume": math.prod(torus.lengths),
    }


class SpectrumMode(NamedTuple):
    lam: float
    fiber: int
    m: tuple


def _mode_range(N):
    # N distinct Fourier modes on a periodic grid of N sites
    return range(-(N // 2), N - N // 2)


def flat_spectrum(torus: TorusSpec, bundle: BundleSpec, count: int, discrete: bool = False) -> list:
    """Lowest ``count`` eigenvalues of the flat connection Laplacian, sorted.

    Continuum: sum_j ((theta_j + 2 pi m_j) / L_j)^2. Discrete: the exact
    dispersion sum_j (2 - 2 cos phi_j) / h_j^2 of the forward-difference
    operator with phi_j = (theta_j + 2 pi m_j) h_j / L_j.
    """
    if bundle.kind != "flat":
        raise ValueError("flat_spectrum requires a flat bundle")
    if count < 1:
        raise ValueError("count must be >= 1")
    L = np.array(torus.lengths)
    h = np.array(torus.spacing)
    theta = bundle.theta
    if discrete:
        total = bundle.rank * torus.sites
        if count > total:
            raise ValueError(f"count {count} exceeds {total} degrees of freedom")
        ranges = [np.array(list(_mode_range(N))) for N in torus.grid]
        modes = []
        for c in range(bundle.rank):
            per_axis = [(2 - 2 * np.cos((theta[c, j] + 2 * np.pi * ranges[j]) * h[j] / L[j])) / h[j] ** 2
                        for j in range(torus.n)]
            grids = np.meshgrid(*per_axis, indexing="ij")
            lam = sum(grids)
            ms = np.meshgrid(*ranges, indexing="ij")
            order = np.argsort(lam, axis=None, kind="stable")[:count]
            for flat_idx in order:
                idx = np.unravel_index(flat_idx, lam.shape)
                modes.append(SpectrumMode(float(lam[idx]), c, tuple(int(mm[idx]) for mm in ms)))
        modes.sort(key=lambda s: s.lam)
        return modes[:count]

    R = 1
    while True:
        rng = np.arange(-R, R + 1)
        modes = []
        for c in range(bundle.rank):
            for m in itertools.product(rng, repeat=torus.n):
                lam = float(np.sum(((theta[c] + 2 * np.pi * np.array(m)) / L) ** 2))
                modes.append(SpectrumMode(lam, c, tuple(int(v) for v in m)))
        modes.sort(key=lambda s: s.lam)
        # any mode with some |m_j| > R has lam >= ((2 pi (R+1) - pi) / L_j)^2
        floor = min(((2 * np.pi * (R + 1) - np.pi) / Lj) ** 2 for Lj in L)
        if len(modes) >= count and modes[count - 1].lam < floor:
            return modes[:count]
        R += 1


def flat_eigensection(torus: TorusSpec, bundle: BundleSpec, mode: SpectrumMode) -> np.ndarray:
    """Exact discrete eigensection e_c exp(2 pi i m.x / L) of a flat bundle, unit modulus."""
    phase = np.zeros(torus.grid)
    for j in range(torus.n):
        phase = phase + 2 * np.pi * mode.m[j] * torus.coordinates(j) / torus.lengths[j]
    s = np.zeros(torus.grid + (bundle.rank,), dtype=complex)
    s[..., mode.fiber] = np.exp(1j * phase)
    return s


def magnetic_spectrum(torus: TorusSpec, bundle: BundleSpec, count: int) -> list:
    """Continuum Landau spectrum of a rank-1 bundle with flux through a single plane.

    Eigenvalues are (2 l + 1)|F| plus the free kinetic term of the remaining
    directions, each with multiplicity |flux|. Returns sorted floats.
    """
    if bundle.kind != "magnetic":
        raise ValueError("magnetic_spectrum requires a rank-1 magnetic bundle")
    comp = bundle.components[0]
    planes = [(i, j) for i, j in itertools.combinations(range(torus.n), 2) if comp.flux[i][j] != 0]
    if len(planes) != 1:
        raise ValueError("magnetic_spectrum supports flux through exactly one coordinate plane")
    i, j = planes[0]
    q = abs(comp.flux[i][j])
    F = 2 * math.pi * q / (torus.lengths[i] * torus.lengths[j])
    free = [a for a in range(torus.n) if a not in (i, j)]
    R = 1
    while True:
        kinetic = sorted(
            sum(((comp.theta[a] + 2 * math.pi * m) / torus.lengths[a]) ** 2 for a, m in zip(free, ms))
            for ms in itertools.product(range(-R, R + 1), repeat=len(free))
        )
        levels = sorted((2 * l + 1) * F + kin for l in range(count) for kin in kinetic)
        values = [v for v in levels for _ in range(q)][:count]
        floor = min(((2 * math.pi * (R + 1) - math.pi) / torus.lengths[a]) ** 2 for a in free) if free else math.inf
        if values[-1] < floor + F:
            return values
        R += 1
