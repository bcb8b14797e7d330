"""Randomized invariants (hypothesis, 200 examples each)."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from bundle_spectra.constants import GeometricBounds, assemble_constants, holonomy_lower_bound, holonomy_rhs_log
from bundle_spectra.lattice import LinkField, TorusSpec, gauge_transform, plaquette_curvature
from bundle_spectra.operator import (
    apply_laplacian,
    assemble_laplacian,
    covariant_gradient,
    gradient_magnitude,
    inner,
    lp_norm,
)

SETTINGS = settings(max_examples=200, deadline=None, derandomize=True)

seeds = st.integers(0, 2**32 - 1)
ranks = st.integers(1, 3)
grids = st.tuples(st.integers(4, 5), st.integers(4, 5), st.integers(4, 5))
lengths = st.tuples(*[st.floats(0.3, 3.0)] * 3)


def _unitaries(rng, shape, k):
    Z = rng.standard_normal(shape + (k, k)) + 1j * rng.standard_normal(shape + (k, k))
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    return Q * (d / np.abs(d))[..., None, :]


def random_problem(seed, grid, L, k):
    rng = np.random.default_rng(seed)
    torus = TorusSpec(tuple(L), tuple(grid))
    links = LinkField(_unitaries(rng, (3,) + torus.grid, k))
    s = rng.standard_normal(torus.grid + (k,)) + 1j * rng.standard_normal(torus.grid + (k,))
    t = rng.standard_normal(torus.grid + (k,)) + 1j * rng.standard_normal(torus.grid + (k,))
    return rng, torus, links, s, t


@SETTINGS
@given(seeds, grids, lengths, ranks)
def test_operator_hermitian(seed, grid, L, k):
    _, torus, links, s, t = random_problem(seed, grid, L, k)
    a = inner(apply_laplacian(links, s, torus), t)
    b = inner(s, apply_laplacian(links, t, torus))
    scale = sum(2 / h**2 for h in torus.spacing) * math.sqrt(inner(s, s).real * inner(t, t).real)
    assert abs(a - b) <= 1e-12 * scale


@SETTINGS
@given(seeds, st.integers(1, 2))
def test_operator_positive_semidefinite(seed, k):
    _, torus, links, _, _ = random_problem(seed, (4, 4, 4), (1.0, 0.7, 1.4), k)
    A = assemble_laplacian(links, torus).toarray()
    assert np.max(np.abs(A - A.conj().T)) < 1e-12
    ev = np.linalg.eigvalsh(A)
    assert ev[0] >= -1e-10 * ev[-1]


@SETTINGS
@given(seeds, grids, lengths, ranks)
def test_exact_adjointness(seed, grid, L, k):
    _, torus, links, s, _ = random_problem(seed, grid, L, k)
    lhs = inner(apply_laplacian(links, s, torus), s)
    g2 = lp_norm(gradient_magnitude(covariant_gradient(links, s, torus)), 2) ** 2
    assert abs(lhs.real - g2) <= 1e-12 * g2
    assert abs(lhs.imag) <= 1e-12 * g2


@SETTINGS
@given(seeds, st.floats(1.0, 20.0), st.floats(0.0, 20.0))
def test_lp_monotone(seed, p, dp):
    rng = np.random.default_rng(seed)
    v = np.abs(rng.standard_normal(200)) ** rng.uniform(0.2, 3.0)
    a, b = lp_norm(v, p), lp_norm(v, p + dp)
    assert a <= b * (1 + 1e-12)
    assert b <= lp_norm(v, math.inf) * (1 + 1e-12)


@SETTINGS
@given(seeds, st.floats(1.0, 10.0), st.floats(1.0, 10.0), st.floats(0.0, 1.0))
def test_holder_interpolation(seed, p, q, t):
    rng = np.random.default_rng(seed)
    v = np.abs(rng.standard_cauchy(150))
    r = 1.0 / ((1 - t) / p + t / q)
    lhs = lp_norm(v, r)
    rhs = lp_norm(v, p) ** (1 - t) * lp_norm(v, q) ** t
    assert lhs <= rhs * (1 + 1e-11)


@SETTINGS
@given(seeds, ranks)
def test_plaquette_r_gauge_invariant(seed, k):
    rng, torus, links, _, _ = random_problem(seed, (4, 4, 4), (1.0, 1.0, 1.0), k)
    # keep plaquette phases away from the +-pi branch cut
    near = LinkField(_near_identity(rng, links.U, 0.3))
    g = _unitaries(rng, torus.grid, k)
    _, r0 = plaquette_curvature(near, torus)
    _, r1 = plaquette_curvature(gauge_transform(near, g), torus)
    assert abs(r1 - r0) <= 1e-10 * max(r0, 1.0)


def _near_identity(rng, U, strength):
    # matrix power U^strength via eigendecomposition keeps links unitary
    w, V = np.linalg.eig(U)
    w = np.exp(1j * strength * np.angle(w))
    return V @ (w[..., None] * np.linalg.inv(V))


@SETTINGS
@given(st.integers(3, 8), st.floats(0.0, 2.0), st.floats(0.05, 3.0), st.floats(0.0, 5.0))
def test_constant_relations(n, K, d, r):
    c = assemble_constants(GeometricBounds(n, K, d, r))
    eps = c.epsilon
    assert math.isclose(c.B1_log, (n + 2 * (1 - eps)) / (eps * n) * c.B2_log, rel_tol=1e-12)
    assert c.A1 > c.A2 > 0


@SETTINGS
@given(st.floats(1e-3, 2.0), st.floats(0.1, 2.0), st.floats(0.0, 1.0))
def test_holonomy_fixed_point(beta, d, r):
    c = assemble_constants(GeometricBounds(3, 0.0, d, r))
    lam = holonomy_lower_bound(c, beta)
    assert 0 <= lam <= 1
    if 0 < lam < 1:
        assert abs(lam - math.exp(holonomy_rhs_log(c, beta, lam))) <= 1e-12 * lam
