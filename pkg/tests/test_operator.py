import itertools
import math

import numpy as np
import pytest

from bundle_spectra.lattice import BundleSpec, LinkField, TorusSpec, build_links, flat_eigensection, flat_spectrum
from bundle_spectra.operator import (
    apply_laplacian,
    assemble_laplacian,
    covariant_gradient,
    gradient_magnitude,
    inner,
    lp_norm,
    pointwise_gram,
)


def random_links(rng, torus, k):
    Z = rng.standard_normal((torus.n,) + torus.grid + (k, k)) + 1j * rng.standard_normal((torus.n,) + torus.grid + (k, k))
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    return LinkField(Q * (d / np.abs(d))[..., None, :])


def random_section(rng, torus, k):
    return rng.standard_normal(torus.grid + (k,)) + 1j * rng.standard_normal(torus.grid + (k,))


def loop_laplacian(links, s, torus):
    """Site-by-site reference: sum_j (2 S(x) - U_j(x) S(x+e_j) - U_j(x-e_j)^H S(x-e_j)) / h_j^2."""
    out = np.zeros_like(s)
    grid = torus.grid
    for x in itertools.product(*[range(N) for N in grid]):
        acc = np.zeros(s.shape[-1], dtype=complex)
        for j in range(torus.n):
            xp = list(x)
            xp[j] = (xp[j] + 1) % grid[j]
            xm = list(x)
            xm[j] = (xm[j] - 1) % grid[j]
            Uf = links.U[(j,) + x]
            Ub = links.U[(j,) + tuple(xm)]
            acc += (2 * s[x] - Uf @ s[tuple(xp)] - Ub.conj().T @ s[tuple(xm)]) / torus.spacing[j] ** 2
        out[x] = acc
    return out


def test_laplacian_matches_site_loop_reference():
    rng = np.random.default_rng(0)
    t = TorusSpec((1.0, 1.3, 0.7), (4, 5, 4))
    for k in (1, 2):
        links = random_links(rng, t, k)
        s = random_section(rng, t, k)
        np.testing.assert_allclose(apply_laplacian(links, s, t), loop_laplacian(links, s, t), atol=1e-10)


def test_assembled_matrix_matches_matrix_free():
    rng = np.random.default_rng(1)
    t = TorusSpec((1.0,) * 3, (4, 4, 5))
    for k in (1, 3):
        links = random_links(rng, t, k)
        s = random_section(rng, t, k)
        A = assemble_laplacian(links, t)
        np.testing.assert_allclose(A @ s.ravel(), apply_laplacian(links, s, t).ravel(), atol=1e-10)
        assert abs(A - A.getH()).max() < 1e-12


def test_constant_section_trivial_links():
    t = TorusSpec((1.0,) * 3, (6, 6, 6))
    links = build_links(t, BundleSpec.flat([[0, 0, 0]]))
    s = np.full(t.grid + (1,), 0.3 + 0.4j)
    assert np.max(np.abs(covariant_gradient(links, s, t))) == 0
    assert np.max(np.abs(apply_laplacian(links, s, t))) == 0


def test_flat_eigensection_gradient_and_eigenvalue():
    t = TorusSpec((1.0, 2.0, 1.5), (8, 6, 10))
    b = BundleSpec.flat([[0.7, -0.4, 2.0]])
    links = build_links(t, b)
    for mode in flat_spectrum(t, b, 4, discrete=True):
        s = flat_eigensection(t, b, mode)
        phi = [(b.theta[0, j] + 2 * math.pi * mode.m[j]) * t.spacing[j] / t.lengths[j] for j in range(3)]
        g_expected = math.sqrt(sum((2 * math.sin(p / 2) / h) ** 2 for p, h in zip(phi, t.spacing)))
        lam_expected = sum((2 - 2 * math.cos(p)) / h**2 for p, h in zip(phi, t.spacing))
        g = gradient_magnitude(covariant_gradient(links, s, t))
        np.testing.assert_allclose(g, g_expected, rtol=1e-12)
        np.testing.assert_allclose(apply_laplacian(links, s, t), lam_expected * s, atol=1e-9)
        assert mode.lam == pytest.approx(lam_expected, rel=1e-12)


def test_gradient_linear():
    rng = np.random.default_rng(2)
    t = TorusSpec((1.0,) * 3, (4, 4, 4))
    links = random_links(rng, t, 2)
    s1, s2 = random_section(rng, t, 2), random_section(rng, t, 2)
    a = 0.3 - 1.2j
    lhs = covariant_gradient(links, a * s1 + s2, t)
    rhs = a * covariant_gradient(links, s1, t) + covariant_gradient(links, s2, t)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_adjointness_exact():
    rng = np.random.default_rng(3)
    t = TorusSpec((1.0, 0.5, 2.0), (5, 4, 6))
    links = random_links(rng, t, 2)
    s = random_section(rng, t, 2)
    lhs = inner(apply_laplacian(links, s, t), s)
    g = lp_norm(gradient_magnitude(covariant_gradient(links, s, t)), 2)
    assert abs(lhs.imag) < 1e-10 * abs(lhs)
    assert lhs.real == pytest.approx(g**2, rel=1e-12)


def test_lp_norm_basics():
    t = TorusSpec((1.0,) * 3, (4, 4, 4))
    ones = np.ones(t.grid)
    for p in (1, 2, 3.5, 100, math.inf):
        assert lp_norm(ones, p) == pytest.approx(1.0)
    b = BundleSpec.flat([[0.3, 0, 0]])
    s = flat_eigensection(t, b, flat_spectrum(t, b, 2, discrete=True)[1])
    for p in (1, 2, 7, math.inf):
        assert lp_norm(s, p, grid_ndim=3) == pytest.approx(1.0)
    v = np.arange(8.0)
    assert lp_norm(v, 1) == pytest.approx(3.5)
    assert lp_norm(v, math.inf) == 7.0
    assert lp_norm(np.zeros(5), 3) == 0.0
    # huge p must not overflow
    assert lp_norm(np.array([1e300, 1.0]), 400) == pytest.approx(1e300 * 0.5 ** (1 / 400))
    with pytest.raises(ValueError):
        lp_norm(v, 0.5)


def test_pointwise_gram():
    t = TorusSpec((1.0,) * 3, (4, 4, 4))
    b = BundleSpec.flat([[0.1, 0, 0], [0.2, 0, 0]])
    modes = flat_spectrum(t, b, 2, discrete=True)
    S = [flat_eigensection(t, b, m) for m in modes]
    G = pointwise_gram(S)
    assert G.shape == t.grid + (2, 2)
    np.testing.assert_allclose(G, np.broadcast_to(np.eye(2), G.shape), atol=1e-15)
    assert pointwise_gram(S[:1])[..., 0, 0] == pytest.approx(np.ones(t.grid))
    rng = np.random.default_rng(4)
    R = [random_section(rng, t, 2) for _ in range(3)]
    G = pointwise_gram(R)
    np.testing.assert_allclose(G, np.conj(np.swapaxes(G, -1, -2)), atol=1e-14)
    assert np.min(np.linalg.eigvalsh(G)) > -1e-12
    with pytest.raises(ValueError):
        pointwise_gram([R[0], R[0][..., :1]])


def test_shape_validation():
    t = TorusSpec((1.0,) * 3, (4, 4, 4))
    links = build_links(t, BundleSpec.flat([[0, 0, 0]]))
    with pytest.raises(ValueError):
        apply_laplacian(links, np.zeros((4, 4, 4, 2), complex), t)
    with pytest.raises(ValueError):
        covariant_gradient(links, np.zeros((4, 4, 4, 1), complex), TorusSpec((1.0,) * 3, (4, 4, 5)))
