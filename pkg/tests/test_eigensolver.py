import math

import numpy as np
import pytest

from bundle_spectra.eigensolver import (
    ConvergenceError,
    dense_eigenvalues,
    dense_reference,
    smallest_eigenpairs,
)
from bundle_spectra.lattice import BundleSpec, TorusSpec, build_links, flat_spectrum
from bundle_spectra.operator import apply_laplacian, assemble_laplacian, inner

FLUX12 = [[0, 1, 0], [-1, 0, 0], [0, 0, 0]]
T8 = TorusSpec((1.0,) * 3, (8, 8, 8))


def test_trivial_kernel():
    links = build_links(T8, BundleSpec.flat([[0, 0, 0]]))
    (p,) = smallest_eigenpairs(links, T8, 1, tol=1e-10)
    assert abs(p.lam) < 1e-10
    assert np.ptp(np.abs(p.section)) < 1e-9
    assert np.allclose(p.section, p.section.ravel()[0], atol=1e-9)


def test_quarter_theta_matches_discrete_dispersion():
    t = TorusSpec((1.0,) * 3, (16, 16, 16))
    links = build_links(t, BundleSpec.flat([[math.pi / 4, 0, 0]]))
    (p,) = smallest_eigenpairs(links, t, 1, tol=1e-8)
    exact = 256 * 2 * (1 - math.cos(math.pi / 64))
    assert abs(p.lam - exact) < 1e-8
    assert p.residual <= 1e-8


@pytest.mark.parametrize("theta", [[[0, 0, 0]], [[math.pi / 4, 0, 0]], [[math.pi, math.pi, 0]],
                                   [[0.3, -1.0, 2.0], [1.5, 0.0, -0.5]]])
def test_iterative_agrees_with_dense(theta):
    b = BundleSpec.flat(theta)
    links = build_links(T8, b)
    k = 4
    it = smallest_eigenpairs(links, T8, k, tol=1e-10)
    de = dense_reference(links, T8, k)
    np.testing.assert_allclose([p.lam for p in it], [p.lam for p in de], atol=1e-9)
    np.testing.assert_allclose([p.lam for p in it], [m.lam for m in flat_spectrum(T8, b, k, discrete=True)],
                               atol=1e-9)


def test_certificates_and_orthonormality():
    links = build_links(T8, BundleSpec.magnetic(FLUX12))
    tol = 1e-8
    pairs = smallest_eigenpairs(links, T8, 3, tol=tol)
    lams = [p.lam for p in pairs]
    assert lams == sorted(lams)
    for p in pairs:
        r = apply_laplacian(links, p.section, T8) - p.lam * p.section
        assert math.sqrt(inner(r, r).real) <= tol
        assert p.lam >= -tol
    G = np.array([[inner(a.section, b.section) for b in pairs] for a in pairs])
    assert np.max(np.abs(G - np.eye(3))) <= 10 * tol


def test_deterministic_for_seed():
    links = build_links(T8, BundleSpec.flat([[math.pi, 0, 0]]))
    a = smallest_eigenpairs(links, T8, 3, seed=7)
    b = smallest_eigenpairs(links, T8, 3, seed=7)
    for p, q in zip(a, b):
        assert p.lam == q.lam
        assert np.array_equal(p.section, q.section)


def test_degenerate_eigenvalues_multiplicity():
    # theta = pi on one axis: m = 0 and m = -1 are degenerate
    links = build_links(T8, BundleSpec.flat([[math.pi, 0, 0]]))
    pairs = smallest_eigenpairs(links, T8, 2, tol=1e-10)
    assert pairs[0].lam == pytest.approx(pairs[1].lam, abs=1e-9)


def test_dense_reference_psd_and_trace():
    t = TorusSpec((1.0, 0.5, 1.0), (4, 4, 6))
    b = BundleSpec.direct_sum(BundleSpec.magnetic(FLUX12), BundleSpec.flat([[0.2, 0, 0]]))
    links = build_links(t, b)
    ev = dense_eigenvalues(links, t)
    assert np.min(ev) >= -1e-10
    diag = t.sites * b.rank * sum(2 / h**2 for h in t.spacing)
    assert np.sum(ev) == pytest.approx(diag, rel=1e-6)
    assert np.real(assemble_laplacian(links, t).diagonal()).sum() == pytest.approx(diag, rel=1e-12)


def test_errors():
    t = TorusSpec((1.0,) * 3, (4, 4, 4))
    links = build_links(t, BundleSpec.flat([[0, 0, 0]]))
    with pytest.raises(ValueError):
        smallest_eigenpairs(links, t, 0)
    with pytest.raises(ValueError):
        smallest_eigenpairs(links, t, 64)
    with pytest.raises(ValueError):
        smallest_eigenpairs(links, t, 1, tol=0)
    big = TorusSpec((1.0,) * 3, (24, 24, 24))
    with pytest.raises(ValueError):
        dense_reference(build_links(big, BundleSpec.flat([[0, 0, 0]])), big, 1)


def test_nonconvergence_reports_best_residual():
    t = TorusSpec((1.0,) * 3, (12, 12, 12))
    links = build_links(t, BundleSpec.magnetic(FLUX12))
    with pytest.raises(ConvergenceError) as exc:
        smallest_eigenpairs(links, t, 2, tol=1e-14, max_iter=2)
    assert exc.value.best_residual > 1e-14
