import math

import numpy as np
import pytest

from saltns import jets as J
from saltns.bessel import BesselZeroError, bessel_zeros, mcmahon
from saltns.disk import DiskBasis, basis_for_modes, polar_quadrature
from saltns.spectral import SpectralField

# from oracles.bessel_zero_bisection (40-digit power series, plain bisection)
ORACLE_ZEROS = {
    (0, 1): 2.404825557695773,
    (0, 2): 5.520078110286311,
    (1, 1): 3.8317059702075125,
    (2, 3): 11.619841172149059,
    (5, 1): 8.771483815959954,
    (6, 6): 26.820151983411403,
}


@pytest.mark.parametrize("nm,expect", sorted(ORACLE_ZEROS.items()))
def test_bessel_zeros_match_series_oracle(nm, expect):
    n, m = nm
    assert bessel_zeros(n, m)[m - 1] == pytest.approx(expect, rel=1e-13)


def test_mcmahon_close_for_large_index():
    z = bessel_zeros(3, 20)
    assert abs(z[-1] - mcmahon(3, 20)) < 1e-4


def test_zero_argument_validation():
    with pytest.raises(ValueError):
        bessel_zeros(-1, 2)
    assert issubclass(BesselZeroError, RuntimeError)


def test_first_eigenvalue(disk66):
    assert disk66.eigenvalues[0] == pytest.approx(ORACLE_ZEROS[(0, 1)] ** 2, rel=1e-14)


def test_table_and_completeness(disk66):
    # brute force: all (n, m) pairs, n > 0 counted twice
    lam = sorted([bessel_zeros(n, 7)[m - 1] ** 2 for n in range(7) for m in range(1, 7)
                  for _ in range(1 if n == 0 else 2)])
    np.testing.assert_allclose(disk66.eigenvalues, lam, rtol=1e-14)
    cutoff = min(bessel_zeros(7, 1)[0], min(bessel_zeros(n, 7)[6] for n in range(7))) ** 2
    assert disk66.complete_size == sum(l < cutoff for l in lam)


def test_basis_for_modes():
    b = basis_for_modes(40)
    assert b.complete_size >= 40


def test_polar_quadrature_polynomials():
    _, _, R, T, w = polar_quadrature(20, 32)
    x, y = R * np.cos(T), R * np.sin(T)
    assert np.sum(w) == pytest.approx(math.pi, rel=1e-13)
    assert np.sum(w * x**2 * y**2) == pytest.approx(math.pi / 24, rel=1e-13)
    assert np.sum(w * x**4) == pytest.approx(math.pi / 8, rel=1e-13)


@pytest.mark.parametrize("k", [0, 3, 10, 40])
def test_mode_jets_against_finite_differences(disk66, k):
    rng = np.random.default_rng(k)
    r = 0.2 + 0.6 * rng.random(6)
    t = 2 * np.pi * rng.random(6)
    x, y = r * np.cos(t), r * np.sin(t)
    h = 1e-5
    jet = disk66.mode_jet(k, 2, (x, y))
    val = lambda a, b: disk66.mode_jet(k, 0, (a, b)).value
    dx = (val(x + h, y) - val(x - h, y)) / (2 * h)
    dyy = (val(x, y + h) - 2 * val(x, y) + val(x, y - h)) / h**2
    scale = np.abs(jet.data[(1, 0)]).max() + 1
    np.testing.assert_allclose(jet.data[(1, 0)], dx, atol=1e-7 * scale)
    np.testing.assert_allclose(jet.data[(0, 2)], dyy, atol=1e-3 * (np.abs(dyy).max() + 1))


def test_boundary_conditions_and_eigen_residual(disk66):
    for k in range(disk66.complete_size):
        b = disk66.mode_jet(k, 1, "boundary")
        normal = b.value[0] * disk66.bx + b.value[1] * disk66.by
        scale = np.abs(disk66.mode_jet(k, 1).data[(1, 0)]).max()
        assert np.abs(normal).max() <= 1e-8 * scale
        assert np.abs(J.curl(b).value).max() <= 1e-8 * scale
        a = disk66.mode_jet(k, 2)
        res = a.laplacian().value + disk66.eigenvalues[k] * a.value
        rel = math.sqrt(disk66.quadrature_inner(res, res)) / disk66.eigenvalues[k]
        assert rel <= 1e-6


def test_gram_identity(disk66):
    n = disk66.complete_size
    assert np.abs(disk66.gram(n) - np.eye(n)).max() <= 1e-8


def test_polar_differentiation_route(disk66):
    # second, independent differentiation route: grid stream samples -> velocity
    k = 5
    psi = disk66.stream_jet(k, 0).value * disk66.norms[k]
    u = disk66.velocity_from_stream(psi)
    expect = disk66.mode_jet(k, 0).value
    assert np.abs(u.values - expect).max() < 1e-8 * np.abs(expect).max()
    assert np.abs(disk66.polar_divergence(u)).max() < 1e-7 * np.abs(expect).max() * disk66.zeros[k]


def test_leray_projection_of_mode(disk66):
    c = np.zeros(disk66.size)
    c[[0, 4, 9]] = [1.0, -0.5, 0.25]
    g = disk66.to_grid(SpectralField(disk66.basis_id, c))
    np.testing.assert_allclose(disk66.leray_project(g).coeffs, c, atol=1e-9)


def test_exports(disk66):
    lines = disk66.export_table_csv().splitlines()
    assert lines[0] == "k,n,branch,m,zero,lambda,normalization"
    assert len(lines) == disk66.size + 1
    g = disk66.to_grid(SpectralField(disk66.basis_id, np.eye(disk66.size)[0]))
    assert disk66.export_grid_csv(g).splitlines()[0] == "r,theta,u1,u2"


def test_refined_keeps_table(disk66):
    fine = disk66.refined()
    np.testing.assert_array_equal(fine.eigenvalues, disk66.eigenvalues)
    assert fine.nr == 2 * disk66.nr and fine.basis_id != disk66.basis_id
