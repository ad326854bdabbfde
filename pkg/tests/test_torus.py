import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saltns.spectral import SpectralField, unit
from saltns.torus import (TorusBasis, curl_fourier, divergence_fourier, fourier_to_grid, grid_to_fourier,
                          leray_fourier, resize_fourier, wavenumbers)


def brute_force_mode_count(K):
    # nonzero k with |k| <= K, one of each +-k pair, two branches (cos, sin)
    ks = [k for k in itertools.product(range(-K, K + 1), repeat=2) if 0 < k[0] ** 2 + k[1] ** 2 <= K * K]
    return len(ks)


@pytest.mark.parametrize("K", [1, 2, 5, 8])
def test_mode_count(K):
    assert TorusBasis(2, K, 4 * K + 1).size == brute_force_mode_count(K)


def test_eigenvalues_sorted_integer(torus8):
    lam = torus8.eigenvalues
    assert np.all(np.diff(lam) >= 0)
    np.testing.assert_array_equal(lam, np.sum(torus8.kvec**2, axis=1))
    assert lam[0] == 1.0


def test_grid_too_small():
    with pytest.raises(ValueError, match="grid"):
        TorusBasis(2, 8, 16)


def test_modes_orthonormal_by_quadrature(torus8):
    # closed-form samples; trapezoid rule is exact for these trigonometric products
    vals = np.array([torus8.mode_values(k) for k in range(torus8.size)])
    h = (2 * np.pi / torus8.G) ** 2
    gram = np.einsum("adij,bdij->ab", vals, vals) * h
    np.testing.assert_allclose(gram, np.eye(torus8.size), atol=1e-12)


def test_modes_solenoidal(torus8):
    F = torus8.fourier_from_coeffs(np.eye(torus8.size))
    assert np.abs(divergence_fourier(np.moveaxis(F, 1, 0), 2)).max() < 1e-14


@given(st.integers(0, 199))
def test_to_grid_matches_closed_form(torus8, k):
    k = k % torus8.size
    np.testing.assert_allclose(torus8.to_grid(unit(torus8, k)), torus8.mode_values(k), atol=1e-13)


def test_grid_roundtrip(torus8):
    rng = np.random.default_rng(1)
    f = SpectralField(torus8.basis_id, rng.standard_normal(torus8.size))
    g = torus8.from_grid(torus8.to_grid(f))
    np.testing.assert_allclose(g.coeffs, f.coeffs, atol=1e-12)


def test_from_grid_drops_gradients(torus8):
    # a pure gradient field projects to zero
    x = torus8.grid_points()
    phi_x = np.cos(2 * x[0] + x[1])
    grad = np.array([2 * phi_x, phi_x])
    assert np.abs(torus8.from_grid(grad).coeffs).max() < 1e-13


def test_leray_properties():
    rng = np.random.default_rng(3)
    F = grid_to_fourier(rng.standard_normal((2, 16, 16)), 2)
    P = leray_fourier(F, 2)
    assert np.abs(divergence_fourier(P, 2)).max() < 1e-13
    np.testing.assert_allclose(leray_fourier(P, 2), P, atol=1e-14)
    # curl is unchanged by the projection
    np.testing.assert_allclose(curl_fourier(P), curl_fourier(F), atol=1e-13)


def test_resize_is_exact_inside_band():
    rng = np.random.default_rng(5)
    v = rng.standard_normal((2, 9, 9))
    F = grid_to_fourier(v, 2)
    back = resize_fourier(resize_fourier(F, 20, 2), 9, 2)
    np.testing.assert_allclose(fourier_to_grid(back, 2), v, atol=1e-13)


def test_wavenumbers_layout():
    k = wavenumbers(6, 2)
    assert k.shape == (2, 6, 6)
    assert list(k[0][:, 0]) == [0, 1, 2, -3, -2, -1]


def test_table_export(torus8):
    text = torus8.export_table_csv().splitlines()
    assert text[0] == "k,k1,k2,polarisation,branch,lambda"
    assert len(text) == torus8.size + 1


def test_binding_checked(torus8):
    other = TorusBasis(2, 4, 16)
    from saltns.spectral import BindingError

    with pytest.raises(BindingError):
        torus8.to_grid(unit(other, 0))
