import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saltns.torus import TorusBasis
from saltns.spectral import (BindingError, SpectralField, apply_fractional_stokes, as_inner, as_norm, from_bytes,
                             from_csv, galerkin_project, lookup_basis, tail_bound_holds, to_bytes, to_csv, unit,
                             zeros)

coeff_lists = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=40)


def field(basis, coeffs):
    c = np.zeros(basis.size)
    c[: len(coeffs)] = coeffs
    return SpectralField(basis.basis_id, c)


def test_registry_roundtrip(torus8):
    fresh = TorusBasis(2, 5, 13)
    assert lookup_basis(fresh.basis_id) is fresh
    # ids are content hashes, so whichever equal basis registered last is equivalent
    same = lookup_basis(torus8.basis_id)
    assert np.array_equal(same.eigenvalues, torus8.eigenvalues)
    with pytest.raises(BindingError):
        lookup_basis("no-such-basis")


def test_coefficients_are_frozen(torus8):
    f = unit(torus8, 0)
    with pytest.raises(ValueError):
        f.coeffs[0] = 2.0


def test_nonfinite_rejected(torus8):
    with pytest.raises(ValueError):
        SpectralField(torus8.basis_id, [1.0, np.nan])


def test_mixed_bases_refused(torus8, disk66):
    with pytest.raises(BindingError):
        unit(torus8, 0) + unit(disk66, 0)


@given(coeff_lists, coeff_lists)
def test_arithmetic_is_linear(torus8, a, b):
    f, g = field(torus8, a), field(torus8, b)
    np.testing.assert_allclose((f + g * 2.0 - f).coeffs, (g * 2.0).coeffs, atol=1e-9)
    np.testing.assert_array_equal((-f).coeffs, -f.coeffs)


@given(coeff_lists)
def test_csv_and_binary_roundtrip(torus8, a):
    f = field(torus8, a)
    assert np.array_equal(from_csv(to_csv(f)).coeffs, f.coeffs)
    g = from_bytes(to_bytes(f))
    assert g.basis_id == f.basis_id and np.array_equal(g.coeffs, f.coeffs)


def test_binary_layout(torus8):
    f = unit(torus8, 2, n=3)
    data = to_bytes(f)
    bid = torus8.basis_id.encode()
    assert data[:4] == len(bid).to_bytes(4, "little")
    assert data[4 + len(bid):12 + len(bid)] == (3).to_bytes(8, "little")
    assert len(data) == 12 + len(bid) + 24
    with pytest.raises(ValueError):
        from_bytes(data[:-1])


@given(coeff_lists, st.sampled_from([0.0, 0.5, 1.0, 1.5]), st.sampled_from([0.0, 0.25, 1.0]))
def test_fractional_powers_compose(torus8, a, s, t):
    f = field(torus8, a)
    lhs = apply_fractional_stokes(apply_fractional_stokes(f, s), t).coeffs
    rhs = apply_fractional_stokes(f, s + t).coeffs
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(rhs).max()))


@given(coeff_lists)
def test_split_inner_product(torus8, a):
    # <f, f>_{A^1} = <A^{1/2} f, A^{1/2} f>
    f = field(torus8, a)
    half = apply_fractional_stokes(f, 0.5)
    assert as_inner(f, f, 1.0) == pytest.approx(as_inner(half, half, 0.5), rel=1e-12, abs=1e-12)
    assert as_norm(f, 1.0) ** 2 == pytest.approx(as_inner(f, f, 1.0), rel=1e-12, abs=1e-12)


@given(coeff_lists, st.integers(1, 30))
def test_galerkin_projection_contracts(torus8, a, n):
    f = field(torus8, a)
    p = galerkin_project(f, n)
    assert as_norm(p, 0) <= as_norm(f, 0) * (1 + 1e-15)
    np.testing.assert_array_equal(galerkin_project(p, n).coeffs, p.coeffs)


@given(coeff_lists, st.integers(1, 30), st.sampled_from([0.0, 0.5, 1.0]), st.sampled_from([0.0, 0.5, 1.5]))
def test_tail_bound(torus8, a, n, r, gap):
    # the bound trades regularity for decay, so it needs s >= r
    assert tail_bound_holds(field(torus8, a), n, r, r + gap)


def test_zeros_and_units(torus8):
    assert as_norm(zeros(torus8), 0) == 0.0
    u = unit(torus8, 5)
    assert as_norm(u, 0) == 1.0
    assert as_norm(u, 1.0) == pytest.approx(torus8.eigenvalues[5])
