import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from saltns.noise import make_torus_xi
from saltns.operators import BandMarginError, TorusWorkspace
from saltns.spectral import SpectralField, unit
from saltns.verify.ratios import ESTIMATES, TorusRatioContext


class TrigField:
    """Explicit sum of ``a cos(k.x) + b sin(k.x)`` with analytic derivatives."""

    def __init__(self, rng, band, count=4):
        self.terms = []
        for _ in range(count):
            k = rng.integers(-band, band + 1, size=2)
            self.terms.append((k, rng.standard_normal(2), rng.standard_normal(2)))

    def value(self, x):
        return sum(np.outer(a, np.cos(k @ x)) + np.outer(b, np.sin(k @ x)) for k, a, b in self.terms)

    def grad(self, x):
        # out[l, j, p] = d_j f^l
        return sum(np.einsum("l,j,p->ljp", -a, k, np.sin(k @ x)) + np.einsum("l,j,p->ljp", b, k, np.cos(k @ x))
                   for k, a, b in self.terms)


def eval_fourier(F, x):
    # direct Fourier sum at arbitrary points
    L = F.shape[-1]
    k1 = np.rint(np.fft.fftfreq(L) * L)
    K = np.array(np.meshgrid(k1, k1, indexing="ij")).reshape(2, -1)
    E = np.exp(1j * K.T @ x)
    return np.real(F.reshape(F.shape[0], -1) @ E)


def lift(ws, field, L=16):
    g = np.linspace(0, 2 * np.pi, L, endpoint=False)
    X = np.array(np.meshgrid(g, g, indexing="ij")).reshape(2, -1)
    return ws.lift_grid(field.value(X).reshape(2, L, L))


def test_salt_matches_analytic_derivatives(torus_ws):
    rng = np.random.default_rng(11)
    xi, f = TrigField(rng, 2), TrigField(rng, 3)
    out = torus_ws.salt(lift(torus_ws, xi), lift(torus_ws, f))
    pts = rng.uniform(0, 2 * np.pi, size=(2, 50))
    expect = np.einsum("jp,ljp->lp", xi.value(pts), f.grad(pts)) + np.einsum("jp,jlp->lp", f.value(pts),
                                                                             xi.grad(pts))
    np.testing.assert_allclose(eval_fourier(out.F, pts), expect, atol=1e-11)


def test_parts_sum_to_salt(torus_ws):
    rng = np.random.default_rng(2)
    xi = torus_ws.random_field(rng, 2, solenoidal=True)
    f = torus_ws.random_field(rng, 3)
    whole = torus_ws.salt(xi, f)
    parts = torus_ws.transport_part(xi, f) + torus_ws.stretch_part(xi, f)
    np.testing.assert_allclose(whole.F, parts.F, atol=1e-13)


@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_salt_superposition(torus_ws, seed, a, b):
    rng = np.random.default_rng(seed)
    xi = torus_ws.random_field(rng, 2, solenoidal=True)
    f, g = torus_ws.random_field(rng, 3), torus_ws.random_field(rng, 3)
    lhs = torus_ws.salt(xi, f.scale(a) + g.scale(b))
    rhs = torus_ws.salt(xi, f).scale(a) + torus_ws.salt(xi, g).scale(b)
    np.testing.assert_allclose(lhs.F, rhs.F, atol=1e-12 * (1 + np.abs(rhs.F).max()))


@given(st.integers(0, 2**31))
def test_advection_antisymmetric(torus_ws, seed):
    rng = np.random.default_rng(seed)
    phi = torus_ws.random_field(rng, 2, solenoidal=True)
    f, g = torus_ws.random_field(rng, 3), torus_ws.random_field(rng, 3)
    a = torus_ws.inner(torus_ws.advect(phi, f), g)
    b = -torus_ws.inner(f, torus_ws.advect(phi, g))
    assert a == pytest.approx(b, abs=1e-11 * (1 + abs(a)))


@given(st.integers(0, 2**31))
def test_salt_adjoint(torus_ws, seed):
    rng = np.random.default_rng(seed)
    xi = torus_ws.random_field(rng, 2, solenoidal=True)
    f, g = torus_ws.random_field(rng, 3), torus_ws.random_field(rng, 3)
    a = torus_ws.inner(torus_ws.salt(xi, f), g)
    b = torus_ws.inner(f, torus_ws.salt_adjoint(xi, g))
    assert a == pytest.approx(b, abs=1e-11 * (1 + abs(a)))


def test_commutator_respects_margin(torus_ws):
    rng = np.random.default_rng(0)
    xi = torus_ws.random_field(rng, 2, solenoidal=True)
    with pytest.raises(BandMarginError):
        torus_ws.commutator_delta_salt(xi, torus_ws.random_field(rng, 6), margin=2)
    torus_ws.commutator_delta_salt(xi, torus_ws.random_field(rng, 4), margin=2)


def test_nonlinear_term_conserves_energy(torus8, torus_ws):
    rng = np.random.default_rng(4)
    c = rng.standard_normal(torus8.size)
    n = torus_ws.nonlinear_coeffs(c)
    assert abs(n @ c) < 1e-11 * np.linalg.norm(n) * np.linalg.norm(c)


def test_galerkin_corrector_matches_matrices(torus8):
    xi = make_torus_xi(torus8, 3, 5.0, seed=1, amplitude=0.5)
    ws = TorusWorkspace(torus8, xi)
    n = 40
    ops = ws.galerkin_system(n)
    u = SpectralField(torus8.basis_id, np.random.default_rng(9).standard_normal(n))
    np.testing.assert_allclose(ws.corrector(u, galerkin=True).coeffs, ops.C @ u.coeffs, atol=1e-12)
    # G[i, k, l] = <B_i a_l, a_k>
    col = ws.p_salt(1, unit(torus8, 7, n=n)).coeffs
    np.testing.assert_allclose(ops.G[1][:, 7], col, atol=1e-13)


# single-mode ratios against the symbolic oracle (values computed by tests/oracles.py)
SINGLE_MODE_ENERGY = [
    # (xi k, branch, f k, branch, k=0 ratio, k=1 ratio)
    ((0, 1), 0, (0, 1), 0, 0.25, 0.625),
    ((0, 1), 0, (0, 1), 1, 0.75, 0.875),
    ((1, -1), 0, (1, -1), 1, 1.5, 1.8333333333333333),
    ((1, 1), 0, (0, 2), 0, 0.5, 0.3),
]


def _mode_index(basis, k, branch):
    hits = np.flatnonzero((basis.kvec == np.array(k)).all(axis=1) & (basis.branch == branch))
    assert hits.size == 1
    return int(hits[0])


@pytest.fixture(scope="module")
def ratio_ctx():
    return TorusRatioContext(8, 32)


@pytest.mark.parametrize("kxi,bxi,kf,bf,r0,r1", SINGLE_MODE_ENERGY)
def test_single_mode_salt_ratios(ratio_ctx, kxi, bxi, kf, bf, r0, r1):
    b = ratio_ctx.basis
    sample = lambda: {"xi": ratio_ctx.ws.lift(unit(b, _mode_index(b, kxi, bxi))),
                      "f": ratio_ctx.ws.lift(unit(b, _mode_index(b, kf, bf)))}
    for which, expect in (("salt-energy-k0", r0), ("salt-energy-k1", r1)):
        lhs, rhs = ESTIMATES[which].terms(ratio_ctx, sample())
        assert lhs / rhs == pytest.approx(expect, rel=1e-12)
    for which in ("salt-martingale-k0", "salt-martingale-k1"):
        lhs, rhs = ESTIMATES[which].terms(ratio_ctx, sample())
        assert abs(lhs / rhs) < 1e-28


def test_symbolic_oracle_spot_check():
    # keeps the frozen table honest; one cheap case recomputed live
    assert oracles.salt_energy_ratio((0, 1), 0, (0, 1), 0, 0) == pytest.approx(0.25)
