"""Machine-precision identity checks on the torus and the disk.

Every identity is evaluated on seeded random inputs at two resolutions:
the given basis and a refinement of it (twice the band on the torus,
twice the quadrature on the disk).  A check passes iff its worst
relative residual is within tolerance at both.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.special import jn_zeros

from .. import jets as J
from ..disk import ALPHA, KAPPA, DiskBasis
from ..noise import make_disk_xi
from ..operators import TF, DiskWorkspace, TorusWorkspace
from ..spectral import SpectralField, apply_fractional_stokes, as_inner, as_norm, galerkin_project
from ..torus import TorusBasis
from .report import VerificationReport

TINY = 1e-300


def _rng(seed: int, check_id: str) -> np.random.Generator:
    key = tuple(check_id.encode())
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def rel(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), TINY)
    return float(np.linalg.norm(a - b) / scale)


@dataclass
class Identity:
    check_id: str
    anchor: str
    tolerance: float
    samples: int
    run: Callable  # (context, rng, samples) -> worst residual


# ----------------------------------------------------------------------------
# torus
# ----------------------------------------------------------------------------

class TorusContext:
    """A torus workspace plus the field bands used for sampling.

    Bands are fixed by the coarsest resolution so that the refined
    context draws identical fields.
    """

    def __init__(self, basis: TorusBasis, band: int):
        self.basis = basis
        self.ws = TorusWorkspace(basis)
        self.band = band
        self.label = f"torus{basis.N}d-K{basis.K}-G{basis.G}"

    def field(self, rng, band=None, solenoidal=True, decay=1.0) -> TF:
        return self.ws.random_field(rng, self.band if band is None else band, solenoidal=solenoidal, decay=decay)

    def spectral(self, rng, decay=1.0) -> SpectralField:
        """Random field in the basis span with coefficients scaled by ``lambda^-decay/2``."""
        lam = self.basis.eigenvalues
        c = rng.standard_normal(lam.size) * lam ** (-decay / 2.0)
        return SpectralField(self.basis.basis_id, c)

    def norm(self, tf: TF) -> float:
        return float(np.sqrt(max(self.ws.inner(tf, tf), 0.0)))

    def rel_tf(self, a: TF, b: TF) -> float:
        d = a - b
        return self.norm(d) / max(self.norm(a), self.norm(b), TINY)


def _t_curl_leray(ctx: TorusContext, rng, samples):
    worst = 0.0
    for _ in range(samples):
        g = ctx.field(rng, solenoidal=False)
        # Leray projection through the eigenbasis, curl through Fourier multipliers
        pg = ctx.ws.lift(ctx.ws.project(g))
        worst = max(worst, ctx.rel_tf(ctx.ws.curl(pg), ctx.ws.curl(g)))
    return worst


def _t_salt_leray(ctx: TorusContext, rng, samples):
    worst = 0.0
    for _ in range(samples):
        xi = ctx.field(rng, band=max(1, ctx.band // 2))
        g = ctx.field(rng, band=max(1, ctx.band // 2), solenoidal=False)
        a = ctx.ws.project_coeffs(ctx.ws.salt(xi, g))
        b = ctx.ws.project_coeffs(ctx.ws.salt(xi, ctx.ws.leray(g)))
        worst = max(worst, rel(a, b))
    return worst


def _t_curl_salt(ctx: TorusContext, rng, samples):
    worst = 0.0
    for _ in range(samples):
        xi = ctx.field(rng)
        f = ctx.field(rng)
        lhs = ctx.ws.curl(ctx.ws.salt(xi, f))
        rhs = ctx.ws.advect_scalar(xi, ctx.ws.curl(f))
        worst = max(worst, ctx.rel_tf(lhs, rhs))
    return worst


def _t_antisymmetry(ctx: TorusContext, rng, samples):
    worst = 0.0
    for _ in range(samples):
        phi = ctx.field(rng)
        f = ctx.field(rng, solenoidal=False)
        g = ctx.field(rng, solenoidal=False)
        a = ctx.ws.advect(phi, f)
        b = ctx.ws.advect(phi, g)
        lhs, rhs = ctx.ws.inner(a, g), -ctx.ws.inner(f, b)
        scale = max(ctx.norm(a) * ctx.norm(g), ctx.norm(f) * ctx.norm(b), TINY)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def _t_cancellation(ctx: TorusContext, rng, samples):
    worst = 0.0
    for _ in range(samples):
        phi = ctx.field(rng)
        f = ctx.field(rng, solenoidal=False)
        a = ctx.ws.advect(phi, f)
        worst = max(worst, abs(ctx.ws.inner(a, f)) / max(ctx.norm(a) * ctx.norm(f), TINY))
    return worst


def _t_semigroup(ctx: TorusContext, rng, samples):
    worst = 0.0
    pairs = [(0.5, 0.5), (0.25, 0.75), (1.0, 0.5), (1.5, 0.5)]
    for _ in range(samples):
        f = ctx.spectral(rng, decay=4.0)
        for s, r in pairs:
            a = apply_fractional_stokes(apply_fractional_stokes(f, s), r)
            b = apply_fractional_stokes(f, s + r)
            worst = max(worst, rel(a.coeffs, b.coeffs))
        # A^1 against minus the Fourier Laplacian
        tf = ctx.ws.lift(f)
        a = ctx.ws.lift(apply_fractional_stokes(f, 1.0))
        b = ctx.ws.laplacian(tf).scale(-1.0)
        worst = max(worst, ctx.rel_tf(a, b))
    return worst


def _t_split_inner(ctx: TorusContext, rng, samples):
    worst = 0.0
    for _ in range(samples):
        f = ctx.spectral(rng, decay=4.0)
        g = ctx.spectral(rng, decay=4.0)
        for s, p in [(0.5, 0.25), (1.0, 0.5), (1.0, 0.0), (1.5, 1.0)]:
            q = 2 * s - p
            lhs = as_inner(f, g, s)
            # pair the powered fields through the Fourier representation
            rhs = ctx.ws.inner(ctx.ws.lift(apply_fractional_stokes(f, p)), ctx.ws.lift(apply_fractional_stokes(g, q)))
            scale = max(as_norm(f, s) * as_norm(g, s), TINY)
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def _t_projection_selfadjoint(ctx: TorusContext, rng, samples):
    worst = 0.0
    n_total = ctx.basis.size
    for _ in range(samples):
        f = ctx.spectral(rng, decay=3.0)
        g = ctx.spectral(rng, decay=3.0)
        n = int(rng.integers(1, n_total + 1))
        s = float(rng.choice([0.0, 0.5, 1.0, 1.5]))
        lhs = as_inner(galerkin_project(f, n), g, s)
        rhs = as_inner(f, galerkin_project(g, n), s)
        scale = max(as_norm(f, s) * as_norm(g, s), TINY)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def tail_bound_ratios(f: SpectralField, n: int, r: float, s: float) -> float:
    """``||(I - Pbar_n) f||_{A^r} / (lambda_n^{-(s-r)} ||f||_{A^s})``; at most 1 when the bound holds."""
    lam_n = f.eigenvalues()[n - 1]
    lhs = as_norm(f - galerkin_project(f, n), r)
    rhs = lam_n ** (-(s - r)) * as_norm(f, s)
    return lhs / max(rhs, TINY)


def _tail_bound(ctx, rng, samples):
    worst = 0.0
    violations = 0
    lam = ctx.basis.eigenvalues
    first = int(np.argmax(lam >= 1.0)) + 1
    for _ in range(samples):
        f = ctx.spectral(rng, decay=float(rng.uniform(1.0, 4.0)))
        n = int(rng.integers(first, ctx.basis.size + 1))
        r = float(rng.uniform(0.0, 1.0))
        s = r + float(rng.uniform(0.1, 1.0))
        ratio = tail_bound_ratios(f, n, r, s)
        worst = max(worst, ratio)
        violations += ratio > 1.0 + 1e-12
    return worst, violations


def commutation_residual(ws: TorusWorkspace, xi: TF, f: TF, k: int) -> float:
    """Relative mismatch of ``A^k P B f - P B A^k f`` against the commutator sum.

    The left side is built with Stokes eigenvalues on projected
    coefficients; the right side is ``(-1)^k P sum_j Delta^{k-j} [Delta, B] Delta^{j-1} f``
    assembled with Fourier multipliers.
    """
    lam = ws.basis.eigenvalues
    pbf = ws.project_coeffs(ws.salt(xi, f))
    akf = ws.lift_coeffs((lam**k * ws.project_coeffs(f))[None])
    akf = TF(akf.F[0], akf.band, akf.ndim)
    lhs = lam**k * pbf - ws.project_coeffs(ws.salt(xi, akf))
    acc = None
    g = f
    for j in range(1, k + 1):
        term = ws.commutator_delta_salt(xi, g, margin=xi.band)
        for _ in range(k - j):
            term = ws.laplacian(term)
        acc = term if acc is None else acc + term
        g = ws.laplacian(g)
    rhs = (-1) ** k * ws.project_coeffs(acc)
    return rel(lhs, rhs)


def _commutation(k):
    def run(ctx: TorusContext, rng, samples):
        worst = 0.0
        for _ in range(samples):
            xi = ctx.field(rng, band=max(1, ctx.band // 2))
            f = ctx.field(rng, band=max(1, ctx.band // 2))
            worst = max(worst, commutation_residual(ctx.ws, xi, f, k))
        return worst
    return run


TORUS_IDENTITIES: Dict[str, Identity] = {}


def _reg(table, ident: Identity):
    table[ident.check_id] = ident


_reg(TORUS_IDENTITIES, Identity("torus-curl-leray", "curl(P g) = curl g", 1e-9, 20, _t_curl_leray))
_reg(TORUS_IDENTITIES, Identity("torus-leray-salt", "P B g = P B P g", 1e-9, 20, _t_salt_leray))
_reg(TORUS_IDENTITIES, Identity("torus-curl-salt", "curl(B f) = L_xi(curl f)", 1e-9, 20, _t_curl_salt))
_reg(TORUS_IDENTITIES, Identity("torus-advection-antisymmetry", "<L_phi f, g> = -<f, L_phi g>", 1e-9, 20,
                                _t_antisymmetry))
_reg(TORUS_IDENTITIES, Identity("torus-advection-cancellation", "<L_phi f, f> = 0", 1e-9, 20, _t_cancellation))
_reg(TORUS_IDENTITIES, Identity("torus-stokes-semigroup", "A^r A^s f = A^(r+s) f; A f = -Delta f", 1e-9, 20,
                                _t_semigroup))
_reg(TORUS_IDENTITIES, Identity("torus-split-inner", "<f, g>_{A^s} = <A^p f, A^q g>, p + q = 2s", 1e-9, 20,
                                _t_split_inner))
_reg(TORUS_IDENTITIES, Identity("torus-projection-selfadjoint", "<Pbar_n f, g>_{A^s} = <f, Pbar_n g>_{A^s}", 1e-9,
                                20, _t_projection_selfadjoint))
_reg(TORUS_IDENTITIES, Identity("torus-tail-bound",
                                "||(I - Pbar_n) f||^2_{A^r} <= lambda_n^(-2(s-r)) ||f||^2_{A^s}", 0.0, 100,
                                _tail_bound))
_reg(TORUS_IDENTITIES, Identity("torus-commutation-k1",
                                "A P B f - P B A f = -P [Delta, B] f", 1e-8, 50, _commutation(1)))
_reg(TORUS_IDENTITIES, Identity("torus-commutation-k2",
                                "A^2 P B f - P B A^2 f = P (Delta [Delta, B] + [Delta, B] Delta) f", 1e-8, 50,
                                _commutation(2)))


# ----------------------------------------------------------------------------
# disk
# ----------------------------------------------------------------------------

class DiskContext:
    def __init__(self, basis: DiskBasis, count: int, xi_seed: int = 0, xi_count: int = 3):
        self.basis = basis
        self.count = min(count, basis.size)
        self.xi = make_disk_xi(basis, xi_count, seed=xi_seed, amplitude=1.0)
        self.ws = DiskWorkspace(basis, self.xi, order=2)
        self.label = f"disk-n{basis.n_max}-m{basis.m_max}-q{basis.nr}x{basis.ntheta}"

    def coeffs(self, rng, decay=1.0) -> np.ndarray:
        lam = self.basis.eigenvalues[: self.count]
        return rng.standard_normal(self.count) * lam ** (-decay / 2.0)

    def jet(self, c, order) -> J.Jet:
        return self.basis.field_jet(c, order)

    def jet_boundary(self, c, order) -> J.Jet:
        return self.basis.field_jet(c, order, "boundary")

    def l2(self, values) -> float:
        return float(np.sqrt(max(self.basis.quadrature_inner(values, values), 0.0)))


def _d_eigen(ctx: DiskContext, rng, samples):
    worst = 0.0
    for k in range(ctx.basis.size):
        jet = ctx.basis.mode_jet(k, 2)
        lam = ctx.basis.eigenvalues[k]
        res = jet.laplacian().value + lam * jet.value
        worst = max(worst, ctx.l2(res) / (lam * ctx.l2(jet.value)))
    return worst


def _d_boundary_normal(ctx: DiskContext, rng, samples):
    worst = 0.0
    for k in range(ctx.basis.size):
        inner = ctx.basis.mode_jet(k, 0).value
        scale = np.max(np.sqrt(np.sum(inner**2, axis=0)))
        b = ctx.basis.mode_jet(k, 0, "boundary").value
        worst = max(worst, np.max(np.abs(np.sum(b * ctx.basis.normals, axis=0))) / scale)
    return float(worst)


def _d_boundary_curl(ctx: DiskContext, rng, samples):
    """Free-boundary condition ``curl a = (2 kappa - alpha) a . tau = 0`` on the circle."""
    worst = 0.0
    for k in range(ctx.basis.size):
        scale = np.max(np.abs(J.curl(ctx.basis.mode_jet(k, 1)).value))
        b = J.curl(ctx.basis.mode_jet(k, 1, "boundary"))
        tau = np.array([-ctx.basis.by, ctx.basis.bx])
        expected = (2 * KAPPA - ALPHA) * np.sum(ctx.basis.mode_jet(k, 0, "boundary").value * tau, axis=0)
        worst = max(worst, np.max(np.abs(b.value - expected)) / scale)
    return float(worst)


def _d_gram(ctx: DiskContext, rng, samples):
    G = ctx.basis.gram()
    return float(np.max(np.abs(G - np.eye(G.shape[0]))))


def _d_first_eigenvalue(ctx: DiskContext, rng, samples):
    ref = float(jn_zeros(0, 1)[0]) ** 2
    return abs(float(ctx.basis.eigenvalues[0]) - ref) / ref


def _d_greens(ctx: DiskContext, rng, samples):
    """``<Delta f, phi> = -<f, phi>_1 + <(kappa - alpha) f, phi>_boundary`` for f, phi in the span."""
    worst = 0.0
    for _ in range(samples):
        cf = ctx.coeffs(rng, decay=2.0)
        cp = ctx.coeffs(rng, decay=1.0)
        f, p = ctx.jet(cf, 2), ctx.jet(cp, 1)
        lhs = ctx.basis.quadrature_inner(f.laplacian().value, p.value)
        grad = sum(ctx.basis.quadrature_inner(f.d(j).value, p.d(j).value) for j in range(2))
        bnd = ctx.basis.boundary_inner(ctx.jet_boundary(cf, 0).value, ctx.jet_boundary(cp, 0).value)
        rhs = -grad + (KAPPA - ALPHA) * bnd
        scale = max(abs(lhs), abs(grad), abs(bnd), TINY)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def _d_leray_gradient(ctx: DiskContext, rng, samples):
    """``P B (grad q) = 0``: the SALT operator maps gradients to gradients."""
    worst = 0.0
    x, y = ctx.basis.x, ctx.basis.y
    for _ in range(samples):
        a = rng.standard_normal(6)
        q = J.Jet.zeros((), x.size, 3)
        q.data[(0, 0)] = a[0] * x + a[1] * y + a[2] * x * y + a[3] * x**2 + a[4] * y**3 + a[5] * x**2 * y
        q.data[(1, 0)] = a[0] + a[2] * y + 2 * a[3] * x + 2 * a[5] * x * y
        q.data[(0, 1)] = a[1] + a[2] * x + 3 * a[4] * y**2 + a[5] * x**2
        q.data[(2, 0)] = 2 * a[3] + 2 * a[5] * y
        q.data[(1, 1)] = a[2] + 2 * a[5] * x
        q.data[(0, 2)] = 6 * a[4] * y
        q.data[(3, 0)] = np.zeros_like(x)
        q.data[(2, 1)] = np.full_like(x, 2 * a[5])
        q.data[(1, 2)] = np.zeros_like(x)
        q.data[(0, 3)] = np.full_like(x, 6 * a[4])
        g = J.Jet.stack([q.d(0), q.d(1)])
        i = int(rng.integers(ctx.xi.M))
        bg = ctx.ws.salt(i, g)
        c = ctx.basis.leray_project(bg.value, ctx.count).coeffs
        worst = max(worst, float(np.linalg.norm(c)) / max(ctx.l2(bg.value), TINY))
    return worst


def _d_curl_salt(ctx: DiskContext, rng, samples):
    worst = 0.0
    for _ in range(samples):
        f = ctx.jet(ctx.coeffs(rng), 2)
        i = int(rng.integers(ctx.xi.M))
        xi = ctx.ws._xi(i)
        lhs = J.curl(ctx.ws.salt(i, f))
        w = J.curl(f)
        rhs = xi.value[0] * w.data[(1, 0)] + xi.value[1] * w.data[(0, 1)]
        worst = max(worst, rel(lhs.value, rhs))
    return worst


def _d_antisymmetry(ctx: DiskContext, rng, samples):
    worst = 0.0
    for _ in range(samples):
        phi = ctx.jet(ctx.coeffs(rng), 1)
        f = ctx.jet(ctx.coeffs(rng), 1)
        g = ctx.jet(ctx.coeffs(rng), 1)
        a, b = J.advect(phi, f), J.advect(phi, g)
        lhs = ctx.basis.quadrature_inner(a.value, g.value)
        rhs = -ctx.basis.quadrature_inner(f.value, b.value)
        scale = max(ctx.l2(a.value) * ctx.l2(g.value), ctx.l2(f.value) * ctx.l2(b.value), TINY)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def _d_salt_adjoint(ctx: DiskContext, rng, samples):
    worst = 0.0
    for _ in range(samples):
        f = ctx.jet(ctx.coeffs(rng), 1)
        g = ctx.jet(ctx.coeffs(rng), 1)
        i = int(rng.integers(ctx.xi.M))
        bf, bsg = ctx.ws.salt(i, f), ctx.ws.salt_adjoint(i, g)
        lhs = ctx.basis.quadrature_inner(bf.value, g.value)
        rhs = ctx.basis.quadrature_inner(f.value, bsg.value)
        scale = max(ctx.l2(bf.value) * ctx.l2(g.value), ctx.l2(f.value) * ctx.l2(bsg.value), TINY)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


DISK_IDENTITIES: Dict[str, Identity] = {}
_reg(DISK_IDENTITIES, Identity("disk-eigen-residual", "||Delta a_k + lambda_k a_k|| / (lambda_k ||a_k||) = 0", 1e-6,
                               0, _d_eigen))
_reg(DISK_IDENTITIES, Identity("disk-boundary-normal", "a_k . n = 0 on the boundary", 1e-8, 0, _d_boundary_normal))
_reg(DISK_IDENTITIES, Identity("disk-boundary-curl", "curl a_k = (2 kappa - alpha) a_k . tau on the boundary",
                               1e-8, 0, _d_boundary_curl))
_reg(DISK_IDENTITIES, Identity("disk-gram", "<a_k, a_l> = delta_kl", 1e-8, 0, _d_gram))
_reg(DISK_IDENTITIES, Identity("disk-first-eigenvalue", "lambda_1 = j_{0,1}^2", 1e-8, 0, _d_first_eigenvalue))
_reg(DISK_IDENTITIES, Identity("disk-greens-identity",
                               "<Delta f, phi> = -<f, phi>_1 + <(kappa - alpha) f, phi>_boundary", 1e-6, 50,
                               _d_greens))
_reg(DISK_IDENTITIES, Identity("disk-leray-salt-gradient", "P B (grad q) = 0", 1e-6, 10, _d_leray_gradient))
_reg(DISK_IDENTITIES, Identity("disk-curl-salt", "curl(B f) = L_xi(curl f)", 1e-6, 10, _d_curl_salt))
_reg(DISK_IDENTITIES, Identity("disk-advection-antisymmetry", "<L_phi f, g> = -<f, L_phi g>", 1e-6, 10,
                               _d_antisymmetry))
_reg(DISK_IDENTITIES, Identity("disk-salt-adjoint", "<B f, g> = <f, B* g>, B* = -L_xi + T_xi*", 1e-6, 10,
                               _d_salt_adjoint))


# ----------------------------------------------------------------------------
# runner
# ----------------------------------------------------------------------------

def _contexts(basis, seed):
    if isinstance(basis, TorusBasis):
        band = max(1, basis.K // 2)
        fine = TorusBasis(basis.N, 2 * basis.K, 2 * basis.G)
        return TORUS_IDENTITIES, [TorusContext(basis, band), TorusContext(fine, band)]
    if isinstance(basis, DiskBasis):
        count = basis.complete_size
        return DISK_IDENTITIES, [DiskContext(basis, count, seed), DiskContext(basis.refined(), count, seed)]
    raise TypeError(f"no identity suite for {type(basis).__name__}")


def identity_suite(basis, tolerances: Optional[Dict[str, float]] = None, seed: int = 0,
                   only: Optional[List[str]] = None,
                   samples: Optional[Dict[str, int]] = None) -> List[VerificationReport]:
    """Run every registered identity for the basis geometry at two resolutions.

    ``tolerances`` and ``samples`` override the registered values by check id.
    """
    table, contexts = _contexts(basis, seed)
    tolerances = tolerances or {}
    reports = []
    for cid in sorted(table):
        if only is not None and cid not in only:
            continue
        ident = table[cid]
        tol = float(tolerances.get(cid, ident.tolerance))
        count = int((samples or {}).get(cid, ident.samples))
        values, extra = [], {}
        for ctx in contexts:
            out = ident.run(ctx, _rng(seed, cid), count)
            if isinstance(out, tuple):
                out, violations = out
                extra[f"violations@{ctx.label}"] = int(violations)
            values.append(float(out))
        if cid == "torus-tail-bound":
            ok = all(v == 0 for v in extra.values())
        else:
            ok = all(v <= tol for v in values)
        details = {f"residual@{c.label}": v for c, v in zip(contexts, values)}
        details.update(extra)
        reports.append(VerificationReport(
            check_id=cid, anchor=ident.anchor, status="pass" if ok else "fail", value=max(values),
            samples=count, resolutions=tuple(c.label for c in contexts), seeds=(seed,),
            tolerance=tol, details=details))
    return reports


def commutation_suite(basis: TorusBasis, samples: int = 50, seed: int = 0) -> List[VerificationReport]:
    ids = ["torus-commutation-k1", "torus-commutation-k2"]
    return identity_suite(basis, seed=seed, only=ids, samples={i: samples for i in ids})
