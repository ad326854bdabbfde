"""Transport, stretching and SALT operators on the torus and the disk.

On the torus, fields are carried as FFT-layout arrays together with their
per-axis band.  Every product is evaluated on a grid large enough to hold
the product band, so nothing is truncated until a result is projected back
onto the basis.  On the disk, fields are carried as derivative jets at the
quadrature nodes and products follow the Leibniz rule exactly.

Conventions: ``L_phi f = sum_j phi^j d_j f``,
``T_g f = sum_j f^j grad g^j``, ``B f = L_xi f + T_xi f`` and
``B* f = -L_xi f + T_xi* f`` with ``T_xi* f = L_f xi``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.fft import next_fast_len

from . import jets as J
from . import kernels
from .jets import Jet
from .spectral import BindingError, SpectralField
from .torus import (
    TorusBasis,
    fourier_to_grid,
    grid_to_fourier,
    laplacian_fourier,
    leray_fourier,
    resize_fourier,
    wavenumbers,
)


class BandMarginError(ValueError):
    """Input carries wavenumbers too close to the resolved band for the requested operator."""


# ----------------------------------------------------------------------------
# torus
# ----------------------------------------------------------------------------

@dataclass
class TF:
    """Fourier coefficients with their per-axis band.

    ``F`` has shape ``(..., N, L, ..., L)`` for vector fields or
    ``(..., L, ..., L)`` for scalars; ``ndim`` is the number of spatial axes.
    """

    F: np.ndarray
    band: int
    ndim: int = 2

    @property
    def L(self) -> int:
        return self.F.shape[-1]

    def __add__(self, other: "TF") -> "TF":
        L = max(self.L, other.L)
        F = resize_fourier(self.F, L, self.ndim) + resize_fourier(other.F, L, self.ndim)
        return TF(F, max(self.band, other.band), self.ndim)

    def __sub__(self, other: "TF") -> "TF":
        return self + other.scale(-1.0)

    def scale(self, c: float) -> "TF":
        return TF(c * self.F, self.band, self.ndim)


def grid_size(band: int) -> int:
    """Smallest FFT-friendly grid that holds every ``|k_d| <= band`` without a Nyquist mode."""
    return next_fast_len(2 * band + 2)


class TorusWorkspace:
    """Operator evaluation on one torus basis and (optionally) one noise family.

    Not shareable between workers; build one per worker.
    """

    def __init__(self, basis: TorusBasis, xi=None):
        self.basis = basis
        self.N = basis.N
        self.K = basis.K
        self.xi = xi
        self._xi_tf: List[TF] = []
        if xi is not None:
            if xi.basis_id != basis.basis_id:
                raise BindingError("noise family bound to a different basis")
            self._xi_tf = [self.lift(m) for m in xi.members]
        self._grid_cache = {}

    # lifting ---------------------------------------------------------------
    def field_band(self, f: SpectralField) -> int:
        c = f.coeffs
        nz = np.flatnonzero(c)
        if nz.size == 0:
            return 0
        return int(np.abs(self.basis.kvec[nz]).max())

    def lift(self, f: SpectralField, band: Optional[int] = None) -> TF:
        band = self.field_band(f) if band is None else band
        F = self.basis.to_fourier(f, grid_size(self.K))
        return TF(resize_fourier(F, grid_size(max(band, 1)), self.N), band, self.N)

    def lift_coeffs(self, C: np.ndarray) -> TF:
        """Batch of coefficient rows ``(B, n)`` lifted at the full basis band."""
        return TF(self.basis.fourier_from_coeffs(C, grid_size(self.K)), self.K, self.N)

    def lift_grid(self, values: np.ndarray) -> TF:
        """Arbitrary (not necessarily solenoidal) samples on an ``L^N`` grid; the Nyquist plane is dropped."""
        L = values.shape[-1]
        F = grid_to_fourier(np.asarray(values, dtype=float), self.N)
        band = (L - 1) // 2
        return TF(resize_fourier(F, grid_size(band), self.N), band, self.N)

    def random_field(self, rng: np.random.Generator, band: int, solenoidal: bool = False, decay: float = 0.0) -> TF:
        """Real random vector field with ``|k_d| <= band``; amplitudes scale as ``(1+|k|^2)^(-decay/2)``."""
        L = grid_size(band)
        k = wavenumbers(L, self.N)
        mask = np.all(np.abs(k) <= band, axis=0)
        vals = rng.standard_normal((self.N,) + (L,) * self.N)
        F = grid_to_fourier(vals, self.N) * mask
        k2 = np.sum(k.astype(float) ** 2, axis=0)
        F = F * (1.0 + k2) ** (-decay / 2.0)
        F[(slice(None),) + (0,) * self.N] = 0.0
        if solenoidal:
            F = leray_fourier(F, self.N)
        return TF(F, band, self.N)

    def _xi(self, xi) -> TF:
        if isinstance(xi, TF):
            return xi
        if isinstance(xi, SpectralField):
            return self.lift(xi)
        return self._xi_tf[int(xi)]

    def _wrap(self, F, band) -> TF:
        return TF(F, band, self.N)

    # grid evaluation ---------------------------------------------------------
    def _values(self, tf: TF, L: int) -> np.ndarray:
        F = resize_fourier(tf.F, L, self.N)
        v = fourier_to_grid(F, self.N)
        return v.reshape(v.shape[: v.ndim - self.N] + (-1,))

    def _grads(self, tf: TF, L: int) -> np.ndarray:
        """``out[..., l, j, p] = d_j f^l``."""
        F = resize_fourier(tf.F, L, self.N)
        k = wavenumbers(L, self.N)
        lead = F.shape[: F.ndim - self.N]
        out = np.empty(lead + (self.N,) + (L**self.N,))
        for j in range(self.N):
            d = fourier_to_grid(1j * k[j] * F, self.N)
            out[..., j, :] = d.reshape(lead + (-1,))
        return out

    def _to_tf(self, vals: np.ndarray, L: int, band: int) -> TF:
        F = grid_to_fourier(vals.reshape(vals.shape[:-1] + (L,) * self.N), self.N)
        F = resize_fourier(F, grid_size(band), self.N)
        return self._wrap(F, band)

    @staticmethod
    def _flat(a: np.ndarray, trailing: int):
        lead = a.shape[: a.ndim - trailing]
        return a.reshape((-1,) + a.shape[a.ndim - trailing:]), lead

    def _advect_vals(self, phi, grad):
        if self.N == 2:
            g, lead = self._flat(grad, 3)
            p = np.broadcast_to(phi, lead + phi.shape[-2:]).reshape((-1,) + phi.shape[-2:])
            return kernels.advect_grid(p, g).reshape(lead + (2, -1))
        return np.einsum("...jp,...ljp->...lp", phi, grad)

    def _stretch_vals(self, f, gxi):
        if self.N == 2 and gxi.ndim == 3:
            fl, lead = self._flat(f, 2)
            return kernels.stretch_grid(fl, gxi).reshape(lead + (2, -1))
        return np.einsum("...jp,...jlp->...lp", f, gxi)

    # operators --------------------------------------------------------------
    def advect(self, phi: TF, f: TF) -> TF:
        """``L_phi f`` (vector ``f``)."""
        band = phi.band + f.band
        L = grid_size(band)
        out = self._advect_vals(self._values(phi, L), self._grads(f, L))
        return self._to_tf(out, L, band)

    def advect_scalar(self, phi: TF, w: TF) -> TF:
        band = phi.band + w.band
        L = grid_size(band)
        pv = self._values(phi, L)
        Fw = resize_fourier(w.F, L, self.N)
        k = wavenumbers(L, self.N)
        out = sum(pv[j] * fourier_to_grid(1j * k[j] * Fw, self.N).reshape(-1) for j in range(self.N))
        return self._to_tf(out, L, band)

    def stretch(self, g: TF, f: TF) -> TF:
        """``T_g f = sum_j f^j grad g^j``."""
        band = g.band + f.band
        L = grid_size(band)
        out = self._stretch_vals(self._values(f, L), self._grads(g, L))
        return self._to_tf(out, L, band)

    def salt(self, xi, f: TF) -> TF:
        """``B f = L_xi f + T_xi f`` in a single grid pass."""
        x = self._xi(xi)
        band = x.band + f.band
        L = grid_size(band)
        xv, gx = self._values(x, L), self._grads(x, L)
        fv, gf = self._values(f, L), self._grads(f, L)
        if self.N == 2:
            fl, lead = self._flat(fv, 2)
            gl, _ = self._flat(gf, 3)
            out = kernels.salt_grid(xv, gx, fl, gl).reshape(lead + (2, -1))
        else:
            out = np.einsum("jp,...ljp->...lp", xv, gf) + np.einsum("...jp,jlp->...lp", fv, gx)
        return self._to_tf(out, L, band)

    def salt_adjoint(self, xi, f: TF) -> TF:
        """``B* f = -L_xi f + L_f xi``."""
        x = self._xi(xi)
        band = x.band + f.band
        L = grid_size(band)
        xv, gx = self._values(x, L), self._grads(x, L)
        fv, gf = self._values(f, L), self._grads(f, L)
        out = -np.einsum("jp,...ljp->...lp", xv, gf) + np.einsum("...jp,ljp->...lp", fv, gx)
        return self._to_tf(out, L, band)

    def transport_part(self, xi, f: TF) -> TF:
        return self.advect(self._xi(xi), f)

    def stretch_part(self, xi, f: TF) -> TF:
        return self.stretch(self._xi(xi), f)

    def stretch_adjoint(self, xi, f: TF) -> TF:
        """``T_xi* f = L_f xi``."""
        return self.advect(f, self._xi(xi))

    def laplacian(self, tf: TF) -> TF:
        return self._wrap(laplacian_fourier(tf.F, self.N), tf.band)

    def stokes_power(self, tf: TF, k: int) -> TF:
        """``(-Delta)^k`` (the Stokes power on solenoidal fields)."""
        out = tf
        for _ in range(k):
            out = self.laplacian(out).scale(-1.0)
        return out

    def leray(self, tf: TF) -> TF:
        return self._wrap(leray_fourier(tf.F, self.N), tf.band)

    def curl(self, tf: TF) -> TF:
        k = wavenumbers(tf.L, 2)
        w = 1j * k[0] * tf.F[..., 1, :, :] - 1j * k[1] * tf.F[..., 0, :, :]
        return TF(w, tf.band, 2)

    def commutator_delta_salt(self, xi, f: TF, margin: Optional[int] = None) -> TF:
        """``[Delta, B] f = Delta B f - B Delta f``.

        With ``margin`` given, ``f`` must keep ``2 * margin`` wavenumbers of
        head-room below the basis band K.
        """
        if margin is not None and f.band > self.K - 2 * margin:
            raise BandMarginError(f"field band {f.band} exceeds K - 2*margin = {self.K - 2 * margin}")
        return self.laplacian(self.salt(xi, f)) - self.salt(xi, self.laplacian(f))

    # projections and pairings -------------------------------------------------
    def project(self, tf: TF, n: Optional[int] = None) -> SpectralField:
        """``Pbar_n P`` onto the basis (orthogonal projection)."""
        F = resize_fourier(tf.F, max(grid_size(self.K), 2 * self.K + 1), self.N)
        return self.basis.from_fourier(F, n)

    def project_coeffs(self, tf: TF) -> np.ndarray:
        F = resize_fourier(tf.F, grid_size(self.K), self.N)
        return self.basis.coeffs_from_fourier(F)

    def _common(self, a: TF, b: TF):
        L = max(a.L, b.L)
        return resize_fourier(a.F, L, self.N), resize_fourier(b.F, L, self.N)

    def inner(self, a: TF, b: TF) -> float:
        Fa, Fb = self._common(a, b)
        return float(self.basis.volume * np.real(np.sum(Fa * np.conj(Fb))))

    def sobolev_inner(self, a: TF, b: TF, m: int) -> float:
        """``W^{m,2}`` inner product (all derivative tensors up to order m)."""
        Fa, Fb = self._common(a, b)
        k2 = np.sum(wavenumbers(Fa.shape[-1], self.N).astype(float) ** 2, axis=0)
        w = sum(k2**j for j in range(m + 1))
        return float(self.basis.volume * np.real(np.sum(w * Fa * np.conj(Fb))))

    def sobolev_norm(self, a: TF, m: int) -> float:
        return float(np.sqrt(max(self.sobolev_inner(a, a, m), 0.0)))

    def sup_norm(self, a: TF, k: int) -> float:
        """Grid ``W^{k,inf}`` estimate on the natural grid and one refinement."""
        best = 0.0
        for L in (grid_size(a.band), 2 * grid_size(a.band)):
            F = resize_fourier(a.F, L, self.N)
            kk = wavenumbers(L, self.N)
            D = F
            for order in range(k + 1):
                v = fourier_to_grid(D, self.N).reshape((self.N, -1) + (L,) * self.N)
                best = max(best, float(np.max(np.sqrt(np.sum(v**2, axis=0)))))
                if order < k:
                    D = np.stack([1j * kk[j] * D for j in range(self.N)], axis=1)
                    D = D.reshape((self.N, -1) + (L,) * self.N)
        return best

    def to_spectral_tf(self, f: SpectralField) -> TF:
        return self.lift(f)

    # named operators on spectral fields ---------------------------------------
    def nonlinear(self, u: SpectralField, n: Optional[int] = None) -> SpectralField:
        """``Pbar_n P L_u u`` with 3/2-rule padding."""
        return SpectralField(self.basis.basis_id, self.nonlinear_coeffs(u.coeffs)[: (n or u.n)])

    def nonlinear_coeffs(self, c: np.ndarray) -> np.ndarray:
        L = self._nl_grid()
        F = self.basis.fourier_from_coeffs(c, L)
        v = fourier_to_grid(F, self.N).reshape(self.N, -1)
        k = self._nl_k
        grads = np.empty((self.N, self.N, L**self.N))
        for j in range(self.N):
            grads[:, j] = fourier_to_grid(1j * k[j] * F, self.N).reshape(self.N, -1)
        out = self._advect_vals(v[None], grads[None])[0]
        G = grid_to_fourier(out.reshape((self.N,) + (L,) * self.N), self.N)
        return self.basis.coeffs_from_fourier(G)[: c.size]

    def _nl_grid(self) -> int:
        if not hasattr(self, "_nl_L"):
            self._nl_L = max(next_fast_len(3 * self.K + 2), 2 * self.K + 2)
            self._nl_k = wavenumbers(self._nl_L, self.N)
        return self._nl_L

    def p_salt(self, xi, f: SpectralField, n: Optional[int] = None) -> SpectralField:
        return self.project(self.salt(xi, self.lift(f)), n or f.n)

    def corrector(self, u: SpectralField, galerkin: bool = False) -> SpectralField:
        """``1/2 sum_i P B_i(B_i u)``; with ``galerkin`` the inner result is projected first."""
        acc = np.zeros(u.n)
        for i in range(len(self._xi_tf)):
            b = self.salt(i, self.lift(u))
            if galerkin:
                b = self.lift(self.project(b, u.n))
            acc += self.project(self.salt(i, b), u.n).coeffs
        return SpectralField(u.basis_id, 0.5 * acc)

    def galerkin_matrices(self, n: Optional[int] = None, chunk: int = 256) -> np.ndarray:
        """``G[i, k, l] = <B_i a_l, a_k>`` for the first ``n`` modes."""
        n = n or self.basis.size
        out = np.zeros((len(self._xi_tf), n, n))
        for start in range(0, n, chunk):
            stop = min(n, start + chunk)
            C = np.zeros((stop - start, n))
            C[np.arange(stop - start), np.arange(start, stop)] = 1.0
            modes = self.lift_coeffs(C)
            for i in range(len(self._xi_tf)):
                out[i, :, start:stop] = self.project_coeffs(self.salt(i, modes))[:, :n].T
        return out

    def galerkin_system(self, n: Optional[int] = None) -> "GalerkinOperators":
        n = n or self.basis.size
        return GalerkinOperators(np.asarray(self.basis.eigenvalues[:n]), self.galerkin_matrices(n),
                                 self.nonlinear_coeffs)


# ----------------------------------------------------------------------------
# disk
# ----------------------------------------------------------------------------

class DiskWorkspace:
    """Operator evaluation on the disk by exact jets at the quadrature nodes."""

    def __init__(self, basis, xi=None, order: int = 3):
        self.basis = basis
        self.xi = xi
        self.order = order
        self._xi_jets: List[Jet] = []
        if xi is not None:
            if xi.basis_id != basis.basis_id:
                raise BindingError("noise family bound to a different basis")
            self._xi_jets = [m.velocity_jet(basis.x, basis.y, order) for m in xi.members]

    def lift(self, f, order: Optional[int] = None) -> Jet:
        return self.basis.field_jet(f, self.order if order is None else order)

    def _xi(self, xi) -> Jet:
        return xi if isinstance(xi, Jet) else self._xi_jets[int(xi)]

    def advect(self, phi: Jet, f: Jet) -> Jet:
        return J.advect(phi, f)

    def stretch(self, g: Jet, f: Jet) -> Jet:
        return J.stretch(g, f)

    def salt(self, xi, f: Jet) -> Jet:
        x = self._xi(xi)
        return J.advect(x, f) + J.stretch(x, f)

    def salt_adjoint(self, xi, f: Jet) -> Jet:
        x = self._xi(xi)
        return J.advect(f, x) - J.advect(x, f)

    def transport_part(self, xi, f: Jet) -> Jet:
        return J.advect(self._xi(xi), f)

    def stretch_part(self, xi, f: Jet) -> Jet:
        return J.stretch(self._xi(xi), f)

    def stretch_adjoint(self, xi, f: Jet) -> Jet:
        return J.advect(f, self._xi(xi))

    def commutator_delta_salt(self, xi, f: Jet) -> Jet:
        return self.salt(xi, f).laplacian() - self.salt(xi, f.laplacian())

    def curl(self, f: Jet) -> Jet:
        return J.curl(f)

    def inner(self, a: Jet, b: Jet) -> float:
        return self.basis.quadrature_inner(a.value, b.value)

    def sobolev_inner(self, a: Jet, b: Jet, m: int) -> float:
        total = 0.0
        for k in range(m + 1):
            for (p, q) in J.multi_indices(k):
                if p + q != k:
                    continue
                mult = _multinomial(p, q)
                total += mult * self.basis.quadrature_inner(a.data[(p, q)], b.data[(p, q)])
        return total

    def sobolev_norm(self, a: Jet, m: int) -> float:
        return float(np.sqrt(max(self.sobolev_inner(a, a, m), 0.0)))

    def boundary_inner(self, a: Jet, b: Jet) -> float:
        return self.basis.boundary_inner(a.value, b.value)

    def project(self, f, n: Optional[int] = None) -> SpectralField:
        vals = f.value if isinstance(f, Jet) else np.asarray(f)
        return self.basis.leray_project(vals, n)

    def p_salt(self, xi, f: SpectralField, n: Optional[int] = None) -> SpectralField:
        return self.project(self.salt(xi, self.lift(f, 1)), n or f.n)

    def corrector(self, u: SpectralField, galerkin: bool = False) -> SpectralField:
        acc = np.zeros(u.n)
        for i in range(len(self._xi_jets)):
            b = self.salt(i, self.lift(u, 2))
            if galerkin:
                b = self.lift(self.project(b, u.n).coeffs, 1)
            acc += self.project(self.salt(i, b), u.n).coeffs
        return SpectralField(u.basis_id, 0.5 * acc)

    def _tables(self, n: int):
        tab = self.basis.mode_table(1, "interior", n)
        vals = tab[(0, 0)]
        grads = np.stack([tab[(1, 0)], tab[(0, 1)]], axis=2)  # [k, l, j] = d_j a_k^l
        return vals, grads

    def galerkin_matrices(self, n: Optional[int] = None) -> np.ndarray:
        n = n or self.basis.size
        vals, grads = self._tables(n)
        aw = vals * self.basis.weights
        out = np.zeros((len(self._xi_jets), n, n))
        for i, xj in enumerate(self._xi_jets):
            gx = np.stack([xj.data[(1, 0)], xj.data[(0, 1)]], axis=1)  # [j, l] = d_l xi^j
            Ba = kernels.salt_grid(xj.value, gx, vals, grads)
            out[i] = np.einsum("kcp,lcp->kl", aw, Ba)
        return out

    def nonlinear(self, u: SpectralField, n: Optional[int] = None) -> SpectralField:
        return SpectralField(u.basis_id, self.nonlinear_coeffs(u.coeffs)[: (n or u.n)])

    def nonlinear_coeffs(self, c: np.ndarray) -> np.ndarray:
        n = c.size
        vals, grads = self._tables(n)
        aw = vals * self.basis.weights
        u = np.tensordot(c, vals, axes=1)
        gu = np.tensordot(c, grads, axes=1)
        out = kernels.advect_grid(u[None], gu[None])[0]
        return np.einsum("kcp,cp->k", aw, out)

    def galerkin_system(self, n: Optional[int] = None) -> "GalerkinOperators":
        n = n or self.basis.size
        return GalerkinOperators(np.asarray(self.basis.eigenvalues[:n]), self.galerkin_matrices(n),
                                 self.nonlinear_coeffs)


def _multinomial(p: int, q: int) -> int:
    from math import comb

    return comb(p + q, p)


@dataclass
class GalerkinOperators:
    """Finite-dimensional operators of the n-mode system.

    ``G[i]`` is the matrix of ``Pbar_n P B_i`` on the first ``n`` modes; the
    Galerkin-consistent corrector is ``1/2 sum_i G_i^2``.
    """

    eigenvalues: np.ndarray
    G: np.ndarray
    nonlinear: callable

    def __post_init__(self):
        n = self.eigenvalues.size
        self.C = 0.5 * sum((g @ g for g in self.G), np.zeros((n, n)))
        self.G_flat = self.G.reshape(-1, n) if self.G.size else np.zeros((0, n))

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def M(self) -> int:
        return self.G.shape[0]

    def noise_columns(self, u: np.ndarray) -> np.ndarray:
        """``(n, M)`` array whose column i is ``G_i u``."""
        if self.M == 0:
            return np.zeros((self.n, 0))
        return (self.G_flat @ u).reshape(self.M, self.n).T
