"""Divergence-free Fourier eigenbasis on the flat torus ``[0, 2pi)^N``.

Real modes are ``c p cos(k.x)`` and ``c p sin(k.x)`` for wavevectors ``k`` in a
half lattice with ``0 < |k| <= K`` and unit polarisations ``p`` orthogonal
to ``k`` (one for ``N = 2``, two for ``N = 3``).  With
``c = sqrt(2) / (2 pi)^(N/2)`` the modes are L2-orthonormal and the Stokes
eigenvalue of each is ``|k|^2``.

Fourier arrays use the numpy FFT layout on an ``L^N`` grid with the
convention ``f(x) = sum_k F_k exp(i k.x)``, so ``F = fftn(values) / L^N``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spectral import BindingError, SpectralField, register_basis

log = logging.getLogger(__name__)


def _half_lattice(N: int, K: int):
    rng = range(-K, K + 1)
    for k in itertools.product(rng, repeat=N):
        k2 = sum(c * c for c in k)
        if k2 == 0 or k2 > K * K:
            continue
        first = next(c for c in k if c != 0)
        if first > 0:
            yield k


def _polarisations(k: np.ndarray) -> list:
    k = np.asarray(k, dtype=float)
    nk = np.linalg.norm(k)
    if k.size == 2:
        return [np.array([-k[1], k[0]]) / nk]
    axis = int(np.argmin(np.abs(k)))
    e = np.zeros(3)
    e[axis] = 1.0
    p1 = np.cross(k, e)
    p1 /= np.linalg.norm(p1)
    p2 = np.cross(k / nk, p1)
    return [p1, p2]


class TorusBasis:
    """Eigenbasis of the Stokes operator on ``T^N`` truncated at ``|k| <= K``."""

    kind = "torus"

    def __init__(self, N: int, K: int, G: int):
        if N not in (2, 3):
            raise ValueError("torus dimension must be 2 or 3")
        if K < 1:
            raise ValueError("max wavenumber K must be at least 1")
        if G < 2 * K + 1:
            raise ValueError(
                f"grid G={G} too small for K={K}: need G >= 2K+1 = {2 * K + 1} "
                "(products are evaluated on a separately padded grid)"
            )
        self.N, self.K, self.G = N, K, G
        rows = []
        for k in _half_lattice(N, K):
            k2 = sum(c * c for c in k)
            for ip, p in enumerate(_polarisations(np.array(k))):
                for branch in (0, 1):
                    rows.append((k2, k, ip, branch, p))
        rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
        self.kvec = np.array([r[1] for r in rows], dtype=np.int64)
        self.pol_index = np.array([r[2] for r in rows], dtype=np.int64)
        self.branch = np.array([r[3] for r in rows], dtype=np.int64)
        self.pol = np.array([r[4] for r in rows], dtype=float)
        self.eigenvalues = np.array([r[0] for r in rows], dtype=float)
        self.eigenvalues.setflags(write=False)
        self.norm_const = np.sqrt(2.0) / (2.0 * np.pi) ** (N / 2.0)
        self.volume = (2.0 * np.pi) ** N
        h = hashlib.sha256()
        h.update(np.array([N, K, G], dtype=np.int64).tobytes())
        h.update(self.kvec.tobytes())
        h.update(self.branch.tobytes())
        h.update(np.round(self.pol, 15).tobytes())
        self.mode_table_hash = h.hexdigest()
        self.basis_id = f"torus{N}d-K{K}-G{G}-{self.mode_table_hash[:12]}"
        register_basis(self)

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    def first_unit_index(self) -> int:
        """1-based index of the first eigenvalue that is at least one."""
        return int(np.argmax(self.eigenvalues >= 1.0)) + 1

    def manifest(self) -> dict:
        return {"kind": "torus", "N": self.N, "K": self.K, "G": self.G, "modes": self.size,
                "mode_table_hash": self.mode_table_hash, "basis_id": self.basis_id}

    def _check(self, f: SpectralField):
        if f.basis_id != self.basis_id:
            raise BindingError(f"field bound to {f.basis_id!r}, not {self.basis_id!r}")

    # Fourier layout helpers -------------------------------------------
    def wavenumbers(self, L: int) -> np.ndarray:
        """Integer wavevector components, shape ``(N, L, ..., L)``."""
        k1 = np.rint(np.fft.fftfreq(L) * L).astype(np.int64)
        return np.array(np.meshgrid(*([k1] * self.N), indexing="ij"))

    def _mode_index(self, L: int, sign: int = 1):
        return tuple((sign * self.kvec[:, d]) % L for d in range(self.N))

    def fourier_from_coeffs(self, C: np.ndarray, L: Optional[int] = None) -> np.ndarray:
        """FFT-layout arrays for coefficient rows ``C`` of shape ``(..., n)`` with ``n <= size``."""
        L = L or self.G
        if L < 2 * self.K + 1:
            # sample on a coarse grid: build exactly, then alias-fold
            return fold_fourier(self.fourier_from_coeffs(C, 2 * self.K + 2), L, self.N)
        C = np.asarray(C, dtype=float)
        lead = C.shape[:-1]
        c = np.zeros(lead + (self.size,))
        c[..., : C.shape[-1]] = C
        amp = 0.5 * self.norm_const * c
        # cos k.x = (e + e*)/2 and sin k.x = (e - e*)/(2i)
        plus = np.where(self.branch == 0, amp + 0j, -1j * amp)
        F = np.zeros(lead + (self.N,) + (L,) * self.N, dtype=complex)
        ip = self._mode_index(L, 1)
        im = self._mode_index(L, -1)
        # within one (branch, polarisation) group every wavevector occurs once
        for g in self._groups():
            pi = tuple(i[g] for i in ip)
            mi = tuple(i[g] for i in im)
            for d in range(self.N):
                F[(Ellipsis, d) + pi] += plus[..., g] * self.pol[g, d]
                F[(Ellipsis, d) + mi] += np.conj(plus[..., g]) * self.pol[g, d]
        return F

    def _groups(self):
        if not hasattr(self, "_group_cache"):
            self._group_cache = [np.flatnonzero((self.branch == br) & (self.pol_index == ip))
                                 for br in (0, 1) for ip in range(self.N - 1)]
        return self._group_cache

    def coeffs_from_fourier(self, F: np.ndarray) -> np.ndarray:
        """Projection coefficients for FFT-layout arrays of shape ``(..., N, L, ..., L)``."""
        L = F.shape[-1]
        ip = self._mode_index(L, 1)
        pf = np.zeros(F.shape[: F.ndim - self.N - 1] + (self.size,), dtype=complex)
        for d in range(self.N):
            pf += self.pol[:, d] * F[(Ellipsis, d) + ip]
        scale = self.norm_const * self.volume
        return np.where(self.branch == 0, scale * pf.real, -scale * pf.imag)

    def to_fourier(self, f: SpectralField, L: Optional[int] = None) -> np.ndarray:
        self._check(f)
        return self.fourier_from_coeffs(f.coeffs, L)

    def from_fourier(self, F: np.ndarray, n: Optional[int] = None) -> SpectralField:
        """Coefficients of the L2-orthogonal projection onto the tabulated modes.

        ``F`` must be laid out on a grid with ``L >= 2K + 1`` so that no
        tabulated wavevector aliases.
        """
        if F.shape[-1] < 2 * self.K + 1:
            raise ValueError(f"grid {F.shape[-1]} aliases modes up to K={self.K}")
        coeffs = self.coeffs_from_fourier(F)
        n = self.size if n is None else n
        return SpectralField(self.basis_id, coeffs[:n])

    def to_grid(self, f: SpectralField, L: Optional[int] = None) -> np.ndarray:
        L = L or self.G
        return fourier_to_grid(self.to_fourier(f, L), self.N)

    def from_grid(self, values: np.ndarray, n: Optional[int] = None) -> SpectralField:
        """Leray-project and band-truncate grid samples onto the basis."""
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.N or any(s != values.shape[1] for s in values.shape[1:]) or values.ndim != self.N + 1:
            raise ValueError(f"grid field must have shape (N, L, ..., L) with N={self.N}, got {values.shape}")
        mean = values.reshape(self.N, -1).mean(axis=1)
        if np.max(np.abs(mean)) > 1e-14 * max(1.0, np.max(np.abs(values))):
            log.info("from_grid: removing nonzero mean %s", mean)
        return self.from_fourier(grid_to_fourier(values, self.N), n)

    def grid_points(self, L: Optional[int] = None) -> np.ndarray:
        L = L or self.G
        x = 2.0 * np.pi * np.arange(L) / L
        return np.array(np.meshgrid(*([x] * self.N), indexing="ij"))

    def mode_values(self, k: int, L: Optional[int] = None) -> np.ndarray:
        """Closed-form samples of mode ``k`` (0-based) on the grid."""
        x = self.grid_points(L)
        phase = np.tensordot(self.kvec[k].astype(float), x, axes=1)
        wave = np.cos(phase) if self.branch[k] == 0 else np.sin(phase)
        return self.norm_const * self.pol[k][(slice(None),) + (None,) * self.N] * wave

    # norms --------------------------------------------------------------
    def sobolev_norm(self, f, m: int, L: Optional[int] = None) -> float:
        """Grid-quadrature ``W^{m,2}`` norm: sum of squared L2 norms of all derivative tensors up to order m."""
        F = self.to_fourier(f, L or self.G) if isinstance(f, SpectralField) else f
        return float(np.sqrt(sobolev_sq_fourier(F, m, self.volume)))

    def export_table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k"] + [f"k{d + 1}" for d in range(self.N)] + ["polarisation", "branch", "lambda"])
        for i in range(self.size):
            w.writerow([i + 1] + [int(c) for c in self.kvec[i]]
                       + [int(self.pol_index[i]), "cos" if self.branch[i] == 0 else "sin",
                          repr(float(self.eigenvalues[i]))])
        return buf.getvalue()

    def export_grid_csv(self, values: np.ndarray) -> str:
        if self.N != 2:
            raise ValueError("grid CSV export is defined for N=2")
        L = values.shape[-1]
        x = self.grid_points(L)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x1", "x2", "u1", "u2"])
        for i in range(L):
            for j in range(L):
                w.writerow([repr(float(x[0, i, j])), repr(float(x[1, i, j])),
                            repr(float(values[0, i, j])), repr(float(values[1, i, j]))])
        return buf.getvalue()


def build_torus_basis(N: int, K: int, G: int) -> TorusBasis:
    return TorusBasis(N, K, G)


# free functions on Fourier arrays ------------------------------------------

def fourier_to_grid(F: np.ndarray, N: int) -> np.ndarray:
    """Real samples from an FFT-layout array whose last ``N`` axes are spatial."""
    axes = tuple(range(F.ndim - N, F.ndim))
    return np.real(np.fft.ifftn(F, axes=axes)) * float(F.shape[-1]) ** N


def grid_to_fourier(values: np.ndarray, N: int) -> np.ndarray:
    axes = tuple(range(values.ndim - N, values.ndim))
    return np.fft.fftn(values, axes=axes) / float(values.shape[-1]) ** N


def wavenumbers(L: int, N: int) -> np.ndarray:
    k1 = np.rint(np.fft.fftfreq(L) * L).astype(np.int64)
    return np.array(np.meshgrid(*([k1] * N), indexing="ij"))


def resize_fourier(F: np.ndarray, L_new: int, N: int) -> np.ndarray:
    """Move coefficients between FFT layouts; exact while the band fits both sizes."""
    L = F.shape[-1]
    if L_new == L:
        return F.copy()
    b = (min(L, L_new) - 1) // 2
    ks = np.arange(-b, b + 1)
    lead = F.shape[: F.ndim - N]
    out = np.zeros(lead + (L_new,) * N, dtype=F.dtype)
    src = np.ix_(*([ks % L] * N))
    dst = np.ix_(*([ks % L_new] * N))
    out[(Ellipsis,) + dst] = F[(Ellipsis,) + src]
    return out


def fold_fourier(F: np.ndarray, L_new: int, N: int) -> np.ndarray:
    """Alias coefficients onto a coarser grid (what sampling on that grid sees)."""
    L = F.shape[-1]
    idx = np.rint(np.fft.fftfreq(L) * L).astype(np.int64) % L_new
    out = F
    for ax in range(F.ndim - N, F.ndim):
        shape = list(out.shape)
        shape[ax] = L_new
        acc = np.zeros(shape, dtype=out.dtype)
        np.add.at(acc, (slice(None),) * ax + (idx,), out)
        out = acc
    return out


def fourier_band(F: np.ndarray, N: int, tol: float = 0.0) -> int:
    """Largest per-axis |k| carrying a coefficient above ``tol`` (max norm)."""
    L = F.shape[-1]
    k = wavenumbers(L, N)
    mag = np.abs(F).reshape((-1,) + (L,) * N).max(axis=0)
    mask = mag > tol
    if not mask.any():
        return 0
    return int(np.abs(k).max(axis=0)[mask].max())


def gradient_fourier(F: np.ndarray, N: int) -> np.ndarray:
    """``out[..., j, :] = d_j F`` with the derivative axis appended after the component axes."""
    k = wavenumbers(F.shape[-1], N)
    lead = F.shape[: F.ndim - N]
    out = np.empty(lead + (N,) + F.shape[F.ndim - N:], dtype=complex)
    for j in range(N):
        out[(Ellipsis, j) + (slice(None),) * N] = 1j * k[j] * F
    return out


def laplacian_fourier(F: np.ndarray, N: int) -> np.ndarray:
    k = wavenumbers(F.shape[-1], N)
    return -np.sum(k * k, axis=0) * F


def curl_fourier(F: np.ndarray) -> np.ndarray:
    """Scalar vorticity ``d_1 f^2 - d_2 f^1`` of a planar field."""
    k = wavenumbers(F.shape[-1], 2)
    return 1j * k[0] * F[1] - 1j * k[1] * F[0]


def divergence_fourier(F: np.ndarray, N: int) -> np.ndarray:
    k = wavenumbers(F.shape[-1], N)
    return sum(1j * k[j] * F[j] for j in range(N))


def leray_fourier(F: np.ndarray, N: int) -> np.ndarray:
    """Orthogonal projection onto zero-mean divergence-free fields."""
    k = wavenumbers(F.shape[-1], N).astype(float)
    k2 = np.sum(k * k, axis=0)
    k2[(0,) * N] = 1.0
    kdotF = np.sum(k * F, axis=0)
    out = F - k * (kdotF / k2)
    out[(slice(None),) + (0,) * N] = 0.0
    return out


def leray_project_fourier(v, k):
    """Project a single Fourier coefficient vector ``v`` at wavevector ``k``.

    ``k = 0`` returns ``v`` unchanged; the mean is handled at field level.
    """
    v = np.asarray(v)
    k = np.asarray(k, dtype=float)
    k2 = float(k @ k)
    if k2 == 0.0:
        return v.copy()
    return v - k * (k @ v) / k2


def sobolev_sq_fourier(F: np.ndarray, m: int, volume: float) -> float:
    """Squared ``W^{m,2}`` norm (sum over derivative tensors of order 0..m)."""
    N = F.shape[0]
    k2 = np.sum(wavenumbers(F.shape[-1], N).astype(float) ** 2, axis=0)
    weight = sum(k2**j for j in range(m + 1))
    return float(volume * np.sum(weight * np.abs(F) ** 2))


def sobolev_inner_fourier(F: np.ndarray, G: np.ndarray, m: int, volume: float) -> float:
    N = F.shape[0]
    k2 = np.sum(wavenumbers(F.shape[-1], N).astype(float) ** 2, axis=0)
    weight = sum(k2**j for j in range(m + 1))
    return float(volume * np.real(np.sum(weight * F * np.conj(G))))


def l2_inner_fourier(F: np.ndarray, G: np.ndarray, volume: float) -> float:
    return float(volume * np.real(np.sum(F * np.conj(G))))


@dataclass
class GridField:
    basis_id: str
    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid samples must be finite")
