"""Stokes eigenbasis of the unit disk under free-boundary Navier conditions.

Velocity modes are perpendicular gradients ``a = N grad^perp psi`` of the
Dirichlet eigenfunctions ``psi = J_n(j r) {cos, sin}(n theta)`` with
``J_n(j) = 0``.  Then ``div a = 0``, ``a.n = 0`` and ``curl a = -lambda N psi``
vanishes on the circle, so every mode satisfies the slip condition with
zero boundary vorticity, and ``Delta a = -lambda a`` with ``lambda = j^2``.

Exact Cartesian derivatives come from the complex form
``Z_n = J_n(k r) exp(i n theta)`` and the Wirtinger operators
``D = (d_x - i d_y)/2``, ``Dbar = (d_x + i d_y)/2``::

    D Z_n = (k/2) Z_{n-1},     Dbar Z_n = -(k/2) Z_{n+1}

Quadrature is Gauss-Legendre in ``r`` (with the area weight ``r``) times
the periodic trapezoid rule in ``theta``, plus a ring of nodes on ``r = 1``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import jv

from .bessel import BesselZeroError, bessel_zeros
from .jets import Jet, multi_indices
from .spectral import BindingError, SpectralField, register_basis

KAPPA = 1.0
ALPHA = 2.0 * KAPPA


@lru_cache(maxsize=None)
def wirtinger_expansion(a: int, b: int) -> Dict[Tuple[int, int], complex]:
    """Coefficients ``c[p, q]`` with ``d_x^a d_y^b = sum c[p, q] D^p Dbar^q``."""
    poly = {(0, 0): 1 + 0j}
    terms = [{(1, 0): 1 + 0j, (0, 1): 1 + 0j}] * a + [{(1, 0): 1j, (0, 1): -1j}] * b
    for t in terms:
        new: Dict[Tuple[int, int], complex] = {}
        for (p, q), c in poly.items():
            for (dp, dq), e in t.items():
                key = (p + dp, q + dq)
                new[key] = new.get(key, 0) + c * e
        poly = {k: v for k, v in new.items() if v != 0}
    return poly


def bessel_mode_jet(n: int, k: float, branch: int, x: np.ndarray, y: np.ndarray, order: int) -> Jet:
    """Jet of ``J_n(k r) cos(n theta)`` (branch 0) or ``... sin(n theta)`` (branch 1)."""
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    kr = k * r
    # polar node sets repeat each radius many times; evaluate J_nu once per radius
    kr_u, inv = np.unique(kr, return_inverse=True)
    inv = inv.reshape(kr.shape)
    cache: Dict[int, np.ndarray] = {}

    def Z(nu):
        if nu not in cache:
            cache[nu] = jv(nu, kr_u)[inv] * np.exp(1j * nu * theta)
        return cache[nu]

    data = {}
    for a, b in multi_indices(order):
        acc = np.zeros_like(kr, dtype=complex)
        for (p, q), c in wirtinger_expansion(a, b).items():
            acc = acc + c * (0.5 * k) ** p * (-0.5 * k) ** q * Z(n - p + q)
        data[(a, b)] = acc.real.copy() if branch == 0 else acc.imag.copy()
    return Jet(data, order)


def polar_quadrature(nr: int, ntheta: int):
    """Nodes and weights for integrals over the unit disk."""
    xg, wg = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * (xg + 1.0)
    wr = 0.5 * wg * r
    theta = 2.0 * np.pi * np.arange(ntheta) / ntheta
    R, T = np.meshgrid(r, theta, indexing="ij")
    W = np.outer(wr, np.full(ntheta, 2.0 * np.pi / ntheta))
    return r, theta, R.ravel(), T.ravel(), W.ravel()


def lagrange_diff_matrix(nodes: np.ndarray) -> np.ndarray:
    """Differentiation matrix of the interpolating polynomial through ``nodes``."""
    x = np.asarray(nodes, dtype=float)
    n = x.size
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / np.prod(diff, axis=1)
    D = (bw[None, :] / bw[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    D[np.arange(n), np.arange(n)] = -D.sum(axis=1)
    return D


@dataclass
class DiskGridField:
    """Velocity samples at the interior quadrature nodes and on the boundary ring."""

    values: np.ndarray
    boundary: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != 2:
            raise ValueError("disk grid field must have shape (2, P)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid samples must be finite")
        if self.boundary is not None and not np.all(np.isfinite(self.boundary)):
            raise ValueError("boundary samples must be finite")


class DiskBasis:
    """Free-boundary Stokes eigenbasis on the unit disk.

    All pairs with ``0 <= n <= n_max`` and ``1 <= m <= m_max`` are
    tabulated; ``complete_size`` is the number of leading modes for which
    no smaller eigenvalue lies outside the table.
    """

    kind = "disk"

    def __init__(self, n_max: int, m_max: int, nr: Optional[int] = None, ntheta: Optional[int] = None,
                 nboundary: Optional[int] = None):
        if n_max < 0 or m_max < 1:
            raise ValueError("need n_max >= 0 and m_max >= 1")
        self.n_max, self.m_max = n_max, m_max
        rows = []
        self._next_zero = math.inf
        for n in range(n_max + 1):
            try:
                z = bessel_zeros(n, m_max + 1)
            except BesselZeroError as exc:
                raise BesselZeroError(n, exc.m, f"eigenpair construction failed: {exc}") from None
            self._next_zero = min(self._next_zero, z[m_max])
            for m in range(1, m_max + 1):
                j = z[m - 1]
                eps = 2.0 if n == 0 else 1.0
                norm = 1.0 / math.sqrt(j * j * eps * math.pi * float(jv(n + 1, j)) ** 2 / 2.0)
                for branch in ((0,) if n == 0 else (0, 1)):
                    rows.append((j * j, n, branch, m, j, norm))
        self._next_zero = min(self._next_zero, float(bessel_zeros(n_max + 1, 1)[0]))
        rows.sort(key=lambda t: (t[0], t[1], t[2], t[3]))
        self.n_index = np.array([t[1] for t in rows], dtype=np.int64)
        self.branch = np.array([t[2] for t in rows], dtype=np.int64)
        self.m_index = np.array([t[3] for t in rows], dtype=np.int64)
        self.zeros = np.array([t[4] for t in rows])
        self.norms = np.array([t[5] for t in rows])
        self.eigenvalues = np.array([t[0] for t in rows])
        self.eigenvalues.setflags(write=False)
        self.complete_size = int(np.sum(self.eigenvalues < self._next_zero**2))

        jmax = float(self.zeros.max())
        self.nr = nr or max(2 * m_max + 8, int(math.ceil(1.5 * jmax)) + 40)
        self.ntheta = ntheta or max(4 * n_max + 8, 96)
        self.nboundary = nboundary or self.ntheta
        self.r, self.theta, R, T, self.weights = polar_quadrature(self.nr, self.ntheta)
        self.x, self.y = R * np.cos(T), R * np.sin(T)
        self.radius, self.angle = R, T
        tb = 2.0 * np.pi * np.arange(self.nboundary) / self.nboundary
        self.bx, self.by = np.cos(tb), np.sin(tb)
        self.bangle = tb
        self.bweights = np.full(self.nboundary, 2.0 * np.pi / self.nboundary)
        self.normals = np.array([self.bx, self.by])

        h = hashlib.sha256()
        h.update(np.array([n_max, m_max, self.nr, self.ntheta, self.nboundary], dtype=np.int64).tobytes())
        h.update(self.n_index.tobytes())
        h.update(self.branch.tobytes())
        h.update(self.m_index.tobytes())
        self.mode_table_hash = h.hexdigest()
        self.basis_id = f"disk-n{n_max}-m{m_max}-q{self.nr}x{self.ntheta}-{self.mode_table_hash[:12]}"
        self._jet_cache: Dict[Tuple[int, str], Dict] = {}
        register_basis(self)

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    @property
    def npts(self) -> int:
        return self.weights.size

    def manifest(self) -> dict:
        return {"kind": "disk", "n_max": self.n_max, "m_max": self.m_max, "nr": self.nr,
                "ntheta": self.ntheta, "nboundary": self.nboundary, "modes": self.size,
                "complete_size": self.complete_size, "mode_table_hash": self.mode_table_hash,
                "basis_id": self.basis_id}

    def refined(self) -> "DiskBasis":
        """Same eigenpair table with both quadrature sizes doubled."""
        return DiskBasis(self.n_max, self.m_max, 2 * self.nr, 2 * self.ntheta, 2 * self.nboundary)

    def _points(self, where):
        if where == "interior":
            return self.x, self.y
        if where == "boundary":
            return self.bx, self.by
        x, y = where
        return np.asarray(x, dtype=float), np.asarray(y, dtype=float)

    # mode evaluation ----------------------------------------------------
    def stream_jet(self, k: int, order: int, where="interior") -> Jet:
        x, y = self._points(where)
        return bessel_mode_jet(int(self.n_index[k]), float(self.zeros[k]), int(self.branch[k]), x, y, order)

    def mode_jet(self, k: int, order: int, where="interior") -> Jet:
        """Jet of the normalised velocity mode ``a_k`` (0-based)."""
        psi = self.stream_jet(k, order + 1, where)
        return Jet.stack([-psi.d(1), psi.d(0)]).scale(self.norms[k])

    def mode_table(self, order: int, where: str = "interior", count: Optional[int] = None) -> Dict:
        """``{(a, b): array (count, 2, P)}`` of velocity-mode derivatives, cached per order."""
        count = self.size if count is None else count
        key = (order, where)
        cached = self._jet_cache.get(key)
        if cached is None or cached[(0, 0)].shape[0] < count:
            jets = [self.mode_jet(k, order, where) for k in range(count)]
            cached = {ab: np.stack([j.data[ab] for j in jets]) for ab in multi_indices(order)}
            self._jet_cache[key] = cached
        return {ab: v[:count] for ab, v in cached.items()}

    def field_jet(self, f, order: int, where="interior") -> Jet:
        """Jet of ``sum_k c_k a_k``; ``f`` is a SpectralField or coefficient array."""
        c = self._coeffs(f)
        if isinstance(where, str):
            tab = self.mode_table(order, where, c.size)
            return Jet({ab: np.tensordot(c, v, axes=1) for ab, v in tab.items()}, order)
        x, y = self._points(where)
        out = Jet.zeros((2,), np.size(x), order)
        for k in np.flatnonzero(c):
            out = out + self.mode_jet(k, order, where).scale(c[k])
        return out

    def _coeffs(self, f) -> np.ndarray:
        if isinstance(f, SpectralField):
            if f.basis_id != self.basis_id:
                raise BindingError(f"field bound to {f.basis_id!r}, not {self.basis_id!r}")
            return f.coeffs
        return np.asarray(f, dtype=float)

    def to_grid(self, f) -> DiskGridField:
        return DiskGridField(self.field_jet(f, 0).value, self.field_jet(f, 0, "boundary").value)

    # quadrature -----------------------------------------------------------
    def _values(self, f):
        return f.values if isinstance(f, DiskGridField) else np.asarray(f)

    def quadrature_inner(self, f, g) -> float:
        """``int_disk f . g`` for samples at the interior nodes (shape ``(..., P)``)."""
        fv, gv = self._values(f), self._values(g)
        if fv.shape != gv.shape or fv.shape[-1] != self.npts:
            raise ValueError(f"grid mismatch: {fv.shape} vs {gv.shape}, basis has {self.npts} nodes")
        return float(np.sum(fv * gv * self.weights))

    def boundary_inner(self, f, g) -> float:
        """``int_circle f . g`` for samples on the boundary ring."""
        fv = f.boundary if isinstance(f, DiskGridField) else np.asarray(f)
        gv = g.boundary if isinstance(g, DiskGridField) else np.asarray(g)
        if fv.shape != gv.shape or fv.shape[-1] != self.nboundary:
            raise ValueError(f"boundary grid mismatch: {fv.shape} vs {gv.shape}")
        return float(np.sum(fv * gv * self.bweights))

    def leray_project(self, g, n: Optional[int] = None) -> SpectralField:
        """Coefficients ``<g, a_k>`` of the L2-orthogonal projection onto the span."""
        gv = self._values(g)
        n = self.size if n is None else n
        a = self.mode_table(0, "interior", n)[(0, 0)]
        return SpectralField(self.basis_id, np.einsum("kcp,cp->k", a, gv * self.weights))

    def gram(self, count: Optional[int] = None) -> np.ndarray:
        a = self.mode_table(0, "interior", count)[(0, 0)]
        aw = a * self.weights
        return np.einsum("kcp,lcp->kl", aw, a)

    # polar differentiation ------------------------------------------------
    def velocity_from_stream(self, psi: np.ndarray) -> DiskGridField:
        """``grad^perp psi`` from samples on the ``(nr, ntheta)`` polar node grid.

        Spectral in theta, interpolating polynomial in r.
        """
        psi = np.asarray(psi, dtype=float).reshape(self.nr, self.ntheta)
        psi_r, psi_t = self._polar_derivatives(psi)
        rr = self.r[:, None]
        ar = -psi_t / rr
        at = psi_r
        c, s = np.cos(self.theta)[None, :], np.sin(self.theta)[None, :]
        u = np.array([ar * c - at * s, ar * s + at * c])
        return DiskGridField(u.reshape(2, -1))

    def polar_divergence(self, u) -> np.ndarray:
        """Divergence of a sampled field by the same polar differentiation."""
        uv = self._values(u).reshape(2, self.nr, self.ntheta)
        c, s = np.cos(self.theta)[None, :], np.sin(self.theta)[None, :]
        ur = uv[0] * c + uv[1] * s
        ut = -uv[0] * s + uv[1] * c
        rr = self.r[:, None]
        d_rur, _ = self._polar_derivatives(rr * ur)
        _, d_ut = self._polar_derivatives(ut)
        return ((d_rur + d_ut) / rr).ravel()

    def polar_curl(self, u) -> np.ndarray:
        uv = self._values(u).reshape(2, self.nr, self.ntheta)
        c, s = np.cos(self.theta)[None, :], np.sin(self.theta)[None, :]
        ur = uv[0] * c + uv[1] * s
        ut = -uv[0] * s + uv[1] * c
        rr = self.r[:, None]
        d_rut, _ = self._polar_derivatives(rr * ut)
        _, d_ur = self._polar_derivatives(ur)
        return ((d_rut - d_ur) / rr).ravel()

    def _polar_derivatives(self, q: np.ndarray):
        Dr = self._radial_diff()
        q_r = Dr @ q
        kt = np.fft.fftfreq(self.ntheta) * self.ntheta
        if self.ntheta % 2 == 0:
            kt[self.ntheta // 2] = 0.0
        q_t = np.real(np.fft.ifft(1j * kt[None, :] * np.fft.fft(q, axis=1), axis=1))
        return q_r, q_t

    @property
    def radial_diff(self) -> np.ndarray:
        return self._radial_diff()

    def _radial_diff(self) -> np.ndarray:
        if not hasattr(self, "_Dr"):
            self._Dr = lagrange_diff_matrix(self.r)
        return self._Dr

    # export -----------------------------------------------------------------
    def export_table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "n", "branch", "m", "zero", "lambda", "normalization"])
        for k in range(self.size):
            w.writerow([k + 1, int(self.n_index[k]), "cos" if self.branch[k] == 0 else "sin", int(self.m_index[k]),
                        repr(float(self.zeros[k])), repr(float(self.eigenvalues[k])), repr(float(self.norms[k]))])
        return buf.getvalue()

    def export_grid_csv(self, g) -> str:
        gv = self._values(g)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "theta", "u1", "u2"])
        for p in range(self.npts):
            w.writerow([repr(float(self.radius[p])), repr(float(self.angle[p])),
                        repr(float(gv[0, p])), repr(float(gv[1, p]))])
        return buf.getvalue()


def dirichlet_stream_eigenpairs(n_max: int, m_max: int):
    """Eigenpair table rows ``(n, m, branch, zero, lambda, normalisation)`` sorted by eigenvalue."""
    b = DiskBasis(n_max, m_max)
    return [(int(b.n_index[k]), int(b.m_index[k]), int(b.branch[k]), float(b.zeros[k]),
             float(b.eigenvalues[k]), float(b.norms[k])) for k in range(b.size)]


def basis_for_modes(count: int, **quad) -> DiskBasis:
    """Smallest (roughly) table whose first ``count`` modes are complete."""
    lam_target = 4.0 * count + 40.0
    while True:
        j = math.sqrt(lam_target)
        n_max = max(1, int(j))
        m_max = max(1, int(j / math.pi) + 1)
        b = DiskBasis(n_max, m_max, **quad)
        if b.complete_size >= count:
            return b
        lam_target *= 1.3
