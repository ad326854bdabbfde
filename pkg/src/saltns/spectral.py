"""Coefficient-space fields and the fractional Stokes calculus.

A :class:`SpectralField` is a finite coefficient vector in a Stokes
eigenbasis.  Every basis registers itself under an opaque ``basis_id`` so
that fields can be passed around (and serialised) without carrying the
basis object.  All operations here are exact finite-dimensional
evaluations in 64-bit arithmetic.
"""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Protocol

import numpy as np


class BindingError(LookupError):
    """A field refers to a basis that is not registered or does not match."""


class EigenBasis(Protocol):
    basis_id: str
    eigenvalues: np.ndarray

    @property
    def size(self) -> int: ...


_REGISTRY: Dict[str, EigenBasis] = {}


def register_basis(basis: EigenBasis) -> None:
    if len(basis.eigenvalues) == 0:
        raise ValueError("empty eigenbasis")
    _REGISTRY[basis.basis_id] = basis


def lookup_basis(basis_id: str) -> EigenBasis:
    try:
        return _REGISTRY[basis_id]
    except KeyError:
        raise BindingError(f"unknown basis_id {basis_id!r}") from None


def sobolev_index(s) -> float:
    s = float(s)
    if not s >= 0.0:
        raise ValueError(f"Sobolev index must be nonnegative, got {s}")
    return s


@dataclass(frozen=True)
class SpectralField:
    basis_id: str
    coeffs: np.ndarray
    clamped: bool = field(default=False, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.size

    @property
    def basis(self) -> EigenBasis:
        return lookup_basis(self.basis_id)

    def eigenvalues(self) -> np.ndarray:
        lam = self.basis.eigenvalues
        if self.n > lam.size:
            raise BindingError(f"field has {self.n} coefficients but basis {self.basis_id!r} only {lam.size} modes")
        return lam[: self.n]

    def _check(self, other: "SpectralField") -> None:
        if other.basis_id != self.basis_id:
            raise BindingError(f"basis mismatch: {self.basis_id!r} vs {other.basis_id!r}")
        if other.n != self.n:
            raise BindingError(f"truncation mismatch: {self.n} vs {other.n}")

    def with_coeffs(self, coeffs) -> "SpectralField":
        return SpectralField(self.basis_id, coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return self.with_coeffs(float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self.with_coeffs(-self.coeffs)


def zeros(basis: EigenBasis, n: Optional[int] = None) -> SpectralField:
    return SpectralField(basis.basis_id, np.zeros(basis.size if n is None else n))


def unit(basis: EigenBasis, k: int, n: Optional[int] = None) -> SpectralField:
    c = np.zeros(basis.size if n is None else n)
    c[k] = 1.0
    return SpectralField(basis.basis_id, c)


def as_norm(f: SpectralField, s) -> float:
    s = sobolev_index(s)
    lam = f.eigenvalues()
    return float(np.sqrt(np.sum(lam ** (2.0 * s) * f.coeffs**2)))


def apply_fractional_stokes(f: SpectralField, s) -> SpectralField:
    s = sobolev_index(s)
    return f.with_coeffs(f.eigenvalues() ** s * f.coeffs)


def as_inner(f: SpectralField, g: SpectralField, s) -> float:
    s = sobolev_index(s)
    f._check(g)
    return float(np.sum(f.eigenvalues() ** (2.0 * s) * f.coeffs * g.coeffs))


def galerkin_project(f: SpectralField, n: int) -> SpectralField:
    """Zero every coefficient beyond the first ``n``.

    ``n`` larger than the truncation is clamped and flagged on the result.
    """
    if n < 1:
        raise ValueError("projection order must be at least 1")
    c = f.coeffs.copy()
    clamped = n > f.n
    c[min(n, f.n):] = 0.0
    return SpectralField(f.basis_id, c, clamped=clamped)


def tail_bound_holds(f: SpectralField, n: int, r: float, s: float, slack: float = 1e-12) -> bool:
    """Check the projection tail estimate for one field (requires ``lambda_n >= 1``)."""
    lam_n = f.eigenvalues()[n - 1]
    lhs = as_norm(f - galerkin_project(f, n), r)
    rhs = lam_n ** (-(s - r)) * as_norm(f, s)
    return lhs <= rhs * (1.0 + slack) + 1e-300


@dataclass
class NormReport:
    l2: float
    as_norms: Mapping[float, float]
    w12: Optional[float] = None
    w22: Optional[float] = None

    def __post_init__(self):
        vals = [self.l2, *self.as_norms.values()] + [v for v in (self.w12, self.w22) if v is not None]
        if any(not (v >= 0.0) for v in vals):
            raise ValueError("norms must be nonnegative")


def norm_report(f: SpectralField, s_values=(0.5, 1.0), w12=None, w22=None) -> NormReport:
    return NormReport(
        l2=float(np.linalg.norm(f.coeffs)),
        as_norms={float(s): as_norm(f, s) for s in s_values},
        w12=w12,
        w22=w22,
    )


# serialisation ------------------------------------------------------------

def to_csv(f: SpectralField) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["basis_id", "n"] + [f"c{k + 1}" for k in range(f.n)])
    w.writerow([f.basis_id, f.n] + [repr(float(c)) for c in f.coeffs])
    return buf.getvalue()


def from_csv(text: str) -> SpectralField:
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        raise ValueError("field CSV needs a header and a data row")
    row = rows[1]
    n = int(row[1])
    coeffs = [float(x) for x in row[2:]]
    if len(coeffs) != n:
        raise ValueError(f"declared n={n} but {len(coeffs)} coefficients present")
    return SpectralField(row[0], coeffs)


def to_bytes(f: SpectralField) -> bytes:
    """Little-endian layout: u32 id length, id bytes, u64 n, n float64."""
    bid = f.basis_id.encode("utf-8")
    return (
        struct.pack("<I", len(bid))
        + bid
        + struct.pack("<Q", f.n)
        + np.asarray(f.coeffs, dtype="<f8").tobytes()
    )


def from_bytes(data: bytes) -> SpectralField:
    (ln,) = struct.unpack_from("<I", data, 0)
    bid = data[4 : 4 + ln].decode("utf-8")
    (n,) = struct.unpack_from("<Q", data, 4 + ln)
    start = 12 + ln
    if len(data) != start + 8 * n:
        raise ValueError("truncated or oversized field record")
    coeffs = np.frombuffer(data, dtype="<f8", count=n, offset=start)
    return SpectralField(bid, coeffs.astype(np.float64))
