"""Noise correlates and truncated cylindrical Brownian motion.

Every random draw is addressed by ``(seed, level, stream, step)``: the
Philox key is derived from ``(seed, level, stream)`` through a
``SeedSequence`` and the step index selects the position in the counter
stream, so paths can be extended, refined or split across workers without
reordering draws.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .jets import Jet, multi_indices, perp_gradient
from .spectral import SpectralField, unit
from .torus import TorusBasis, fourier_to_grid, gradient_fourier, resize_fourier

log = logging.getLogger(__name__)


# correlates -------------------------------------------------------------------

BUMP_POWER = 12


@dataclass
class Bump:
    """Stream function ``amp * (1 - rho)^12`` with ``rho = |x-c|^2/R^2`` (zero for ``rho >= 1``).

    The stream function is C^11, so the velocity lies in ``W^{10,inf}``
    and vanishes identically outside the ball of radius ``R``.
    """

    center: tuple
    radius: float
    amp: float

    def stream_jet(self, x, y, order: int) -> Jet:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        P = x.size
        dx = Jet.constant(0.0, P, order)
        dx.data[(0, 0)] = (x - self.center[0]).astype(float)
        dy = Jet.constant(0.0, P, order)
        dy.data[(0, 0)] = (y - self.center[1]).astype(float)
        if order >= 1:
            dx.data[(1, 0)] = np.ones(P)
            dy.data[(0, 1)] = np.ones(P)
        rho = (dx * dx + dy * dy).scale(1.0 / self.radius**2)
        return rho.compose(_bump_derivatives).scale(self.amp)

    def velocity_jet(self, x, y, order: int) -> Jet:
        return perp_gradient(self.stream_jet(x, y, order + 1))


def _bump_derivatives(rho: np.ndarray, order: int):
    """``(1 - rho)^q`` and its derivatives, zero outside ``rho < 1``."""
    q = BUMP_POWER
    s = np.clip(1.0 - rho, 0.0, None)
    out = []
    for j in range(order + 1):
        if j > q:
            out.append(np.zeros_like(rho))
            continue
        c = (-1) ** j * math.factorial(q) / math.factorial(q - j)
        out.append(c * s ** (q - j) * (rho < 1.0))
    return out


@dataclass
class XiFamily:
    geometry: str
    basis_id: str
    members: list
    amplitudes: np.ndarray
    norm_table: np.ndarray
    stamp: str
    recipe: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return len(self.members)

    @property
    def decay_sums(self) -> np.ndarray:
        """``sum_i ||xi_i||^2_{W^{k,inf}}`` for each tabulated k."""
        return np.sum(self.norm_table**2, axis=0)

    def norm(self, i: int, k: int) -> float:
        return float(self.norm_table[i, k])

    def max_norm(self, k: int) -> float:
        return float(np.max(self.norm_table[:, k])) if self.M else 0.0

    def manifest_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        kmax = self.norm_table.shape[1] - 1
        w.writerow(["i", "amplitude"] + [f"w{k}inf" for k in range(kmax + 1)])
        for i in range(self.M):
            w.writerow([i + 1, repr(float(self.amplitudes[i]))] + [repr(float(v)) for v in self.norm_table[i]])
        return buf.getvalue()

    def scaled(self, factor: float) -> "XiFamily":
        """Same recipe with every member multiplied by ``factor``."""
        if self.geometry == "torus":
            members = [m * factor for m in self.members]
        else:
            members = [Bump(b.center, b.radius, b.amp * factor) for b in self.members]
        recipe = dict(self.recipe, scale=self.recipe.get("scale", 1.0) * factor)
        return XiFamily(self.geometry, self.basis_id, members, self.amplitudes * abs(factor),
                        self.norm_table * abs(factor), _stamp(recipe), recipe, dict(self.diagnostics))


def _stamp(recipe: dict) -> str:
    return hashlib.sha256(json.dumps(recipe, sort_keys=True).encode()).hexdigest()[:16]


def _sup_norms_from_jets(jets: Sequence[Jet], kmax: int) -> np.ndarray:
    """``max_{|alpha|<=k} sup_x |d^alpha xi(x)|`` over several point sets, for k=0..kmax."""
    out = np.zeros(kmax + 1)
    for k in range(kmax + 1):
        best = 0.0
        for J in jets:
            for a, b in multi_indices(k):
                best = max(best, float(np.max(np.sqrt(np.sum(J.data[(a, b)] ** 2, axis=0)))))
        out[k] = best
    return np.maximum.accumulate(out)


def torus_sup_norms(basis: TorusBasis, f: SpectralField, kmax: int, L: Optional[int] = None) -> np.ndarray:
    """Grid-supremum ``W^{k,inf}`` estimates on the working grid and one refinement."""
    L = L or basis.G
    out = np.zeros(kmax + 1)
    for grid in (L, 2 * L):
        F = basis.to_fourier(f, grid)
        D = F
        level = np.zeros(kmax + 1)
        for k in range(kmax + 1):
            vals = fourier_to_grid(D, basis.N)
            # D has shape (N, N, ..., N, L, ..., L); collapse derivative axes
            vals = vals.reshape((basis.N, -1) + (grid,) * basis.N)
            level[k] = float(np.max(np.sqrt(np.sum(vals**2, axis=0))))
            if k < kmax:
                D = gradient_fourier(D, basis.N)
        out = np.maximum(out, level)
    return np.maximum.accumulate(out)


def make_torus_xi(basis: TorusBasis, M: int, p: float, seed: int = 0, amplitude: float = 1.0,
                  m: int = 2, kmax: Optional[int] = None) -> XiFamily:
    """``xi_i = amplitude * i^-p * a_i`` for the first ``M`` torus modes."""
    if M < 1:
        raise ValueError("need at least one noise mode")
    if M > basis.size:
        raise ValueError(f"M={M} exceeds the {basis.size} available modes")
    kmax = m + 2 if kmax is None else kmax
    amps = amplitude * np.arange(1, M + 1, dtype=float) ** (-float(p))
    members = [unit(basis, i) * amps[i] for i in range(M)]
    table = np.array([torus_sup_norms(basis, f, kmax) for f in members])
    recipe = {"geometry": "torus", "basis": basis.basis_id, "M": M, "p": float(p), "seed": int(seed),
              "amplitude": float(amplitude), "m": int(m), "kmax": int(kmax), "recipe": "scaled-modes"}
    fam = XiFamily("torus", basis.basis_id, members, amps, table, _stamp(recipe), recipe)
    fam.diagnostics.update(_decay_diagnostics(table, p, m))
    return fam


def _decay_diagnostics(table: np.ndarray, p: float, m: int) -> dict:
    k = min(m + 2, table.shape[1] - 1)
    terms = table[:, k] ** 2
    diag = {"illustrative": True, "partial_sum": float(np.sum(terms)), "order": k}
    slope = None
    pos = terms > 0
    idx = np.arange(1, terms.size + 1)
    if np.count_nonzero(pos) >= 4:
        tail = slice(terms.size // 2, None)
        sel = pos[tail]
        if np.count_nonzero(sel) >= 2:
            slope = float(np.polyfit(np.log(idx[tail][sel]), np.log(terms[tail][sel]), 1)[0])
    diag["tail_slope"] = slope
    ok = p > m + 2 and (slope is None or slope < -1.0)
    diag["decay_ok"] = bool(ok)
    if not ok:
        diag["warning"] = f"decay exponent p={p} does not guarantee summability of W^{{{k},inf}} norms"
        log.warning(diag["warning"])
    return diag


def make_disk_xi(basis, M: int, support_radius: float = 0.8, seed: int = 0, amplitude: float = 1.0,
                 p: float = 2.0, m: int = 2, kmax: Optional[int] = None) -> XiFamily:
    """Perpendicular gradients of smooth bumps supported in ``r <= support_radius``."""
    if not 0.0 < support_radius < 1.0:
        raise ValueError("support_radius must lie in (0, 1)")
    if M < 1:
        raise ValueError("need at least one noise mode")
    kmax = m + 2 if kmax is None else kmax
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(0xD15C,))))
    members = []
    amps = amplitude * np.arange(1, M + 1, dtype=float) ** (-float(p))
    for i in range(M):
        rc = 0.5 * support_radius * math.sqrt(rng.random())
        phi = 2.0 * math.pi * rng.random()
        room = support_radius - rc
        R = room * (0.6 + 0.4 * rng.random())
        # velocity scale of the bump is about amp / R
        members.append(Bump((rc * math.cos(phi), rc * math.sin(phi)), R, float(amps[i]) * R))
    from .disk import polar_quadrature

    pts = [(basis.x, basis.y)]
    _, _, R2, T2, _ = polar_quadrature(2 * basis.nr, 2 * basis.ntheta)
    pts.append((R2 * np.cos(T2), R2 * np.sin(T2)))
    table = np.array([_sup_norms_from_jets([b.velocity_jet(x, y, kmax) for x, y in pts], kmax) for b in members])
    recipe = {"geometry": "disk", "basis": basis.basis_id, "M": M, "support_radius": float(support_radius),
              "seed": int(seed), "amplitude": float(amplitude), "p": float(p), "m": int(m), "kmax": int(kmax),
              "recipe": "bump-stream"}
    fam = XiFamily("disk", basis.basis_id, members, amps, table, _stamp(recipe), recipe)
    fam.diagnostics.update({"illustrative": True, "partial_sum": float(np.sum(table[:, -1] ** 2))})
    return fam


# Brownian paths ----------------------------------------------------------------

def _philox(seed: int, level: int, stream: int) -> np.random.Generator:
    key = np.random.SeedSequence(int(seed), spawn_key=(int(level), int(stream))).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# increments live on a dyadic lattice so sums and differences are exact
LATTICE = 2.0**-44


def _to_lattice(v: np.ndarray) -> np.ndarray:
    if np.any(np.abs(v) >= 2.0**52 * LATTICE):
        raise OverflowError("increment too large for the exact lattice")
    return np.rint(v / LATTICE) * LATTICE


def keyed_normals(seed: int, level: int, stream: int, steps: int) -> np.ndarray:
    """Standard normals at positions ``0..steps-1`` of the ``(seed, level, stream)`` counter stream.

    Box-Muller on two uniforms per position, so position ``s`` depends
    only on the key and ``s``.
    """
    u = _philox(seed, level, stream).random(2 * steps).reshape(steps, 2)
    return np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])


@dataclass(frozen=True)
class BrownianPath:
    seed: int
    dt: float
    increments: np.ndarray  # (steps, M)
    level: int = 0

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    @property
    def M(self) -> int:
        return self.increments.shape[1]

    def values(self) -> np.ndarray:
        """``W`` at the step boundaries, starting from zero."""
        return np.vstack([np.zeros(self.M), np.cumsum(self.increments, axis=0)])

    def coarsen(self) -> "BrownianPath":
        inc = self.increments[0::2] + self.increments[1::2]
        return BrownianPath(self.seed, 2.0 * self.dt, inc, self.level - 1)

    def to_bytes(self) -> bytes:
        head = struct.pack("<qdqQQ", self.seed, self.dt, self.level, self.steps, self.M)
        return head + np.asarray(self.increments, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "BrownianPath":
        seed, dt, level, steps, M = struct.unpack_from("<qdqQQ", data, 0)
        inc = np.frombuffer(data, dtype="<f8", offset=struct.calcsize("<qdqQQ"), count=steps * M)
        return cls(seed, dt, inc.reshape(steps, M).copy(), level)


def sample_path(M: int, dt: float, steps: int, seed: int) -> BrownianPath:
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if M < 0 or steps < 0:
        raise ValueError("M and steps must be nonnegative")
    inc = np.empty((steps, M))
    for i in range(M):
        inc[:, i] = _to_lattice(math.sqrt(dt) * keyed_normals(seed, 0, i, steps))
    inc.setflags(write=False)
    return BrownianPath(int(seed), float(dt), inc, 0)


def refine(path: BrownianPath) -> BrownianPath:
    """Halve ``dt`` by Brownian-bridge midpoints; each pair sums to the coarse increment exactly.

    Midpoint draws are rounded to the increment lattice (spacing ``2^-44``),
    which makes ``first + second == coarse`` hold in floating point.
    """
    level = path.level + 1
    coarse = path.increments
    first = np.empty_like(coarse)
    for i in range(path.M):
        z = keyed_normals(path.seed, level, i, path.steps)
        first[:, i] = 0.5 * coarse[:, i] + 0.5 * math.sqrt(path.dt) * z
    first = _to_lattice(first)
    second = coarse - first  # exact: both operands are lattice points
    inc = np.empty((2 * path.steps, path.M))
    inc[0::2] = first
    inc[1::2] = second
    inc.setflags(write=False)
    return BrownianPath(path.seed, 0.5 * path.dt, inc, level)


def refine_to(path: BrownianPath, level: int) -> BrownianPath:
    while path.level < level:
        path = refine(path)
    return path


def ensemble_seed(master: int, member: int) -> int:
    """Seed of ensemble member ``member``: ``SeedSequence(master, spawn_key=(member,))`` folded to 63 bits."""
    state = np.random.SeedSequence(int(master), spawn_key=(int(member),)).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))
