"""Sampled ratio studies for the operator inequalities.

Each registered estimate maps a random sample to a pair ``(lhs, rhs)``
where ``rhs`` is the right-hand side *shape* without its constant.  A
study reports the largest ratio on a calibration draw, on a fresh draw
with an unrelated seed, and the calibration maximum recomputed at a
refined resolution.  This is sampled evidence of boundedness with a
stable constant; it proves nothing about the inequality itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.fft as sfft

from .. import jets as J
from ..disk import DiskBasis
from ..jets import multi_indices
from ..noise import Bump, _sup_norms_from_jets
from ..operators import TF, TorusWorkspace
from ..torus import TorusBasis, fourier_to_grid, resize_fourier, wavenumbers
from .report import EVIDENCE_LABEL, VerificationReport

EPSILON = 0.1
FRESH_SLACK = 0.1
DRIFT_LIMIT = 0.1
CALIBRATION_FACTOR = 3
# ratios below this are rounding noise of an expression that vanishes identically
ROUNDING_FLOOR = 1e-20


class UnknownEstimate(KeyError):
    def __init__(self, which: str):
        super().__init__(f"unregistered estimate {which!r}; known: {', '.join(sorted(ESTIMATES))}")
        self.which = which


def ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else float(np.sign(lhs)) * np.inf


# ----------------------------------------------------------------------------
# torus sampling
# ----------------------------------------------------------------------------

def tf_sup_norms(tf: TF, kmax: int, L: int) -> np.ndarray:
    """``max_{|alpha| <= k} sup |d^alpha f|`` on the ``L`` and ``2L`` grids (planar fields)."""
    idx = list(multi_indices(kmax))
    order = np.array([a + b for a, b in idx])
    best = np.zeros(len(idx))
    for grid in (L, 2 * L):
        F = resize_fourier(tf.F, grid, 2)
        k = wavenumbers(grid, 2)
        D = np.stack([(1j * k[0]) ** a * (1j * k[1]) ** b * F for a, b in idx])
        v = np.real(sfft.ifft2(D, axes=(-2, -1))) * float(grid) ** 2
        best = np.maximum(best, np.sqrt(np.sum(v**2, axis=1)).reshape(len(idx), -1).max(axis=1))
    out = np.array([best[order == j].max() for j in range(kmax + 1)])
    return np.maximum.accumulate(out)


class TorusRatioContext:
    """Fields with ``xi`` in band 2 and ``f`` in band 3 so every product stays inside the basis."""

    geometry = "torus"
    xi_band = 2
    f_band = 3

    def __init__(self, K: int = 12, G: int = 32):
        self.basis = TorusBasis(2, K, G)
        self.ws = TorusWorkspace(self.basis)
        self.label = f"torus2d-K{K}-G{G}"

    def refined(self) -> "TorusRatioContext":
        return TorusRatioContext(2 * self.basis.K, 2 * self.basis.G)

    def draw(self, rng) -> dict:
        xi = self.ws.random_field(rng, self.xi_band, solenoidal=True, decay=float(rng.uniform(0.0, 2.0)))
        f = self.ws.random_field(rng, self.f_band, solenoidal=True, decay=float(rng.uniform(0.0, 3.0)))
        g = self.ws.random_field(rng, self.f_band, solenoidal=True, decay=float(rng.uniform(0.0, 3.0)))
        return {"xi": xi, "f": f, "g": g}

    # quantities
    def xi_norm(self, s, k: int) -> float:
        key = ("sup", k)
        if key not in s:
            s[key] = tf_sup_norms(s["xi"], k, self.basis.G)
        return float(s[key][k])

    def wk_inner(self, a, b, k):
        return self.ws.sobolev_inner(a, b, k)

    def salt(self, s, f):
        return self.ws.salt(s["xi"], f)

    def stretch(self, s, f):
        return self.ws.stretch_part(s["xi"], f)

    def commutator(self, s, f):
        return self.ws.commutator_delta_salt(s["xi"], f)

    def advect(self, phi, f):
        return self.ws.advect(phi, f)

    def grad_sq(self, a) -> float:
        return self.ws.sobolev_inner(a, a, 1) - self.ws.inner(a, a)

    def l2_sq(self, a) -> float:
        return self.ws.inner(a, a)

    def stokes_coeffs(self, tf) -> np.ndarray:
        """Eigen-coefficients of ``P tf``; exact because every sampled product lies inside the basis band."""
        return self.ws.project_coeffs(tf)

    @property
    def eigenvalues(self):
        return self.basis.eigenvalues


# ----------------------------------------------------------------------------
# disk sampling
# ----------------------------------------------------------------------------

class DiskRatioContext:
    """Bumps with random centre/radius and random combinations of the first complete modes."""

    geometry = "disk"

    def __init__(self, basis: Optional[DiskBasis] = None):
        self.basis = basis or DiskBasis(6, 6)
        self.count = self.basis.complete_size
        self.label = f"disk-n{self.basis.n_max}-m{self.basis.m_max}-q{self.basis.nr}x{self.basis.ntheta}"

    def refined(self) -> "DiskRatioContext":
        return DiskRatioContext(self.basis.refined())

    def draw(self, rng) -> dict:
        rc = 0.4 * np.sqrt(rng.random())
        phi = 2 * np.pi * rng.random()
        R = (0.8 - rc) * (0.5 + 0.5 * rng.random())
        bump = Bump((rc * np.cos(phi), rc * np.sin(phi)), R, R)
        lam = self.basis.eigenvalues[: self.count]
        c = rng.standard_normal(self.count) * lam ** (-float(rng.uniform(0.5, 2.0)) / 2.0)
        return {"bump": bump, "c": c}

    def _xi(self, s):
        if "xi" not in s:
            s["xi"] = s["bump"].velocity_jet(self.basis.x, self.basis.y, 4)
        return s["xi"]

    def f(self, s, order=3):
        return self.basis.field_jet(s["c"], order)

    def xi_norm(self, s, k: int) -> float:
        key = ("sup", k)
        if key not in s:
            s[key] = _sup_norms_from_jets([self._xi(s)], 4)
        return float(s[key][k])

    def wk_inner(self, a: J.Jet, b: J.Jet, k: int) -> float:
        total = 0.0
        for (p, q) in multi_indices(k):
            from math import comb

            total += comb(p + q, p) * self.basis.quadrature_inner(a.data[(p, q)], b.data[(p, q)])
        return total

    def salt(self, s, f: J.Jet) -> J.Jet:
        x = self._xi(s)
        return J.advect(x, f) + J.stretch(x, f)


# ----------------------------------------------------------------------------
# estimates
# ----------------------------------------------------------------------------

@dataclass
class Estimate:
    which: str
    anchor: str
    geometry: str
    terms: Callable  # (ctx, sample) -> (lhs, rhs)
    samples: int = 100


ESTIMATES: Dict[str, Estimate] = {}


def _register(est: Estimate):
    ESTIMATES[est.which] = est


def _salt_energy(k):
    def terms(ctx, s):
        f = s["f"]
        bf = ctx.salt(s, f)
        bbf = ctx.salt(s, bf)
        lhs = ctx.wk_inner(bbf, f, k) + ctx.wk_inner(bf, bf, k)
        return lhs, ctx.xi_norm(s, k + 2) ** 2 * ctx.wk_inner(f, f, k)
    return terms


def _salt_martingale(k):
    def terms(ctx, s):
        f = s["f"]
        lhs = ctx.wk_inner(ctx.salt(s, f), f, k) ** 2
        return lhs, ctx.xi_norm(s, k + 1) ** 2 * ctx.wk_inner(f, f, k) ** 2
    return terms


def _stretch_bound(k):
    def terms(ctx, s):
        tf = ctx.stretch(s, s["f"])
        return ctx.wk_inner(tf, tf, k), ctx.xi_norm(s, k + 1) ** 2 * ctx.wk_inner(s["f"], s["f"], k)
    return terms


def _salt_bound(k):
    def terms(ctx, s):
        bf = ctx.salt(s, s["f"])
        return ctx.wk_inner(bf, bf, k), ctx.xi_norm(s, k + 1) ** 2 * ctx.wk_inner(s["f"], s["f"], k + 1)
    return terms


def _commutator_bound(ctx, s):
    c = ctx.commutator(s, s["f"])
    return ctx.wk_inner(c, c, 0), ctx.xi_norm(s, 3) ** 2 * ctx.wk_inner(s["f"], s["f"], 2)


def _trilinear(ctx, s):
    phi, f, g = s["xi"], s["f"], s["g"]
    lhs = abs(ctx.ws.inner(ctx.advect(phi, f), g))
    n0 = lambda a: np.sqrt(ctx.l2_sq(a))
    n1 = lambda a: np.sqrt(ctx.grad_sq(a))
    return lhs, np.sqrt(n0(phi) * n1(phi)) * n1(f) * np.sqrt(n0(g) * n1(g))


def _xi_order_energy(m):
    return m + 1 if m % 2 == 0 else m + 2


def _projected_energy(m):
    def terms(ctx, s):
        lam = ctx.eigenvalues
        sv = m / 2.0
        f = s["f"]
        bf = ctx.salt(s, f)
        cf = ctx.stokes_coeffs(f)
        c_bbf = ctx.stokes_coeffs(ctx.salt(s, bf))
        c_bf = ctx.stokes_coeffs(bf)
        w = lam ** (2 * sv)
        lhs = float(np.sum(w * c_bbf * cf) + np.sum(w * c_bf**2))
        xn = ctx.xi_norm(s, _xi_order_energy(m)) ** 2
        top = float(np.sum(lam ** (m + 1) * cf**2))
        # fitted c_eps: what is left after the epsilon term, per unit of the lower norm
        return lhs - EPSILON * xn * top, xn * float(np.sum(w * cf**2))
    return terms


def _projected_martingale(m):
    def terms(ctx, s):
        lam = ctx.eigenvalues
        f = s["f"]
        cf = ctx.stokes_coeffs(f)
        c_bf = ctx.stokes_coeffs(ctx.salt(s, f))
        w = lam ** m
        lhs = float(np.sum(w * c_bf * cf)) ** 2
        return lhs, ctx.xi_norm(s, m + 1) ** 2 * float(np.sum(w * cf**2)) ** 2
    return terms


def _trace(ctx: DiskRatioContext, s):
    c = s["c"]
    fb = ctx.basis.field_jet(c, 0, "boundary").value
    f = ctx.basis.field_jet(c, 1)
    bnd = ctx.basis.boundary_inner(fb, fb)
    l2 = ctx.wk_inner(f, f, 0)
    return bnd, np.sqrt(l2 * ctx.wk_inner(f, f, 1))


def _disk_salt_energy(ctx: DiskRatioContext, s):
    f = ctx.f(s, 2)
    bf = ctx.salt(s, f)
    bbf = ctx.salt(s, bf)
    lhs = ctx.wk_inner(bbf, f, 0) + ctx.wk_inner(bf, bf, 0)
    return lhs, ctx.xi_norm(s, 2) ** 2 * ctx.wk_inner(f, f, 0)


def _disk_salt_martingale(ctx: DiskRatioContext, s):
    f = ctx.f(s, 1)
    lhs = ctx.wk_inner(ctx.salt(s, f), f, 0) ** 2
    return lhs, ctx.xi_norm(s, 1) ** 2 * ctx.wk_inner(f, f, 0) ** 2


for _k in (0, 1):
    _register(Estimate(f"salt-energy-k{_k}",
                       f"<B^2 f, f>_{{W^{_k},2}} + ||B f||^2_{{W^{_k},2}} <= c ||xi||^2_{{W^{_k + 2},inf}} ||f||^2_{{W^{_k},2}}",
                       "torus", _salt_energy(_k)))
    _register(Estimate(f"salt-martingale-k{_k}",
                       f"<B f, f>^2_{{W^{_k},2}} <= c ||xi||^2_{{W^{_k + 1},inf}} ||f||^4_{{W^{_k},2}}",
                       "torus", _salt_martingale(_k)))
    _register(Estimate(f"stretch-bound-k{_k}",
                       f"||T_xi f||^2_{{W^{_k},2}} <= c ||xi||^2_{{W^{_k + 1},inf}} ||f||^2_{{W^{_k},2}}",
                       "torus", _stretch_bound(_k)))
    _register(Estimate(f"salt-bound-k{_k}",
                       f"||B f||^2_{{W^{_k},2}} <= c ||xi||^2_{{W^{_k + 1},inf}} ||f||^2_{{W^{_k + 1},2}}",
                       "torus", _salt_bound(_k)))

for _m in (1, 2):
    _q = _xi_order_energy(_m)
    _register(Estimate(f"projected-energy-m{_m}",
                       f"<P B^2 f, f>_{{A^{_m}/2}} + ||P B f||^2_{{A^{_m}/2}} <= c_eps ||xi||^2_{{W^{_q},inf}} "
                       f"||f||^2_{{A^{_m}/2}} + eps ||xi||^2_{{W^{_q},inf}} ||f||^2_{{A^({_m}+1)/2}}, eps = {EPSILON}",
                       "torus", _projected_energy(_m)))
    _register(Estimate(f"projected-martingale-m{_m}",
                       f"<P B f, f>^2_{{A^{_m}/2}} <= c ||xi||^2_{{W^{_m + 1},inf}} ||f||^4_{{A^{_m}/2}}",
                       "torus", _projected_martingale(_m)))

_register(Estimate("commutator-bound", "||[Delta, B] f||^2 <= c ||xi||^2_{W^3,inf} ||f||^2_{W^2,2}", "torus",
                   _commutator_bound))
_register(Estimate("trilinear-bound",
                   "|<L_phi f, g>| <= C ||phi||^1/2 ||phi||_1^1/2 ||f||_1 ||g||^1/2 ||g||_1^1/2", "torus",
                   _trilinear))
_register(Estimate("trace-inequality", "||f||^2_{L^2(boundary)} <= c ||f|| ||f||_{W^1,2}", "disk", _trace))
_register(Estimate("disk-salt-energy-k0",
                   "<B^2 f, f> + ||B f||^2 <= c ||xi||^2_{W^2,inf} ||f||^2", "disk", _disk_salt_energy))
_register(Estimate("disk-salt-martingale-k0",
                   "<B f, f>^2 <= c ||xi||^2_{W^1,inf} ||f||^4", "disk", _disk_salt_martingale))


# ----------------------------------------------------------------------------
# study
# ----------------------------------------------------------------------------

def _rng(seed: int, which: str, phase: str) -> np.random.Generator:
    key = tuple((which + "/" + phase).encode())
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _context(geometry: str, resolution: Optional[dict] = None):
    resolution = resolution or {}
    if geometry == "torus":
        return TorusRatioContext(**resolution)
    return DiskRatioContext(DiskBasis(**resolution) if resolution else None)


def sample_ratios(est: Estimate, ctx, seed: int, phase: str, samples: int) -> List[dict]:
    rng = _rng(seed, est.which, phase)
    rows = []
    for i in range(samples):
        s = ctx.draw(rng)
        lhs, rhs = est.terms(ctx, s)
        rows.append({"sample": i, "phase": phase, "lhs": float(lhs), "rhs": float(rhs),
                     "ratio": float(ratio(lhs, rhs)), "resolution": ctx.label})
    return rows


def estimate_ratio_study(which: str, samples: Optional[int] = None, seed: int = 0,
                         fresh_seed: Optional[int] = None,
                         resolution: Optional[dict] = None) -> VerificationReport:
    """Calibrate, re-sample with a fresh seed, and re-calibrate at doubled resolution.

    The calibration draw is ``CALIBRATION_FACTOR`` times larger than the
    fresh draw, since it is the one fitting the constant.
    """
    if which not in ESTIMATES:
        raise UnknownEstimate(which)
    est = ESTIMATES[which]
    samples = est.samples if samples is None else int(samples)
    n_cal = CALIBRATION_FACTOR * samples
    fresh_seed = seed + 1 if fresh_seed is None else fresh_seed
    ctx = _context(est.geometry, resolution)
    fine = ctx.refined()
    calib = sample_ratios(est, ctx, seed, "calibration", n_cal)
    fresh = sample_ratios(est, ctx, fresh_seed, "fresh", samples)
    refined = sample_ratios(est, fine, seed, "calibration", n_cal)
    c_max = max(r["ratio"] for r in calib)
    f_max = max(r["ratio"] for r in fresh)
    r_max = max(r["ratio"] for r in refined)
    vanishing = max(abs(c_max), abs(f_max), abs(r_max)) <= ROUNDING_FLOOR
    if vanishing:
        drift = 0.0
        ok = True
    else:
        drift = abs(r_max - c_max) / abs(c_max) if c_max != 0 else np.inf
        ok = f_max <= c_max + FRESH_SLACK * abs(c_max) and drift <= DRIFT_LIMIT
    for r in refined:
        r["phase"] = "refined"
    details = {"calibrated_max": c_max, "fresh_max": f_max, "refined_max": r_max, "drift": drift,
               "fresh_limit": c_max + FRESH_SLACK * abs(c_max), "drift_limit": DRIFT_LIMIT,
               "calibration_samples": n_cal, "vanishes_to_rounding": vanishing,
               "finite": bool(np.isfinite([c_max, f_max, r_max]).all())}
    return VerificationReport(
        check_id=f"ratio-{which}", anchor=est.anchor, status="pass" if ok else "fail", value=f_max,
        samples=samples, resolutions=(ctx.label, fine.label), seeds=(seed, fresh_seed),
        tolerance=c_max + FRESH_SLACK * abs(c_max), label=EVIDENCE_LABEL, details=details,
        table=calib + fresh + refined)


def ratio_suite(seed: int = 0, samples: Optional[int] = None, only=None) -> List[VerificationReport]:
    return [estimate_ratio_study(w, samples, seed) for w in sorted(ESTIMATES) if only is None or w in only]
