"""Growth of Galerkin truncations of a field that violates the boundary condition.

A solenoidal field whose vorticity does not vanish on the circle lies
outside the closure of the eigenbasis span in ``W^{2,2}``, so the
``W^{2,2}`` norms of its truncations grow without bound.  A field inside
the span gives a sequence that stops changing once every mode it uses is
included.  The two behaviours are computed by the same code path and must
both be observed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from math import comb
from typing import Callable, Optional, Sequence

import numpy as np

from .. import jets as J
from ..disk import DiskBasis, basis_for_modes
from ..jets import Jet, multi_indices
from .report import VerificationReport

DEFAULT_N = (4, 16, 64, 256)
FLAT_TOLERANCE = 0.01
CONFORMING_TOLERANCE = 1e-8
ANCHOR = "||Pbar_n f||_{W^2,2} > c ||f||_{W^2,2} for some n, when curl f != 0 on the boundary"


class ConformingFieldError(ValueError):
    """The input already satisfies the boundary condition, so nothing can explode."""


@dataclass
class FieldSpec:
    """A named velocity field given by its jet at arbitrary points."""

    name: str
    jet: Callable  # (basis, x, y, order) -> vector Jet


def _coordinate_jets(x, y, order):
    X = Jet.zeros((), x.size, order)
    Y = Jet.zeros((), x.size, order)
    X.data[(0, 0)] = np.asarray(x, dtype=float).copy()
    Y.data[(0, 0)] = np.asarray(y, dtype=float).copy()
    if order >= 1:
        X.data[(1, 0)][:] = 1.0
        Y.data[(0, 1)][:] = 1.0
    return X, Y


def _shipped_jet(basis, x, y, order):
    """``grad^perp [(1 - r^2)(1 + x/2)]``: tangent on the circle, vorticity ``-4 - 4x``."""
    X, Y = _coordinate_jets(x, y, order + 1)
    one = Jet.constant(1.0, X.npts, order + 1)
    psi = (one - X * X - Y * Y) * (one + X.scale(0.5))
    return J.perp_gradient(psi)


def _mixture_jet(coeffs):
    def jet(basis, x, y, order):
        out = Jet.zeros((2,), np.size(x), order)
        for k, c in coeffs.items():
            out = out + basis.mode_jet(k, order, (x, y)).scale(c)
        return out
    return jet


SHIPPED_FIELD = FieldSpec("stream-(1-r^2)(1+x/2)", _shipped_jet)
CONTROL_FIELD = FieldSpec("eigen-mixture a1+0.5a3", _mixture_jet({0: 1.0, 2: 0.5}))


def calibration() -> dict:
    with resources.files("saltns.data").joinpath("calibration.json").open() as fh:
        return json.load(fh)


def boundary_vorticity_ratio(spec: FieldSpec, basis: DiskBasis) -> float:
    """``max |curl f|`` on the circle relative to its interior maximum."""
    inner = J.curl(spec.jet(basis, basis.x, basis.y, 1)).value
    bnd = J.curl(spec.jet(basis, basis.bx, basis.by, 1)).value
    return float(np.max(np.abs(bnd)) / max(np.max(np.abs(inner)), 1e-300))


def _w22_sq(basis: DiskBasis, g: Jet) -> float:
    total = 0.0
    for (p, q) in multi_indices(2):
        total += comb(p + q, p) * basis.quadrature_inner(g.data[(p, q)], g.data[(p, q)])
    return total


def truncation_table(spec: FieldSpec, n_list: Sequence[int], basis: Optional[DiskBasis] = None):
    """Rows ``(n, ||Pbar_n f||, ||Pbar_n f||_{W^2,2})`` plus the norms of ``f`` itself.

    ``Pbar_n f`` is rebuilt as an exact jet from its coefficients, so the
    second derivatives carry no differentiation error.
    """
    n_list = sorted(int(n) for n in n_list)
    basis = basis or basis_for_modes(n_list[-1])
    if basis.complete_size < n_list[-1]:
        raise ValueError(f"basis resolves only {basis.complete_size} complete modes, need {n_list[-1]}")
    f = spec.jet(basis, basis.x, basis.y, 2)
    f_l2 = float(np.sqrt(basis.quadrature_inner(f.value, f.value)))
    f_w22 = float(np.sqrt(_w22_sq(basis, f)))
    rows = []
    acc = Jet.zeros((2,), basis.npts, 2)
    coeffs = np.zeros(n_list[-1])
    done = 0
    for n in n_list:
        for k in range(done, n):
            a = basis.mode_jet(k, 2)
            coeffs[k] = basis.quadrature_inner(f.value, a.value)
            acc = acc + a.scale(coeffs[k])
        done = n
        l2 = float(np.sqrt(basis.quadrature_inner(acc.value, acc.value)))
        rows.append({"n": n, "l2": l2, "l2_coeffs": float(np.linalg.norm(coeffs[:n])),
                     "w22": float(np.sqrt(_w22_sq(basis, acc)))})
    return rows, {"l2": f_l2, "w22": f_w22, "basis": basis.basis_id}


def explosion_demo(n_list: Sequence[int] = DEFAULT_N, f_spec: FieldSpec = SHIPPED_FIELD,
                   growth_factor: Optional[float] = None, basis: Optional[DiskBasis] = None,
                   allow_conforming: bool = False) -> VerificationReport:
    """Tabulate ``||Pbar_n f||_{W^2,2}`` against n.

    Passes iff the sequence strictly increases, the last value exceeds the
    first by ``growth_factor`` and no truncation exceeds ``||f||`` in L2.
    Conforming input is refused unless ``allow_conforming`` is set, in
    which case the report is informational.
    """
    n_list = sorted(int(n) for n in n_list)
    basis = basis or basis_for_modes(n_list[-1])
    bv = boundary_vorticity_ratio(f_spec, basis)
    conforming = bv <= CONFORMING_TOLERANCE
    if conforming and not allow_conforming:
        raise ConformingFieldError(
            f"field {f_spec.name!r} has boundary vorticity ratio {bv:.3e}; it satisfies the boundary condition")
    if growth_factor is None:
        growth_factor = float(calibration()["explosion_growth_factor"])
    rows, ref = truncation_table(f_spec, n_list, basis)
    w = np.array([r["w22"] for r in rows])
    increasing = bool(np.all(np.diff(w) > 0))
    growth = float(w[-1] / w[0])
    contraction = all(r["l2"] <= ref["l2"] * (1 + 1e-10) for r in rows)
    if conforming:
        status = "informational"
    else:
        status = "pass" if increasing and growth >= growth_factor and contraction else "fail"
    details = {"field": f_spec.name, "boundary_vorticity_ratio": bv, "growth": growth,
               "growth_factor": growth_factor, "strictly_increasing": increasing,
               "l2_contraction": contraction, "f_l2": ref["l2"], "f_w22": ref["w22"], "basis": ref["basis"],
               "flat_spread": float((w.max() - w.min()) / w.max())}
    return VerificationReport("explosion-demo" if not conforming else "explosion-control", ANCHOR, status,
                              growth, len(rows), (ref["basis"],), (), growth_factor, "", details, rows)


def explosion_pair(n_list: Sequence[int] = DEFAULT_N, growth_factor: Optional[float] = None,
                   basis: Optional[DiskBasis] = None) -> VerificationReport:
    """Violating field must grow and the conforming control must stay flat within 1%."""
    n_list = sorted(int(n) for n in n_list)
    basis = basis or basis_for_modes(n_list[-1])
    demo = explosion_demo(n_list, SHIPPED_FIELD, growth_factor, basis)
    control = explosion_demo(n_list, CONTROL_FIELD, demo.tolerance, basis, allow_conforming=True)
    flat = control.details["flat_spread"] <= FLAT_TOLERANCE
    ok = demo.status == "pass" and flat and control.details["l2_contraction"]
    details = {"violating": demo.details, "control": control.details, "control_flat": flat}
    table = [dict(r, field="violating") for r in demo.table] + [dict(r, field="control") for r in control.table]
    return VerificationReport("explosion-pair", ANCHOR, "pass" if ok else "fail", demo.value, len(table),
                              demo.resolutions, (), demo.tolerance, "", details, table)
