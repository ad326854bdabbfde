"""Strong agreement between the Ito and Stratonovich forms on shared paths.

For each step size the Ito form (with the corrector) is advanced by
Euler-Maruyama and the Stratonovich form by Heun, both driven by the same
Brownian path; paths at successive step sizes are refinements of each
other.  The root-mean-square distance of the two final states is fitted
against dt on a log-log scale.
"""
from __future__ import annotations

import math
from dataclasses import replace
from typing import List, Optional, Sequence

import numpy as np

from ..noise import BrownianPath, ensemble_seed, refine, sample_path
from ..sde import SdeConfig, build_setup, run
from .report import VerificationReport

SLOPE_BAND = (0.8, 1.2)
DEFAULT_DTS = tuple(2.0**-k for k in range(6, 11))
ANCHOR = "Ito form with corrector 1/2 sum_i P B_i^2 u equals the Stratonovich form pathwise"


def _check_dts(dts: Sequence[float]) -> List[float]:
    dts = sorted((float(d) for d in dts), reverse=True)
    if len(dts) < 2:
        raise ValueError("need at least two step sizes")
    for a, b in zip(dts, dts[1:]):
        if a != 2.0 * b:
            raise ValueError("step sizes must be successive halvings")
    return dts


def fit_loglog(dts: Sequence[float], values: Sequence[float]):
    """Least-squares ``log v = slope * log dt + intercept``."""
    x, y = np.log(np.asarray(dts)), np.log(np.asarray(values))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def path_family(M: int, dts: Sequence[float], T: float, seed: int) -> List[BrownianPath]:
    """Paths at every step size, each a refinement of the previous one."""
    steps = int(round(T / dts[0]))
    paths = [sample_path(M, dts[0], steps, seed)]
    for _ in dts[1:]:
        paths.append(refine(paths[-1]))
    return paths


def conversion_study(config: SdeConfig, dts: Sequence[float] = DEFAULT_DTS, paths: int = 16,
                     seed: Optional[int] = None, reference: bool = True) -> VerificationReport:
    """Strong Ito/Stratonovich difference at time T against dt.

    With ``reference`` set, a Heun run on one further refinement serves as
    the reference solution, and the convergence order of each scheme on
    its own is reported alongside (informationally).
    """
    dts = _check_dts(dts)
    seed = config.seed if seed is None else seed
    base = replace(config, dt=dts[0], record_stride=10**9, snapshot_stride=0)
    setup = build_setup(base)
    M = setup.ops.M
    noise = base.noise and M > 0
    ito = lambda dt: replace(base, dt=dt, integrator="euler-maruyama", form="ito")
    strat = lambda dt: replace(base, dt=dt, integrator="heun", form="stratonovich")
    diffs = np.zeros((paths, len(dts)))
    err_em = np.zeros((paths, len(dts)))
    err_heun = np.zeros((paths, len(dts)))
    mean_em = np.zeros((len(dts), setup.ops.n))
    mean_heun = np.zeros((len(dts), setup.ops.n))
    blowups = 0
    for e in range(paths):
        fam = path_family(max(M, 1), dts + ([dts[-1] / 2] if reference else []), base.T, ensemble_seed(seed, e))
        ref = None
        if reference:
            tr = run(strat(dts[-1] / 2), fam[-1], setup)
            blowups += tr.blew_up
            ref = tr.final
        for j, dt in enumerate(dts):
            a = run(ito(dt), fam[j], setup)
            b = run(strat(dt), fam[j], setup)
            blowups += a.blew_up + b.blew_up
            diffs[e, j] = np.linalg.norm(a.final - b.final)
            mean_em[j] += a.final / paths
            mean_heun[j] += b.final / paths
            if ref is not None:
                err_em[e, j] = np.linalg.norm(a.final - ref)
                err_heun[e, j] = np.linalg.norm(b.final - ref)
    rms = np.sqrt(np.mean(diffs**2, axis=0))
    monotone = bool(np.all(np.diff(rms) < 0))
    rows = [{"dt": dt, "rms_difference": float(v)} for dt, v in zip(dts, rms)]
    details = {"paths": paths, "noise_modes": M, "monotone": monotone, "slope_band": list(SLOPE_BAND),
               "blowups": int(blowups), "config_hash": base.config_hash()}
    if np.all(rms > 0) and np.all(np.isfinite(rms)):
        slope, intercept = fit_loglog(dts, rms)
    else:
        slope, intercept = math.nan, math.nan
    details.update(slope=slope, intercept=intercept)
    weak = np.linalg.norm(mean_em - mean_heun, axis=1)
    for row, w in zip(rows, weak):
        row["mean_difference"] = float(w)
    if np.all(weak > 0):
        details["mean_difference_slope"] = fit_loglog(dts, weak)[0]
    if reference:
        e_em = np.sqrt(np.mean(err_em**2, axis=0))
        e_h = np.sqrt(np.mean(err_heun**2, axis=0))
        for row, a, b in zip(rows, e_em, e_h):
            row["ito_em_error"] = float(a)
            row["strat_heun_error"] = float(b)
        if np.all(e_em > 0) and np.all(e_h > 0):
            details["ito_em_order"] = fit_loglog(dts, e_em)[0]
            details["strat_heun_order"] = fit_loglog(dts, e_h)[0]
    if blowups:
        status = "informational"
    elif not noise:
        status = "informational"
        details["note"] = "noise off: slope test skipped"
    else:
        ok = monotone and SLOPE_BAND[0] <= slope <= SLOPE_BAND[1]
        status = "pass" if ok else "fail"
    return VerificationReport("conversion-study", ANCHOR, status, slope, paths,
                              tuple(f"dt=2^{int(round(math.log2(d)))}" for d in dts), (seed,),
                              SLOPE_BAND[0], "", details, rows)


def scalar_conversion_study(a: float = -0.5, b: float = 0.8, x0: float = 1.0, T: float = 1.0,
                            dts: Sequence[float] = DEFAULT_DTS, paths: int = 256, seed: int = 0) -> dict:
    """The same study for ``dX = a X dt + b X o dW`` with its closed-form solution.

    Uses the same refined path family.  Returns the rms Ito/Stratonovich
    difference and each scheme's rms error against
    ``X_T = x0 exp(a T + b W_T)`` per step size, with fitted slopes.
    """
    dts = _check_dts(dts)
    diffs = np.zeros((paths, len(dts)))
    e_em = np.zeros((paths, len(dts)))
    e_heun = np.zeros((paths, len(dts)))
    for p in range(paths):
        fam = path_family(1, dts, T, ensemble_seed(seed, p))
        W_T = float(np.sum(fam[0].increments))
        exact = x0 * math.exp(a * T + b * W_T)
        for j, path in enumerate(fam):
            dt = path.dt
            x_em = x_h = x0
            for dW in path.increments[:, 0]:
                x_em = x_em + (a + 0.5 * b * b) * x_em * dt + b * x_em * dW
                pred = x_h + a * x_h * dt + b * x_h * dW
                x_h = x_h + 0.5 * (a * x_h + a * pred) * dt + 0.5 * (b * x_h + b * pred) * dW
            diffs[p, j] = x_em - x_h
            e_em[p, j] = x_em - exact
            e_heun[p, j] = x_h - exact
    rms = lambda v: np.sqrt(np.mean(v**2, axis=0))
    out = {"dts": dts, "difference": rms(diffs), "ito_em_error": rms(e_em), "strat_heun_error": rms(e_heun)}
    out["slope"] = fit_loglog(dts, out["difference"])[0]
    out["ito_em_order"] = fit_loglog(dts, out["ito_em_error"])[0]
    out["strat_heun_order"] = fit_loglog(dts, out["strat_heun_error"])[0]
    return out
