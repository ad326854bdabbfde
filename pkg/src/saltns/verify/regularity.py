"""Long ensemble runs: blow-up screening, norm bounds and the Ito energy balance."""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from ..sde import SdeConfig, balance_statistics, run_ensemble
from .report import VerificationReport

BOUND_MARGIN = 1.25
BALANCE_SIGMAS = 3.0
CALIBRATION_SEED = 7919
TORUS_ANCHOR = "sup_t ||u_t||_{A^1} stays finite for the Galerkin system with SALT noise, beta = 1, m = 2"
DISK_ANCHOR = "hyperdissipative Galerkin solutions on the disk stay bounded and converge as n grows"

TORUS_RUN = SdeConfig(geometry="torus", N=2, K=16, G=64, nu=0.05, beta=1, m=2, xi_M=4, xi_p=5.0,
                      xi_amplitude=1.0, dt=1.0 / 1024, T=1.0, record_s=(0.5, 1.0), record_stride=16,
                      integrator="exponential-imex", form="ito", seed=0)
DISK_RUN = SdeConfig(geometry="disk", disk_modes=40, n=40, nu=0.05, beta=1, m=2, xi_M=4, xi_amplitude=0.5,
                     dt=1.0 / 512, T=0.5, initial="eigen-mixture", initial_modes=((1, 1.0), (2, 0.5), (4, 0.25)),
                     record_s=(0.5,), record_stride=8, seed=0)


def sup_norm(trajs, s: float) -> float:
    return float(max(np.max(t.series(s)) for t in trajs))


def torus_a1_bound(members: int = 8, config: SdeConfig = TORUS_RUN, seed: int = CALIBRATION_SEED,
                   workers: Optional[int] = None) -> dict:
    """Bound on ``sup_t ||u||_{A^1}`` from an ensemble with seeds disjoint from the gated run."""
    trajs = run_ensemble(replace(config, seed=seed), members, workers)
    observed = sup_norm(trajs, 1.0)
    return {"torus_a1_observed": observed, "torus_a1_bound": BOUND_MARGIN * observed,
            "torus_a1_margin": BOUND_MARGIN, "torus_a1_seed": seed, "torus_a1_members": members}


def torus_regularity(members: int = 8, seed: int = 0, bound: Optional[float] = None,
                     config: SdeConfig = TORUS_RUN, workers: Optional[int] = None) -> VerificationReport:
    """Gate on no blow-up, the calibrated A^1 bound and the ensemble energy balance."""
    if bound is None:
        from .explosion import calibration

        bound = float(calibration()["torus_a1_bound"])
    cfg = replace(config, seed=seed)
    trajs = run_ensemble(cfg, members, workers)
    blowups = sum(t.blew_up for t in trajs)
    sup_a1 = sup_norm([t for t in trajs if not t.blew_up], 1.0) if blowups < members else math.inf
    bal = balance_statistics(trajs)
    balanced = abs(bal["mean"]) <= BALANCE_SIGMAS * bal["stderr"]
    ok = blowups == 0 and sup_a1 <= bound and balanced
    rows = []
    for e, t in enumerate(trajs):
        rows.append({"member": e, "seed": t.seed, "blew_up": t.blew_up, "sup_a1": float(np.max(t.series(1.0))),
                     "residual": t.balance.get("residual", math.nan),
                     "noise_input": t.balance.get("noise_input", math.nan)})
    details = {"blowups": blowups, "sup_a1": sup_a1, "a1_bound": bound, "balance_mean": bal["mean"],
               "balance_stderr": bal["stderr"], "balance_sigmas": BALANCE_SIGMAS, "balanced": balanced,
               "config_hash": cfg.config_hash()}
    return VerificationReport("torus-regularity", TORUS_ANCHOR, "pass" if ok else "fail", sup_a1, members,
                              (f"K={cfg.K}", f"G={cfg.grid}"), (seed,), bound, "", details, rows)


def _ladder(config: SdeConfig, ns: Sequence[int], members: int, workers):
    series = {}
    blowups = 0
    for n in ns:
        trajs = run_ensemble(replace(config, n=n, disk_modes=n), members, workers)
        blowups += sum(t.blew_up for t in trajs)
        if not any(t.blew_up for t in trajs):
            series[n] = np.array([t.series(0.5) for t in trajs])
    diffs = []
    for a, b in zip(ns[:-1], ns[1:]):
        if a in series and b in series:
            diffs.append(float(np.max(np.abs(series[b] - series[a]))))
        else:
            diffs.append(math.nan)
    return diffs, blowups


def disk_regularity(members: int = 8, seed: int = 0, ladder: Sequence[int] = (20, 40, 80),
                    config: SdeConfig = DISK_RUN, workers: Optional[int] = None,
                    deterministic_ladder: bool = True) -> VerificationReport:
    """Gate on no blow-up at the configured n; the mode-doubling ladder is informational.

    The ladder reports ``max_t |(||u^(2n)||_{A^1/2} - ||u^(n)||_{A^1/2})|`` for
    successive doublings, with and without noise.
    """
    cfg = replace(config, seed=seed)
    trajs = run_ensemble(cfg, members, workers)
    blowups = sum(t.blew_up for t in trajs)
    diffs, ladder_blowups = _ladder(cfg, tuple(ladder), members, workers)
    details = {"blowups": blowups, "n": cfg.n, "ladder": list(ladder), "ladder_differences": diffs,
               "ladder_blowups": ladder_blowups,
               "ladder_decreasing": bool(np.all(np.diff(diffs) < 0)) if len(diffs) > 1 else True,
               "config_hash": cfg.config_hash()}
    if deterministic_ladder:
        det, _ = _ladder(replace(cfg, noise=False), tuple(ladder), 1, workers)
        details["deterministic_ladder_differences"] = det
        details["deterministic_ladder_decreasing"] = bool(np.all(np.diff(det) < 0)) if len(det) > 1 else True
    rows = [{"member": e, "seed": t.seed, "blew_up": t.blew_up, "sup_a_half": float(np.max(t.series(0.5))),
             "final_a_half": float(t.series(0.5)[-1])} for e, t in enumerate(trajs)]
    sup = float(max(r["sup_a_half"] for r in rows))
    return VerificationReport("disk-regularity", DISK_ANCHOR, "pass" if blowups == 0 else "fail", sup, members,
                              tuple(f"n={n}" for n in ladder), (seed,), 0.0, "", details, rows)
