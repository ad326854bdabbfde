"""Acceptance criteria, one test each, at the stated tolerances and runtime limits.

Every test appends one line to ``RESULTS``; the terminal summary hook in
``conftest.py`` prints them as a pass/fail table after the run.
"""
import time

import numpy as np
import pytest

from oracles import bessel_zero_bisection
from saltns.cli import main as cli_main
from saltns.config import shipped_config
from saltns.disk import DiskBasis
from saltns.io import MANIFEST_NAME, RunManifest
from saltns.sde import SdeConfig
from saltns.torus import TorusBasis
from saltns.verify import CRITERION_ESTIMATES
from saltns.verify.calibrate import CONVERSION_CONFIG
from saltns.verify.conversion import DEFAULT_DTS, SLOPE_BAND, conversion_study
from saltns.verify.explosion import calibration, explosion_pair
from saltns.verify.identities import TORUS_IDENTITIES, commutation_suite, identity_suite
from saltns.verify.ratios import DRIFT_LIMIT, FRESH_SLACK, ratio_suite
from saltns.verify.regularity import disk_regularity, torus_regularity

pytestmark = pytest.mark.acceptance

RESULTS = []

# lambda_1 from a mpmath power series and bisection, computed once and frozen
J01 = 2.404825557695773


def record(number, name, ok, summary):
    RESULTS.append((number, name, bool(ok), summary))
    assert ok, f"criterion {number} ({name}) failed: {summary}"


def failing(reports):
    return [f"{r.check_id}={r.value:.3g}>{r.tolerance:.0e}" for r in reports if r.status != "pass"]


def test_01_torus_identities():
    t0 = time.perf_counter()
    ids = [i for i in TORUS_IDENTITIES if not i.startswith("torus-commutation")]
    reports = identity_suite(TorusBasis(2, 8, 32), seed=0, only=ids)
    elapsed = time.perf_counter() - t0
    tail = next(r for r in reports if r.check_id == "torus-tail-bound")
    bad = failing(reports)
    ok = (len(reports) == len(ids) and not bad and all(r.value <= 1e-9 for r in reports if r is not tail)
          and tail.samples == 100 and elapsed <= 30)
    worst = max(r.value for r in reports if r is not tail)
    record(1, "torus identity suite", ok,
           f"{len(reports)} checks, worst residual {worst:.2e}, tail violations "
           f"{sum(v for k, v in tail.details.items() if k.startswith('violations'))}, {elapsed:.1f}s {bad}")


def test_02_disk_certification():
    t0 = time.perf_counter()
    ids = ["disk-eigen-residual", "disk-boundary-normal", "disk-boundary-curl", "disk-gram", "disk-first-eigenvalue"]
    basis = DiskBasis(6, 6)
    reports = identity_suite(basis, seed=0, only=ids)
    lam1_err = abs(basis.eigenvalues[0] - J01**2) / J01**2
    elapsed = time.perf_counter() - t0
    ok = not failing(reports) and len(reports) == len(ids) and lam1_err <= 1e-8 and elapsed <= 60
    record(2, "disk basis certification", ok,
           ", ".join(f"{r.check_id[5:]} {r.value:.1e}" for r in reports) + f", lambda_1 vs oracle {lam1_err:.1e}, "
           f"{elapsed:.1f}s")


def test_02_oracle_value_is_live():
    assert bessel_zero_bisection(0, 1) == pytest.approx(J01, abs=1e-14)


def test_03_disk_greens_identity():
    (rep,) = identity_suite(DiskBasis(6, 6), seed=0, only=["disk-greens-identity"],
                            samples={"disk-greens-identity": 50})
    ok = rep.status == "pass" and rep.samples == 50 and rep.value <= 1e-6
    record(3, "disk Green's identity", ok, f"worst residual {rep.value:.2e} over {rep.samples} pairs")


def test_04_ratio_studies():
    t0 = time.perf_counter()
    reports = ratio_suite(0, only=CRITERION_ESTIMATES)
    elapsed = time.perf_counter() - t0
    bad = []
    for r in reports:
        d = r.details
        fresh_ok = d["fresh_max"] <= d["calibrated_max"] + FRESH_SLACK * abs(d["calibrated_max"])
        if not (d["vanishes_to_rounding"] or (fresh_ok and d["drift"] <= DRIFT_LIMIT)):
            bad.append(f"{r.check_id}: fresh {d['fresh_max']:.3g} cal {d['calibrated_max']:.3g} drift {d['drift']:.2f}")
    ok = len(reports) == len(CRITERION_ESTIMATES) and not bad and elapsed <= 300
    worst_drift = max(r.details["drift"] for r in reports)
    record(4, "conservation inequality studies", ok,
           f"{len(reports)} studies, worst drift {worst_drift:.3f}, {elapsed:.0f}s {bad}")


def test_05_commutation():
    reports = commutation_suite(TorusBasis(2, 8, 32), samples=50, seed=0)
    ok = len(reports) == 2 and all(r.status == "pass" and r.value <= 1e-8 and r.samples == 50 for r in reports)
    record(5, "high-order commutation", ok, ", ".join(f"{r.check_id[6:]} {r.value:.1e}" for r in reports))


def test_06_conversion_study():
    t0 = time.perf_counter()
    cfg = SdeConfig(seed=3, **CONVERSION_CONFIG)
    rep = conversion_study(cfg, dts=DEFAULT_DTS, paths=16)
    elapsed = time.perf_counter() - t0
    d = rep.details
    assert d["noise_modes"] == 4 and [np.log2(x) for x in DEFAULT_DTS] == [-6, -7, -8, -9, -10]
    ok = (d["blowups"] == 0 and d["monotone"] and SLOPE_BAND[0] <= d["slope"] <= SLOPE_BAND[1]
          and elapsed <= 600)
    record(6, "Ito/Stratonovich conversion", ok,
           f"slope {d['slope']:.3f} (band {SLOPE_BAND}), monotone {d['monotone']}, EM order "
           f"{d.get('ito_em_order', float('nan')):.2f}, Heun order {d.get('strat_heun_order', float('nan')):.2f}, "
           f"{elapsed:.0f}s")


def test_07_explosion():
    rep = explosion_pair()
    v, c = rep.details["violating"], rep.details["control"]
    ok = (rep.status == "pass" and v["strictly_increasing"] and v["growth"] >= calibration()["explosion_growth_factor"]
          and c["flat_spread"] <= 0.01 and v["l2_contraction"] and c["l2_contraction"])
    record(7, "Galerkin explosion demo", ok,
           f"growth {v['growth']:.3f} >= {v['growth_factor']}, control spread {c['flat_spread']:.1e}")


def test_08_torus_regularity():
    rep = torus_regularity(members=8, seed=0)
    d = rep.details
    ok = rep.status == "pass" and d["blowups"] == 0 and rep.value <= d["a1_bound"]
    record(8, "torus SALT regularity", ok,
           f"sup A^1 {rep.value:.3f} <= {d['a1_bound']:.3f}, balance {d['balance_mean']:.2e} +- "
           f"{d['balance_stderr']:.2e}, blow-ups {d['blowups']}")


def test_09_disk_regularity():
    rep = disk_regularity(members=8, seed=0)
    d = rep.details
    ok = rep.status == "pass" and d["blowups"] == 0
    diffs = ", ".join(f"{x:.1e}" for x in d["ladder_differences"])
    det = ", ".join(f"{x:.1e}" for x in d["deterministic_ladder_differences"])
    record(9, "disk hyperdissipative run", ok,
           f"blow-ups {d['blowups']}; ladder (informational) [{diffs}] decreasing {d['ladder_decreasing']}, "
           f"noise-off [{det}]")


def _digests(directory):
    m = RunManifest.from_text((directory / MANIFEST_NAME).read_text())
    return m.files


def test_10_determinism(out_root, tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text(shipped_config())
    for name in ("s1", "s2"):
        assert cli_main(["simulate", str(ini), "--out", name, "--members", "2"]) == 0
    for name in ("v1", "v2"):
        assert cli_main(["verify", "identities", "disk-identities", "--seed", "5", "--out", name]) == 0
    sim = _digests(out_root / "s1")
    ver = _digests(out_root / "v1")
    ok = sim == _digests(out_root / "s2") and ver == _digests(out_root / "v2") and "summary.csv" in ver
    csvs = sum(k.endswith(".csv") for k in list(sim) + list(ver))
    record(10, "determinism", ok, f"{len(sim) + len(ver)} files ({csvs} CSV) byte-identical across repeats")
