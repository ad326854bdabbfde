import numpy as np
import pytest

from saltns.disk import DiskBasis
from saltns.io import OutputWriter, RunManifest, check_manifest
from saltns.operators import TF
from saltns.verify import SUITES, UnknownSuite, list_suites, resolve, write_bundle
from saltns.verify.explosion import CONTROL_FIELD, ConformingFieldError, explosion_demo
from saltns.verify.identities import commutation_residual
from saltns.verify.ratios import (ESTIMATES, TorusRatioContext, UnknownEstimate, estimate_ratio_study,
                                  ratio, sample_ratios)
from saltns.verify.report import VerificationReport, gate, ratio_csv, summary_csv


def make_report(**kw):
    base = dict(check_id="x", anchor="a = b", status="pass", value=1.5e-12, samples=3,
                resolutions=("r1", "r2"), seeds=(4,), tolerance=1e-9, details={"k": [1, 2]},
                table=[{"lhs": 1.0, "rhs": 2.0, "ratio": 0.5}])
    base.update(kw)
    return VerificationReport(**base)


def test_report_round_trip():
    r = make_report()
    back = VerificationReport.from_text(r.to_text())
    assert back == r


def test_report_requires_anchor_and_status():
    with pytest.raises(ValueError):
        make_report(anchor="")
    with pytest.raises(ValueError):
        make_report(status="maybe")


def test_gate_ignores_informational():
    reps = [make_report(), make_report(check_id="y", status="informational")]
    assert gate(reps)
    assert not gate(reps + [make_report(check_id="z", status="fail")])


def test_summary_and_ratio_csv():
    text = summary_csv([make_report(check_id="b"), make_report(check_id="a")])
    lines = text.splitlines()
    assert lines[0].startswith("check_id,status")
    assert lines[1].startswith("a,") and lines[2].startswith("b,")
    rows = [{"sample": 0, "phase": "fresh", "lhs": 1.0, "rhs": 4.0, "ratio": 0.25, "resolution": "r"}]
    assert ratio_csv(rows).splitlines()[1] == "0,fresh,1.0,4.0,0.25,r"


def test_ratio_helper():
    assert ratio(1.0, 4.0) == 0.25
    assert ratio(0.0, 0.0) == 0.0
    assert ratio(1.0, 0.0) == np.inf


@pytest.mark.parametrize("which", ["salt-energy-k0", "salt-energy-k1", "salt-martingale-k1", "salt-bound-k0"])
def test_zero_noise_field_gives_zero_ratio(which):
    ctx = TorusRatioContext(K=8, G=32)
    s = ctx.draw(np.random.default_rng(0))
    xi = s["xi"]
    s["xi"] = TF(np.zeros_like(xi.F), xi.band, xi.ndim)
    lhs, rhs = ESTIMATES[which].terms(ctx, s)
    assert lhs == 0.0 and rhs == 0.0
    assert ratio(lhs, rhs) == 0.0


def test_unknown_estimate():
    with pytest.raises(UnknownEstimate, match="known:"):
        estimate_ratio_study("nonexistent")


def test_ratio_samples_reproducible():
    est = ESTIMATES["salt-energy-k0"]
    ctx = TorusRatioContext(K=8, G=32)
    a = sample_ratios(est, ctx, 5, "fresh", 3)
    b = sample_ratios(est, ctx, 5, "fresh", 3)
    assert a == b
    assert all(r["ratio"] >= 0 for r in a)


def test_small_ratio_study_report_shape():
    rep = estimate_ratio_study("salt-martingale-k0", samples=4)
    assert rep.check_id == "ratio-salt-martingale-k0"
    assert rep.details["calibration_samples"] == 12
    phases = {r["phase"] for r in rep.table}
    assert phases == {"calibration", "fresh", "refined"}
    assert rep.label


def test_explosion_refuses_conforming_field():
    with pytest.raises(ConformingFieldError):
        explosion_demo((2, 4), CONTROL_FIELD, basis=DiskBasis(8, 8))


def test_explosion_control_is_informational_when_allowed():
    rep = explosion_demo((2, 4, 8), CONTROL_FIELD, growth_factor=2.0, basis=DiskBasis(8, 8), allow_conforming=True)
    assert rep.status == "informational"
    assert rep.details["l2_contraction"]


def test_commutation_residual_small(torus_ws):
    rng = np.random.default_rng(1)
    xi = torus_ws.random_field(rng, 2, solenoidal=True)
    f = torus_ws.random_field(rng, 3, solenoidal=True)
    for k in (1, 2):
        assert commutation_residual(torus_ws, xi, f, k) < 1e-8


def test_resolve_selectors():
    assert resolve(["all"]) == sorted(SUITES)
    assert resolve(["ratios", "identities", "ratios"]) == ["identities", "ratios"]
    with pytest.raises(UnknownSuite):
        resolve(["nope"])
    assert all(s.anchor for s in list_suites())


def test_bundle_files(tmp_path):
    reps = [make_report(check_id="ratio-demo",
                        table=[{"sample": 0, "phase": "fresh", "lhs": 1.0, "rhs": 2.0, "ratio": 0.5,
                                "resolution": "r"}]),
            make_report(check_id="plain", table=[])]
    with OutputWriter(tmp_path / "b", RunManifest("verify")) as w:
        write_bundle(w, reps)
    files = check_manifest(tmp_path / "b")
    assert all(files.values())
    assert {"summary.csv", "reports/ratio-demo.txt", "reports/plain.txt", "ratios/ratio-demo.csv"} <= set(files)
