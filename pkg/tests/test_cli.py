import csv
import hashlib

import pytest

from saltns.cli import main
from saltns.config import shipped_config
from saltns.io import MANIFEST_NAME, RunManifest, check_manifest


@pytest.fixture
def minimal_ini(tmp_path):
    p = tmp_path / "minimal.ini"
    p.write_text(shipped_config())
    return p


def digests(directory):
    m = RunManifest.from_text((directory / MANIFEST_NAME).read_text())
    return m.files


def test_simulate_smoke(out_root, minimal_ini, capsys):
    assert main(["simulate", str(minimal_ini), "--out", "run"]) == 0
    run = out_root / "run"
    with open(run / "trajectories" / "member-0000.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "l2", "A^0.5", "A^1"]
    assert float(rows[-1][0]) == pytest.approx(0.25)
    assert all(check_manifest(run).values())
    assert "config.ini" in digests(run)


def test_simulate_deterministic(out_root, minimal_ini):
    main(["simulate", str(minimal_ini), "--out", "a", "--members", "2", "--workers", "1"])
    main(["simulate", str(minimal_ini), "--out", "b", "--members", "2", "--workers", "1"])
    assert digests(out_root / "a") == digests(out_root / "b")


def test_manifest_echo_reproduces(out_root, minimal_ini, tmp_path):
    main(["simulate", str(minimal_ini), "--out", "a"])
    echo = RunManifest.from_text((out_root / "a" / MANIFEST_NAME).read_text()).config_echo
    again = tmp_path / "echo.ini"
    again.write_text(echo)
    main(["simulate", str(again), "--out", "b"])
    assert digests(out_root / "a") == digests(out_root / "b")


def test_simulate_bad_dt(out_root, tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[dynamics]\ndt = 0\n")
    assert main(["simulate", str(bad)]) == 2
    assert "dynamics.dt" in capsys.readouterr().err


def test_fail_on_blowup(out_root, tmp_path):
    ini = tmp_path / "blow.ini"
    body = ("[basis]\nK = 4\n[dynamics]\nnu = 10\ndt = 0.125\nT = 4\nintegrator = euler-maruyama\n"
            "[noise]\nenabled = false\n[run]\nseed = 1\n")
    ini.write_text(body + "[output]\nfail_on_blowup = true\n")
    assert main(["simulate", str(ini), "--out", "x"]) == 1
    ini.write_text(body)
    assert main(["simulate", str(ini), "--out", "y"]) == 0


def test_snapshots_are_binary_fields(out_root, tmp_path):
    from saltns.spectral import from_bytes

    ini = tmp_path / "snap.ini"
    ini.write_text("[basis]\nK = 3\n[dynamics]\ndt = 0.125\nT = 0.25\n[output]\nsnapshot_stride = 1\n[run]\nseed = 4\n")
    assert main(["simulate", str(ini), "--out", "s"]) == 0
    files = sorted((out_root / "s" / "snapshots").iterdir())
    assert len(files) == 3
    assert from_bytes(files[0].read_bytes()).basis_id.startswith("torus2d-K3")


def test_verify_list(capsys):
    assert main(["verify", "--list"]) == 0
    out = capsys.readouterr().out.splitlines()
    ids = [line.split("\t")[0] for line in out]
    assert "identities" in ids and "ratios" in ids and "explosion" in ids
    assert all(len(line.split("\t")) == 3 and line.split("\t")[2] for line in out)


def test_verify_unknown_selector(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "unknown"])
    assert exc.value.code == 2
    err = capsys.readouterr().err
    assert "unknown suite 'unknown'" in err and "identities" in err


def test_verify_identities_exit_zero(out_root, capsys):
    assert main(["verify", "identities", "--out", "v"]) == 0
    bundle = out_root / "v"
    assert (bundle / "summary.csv").exists()
    assert (bundle / "reports" / "torus-curl-leray.txt").exists()
    assert all(check_manifest(bundle).values())


def test_basis_dump(out_root):
    assert main(["basis-dump", "disk", "--n-max", "2", "--m-max", "2", "--out", "d"]) == 0
    lines = (out_root / "d" / "modes.csv").read_text().splitlines()
    assert lines[0].startswith("k,n,branch") and len(lines) == 1 + 10
    assert main(["basis-dump", "torus", "--K", "3", "--out", "t"]) == 0


def test_convert_study_rejects_irregular_dts(out_root, capsys):
    assert main(["convert-study", "--dt-powers", "3", "5", "--paths", "1"]) == 2
