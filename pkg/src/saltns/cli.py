"""Command-line entry points: simulate, verify, explode, convert-study, basis-dump, calibrate."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

from . import __version__
from .config import load_config
from .io import OutputWriter, RunManifest, resolve_output, sha256
from .sde import ConfigError

log = logging.getLogger("saltns")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _basis_hash(basis) -> dict:
    m = basis.manifest()
    return {m["basis_id"]: m["mode_table_hash"]}


def _workers(n: int) -> int:
    return n or os.cpu_count() or 1


# simulate ---------------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .noise import ensemble_seed
    from .sde import build_setup, run_ensemble
    from .spectral import SpectralField, to_bytes

    rc = load_config(args.config, seed=args.seed)
    cfg = rc.sde
    members = args.members or rc.members
    workers = _workers(args.workers if args.workers is not None else rc.workers)
    if rc.seed_generated:
        log.info("no seed given; generated master seed %d", cfg.seed)
    setup = build_setup(cfg)
    out = resolve_output(args.out, f"saltns-out/simulate-{cfg.config_hash()[:12]}")
    seeds = [ensemble_seed(cfg.seed, e) for e in range(members)]
    manifest = RunManifest("simulate", rc.to_ini(), [cfg.seed] + seeds, _basis_hash(setup.basis),
                           setup.xi.stamp if setup.xi is not None else "")
    manifest.extra["config_hash"] = cfg.config_hash()
    trajs = run_ensemble(cfg, members, workers)
    with OutputWriter(out, manifest) as w:
        w.write("config.ini", rc.to_ini())
        if setup.xi is not None:
            w.write("xi.csv", setup.xi.manifest_csv())
        for e, t in enumerate(trajs):
            w.write(f"trajectories/member-{e:04d}.csv", t.to_csv())
            for time, c in t.snapshots:
                step = int(round(time / cfg.dt))
                w.write(f"snapshots/member-{e:04d}-step-{step:08d}.bin",
                        to_bytes(SpectralField(setup.basis.basis_id, c)))
        keys = ["energy_change", "dissipation", "noise_input", "residual"]
        w.write("balance.csv", _csv(["member", "seed", "blew_up"] + keys,
                                    [[e, t.seed, int(t.blew_up)] + [repr(float(t.balance.get(k, float("nan"))))
                                                                     for k in keys] for e, t in enumerate(trajs)]))
        w.write("events.csv", _csv(["member", "kind", "step", "t", "norm"],
                                   [[e, ev["kind"], ev["step"], repr(float(ev["t"])), repr(float(ev["norm"]))]
                                    for e, t in enumerate(trajs) for ev in t.events]))
    blowups = sum(t.blew_up for t in trajs)
    print(f"simulate: {members} member(s), {blowups} blow-up(s), output {out}")
    if blowups and cfg.fail_on_blowup:
        return EXIT_FAIL
    return EXIT_OK


# verify -----------------------------------------------------------------------

def _finish_reports(name: str, reports, out, seeds, extra=None) -> int:
    from .verify import gate, write_bundle

    manifest = RunManifest(name, seeds=list(seeds))
    manifest.extra.update(extra or {})
    with OutputWriter(out, manifest) as w:
        write_bundle(w, reports)
    for r in reports:
        print(f"{r.status:>13}  {r.check_id}  value={r.value:.6g}  tolerance={r.tolerance:.6g}")
    ok = gate(reports)
    print(f"{name}: {'all gating checks passed' if ok else 'gating failure'}; bundle {out}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args, parser) -> int:
    from .verify import UnknownSuite, list_suites, resolve, run_suites

    if args.list:
        for s in list_suites():
            print(f"{s.suite_id}\t{s.geometry}\t{s.anchor}")
        return EXIT_OK
    selectors = args.selectors or ["identities"]
    try:
        ids = resolve(selectors)
    except UnknownSuite as exc:
        names = ", ".join(s.suite_id for s in list_suites())
        parser.error(f"unknown suite {exc.args[0]!r}; registered suites: {names}, all")
        return EXIT_USAGE
    reports = run_suites(ids, seed=args.seed, workers=_workers(args.workers))
    out = resolve_output(args.out, f"saltns-out/verify-{'-'.join(ids)}")
    return _finish_reports("verify", reports, out, [args.seed], {"suites": " ".join(ids)})


def cmd_explode(args) -> int:
    from .verify.explosion import explosion_pair

    rep = explosion_pair(args.n, args.growth_factor)
    out = resolve_output(args.out, "saltns-out/explode")
    from .verify import gate, write_bundle

    manifest = RunManifest("explode")
    rows = [[r["field"], r["n"], repr(float(r["l2"])), repr(float(r["w22"]))] for r in rep.table]
    with OutputWriter(out, manifest) as w:
        write_bundle(w, [rep])
        w.write("explosion.csv", _csv(["field", "n", "l2", "w22"], rows))
    for row in rows:
        print("  ".join(str(x) for x in row))
    print(f"explode: {rep.status} (growth {rep.value:.4g}, factor {rep.tolerance:.4g}); output {out}")
    return EXIT_OK if gate([rep]) else EXIT_FAIL


def cmd_convert(args) -> int:
    from .sde import SdeConfig
    from .verify.calibrate import CONVERSION_CONFIG
    from .verify.conversion import DEFAULT_DTS, conversion_study

    if args.config:
        rc = load_config(args.config, seed=args.seed)
        cfg, seeds = rc.sde, [rc.sde.seed]
    else:
        cfg = SdeConfig(seed=args.seed or 0, **CONVERSION_CONFIG)
        seeds = [cfg.seed]
    dts = [2.0**-k for k in args.dt_powers] if args.dt_powers else list(DEFAULT_DTS)
    try:
        rep = conversion_study(cfg, dts, paths=args.paths)
    except ValueError as exc:
        raise ConfigError("dt", str(exc)) from None
    out = resolve_output(args.out, f"saltns-out/convert-{cfg.config_hash()[:12]}")
    keys = list(rep.table[0])
    rows = [[repr(float(r[k])) for k in keys] for r in rep.table]
    manifest = RunManifest("convert-study", seeds=seeds)
    manifest.extra["config_hash"] = cfg.config_hash()
    from .verify import gate, write_bundle

    with OutputWriter(out, manifest) as w:
        write_bundle(w, [rep])
        w.write("conversion.csv", _csv(keys, rows))
    d = rep.details
    print(f"convert-study: {rep.status}; slope {d['slope']:.4g} (band {d['slope_band']}), "
          f"monotone {d['monotone']}; output {out}")
    return EXIT_OK if gate([rep]) else EXIT_FAIL


def cmd_basis_dump(args) -> int:
    if args.geometry == "torus":
        from .torus import TorusBasis

        basis = TorusBasis(args.N, args.K, args.G or 4 * args.K)
    else:
        from .disk import DiskBasis, basis_for_modes

        basis = basis_for_modes(args.modes) if args.modes else DiskBasis(args.n_max, args.m_max)
    out = resolve_output(args.out, f"saltns-out/basis-{basis.basis_id}")
    m = basis.manifest()
    with OutputWriter(out, RunManifest("basis-dump", basis_hashes=_basis_hash(basis))) as w:
        w.write("modes.csv", basis.export_table_csv())
        w.write("basis.txt", "".join(f"{k}: {v}\n" for k, v in m.items()))
    print(f"basis-dump: {basis.basis_id}, {basis.size} modes; output {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    from .verify.calibrate import derive, to_json

    values = derive(workers=_workers(args.workers), conversion=not args.skip_conversion)
    text = to_json(values)
    out = resolve_output(args.out, "saltns-out/calibrate")
    with OutputWriter(out, RunManifest("calibrate")) as w:
        w.write("calibration.json", text)
    print(text, end="")
    print(f"calibrate: output {out} (sha256 {sha256(text.encode())[:16]})")
    return EXIT_OK


# parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="saltns", description=__doc__)
    p.add_argument("--version", action="version", version=f"saltns {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate an ensemble described by an INI config")
    s.add_argument("config")
    s.add_argument("--out")
    s.add_argument("--seed", type=int, help="override the master seed")
    s.add_argument("--members", type=int)
    s.add_argument("--workers", type=int)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("selectors", nargs="*", help="suite ids, or 'all' (default: identities)")
    v.add_argument("--list", action="store_true", help="print registered suites with anchors")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--out")

    e = sub.add_parser("explode", help="Galerkin truncation blow-up demo on the disk")
    e.add_argument("--n", type=int, nargs="+", default=[4, 16, 64, 256])
    e.add_argument("--growth-factor", type=float)
    e.add_argument("--out")

    c = sub.add_parser("convert-study", help="Ito/Stratonovich strong difference against dt")
    c.add_argument("config", nargs="?")
    c.add_argument("--dt-powers", type=int, nargs="+", help="dt = 2^-p for each p (consecutive)")
    c.add_argument("--paths", type=int, default=16)
    c.add_argument("--seed", type=int)
    c.add_argument("--out")

    b = sub.add_parser("basis-dump", help="write the eigenpair table of a basis")
    b.add_argument("geometry", choices=["torus", "disk"])
    b.add_argument("--N", type=int, default=2)
    b.add_argument("--K", type=int, default=8)
    b.add_argument("--G", type=int, default=0)
    b.add_argument("--n-max", type=int, default=6)
    b.add_argument("--m-max", type=int, default=6)
    b.add_argument("--modes", type=int, default=0, help="disk: smallest table holding this many modes")
    b.add_argument("--out")

    k = sub.add_parser("calibrate", help="re-derive the shipped thresholds")
    k.add_argument("--skip-conversion", action="store_true")
    k.add_argument("--workers", type=int, default=1)
    k.add_argument("--out")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "verify":
            return cmd_verify(args, parser)
        if args.command == "explode":
            return cmd_explode(args)
        if args.command == "convert-study":
            return cmd_convert(args)
        if args.command == "basis-dump":
            return cmd_basis_dump(args)
        return cmd_calibrate(args)
    except ConfigError as exc:
        print(f"saltns: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
