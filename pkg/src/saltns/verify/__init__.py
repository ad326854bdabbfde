"""Certification harness: identity suites, ratio studies, explosion and conversion studies.

Suites are registered by id; :func:`run_suites` runs a selection and
returns reports merged in check-id order.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

from .report import (EVIDENCE_LABEL, STATUSES, VerificationReport, gate, ratio_csv, sort_reports,
                     summary_csv)

CRITERION_ESTIMATES = ("salt-energy-k0", "salt-energy-k1", "salt-martingale-k0", "salt-martingale-k1",
                       "projected-energy-m1", "projected-energy-m2", "projected-martingale-m1",
                       "projected-martingale-m2")


class UnknownSuite(KeyError):
    pass


@dataclass(frozen=True)
class Suite:
    suite_id: str
    anchor: str
    run: Callable[[int], List[VerificationReport]]
    geometry: str


def _torus_identities(seed):
    from ..torus import TorusBasis
    from .identities import TORUS_IDENTITIES, identity_suite

    only = [i for i in TORUS_IDENTITIES if not i.startswith("torus-commutation")]
    return identity_suite(TorusBasis(2, 8, 32), seed=seed, only=only)


def _disk_identities(seed):
    from ..disk import DiskBasis
    from .identities import identity_suite

    return identity_suite(DiskBasis(6, 6), seed=seed)


def _commutation(seed):
    from ..torus import TorusBasis
    from .identities import commutation_suite

    return commutation_suite(TorusBasis(2, 8, 32), samples=50, seed=seed)


def _ratios(seed):
    from .ratios import ratio_suite

    return ratio_suite(seed, only=CRITERION_ESTIMATES)


def _ratios_extended(seed):
    from .ratios import ESTIMATES, ratio_suite

    return ratio_suite(seed, only=[w for w in ESTIMATES if w not in CRITERION_ESTIMATES])


def _explosion(seed):
    from .explosion import explosion_pair

    return [explosion_pair()]


def _conversion(seed):
    from ..sde import SdeConfig
    from .calibrate import CONVERSION_CONFIG
    from .conversion import conversion_study

    return [conversion_study(SdeConfig(seed=seed, **CONVERSION_CONFIG), paths=16)]


def _torus_regularity(seed):
    from .regularity import torus_regularity

    return [torus_regularity(seed=seed, workers=1)]


def _disk_regularity(seed):
    from .regularity import disk_regularity

    return [disk_regularity(seed=seed, workers=1)]


SUITES: Dict[str, Suite] = {s.suite_id: s for s in (
    Suite("identities", "exact operator identities on the torus: curl P = curl, P B P = P B, "
          "curl B f = L_xi curl f, advection antisymmetry, A^s semigroup, tail bound", _torus_identities, "torus"),
    Suite("disk-identities", "disk eigenbasis: eigen-residual, free boundary conditions, orthonormality, "
          "lambda_1 = j_01^2, Green's identity with alpha = 2 kappa", _disk_identities, "disk"),
    Suite("commutation", "A^k P B f - P B A^k f = (-1)^k P sum_j Delta^{k-j} [Delta, B] Delta^{j-1} f",
          _commutation, "torus"),
    Suite("ratios", "conservation and projected noise estimates: sampled boundedness of LHS/RHS",
          _ratios, "torus"),
    Suite("ratios-extended", "SALT operator bounds, commutator, trilinear and trace inequalities",
          _ratios_extended, "torus+disk"),
    Suite("explosion", "Galerkin truncations of a boundary-violating field blow up in W^{2,2}",
          _explosion, "disk"),
    Suite("conversion", "Ito with corrector and Stratonovich forms agree as dt -> 0", _conversion, "torus"),
    Suite("torus-regularity", "A^1 norm of the SALT Galerkin system stays bounded; Ito energy balance",
          _torus_regularity, "torus"),
    Suite("disk-regularity", "hyperdissipative disk runs stay bounded; mode-doubling differences",
          _disk_regularity, "disk"),
)}


def list_suites() -> List[Suite]:
    return [SUITES[k] for k in sorted(SUITES)]


def resolve(selectors: Sequence[str]) -> List[str]:
    """Suite ids for the given selectors; ``all`` selects every suite."""
    out = []
    for sel in selectors:
        if sel == "all":
            out.extend(sorted(SUITES))
        elif sel in SUITES:
            out.append(sel)
        else:
            raise UnknownSuite(sel)
    return sorted(set(out))


def _run_one(args):
    suite_id, seed = args
    return SUITES[suite_id].run(seed)


def run_suites(selectors: Sequence[str], seed: int = 0, workers: int = 1) -> List[VerificationReport]:
    """Run the selected suites as independent jobs; reports come back sorted by check id."""
    ids = resolve(selectors)
    jobs = [(i, seed) for i in ids]
    if workers <= 1 or len(jobs) <= 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_one, jobs))
    return sort_reports([r for batch in results for r in batch])


def write_bundle(writer, reports: Sequence[VerificationReport]) -> None:
    """One text file per check, a ratio CSV where samples exist, and ``summary.csv``."""
    for r in sort_reports(reports):
        writer.write(f"reports/{r.check_id}.txt", r.to_text())
        if r.table and {"lhs", "rhs", "ratio"} <= set(r.table[0]):
            writer.write(f"ratios/{r.check_id}.csv", ratio_csv(r.table))
    writer.write("summary.csv", summary_csv(reports))


__all__ = ["EVIDENCE_LABEL", "STATUSES", "SUITES", "Suite", "UnknownSuite", "VerificationReport", "gate",
           "list_suites", "resolve", "run_suites", "sort_reports", "summary_csv", "write_bundle"]
