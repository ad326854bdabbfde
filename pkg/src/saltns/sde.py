"""Time integration of the n-mode Galerkin system.

In mode coordinates the equation reads::

    du = (-N(u) - nu lam^beta u + [C u]) dt - sum_i G_i u dW^i

where ``N`` is the projected advection, ``G_i`` the matrix of the projected
SALT operator and ``C = 1/2 sum_i G_i^2`` the Ito correction (present in
the Ito form only).  Euler-Maruyama discretises the Ito form and Heun the
Stratonovich form; both optionally treat the diagonal viscous part exactly
through the integrating factor ``exp(-nu lam^beta dt)``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .noise import BrownianPath, ensemble_seed, make_disk_xi, make_torus_xi, sample_path
from .operators import DiskWorkspace, GalerkinOperators, TorusWorkspace
from .spectral import NormReport, SpectralField, norm_report

log = logging.getLogger(__name__)

FORMS = ("ito", "stratonovich")
INTEGRATORS = ("euler-maruyama", "heun", "exponential-imex")
INITIAL_KINDS = ("single-mode", "random", "eigen-mixture")
BLOWUP_FACTOR = 1e6


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass(frozen=True)
class SdeConfig:
    geometry: str = "torus"
    # torus basis
    N: int = 2
    K: int = 8
    G: int = 0
    # disk basis: all modes up to the first ``disk_modes`` are tabulated
    disk_modes: int = 40
    n: int = 0
    nu: float = 0.05
    beta: int = 1
    m: int = 2
    form: str = "ito"
    integrator: str = "exponential-imex"
    dt: float = 1.0 / 128
    T: float = 1.0
    xi_M: int = 4
    xi_p: float = 5.0
    xi_amplitude: float = 0.5
    xi_support: float = 0.8
    xi_seed: int = 0
    initial: str = "random"
    initial_index: int = 1
    initial_amplitude: float = 1.0
    initial_modes: Tuple[Tuple[int, float], ...] = ()
    record_s: Tuple[float, ...] = (0.5, 1.0)
    record_stride: int = 1
    snapshot_stride: int = 0
    seed: int = 0
    nonlinear: bool = True
    noise: bool = True
    fail_on_blowup: bool = False

    def __post_init__(self):
        if self.geometry not in ("torus", "disk"):
            raise ConfigError("geometry", f"expected one of torus, disk; got {self.geometry!r}")
        if not (isinstance(self.dt, (int, float)) and self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("dt", f"must be a positive number, got {self.dt!r}")
        if not self.T >= 0:
            raise ConfigError("T", "must be nonnegative")
        if 0 < self.T < self.dt:
            raise ConfigError("T", f"horizon T={self.T} shorter than dt={self.dt}")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError("T", f"T={self.T} is not a whole number of steps dt={self.dt}")
        if not self.nu > 0:
            raise ConfigError("nu", "viscosity must be positive")
        if int(self.beta) != self.beta or self.beta < 1:
            raise ConfigError("beta", "hyperdissipation exponent must be a positive integer")
        if self.form not in FORMS:
            raise ConfigError("form", f"expected one of {', '.join(FORMS)}; got {self.form!r}")
        if self.integrator not in INTEGRATORS:
            raise ConfigError("integrator", f"expected one of {', '.join(INTEGRATORS)}; got {self.integrator!r}")
        if self.initial not in INITIAL_KINDS:
            raise ConfigError("initial", f"expected one of {', '.join(INITIAL_KINDS)}; got {self.initial!r}")
        if len(self.record_s) == 0:
            raise ConfigError("record_s", "recording set must be nonempty")
        if any(s < 0 for s in self.record_s):
            raise ConfigError("record_s", "Sobolev indices must be nonnegative")
        if self.record_stride < 1:
            raise ConfigError("record_stride", "must be at least 1")
        if self.xi_M < 0:
            raise ConfigError("xi_M", "must be nonnegative")
        if self.geometry == "torus" and self.K < 1:
            raise ConfigError("K", "must be at least 1")
        if self.geometry == "disk" and not 0 < self.xi_support < 1:
            raise ConfigError("xi_support", "must lie in (0, 1)")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def grid(self) -> int:
        return self.G or 4 * self.K

    def to_dict(self) -> dict:
        d = asdict(self)
        d["initial_modes"] = [list(p) for p in self.initial_modes]
        d["record_s"] = list(self.record_s)
        return d

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def system_key(self) -> tuple:
        return (self.geometry, self.N, self.K, self.grid, self.disk_modes, self.n, self.xi_M, self.xi_p,
                self.xi_amplitude, self.xi_support, self.xi_seed, self.m)


# ----------------------------------------------------------------------------

@dataclass
class GalerkinSetup:
    basis: object
    workspace: object
    xi: object
    ops: GalerkinOperators

    @property
    def n(self) -> int:
        return self.ops.n


_SETUPS: Dict[tuple, GalerkinSetup] = {}


def build_setup(config: SdeConfig) -> GalerkinSetup:
    """Basis, noise family and Galerkin matrices for ``config`` (cached per process)."""
    key = config.system_key()
    if key in _SETUPS:
        return _SETUPS[key]
    if config.geometry == "torus":
        from .torus import build_torus_basis

        basis = build_torus_basis(config.N, config.K, config.grid)
        xi = make_torus_xi(basis, config.xi_M, config.xi_p, config.xi_seed, config.xi_amplitude, config.m) \
            if config.xi_M else None
        ws = TorusWorkspace(basis, xi)
    else:
        from .disk import basis_for_modes

        basis = basis_for_modes(max(config.disk_modes, config.n))
        xi = make_disk_xi(basis, config.xi_M, config.xi_support, config.xi_seed, config.xi_amplitude,
                          m=config.m) if config.xi_M else None
        ws = DiskWorkspace(basis, xi, order=1)
    n = config.n or (basis.size if config.geometry == "torus" else config.disk_modes)
    if n > basis.size:
        raise ConfigError("n", f"truncation {n} exceeds the {basis.size} tabulated modes")
    if xi is not None:
        ops = ws.galerkin_system(n)
    else:
        ops = GalerkinOperators(np.asarray(basis.eigenvalues[:n]), np.zeros((0, n, n)), ws.nonlinear_coeffs)
    setup = GalerkinSetup(basis, ws, xi, ops)
    _SETUPS[key] = setup
    return setup


def initial_condition(config: SdeConfig, setup: GalerkinSetup) -> np.ndarray:
    n = setup.n
    lam = setup.ops.eigenvalues
    c = np.zeros(n)
    if config.initial == "single-mode":
        if not 1 <= config.initial_index <= n:
            raise ConfigError("initial_index", f"must lie in 1..{n}")
        c[config.initial_index - 1] = config.initial_amplitude
    elif config.initial == "eigen-mixture":
        if not config.initial_modes:
            raise ConfigError("initial_modes", "eigen-mixture needs at least one (index, coefficient) pair")
        for k, v in config.initial_modes:
            if not 1 <= k <= n:
                raise ConfigError("initial_modes", f"index {k} outside 1..{n}")
            c[k - 1] += v
    else:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed, spawn_key=(0x1C,))))
        c = rng.standard_normal(n) * lam ** (-(config.m + 1) / 2.0)
        c *= config.initial_amplitude / np.linalg.norm(c)
    return c


# steps -----------------------------------------------------------------------

def _factor(config: SdeConfig, lam: np.ndarray) -> np.ndarray:
    return np.exp(-config.nu * lam**config.beta * config.dt)


def _explicit_part(u, ops: GalerkinOperators, config: SdeConfig, linear: bool) -> np.ndarray:
    """Drift without (``linear=False``) or with the viscous term."""
    out = -ops.nonlinear(u) if config.nonlinear else np.zeros_like(u)
    if config.form == "ito" and ops.M and config.noise:
        out = out + ops.C @ u
    if linear:
        out = out - config.nu * ops.eigenvalues**config.beta * u
    return out


def drift_coeffs(u: np.ndarray, ops: GalerkinOperators, config: SdeConfig) -> np.ndarray:
    return _explicit_part(u, ops, config, True)


def _noise(u, dW, ops: GalerkinOperators, config: SdeConfig):
    if not config.noise or ops.M == 0:
        return np.zeros_like(u)
    return -ops.noise_columns(u) @ dW


def step_em(u: np.ndarray, dW: np.ndarray, ops: GalerkinOperators, config: SdeConfig) -> np.ndarray:
    """One Euler-Maruyama step (integrating factor for ``exponential-imex``)."""
    if config.integrator == "exponential-imex":
        E = _factor(config, ops.eigenvalues)
        return E * (u + config.dt * _explicit_part(u, ops, config, False) + _noise(u, dW, ops, config))
    return u + config.dt * drift_coeffs(u, ops, config) + _noise(u, dW, ops, config)


def step_heun(u: np.ndarray, dW: np.ndarray, ops: GalerkinOperators, config: SdeConfig) -> np.ndarray:
    """Stochastic Heun step with the viscous part integrated exactly.

    In integrating-factor variables this is the trapezoidal predictor-corrector;
    noise coefficients are averaged at both ends, which targets the
    Stratonovich interpretation.
    """
    E = _factor(config, ops.eigenvalues)
    k1 = config.dt * _explicit_part(u, ops, config, False) + _noise(u, dW, ops, config)
    pred = E * (u + k1)
    k2 = config.dt * _explicit_part(pred, ops, config, False) + _noise(pred, dW, ops, config)
    return E * (u + 0.5 * k1) + 0.5 * k2


def step(u, dW, ops, config):
    if config.integrator == "heun":
        return step_heun(u, dW, ops, config)
    return step_em(u, dW, ops, config)


# field-level wrappers ------------------------------------------------------------

def drift(u: SpectralField, config: SdeConfig, setup: Optional[GalerkinSetup] = None) -> SpectralField:
    setup = setup or build_setup(config)
    return u.with_coeffs(drift_coeffs(u.coeffs, setup.ops, config))


def step_em_ito(u: SpectralField, increments, config: SdeConfig, setup: Optional[GalerkinSetup] = None) -> SpectralField:
    setup = setup or build_setup(config)
    cfg = config if config.integrator != "heun" else replace(config, integrator="euler-maruyama")
    cfg = replace(cfg, form="ito")
    out = step_em(u.coeffs, _increments(increments, setup), setup.ops, cfg)
    return _checked(u, out)


def step_heun_strat(u: SpectralField, increments, config: SdeConfig, setup: Optional[GalerkinSetup] = None) -> SpectralField:
    setup = setup or build_setup(config)
    cfg = replace(config, integrator="heun", form="stratonovich")
    out = step_heun(u.coeffs, _increments(increments, setup), setup.ops, cfg)
    return _checked(u, out)


def _increments(increments, setup) -> np.ndarray:
    dW = np.asarray(increments, dtype=float).reshape(-1)
    if dW.size != setup.ops.M:
        raise ValueError(f"expected {setup.ops.M} increments, got {dW.size}")
    return dW


class BlowUp(FloatingPointError):
    pass


def _checked(u: SpectralField, out: np.ndarray) -> SpectralField:
    if not np.all(np.isfinite(out)):
        raise BlowUp("non-finite coefficients after step")
    return u.with_coeffs(out)


# trajectories -------------------------------------------------------------------

@dataclass
class Trajectory:
    times: List[float]
    reports: List[NormReport]
    config_hash: str
    seed: int
    events: List[dict] = field(default_factory=list)
    snapshots: List[Tuple[float, np.ndarray]] = field(default_factory=list)
    balance: Dict[str, float] = field(default_factory=dict)
    final: Optional[np.ndarray] = None
    record_s: Tuple[float, ...] = ()

    @property
    def blew_up(self) -> bool:
        return any(e["kind"] == "blow-up" for e in self.events)

    def series(self, s: Optional[float] = None) -> np.ndarray:
        if s is None:
            return np.array([r.l2 for r in self.reports])
        return np.array([r.as_norms[float(s)] for r in self.reports])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "l2"] + [f"A^{s:g}" for s in self.record_s])
        for t, r in zip(self.times, self.reports):
            w.writerow([repr(float(t)), repr(float(r.l2))] + [repr(float(r.as_norms[float(s)])) for s in self.record_s])
        return buf.getvalue()


def _report(u: np.ndarray, lam: np.ndarray, record_s) -> NormReport:
    return NormReport(
        l2=float(np.sqrt(u @ u)),
        as_norms={float(s): float(np.sqrt(np.sum(lam ** (2.0 * s) * u * u))) for s in record_s},
    )


def run(config: SdeConfig, path: Optional[BrownianPath] = None, setup: Optional[GalerkinSetup] = None,
        u0: Optional[np.ndarray] = None) -> Trajectory:
    """Integrate one path; deterministic given the config and path."""
    setup = setup or build_setup(config)
    ops = setup.ops
    lam = ops.eigenvalues
    steps = config.steps
    if path is None:
        path = sample_path(ops.M, config.dt, steps, config.seed)
    if path.steps < steps or path.M != ops.M or abs(path.dt - config.dt) > 1e-15 * config.dt:
        raise ValueError("Brownian path does not match the configuration")
    u = initial_condition(config, setup) if u0 is None else np.array(u0, dtype=float)
    traj = Trajectory([0.0], [_report(u, lam, config.record_s)], config.config_hash(), path.seed,
                      record_s=tuple(config.record_s))
    if config.snapshot_stride:
        traj.snapshots.append((0.0, u.copy()))
    norm0 = max(float(np.linalg.norm(u)), 1e-300)
    u_start = u.copy()
    diss = 0.0
    noise_int = 0.0
    lam_beta = lam**config.beta
    for s in range(steps):
        # left-point integrals of the Ito energy balance
        diss += config.dt * float(np.sum(lam_beta * u * u))
        if ops.M and config.noise:
            cols = ops.noise_columns(u)
            noise_int += config.dt * (2.0 * float(u @ (ops.C @ u)) + float(np.sum(cols * cols)))
        u = step(u, path.increments[s], ops, config)
        t = (s + 1) * config.dt
        nrm = float(np.linalg.norm(u)) if np.all(np.isfinite(u)) else math.inf
        if not math.isfinite(nrm) or nrm > BLOWUP_FACTOR * norm0:
            traj.events.append({"kind": "blow-up", "step": s + 1, "t": t, "norm": nrm})
            log.warning("blow-up at t=%g (|u|=%g)", t, nrm)
            break
        if (s + 1) % config.record_stride == 0 or s + 1 == steps:
            traj.times.append(t)
            traj.reports.append(_report(u, lam, config.record_s))
        if config.snapshot_stride and (s + 1) % config.snapshot_stride == 0:
            traj.snapshots.append((t, u.copy()))
    traj.final = u
    if not traj.blew_up:
        e0 = float(u_start @ u_start)
        eT = float(u @ u)
        traj.balance = {
            "energy_change": eT - e0,
            "dissipation": 2.0 * config.nu * diss,
            "noise_input": noise_int,
            "residual": eT - e0 + 2.0 * config.nu * diss - noise_int,
        }
    return traj


def _run_member(args):
    config, member = args
    seed = ensemble_seed(config.seed, member)
    setup = build_setup(config)
    path = sample_path(setup.ops.M, config.dt, config.steps, seed)
    return run(config, path, setup)


def run_ensemble(config: SdeConfig, members: int, workers: Optional[int] = None) -> List[Trajectory]:
    """Independent paths with seeds split from ``config.seed``; results in member order."""
    workers = workers or os.cpu_count() or 1
    jobs = [(config, e) for e in range(members)]
    if workers <= 1 or members <= 1:
        return [_run_member(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, members)) as pool:
        return list(pool.map(_run_member, jobs))


def balance_statistics(trajs: Sequence[Trajectory]) -> dict:
    """Ensemble mean of the Ito balance residual and its Monte-Carlo standard error."""
    r = np.array([t.balance["residual"] for t in trajs if t.balance])
    if r.size < 2:
        return {"mean": float(r.mean()) if r.size else math.nan, "stderr": math.inf, "count": int(r.size)}
    return {"mean": float(r.mean()), "stderr": float(r.std(ddof=1) / math.sqrt(r.size)), "count": int(r.size)}
