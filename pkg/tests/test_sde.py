import math
from dataclasses import replace

import numpy as np
import pytest

import oracles
from saltns.noise import ensemble_seed, sample_path
from saltns.sde import (BlowUp, ConfigError, SdeConfig, balance_statistics, build_setup, initial_condition, run,
                        run_ensemble, step_em_ito, step_heun_strat)
from saltns.spectral import SpectralField
from saltns.verify.conversion import path_family, scalar_conversion_study

SMALL = SdeConfig(geometry="torus", K=4, nu=0.1, dt=1 / 64, T=0.25, xi_M=2, xi_amplitude=0.5, seed=3)


@pytest.mark.parametrize("kw,key", [
    ({"dt": 0.0}, "dt"), ({"dt": -1.0}, "dt"), ({"T": 0.3, "dt": 0.25}, "T"), ({"nu": 0.0}, "nu"),
    ({"form": "weird"}, "form"), ({"integrator": "rk4"}, "integrator"), ({"beta": 0}, "beta"),
    ({"geometry": "sphere"}, "geometry"),
])
def test_config_validation_names_key(kw, key):
    with pytest.raises(ConfigError) as exc:
        SdeConfig(**kw)
    assert exc.value.key == key


@pytest.mark.parametrize("integrator", ["exponential-imex", "euler-maruyama"])
def test_linear_decay_closed_form(integrator):
    cfg = replace(SMALL, noise=False, nonlinear=False, integrator=integrator, initial="random")
    tr = run(cfg)
    setup = build_setup(cfg)
    u0 = initial_condition(cfg, setup)
    lam = setup.ops.eigenvalues
    if integrator == "exponential-imex":
        expect = np.exp(-cfg.nu * lam * cfg.T) * u0
    else:
        expect = (1 - cfg.nu * lam * cfg.dt) ** cfg.steps * u0
    np.testing.assert_allclose(tr.final, expect, rtol=1e-12, atol=1e-15)


def test_energy_identity_without_noise():
    # d|u|^2 = -2 nu |A^1/2 u|^2 dt: left-point balance residual is O(dt)
    cfg = replace(SMALL, noise=False, integrator="exponential-imex")
    r1 = abs(run(cfg).balance["residual"])
    r2 = abs(run(replace(cfg, dt=cfg.dt / 2)).balance["residual"])
    assert r2 < 0.6 * r1


def test_runs_are_deterministic():
    a, b = run(SMALL), run(SMALL)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "t,l2,A^0.5,A^1"


def test_ensemble_independent_of_workers():
    one = run_ensemble(SMALL, 3, workers=1)
    two = run_ensemble(SMALL, 3, workers=2)
    assert [t.to_csv() for t in one] == [t.to_csv() for t in two]
    assert [t.seed for t in one] == [ensemble_seed(SMALL.seed, e) for e in range(3)]


def test_path_mismatch_rejected():
    with pytest.raises(ValueError):
        run(SMALL, sample_path(5, SMALL.dt, SMALL.steps, 0))


def test_blow_up_recorded():
    cfg = replace(SMALL, integrator="euler-maruyama", nu=10.0, dt=0.125, T=4.0, noise=False)
    tr = run(cfg)
    assert tr.blew_up and tr.events[0]["kind"] == "blow-up"


def test_field_steps_agree_with_run():
    cfg = replace(SMALL, integrator="heun", form="stratonovich", T=SMALL.dt)
    setup = build_setup(cfg)
    path = sample_path(setup.ops.M, cfg.dt, 1, cfg.seed)
    u0 = SpectralField(setup.basis.basis_id, initial_condition(cfg, setup))
    np.testing.assert_array_equal(step_heun_strat(u0, path.increments[0], cfg).coeffs, run(cfg, path).final)
    cfg_em = replace(cfg, integrator="exponential-imex", form="ito")
    np.testing.assert_array_equal(step_em_ito(u0, path.increments[0], cfg_em).coeffs, run(cfg_em, path).final)
    with pytest.raises(ValueError):
        step_em_ito(u0, [0.0], cfg_em)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_step_rejects_nonfinite():
    cfg = replace(SMALL, integrator="euler-maruyama")
    setup = build_setup(cfg)
    u0 = SpectralField(setup.basis.basis_id, np.full(setup.n, 1e300))
    with pytest.raises(BlowUp):
        step_em_ito(u0, np.full(setup.ops.M, 1e10), cfg)


def test_ito_balance_unbiased():
    trajs = run_ensemble(replace(SMALL, T=0.5, dt=1 / 128), 24, workers=1)
    st = balance_statistics(trajs)
    assert abs(st["mean"]) <= 3 * st["stderr"]


def test_disk_smoke():
    cfg = SdeConfig(geometry="disk", disk_modes=10, n=10, dt=1 / 64, T=1 / 16, xi_M=2, nu=0.1, seed=1)
    tr = run(cfg)
    assert not tr.blew_up and len(tr.times) == cfg.steps + 1


def test_gbm_orders_against_closed_form():
    out = scalar_conversion_study(paths=128, seed=1)
    # strong orders from the closed-form reference
    assert 0.35 <= out["ito_em_order"] <= 0.65
    assert 0.85 <= out["strat_heun_order"] <= 1.15
    # so the Ito/Stratonovich scheme difference inherits EM's half order
    assert 0.35 <= out["slope"] <= 0.65


def test_path_family_shares_brownian_endpoint():
    fam = path_family(1, [2.0**-4, 2.0**-5, 2.0**-6], 1.0, 5)
    ends = {float(np.sum(p.increments)) for p in fam}
    assert len(ends) == 1
    W = ends.pop()
    assert oracles.gbm_exact(1.0, -0.5, 0.8, 1.0, W) == pytest.approx(math.exp(-0.5 + 0.8 * W))
