import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saltns import kernels

compiled_available = True
try:
    kernels.implementation("compiled")
except ImportError:
    compiled_available = False

needs_compiled = pytest.mark.skipif(not compiled_available, reason="compiled extension not built")


def arrays(rng, B, P):
    return (rng.standard_normal((B, 2, P)), rng.standard_normal((B, 2, 2, P)),
            rng.standard_normal((2, P)), rng.standard_normal((2, 2, P)))


def test_fallback_against_einsum():
    rng = np.random.default_rng(0)
    f, grad, xi, gxi = arrays(rng, 3, 17)
    py = kernels.implementation("python")
    np.testing.assert_allclose(py.advect_grid(f, grad), np.einsum("bjp,bljp->blp", f, grad), atol=1e-14)
    np.testing.assert_allclose(py.stretch_grid(f, gxi), np.einsum("bjp,jlp->blp", f, gxi), atol=1e-14)
    np.testing.assert_allclose(py.salt_grid(xi, gxi, f, grad),
                               np.einsum("jp,bljp->blp", xi, grad) + np.einsum("bjp,jlp->blp", f, gxi), atol=1e-14)


@needs_compiled
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 300))
def test_backends_bitwise_equal(seed, B, P):
    rng = np.random.default_rng(seed)
    f, grad, xi, gxi = arrays(rng, B, P)
    py, cy = kernels.implementation("python"), kernels.implementation("compiled")
    assert np.array_equal(py.advect_grid(f, grad), cy.advect_grid(f, grad))
    assert np.array_equal(py.stretch_grid(f, gxi), cy.stretch_grid(f, gxi))
    assert np.array_equal(py.salt_grid(xi, gxi, f, grad), cy.salt_grid(xi, gxi, f, grad))


def test_dispatch_normalises_layout():
    rng = np.random.default_rng(1)
    f, grad, _, _ = arrays(rng, 2, 9)
    strided = np.asfortranarray(grad)
    np.testing.assert_array_equal(kernels.advect_grid(f, strided), kernels.advect_grid(f, grad))


@needs_compiled
def test_environment_forces_fallback():
    code = "from saltns import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, SALTNS_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    env.pop("SALTNS_BACKEND")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "compiled"


@needs_compiled
def test_simulation_identical_across_backends(tmp_path):
    code = ("from saltns.sde import SdeConfig, run; "
            "print(run(SdeConfig(K=4, dt=1/64, T=1/8, xi_M=2, seed=2)).to_csv())")
    outs = []
    for backend in ("python", "compiled"):
        env = dict(os.environ, SALTNS_BACKEND=backend)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                                   check=True).stdout)
    assert outs[0] == outs[1]
