"""The compiled kernels and the pure-Python fallback must agree."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from hawkessv import _pykernels, kernels
from hawkessv.model import table2_params
from hawkessv.sampler.chain import ChainConfig, run_chain
from hawkessv.simulate import SimConfig, simulate

cy = pytest.importorskip("hawkessv._kernels")


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


def test_hawkes_path_matches():
    rng = np.random.default_rng(1)
    drive = 0.05 * (rng.random(200) < 0.1)
    a = np.empty(200)
    b = np.empty(200)
    _pykernels.hawkes_path(0.09, 0.03, 0.1, drive, a)
    cy.hawkes_path(0.09, 0.03, 0.1, drive, b)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


def test_data_logdensity_matches():
    p = table2_params("MF")
    data, lat, _ = simulate(SimConfig(150, p, seed=4))
    x = data.diffusive_return()
    args = (x, data.lnbv, data.dnp.astype(np.int8), data.zp, lat.V, lat.zv,
            lat.dnv.astype(np.int8), lat.delta_p, lat.delta_v, p.mu, p.gamma, p.mu_p,
            p.gamma_p, p.sigma_p, p.sigma_bv, p.kappa, p.theta, p.psi, p.omega, p.mu_v, 1, 1, 1)
    assert _pykernels.data_logdensity(*args) == pytest.approx(cy.data_logdensity(*args),
                                                              abs=1e-8)


def _run_in(backend: str) -> dict:
    code = (
        "import json\n"
        "from hawkessv import kernels\n"
        "from hawkessv.model import table2_params\n"
        "from hawkessv.simulate import SimConfig, simulate\n"
        "from hawkessv.sampler.chain import ChainConfig, run_chain\n"
        "d, lat, _ = simulate(SimConfig(120, table2_params('M2'), seed=3))\n"
        "c = run_chain(d, 'M2', config=ChainConfig(burn_in=20, keep=20, thin=2, seed=5))\n"
        "print(json.dumps({'backend': kernels.BACKEND, 'r': d.r.tolist(), 'V': lat.V.tolist(),\n"
        "                  'draws': c.draws.tolist()}))\n")
    env = dict(os.environ, HSV_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(out.stdout)


@pytest.mark.slow
def test_simulation_and_short_chain_agree_across_backends():
    a = _run_in("python")
    b = _run_in("cython")
    assert a["backend"] == "python" and b["backend"] == "cython"
    np.testing.assert_allclose(a["r"], b["r"], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(a["V"], b["V"], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(a["draws"], b["draws"], rtol=1e-7, atol=1e-10)


def test_in_process_chain_is_deterministic():
    d, _, _ = simulate(SimConfig(80, table2_params("M2"), seed=8))
    cfg = ChainConfig(burn_in=10, keep=10, thin=1, seed=2)
    a = run_chain(d, "M2", config=cfg)
    b = run_chain(d, "M2", config=cfg)
    assert np.array_equal(a.draws, b.draws)
