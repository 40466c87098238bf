"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--T 2000] [--repeat 5]

Each kernel is called on identical inputs under both backends; the table
reports the best wall time per call and the speed-up of the compiled
version.  Outputs are compared as well, so a mismatch shows up here too.
"""
from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from hawkessv import _pykernels
from hawkessv.model import table2_params
from hawkessv.sampler.chain import initial_params, initial_state
from hawkessv.sampler.steps import Target, _transition_jump_logratio
from hawkessv.simulate import SimConfig, _mode_args, simulate

try:
    from hawkessv import _kernels as _cykernels
except ImportError:  # pragma: no cover - depends on the build
    _cykernels = None


def _cases(T: int):
    """Kernel name -> function(module) returning something comparable."""
    p = table2_params("M2")
    data, _, _ = simulate(SimConfig(T, p, seed=1))
    target = Target(data, "M2")
    st = initial_state(target, initial_params(data, "M2"), np.random.default_rng(0))
    q = st.params
    sp = q.spec
    rng = np.random.default_rng(2)
    drive = 0.05 * (rng.random(T) < 0.1)
    lt = _transition_jump_logratio(target, st)
    u = rng.random(T)
    z = rng.standard_normal(T)
    starts = np.unique(np.r_[1, np.arange(11, T, 20), T]).astype(np.int_)
    u_blk = 1.0 - rng.random(starts.shape[0] - 1)
    _, dinf = q.delta_inf()
    base = np.ascontiguousarray(q.beta_vp * data.dnp + q.beta_vp_neg * data.dnp_neg, dtype=float)
    sim_u = [rng.standard_normal(T) for _ in range(3)] + [1.0 - rng.random(T), rng.random(T),
                                                         rng.random(T),
                                                         rng.standard_exponential(T)]

    def hawkes(m):
        out = np.empty(T)
        m.hawkes_path(0.09, 0.03, 0.1, drive, out)
        return out

    def logdens(m):
        return m.data_logdensity(
            target.x, data.lnbv, data.dnp, data.zp, st.V, st.zv, st.dnv, st.dp, st.dv, q.mu,
            q.gamma, q.mu_p, q.gamma_p, q.sigma_p, q.sigma_bv, q.kappa, q.theta, q.psi, q.omega,
            q.mu_v, 1, 1, 1)

    def dnv(m):
        d = st.dnv.copy()
        dv = st.dv.copy()
        m.sweep_dnv(d, dv, lt, base, u, q.alpha_v, dinf, q.beta_vv,
                    q.beta_vv + q.beta_vp + q.beta_vp_neg, np.empty(T))
        return d

    def vblocks(m):
        V = st.V.copy()
        blk = m._VBlock(V, target.x, data.lnbv, data.dnp, data.zp, st.zv, st.dnv, q.mu, q.gamma,
                        q.mu_p, q.gamma_p, q.sigma_p, q.sigma_bv, q.kappa, q.theta, q.psi,
                        q.omega, int(sp.price_jumps), 0, q.alpha_p0, q.alpha_p, q.alpha_v0,
                        q.alpha_v, int(sp.dnv_bern))
        m.sample_v_blocks(blk, starts, z, u_blk, 1.0, np.zeros(starts.shape[0] - 1, np.int8))
        return V

    def simpath(m):
        out = [np.empty(T) for _ in range(4)]
        ints = [np.empty(T, dtype=np.int8) for _ in range(2)]
        r, lnbv, zp, V = out
        dnp, dnv_ = ints
        zv, dp, dv = np.empty(T), np.empty(T), np.empty(T)
        m.simulate_path(sp.p_mode, sp.v_mode, 1, 1, p.mu, p.gamma, p.mu_p, p.gamma_p, p.sigma_p,
                        p.sigma_bv, p.kappa, p.theta, p.psi, p.omega, p.mu_v, p.v_bar,
                        *_mode_args(p), p.beta_vp, p.beta_vp_neg, *sim_u, r, lnbv, dnp, zp, V,
                        zv, dnv_, dp, dv)
        return V

    return {"hawkes_path": hawkes, "data_logdensity": logdens, "sweep_dnv": dnv,
            "sample_v_blocks": vblocks, "simulate_path": simpath}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=2000, help="series length")
    ap.add_argument("--repeat", type=int, default=5, help="timing repetitions")
    args = ap.parse_args(argv)
    if _cykernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return 1
    cases = _cases(args.T)
    print(f"T = {args.T}, best of {args.repeat}")
    print(f"{'kernel':<18}{'python (ms)':>14}{'compiled (ms)':>16}{'speed-up':>11}  match")
    for name, fn in cases.items():
        a, b = fn(_pykernels), fn(_cykernels)
        same = bool(np.allclose(a, b, rtol=1e-9, atol=1e-12))
        t = {}
        for label, mod in (("py", _pykernels), ("cy", _cykernels)):
            timer = timeit.Timer(lambda: fn(mod))
            n, _ = timer.autorange()
            t[label] = min(timer.repeat(args.repeat, n)) / n * 1e3
        print(f"{name:<18}{t['py']:>14.3f}{t['cy']:>16.3f}{t['py'] / t['cy']:>10.1f}x  {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
