import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from hawkessv.model import FREE_PARAMS, ObservedData, table2_params
from hawkessv.sampler import (ChainConfig, SamplerState, Target, Tuner, hpd_interval,
                              inefficiency_factor, initial_state, mpm, run_chain,
                              sample_variance_jump_occurrences, sample_variance_jump_sizes,
                              sample_volatility)
from hawkessv.sampler.diagnostics import batch_means_se, cusum_path
from hawkessv.sampler.steps import _beta_rw, rtruncnorm_pos


def _tiny_state(variant="M2"):
    p = table2_params(variant)
    data = ObservedData([0.3, -1.2, 0.5], [-4.9, -4.2, -4.5], [0, 1, 0], [0.0, -1.1, 0.0])
    target = Target(data, variant)
    st_ = SamplerState(p, np.array([p.v_bar, 0.012, 0.02]), np.array([0.01, 0.006, 0.004]),
                       np.zeros(3, dtype=np.int8), np.zeros(3), np.zeros(3))
    target.refresh(st_)
    return target, st_


@pytest.mark.parametrize("variant", ["M2", "M6"])
def test_variance_jump_gibbs_matches_enumeration(variant):
    target, st0 = _tiny_state(variant)
    configs = list(itertools.product([0, 1], repeat=2))
    logp = []
    for c in configs:
        dnv = np.array([st0.dnv[0], *c], dtype=np.int8)
        logp.append(target.loglik(st0.params, st0, dnv=dnv))
    logp = np.array(logp)
    exact = np.exp(logp - logp.max())
    exact /= exact.sum()
    rng = np.random.default_rng(0)
    n = 20000
    counts = np.zeros(4)
    s = st0.copy()
    for _ in range(n):
        sample_variance_jump_occurrences(target, s, rng)
        counts[configs.index((int(s.dnv[1]), int(s.dnv[2])))] += 1
    freq = counts / n
    # Gibbs draws are autocorrelated; allow 3 SEs with a generous inflation of 2
    se = np.sqrt(exact * (1 - exact) / n) * 2
    assert np.all(np.abs(freq - exact) <= 3 * se + 1e-4), (freq, exact)


def test_zero_step_scale_keeps_volatility():
    target, s = _tiny_state()
    before = s.V.copy()
    stat = Tuner().get("V", "v_block")
    sample_volatility(target, s, np.random.default_rng(1), block_size=1, step=0.0, stat=stat)
    assert np.array_equal(s.V, before)
    assert stat.accepted == stat.proposed == 2


def test_volatility_blocks_sample_the_exact_conditional():
    target, s = _tiny_state("M7")
    # exact conditional moments of (V1, V2) by quadrature on a log grid
    g = np.linspace(np.log(1e-4), np.log(0.2), 500)
    G1, G2 = np.meshgrid(g, g, indexing="ij")
    lp = np.empty(G1.shape)
    for a in range(g.size):
        for b in range(g.size):
            V = np.array([s.V[0], math.exp(g[a]), math.exp(g[b])])
            lp[a, b] = target.loglik(s.params, s, V=V) + g[a] + g[b]
    w = np.exp(lp - lp.max())
    w /= w.sum()
    m1, m2 = float(np.sum(w * np.exp(G1))), float(np.sum(w * np.exp(G2)))
    rng = np.random.default_rng(1)
    n = 20000
    draws = np.empty((n, 2))
    for k in range(n):
        sample_volatility(target, s, rng, block_size=2)
        draws[k] = s.V[1:]
    se = [batch_means_se(draws[:, i]) for i in range(2)]
    assert abs(draws[:, 0].mean() - m1) < 4 * se[0]
    assert abs(draws[:, 1].mean() - m2) < 4 * se[1]


def test_jump_sizes_nonnegative_and_prior_when_off():
    target, s = _tiny_state()
    rng = np.random.default_rng(2)
    for _ in range(200):
        sample_variance_jump_sizes(target, s, rng)
        assert np.all(s.zv >= 0)
    p = s.params
    draws = []
    for _ in range(3000):
        sample_variance_jump_sizes(target, s, rng)
        draws.append(s.zv[2])
    # the last day's size never enters a transition: it is an exponential prior draw
    assert stats.kstest(np.array(draws) / p.mu_v, "expon").pvalue > 0.001


def test_pinned_parameters_never_move(m2_small):
    data, _ = m2_small
    init = table2_params("M2")
    cfg = ChainConfig(burn_in=30, keep=30, thin=1, seed=3)
    out = run_chain(data, "M2", config=cfg, init=init, pinned=("kappa", "theta", "mu_v"))
    for n in ("kappa", "theta", "mu_v"):
        assert np.all(out.column(n) == getattr(init, n))
    assert np.ptp(out.column("mu")) > 0


def test_chain_determinism_and_schema(m2_small):
    data, _ = m2_small
    cfg = ChainConfig(burn_in=20, keep=20, thin=2, seed=9)
    a = run_chain(data, "M2", config=cfg)
    b = run_chain(data, "M2", config=cfg)
    assert np.array_equal(a.draws, b.draws)
    assert a.draws.shape == (10, len(FREE_PARAMS["M2"]))
    assert a.names == FREE_PARAMS["M2"]
    assert np.all(a.V_mean > 0) and np.all((a.dnv_prob >= 0) & (a.dnv_prob <= 1))
    assert all(a.params_at(i).is_valid() for i in range(10))
    rows = a.summary()
    assert [r["parameter"] for r in rows] == list(FREE_PARAMS["M2"])
    c = run_chain(data, "M2", config=replace(cfg, seed=10))
    assert not np.array_equal(a.draws, c.draws)


def test_heston_chain_has_seven_parameters(m2_small):
    data, _ = m2_small
    out = run_chain(data, "M7", config=ChainConfig(burn_in=10, keep=10, thin=1, seed=1))
    assert out.draws.shape[1] == 7
    assert np.all(out.dnv_prob == 0)


@pytest.mark.slow
def test_prior_only_intensity_draws_follow_beta_prior(m2_small):
    data, _ = m2_small
    cfg = ChainConfig(burn_in=500, keep=24000, thin=12, seed=4, prior_only=True)
    out = run_chain(data, "M6", config=cfg)
    x = out.column("delta0_p")
    assert stats.kstest(x, stats.beta(10, 90).cdf).pvalue > 0.01
    assert mpm(x) == pytest.approx(0.1, abs=0.006)


class _BetaTarget:
    """Stub target whose posterior for delta0_p is Beta(a, b)."""

    def __init__(self, a, b):
        self.dist = stats.beta(a, b)

    def logpost(self, p, st):
        return float(self.dist.logpdf(p.delta0_p)) if 0 < p.delta0_p < 1 else -math.inf

    def refresh(self, st):
        pass


@pytest.mark.parametrize("a,b", [(0.6, 40.0), (3.0, 2.0)])
def test_beta_candidate_step_leaves_target_invariant(a, b):
    target, st_ = _tiny_state()
    tgt = _BetaTarget(a, b)
    st_.params = replace(st_.params, delta0_p=float(tgt.dist.mean()))
    st_.logpost = tgt.logpost(st_.params, st_)
    rng = np.random.default_rng(3)
    tuner = Tuner()
    xs = []
    for i in range(60000):
        _beta_rw(tgt, st_, rng, tuner, "delta0_p", lambda q: q.delta0_p,
                 lambda q, x: replace(q, delta0_p=x), ())
        if i % 15 == 0:
            xs.append(st_.params.delta0_p)
    assert stats.kstest(xs, tgt.dist.cdf).pvalue > 0.01
    assert tuner.blocks["beta:delta0_p"].rate > 0.1


def test_inefficiency_iid_and_constant():
    rng = np.random.default_rng(0)
    vals = [inefficiency_factor(rng.standard_normal(10000)) for _ in range(5)]
    assert 0.8 <= np.mean(vals) <= 1.2
    assert inefficiency_factor(np.full(100, 3.0)) == 0.0
    with pytest.raises(ValueError):
        inefficiency_factor([1.0])


def test_inefficiency_ar1():
    rng = np.random.default_rng(1)
    phi, n = 0.9, 200000
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / math.sqrt(1 - phi ** 2)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    assert inefficiency_factor(x) == pytest.approx((1 + phi) / (1 - phi), rel=0.2)


def test_hpd_interval_cases():
    x = np.arange(1, 101, dtype=float)
    lo, hi = hpd_interval(x, 0.9)
    assert hi - lo == 89
    rng = np.random.default_rng(2)
    z = rng.standard_normal(200000)
    lo, hi = hpd_interval(z, 0.95)
    assert lo == pytest.approx(-1.96, abs=0.03) and hi == pytest.approx(1.96, abs=0.03)
    e = rng.exponential(size=200000)
    lo, hi = hpd_interval(e, 0.9)
    assert lo == pytest.approx(0.0, abs=1e-3) and hi == pytest.approx(-math.log(0.1), abs=0.03)
    assert hpd_interval([5.0], 0.95) == (5.0, 5.0)
    with pytest.raises(ValueError):
        hpd_interval([], 0.95)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200), st.floats(0.05, 1.0))
def test_hpd_contains_required_share(xs, level):
    lo, hi = hpd_interval(xs, level)
    x = np.asarray(xs)
    assert np.mean((x >= lo) & (x <= hi)) >= min(level, 1.0) - 1e-12


def test_batch_means_and_cusum():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(40000)
    assert batch_means_se(x) == pytest.approx(1 / 200, rel=0.4)
    c = cusum_path(x)
    assert c.shape == x.shape and abs(c[-1]) < 1e-12
    assert np.all(cusum_path(np.ones(5)) == 0)


def test_truncated_normal_draws():
    rng = np.random.default_rng(4)
    u = 1.0 - rng.random(100000)
    x = rtruncnorm_pos(np.full(u.size, 0.5), np.ones(u.size), u)
    ref = stats.truncnorm(-0.5, np.inf, loc=0.5)
    assert stats.kstest(x, ref.cdf).pvalue > 0.001
    far = rtruncnorm_pos(np.array([-40.0]), np.array([1.0]), np.array([0.5]))
    assert far[0] > 0 and far[0] < 0.1


def test_initial_state_is_valid(m2_small):
    data, _ = m2_small
    from hawkessv.sampler import initial_params

    for v in ("MF", "M3", "M5", "M7"):
        t = Target(data, v)
        s = initial_state(t, initial_params(data, v), np.random.default_rng(0))
        assert math.isfinite(s.logpost)
        assert s.params.is_valid()
