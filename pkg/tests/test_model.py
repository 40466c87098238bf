import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from hawkessv.model import (FREE_PARAMS, PARAM_NAMES, VARIANTS, InvalidParameters, LatentPath,
                            ModelParams, ObservedData, complete_data_loglik,
                            complete_data_logposterior, f_zp_at_zero, intensity_paths,
                            invert_unconditional, price_intensity, table2_params,
                            variance_transition_logpdf)

P = table2_params("MF")


def test_table2_values_valid_for_every_variant():
    for v in VARIANTS:
        p = table2_params(v)
        assert p.is_valid(), (v, p.violation())
        for n in PARAM_NAMES:
            if n not in FREE_PARAMS[v]:
                assert getattr(p, n) == 0.0


def test_restrictions_reported():
    with pytest.raises(InvalidParameters, match="Feller"):
        replace(P, sigma_v=0.05).check()
    with pytest.raises(InvalidParameters, match="nonstationary"):
        replace(P, beta_pp=0.2).check()
    with pytest.raises(InvalidParameters, match="under M2"):
        replace(table2_params("M2"), beta_vp=0.001).check()
    assert not replace(P, kappa=1.2).is_valid()
    assert not replace(P, rho=1.0).is_valid()


def test_text_round_trip():
    for v in VARIANTS:
        p = table2_params(v)
        assert ModelParams.from_text(p.to_text()) == p


def test_intensity_fixed_point():
    d_inf = P.delta_inf()[0]
    path = price_intensity(P, np.zeros(400))
    assert path[0] == P.delta0_p
    assert np.all(np.diff(path) <= 0) and np.all(path >= d_inf)
    assert np.all(np.diff(path[:100]) < 0)
    assert path[-1] == pytest.approx(d_inf, rel=1e-12)
    # without self-excitation the intensity is constant at delta0
    flat = price_intensity(replace(P, beta_pp=0.0), np.array([1, 0, 1, 1, 0]))
    assert np.all(flat == P.delta0_p)


def test_intensity_recursion_hand_value():
    a, b, dinf = 0.095, 0.059, 0.03941
    assert a * dinf + (1 - a) * 0.0394 + b == pytest.approx(0.0984, abs=5e-5)
    dp = price_intensity(P, np.array([1, 0, 0]))
    d_inf = P.delta_inf()[0]
    assert dp[0] == P.delta0_p
    assert dp[1] == pytest.approx(P.alpha_p * d_inf + (1 - P.alpha_p) * P.delta0_p + P.beta_pp,
                                  abs=1e-15)


def test_invert_unconditional_hand_value():
    dp, dv = invert_unconditional(P)
    assert dp == pytest.approx(0.104 * 0.036 / 0.095, rel=1e-12)
    assert dp == pytest.approx(0.03941, abs=1e-5)
    num = (P.delta0_v * (P.alpha_v - P.beta_vv) - P.beta_vp * P.delta0_p
           - P.beta_vp_neg * P.f_neg() * P.delta0_p)
    assert dv == pytest.approx(num / P.alpha_v, rel=1e-12)
    q = replace(P, beta_pp=0.0, beta_vv=0.0, beta_vp=0.0, beta_vp_neg=0.0)
    assert invert_unconditional(q) == (pytest.approx(q.delta0_p), pytest.approx(q.delta0_v))
    with pytest.raises(InvalidParameters, match="nonstationary intensity configuration"):
        invert_unconditional(replace(P, beta_pp=0.2))


def test_constant_intensity_variant():
    p = table2_params("M6")
    dnp = np.array([1, 0, 1, 1, 0])
    dp, dv = intensity_paths(p, dnp, np.zeros(5), np.array([1, 1, 0, 1, 0]))
    assert np.all(dp == p.delta0_p) and np.all(dv == p.delta0_v)
    dp, dv = intensity_paths(table2_params("M7"), dnp, np.zeros(5), np.zeros(5))
    assert np.all(dp == 0) and np.all(dv == 0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=6, max_size=30), st.data())
def test_intensities_depend_on_lagged_jumps_only(dnv, data):
    dnv = np.array(dnv)
    T = dnv.size
    t = data.draw(st.integers(1, T - 1))
    dnp = np.zeros(T, dtype=int)
    _, dv = intensity_paths(P, dnp, np.zeros(T), dnv)
    flipped = dnv.copy()
    flipped[t] = 1 - flipped[t]
    _, dv2 = intensity_paths(P, dnp, np.zeros(T), flipped)
    assert np.array_equal(dv[:t + 1], dv2[:t + 1])
    if t + 1 < T:
        assert dv[t + 1] != dv2[t + 1]


def test_f_zp_at_zero():
    assert f_zp_at_zero(replace(P, mu_p=0.0, gamma_p=0.0), [0.01, 0.5]) == 0.5
    assert f_zp_at_zero(P, [0.0078]) == pytest.approx(norm.cdf(-0.1400), abs=2e-4)
    assert f_zp_at_zero(P, [0.0078]) == pytest.approx(0.4443, abs=1e-4)
    assert f_zp_at_zero(P, [0.02]) > f_zp_at_zero(P, [0.01])
    with pytest.raises(ValueError):
        f_zp_at_zero(P, [])


def test_transition_density_integrates_to_one():
    for V_t, r in [(0.0078, 0.1), (0.001, 3.0), (0.03, -2.0)]:
        f = lambda v: math.exp(variance_transition_logpdf(v, V_t, r, 0.0, 0, 0.02, 1, P))  # noqa
        m = P.kappa * P.theta + (1 - P.kappa) * V_t + P.psi * (r - P.mu - P.gamma * V_t) + 0.02
        sd = math.sqrt(P.omega * V_t)
        lo, hi = 0.0, m + 40 * sd
        pts = [max(m, 1e-12)]
        val = integrate.quad(f, lo, hi, points=pts, limit=500, epsabs=1e-12, epsrel=1e-12)[0]
        assert val == pytest.approx(1.0, abs=1e-6)


def test_transition_mean_case_and_untruncated_limit():
    p = replace(P, rho=0.0)
    V_t = 0.05
    m = p.kappa * p.theta + (1 - p.kappa) * V_t
    sd = math.sqrt(p.omega * V_t)
    got = variance_transition_logpdf(m, V_t, 0.3, 0.0, 0, 0.0, 0, p)
    assert got == pytest.approx(-0.5 * math.log(2 * math.pi) - math.log(sd)
                                - norm.logcdf(m / sd), abs=1e-12)
    assert m / sd > 8
    assert got == pytest.approx(norm.logpdf(m, m, sd), abs=1e-12)
    assert variance_transition_logpdf(-0.1, V_t, 0.3, 0.0, 0, 0.0, 0, p) == -math.inf
    with pytest.raises(ValueError):
        variance_transition_logpdf(0.01, 0.0, 0.3, 0.0, 0, 0.0, 0, p)


def test_two_day_heston_hand_value():
    p = table2_params("M7")
    data = ObservedData([0.2, -0.1], [-4.9, -4.7], [0, 0], [0.0, 0.0])
    lat = LatentPath([1.0, 0.009], [0.0, 0.0], [0, 0], [0.0, 0.0], [0.0, 0.0])
    V0 = p.v_bar
    assert V0 == p.theta
    want = (norm.logpdf(0.2, p.mu + p.gamma * V0, math.sqrt(V0))
            + norm.logpdf(-0.1, p.mu + p.gamma * 0.009, math.sqrt(0.009))
            + norm.logpdf(-4.9, math.log(V0), p.sigma_bv)
            + norm.logpdf(-4.7, math.log(0.009), p.sigma_bv)
            + variance_transition_logpdf(0.009, V0, 0.2, 0.0, 0, 0.0, 0, p))
    assert complete_data_loglik(p, lat, data) == pytest.approx(want, abs=1e-10)


def test_flipping_a_variance_jump_matches_term_by_term_change():
    p = table2_params("M2")
    rng = np.random.default_rng(0)
    T = 8
    data = ObservedData(rng.normal(0.1, 0.1, T), rng.normal(-4.8, 0.3, T),
                        np.array([1, 0, 0, 1, 0, 0, 0, 0]), rng.normal(0, 1, T))
    V = np.abs(rng.normal(0.008, 0.001, T))
    zv = rng.exponential(p.mu_v, T)
    dnv = np.array([1, 0, 1, 0, 0, 1, 0, 0])
    base = LatentPath(V, zv, dnv, np.zeros(T), np.zeros(T))
    t = 4
    dnv2 = dnv.copy()
    dnv2[t] = 1
    other = LatentPath(V, zv, dnv2, np.zeros(T), np.zeros(T))
    diff = complete_data_loglik(p, other, data) - complete_data_loglik(p, base, data)
    Vb = V.copy()
    Vb[0] = p.v_bar
    x = data.diffusive_return()

    def terms(d):
        _, dv = intensity_paths(p, data.dnp, data.zp, d)
        bern = np.sum(d[1:] * np.log(dv[1:]) + (1 - d[1:]) * np.log1p(-dv[1:]))
        tr = variance_transition_logpdf(Vb[t + 1], Vb[t], x[t], 0.0, 0, zv[t], d[t], p)
        return bern + tr

    assert diff == pytest.approx(terms(dnv2) - terms(dnv), abs=1e-10)


def test_complete_data_logposterior_outside_support():
    p = table2_params("M2")
    data = ObservedData([0.1, 0.2], [-4.8, -4.9], [0, 0], [0, 0])
    lat = LatentPath([0.008, 0.009], [0.01, 0.01], [0, 0], [0, 0], [0, 0])
    assert math.isfinite(complete_data_logposterior(p, lat, data))
    assert complete_data_logposterior(replace(p, kappa=-0.1), lat, data) == -math.inf
    bad = LatentPath([0.008, -0.001], [0.01, 0.01], [0, 0], [0, 0], [0, 0])
    assert complete_data_logposterior(p, bad, data) == -math.inf


def test_observed_data_contract():
    d = ObservedData([0.1, 0.2], [-4.0, -4.1], [1, 0], [0.5, 9.0])
    assert d.zp[1] == 0.0
    assert list(d.dates) == ["1", "2"]
    assert d.dnp_neg.tolist() == [0, 0]
    with pytest.raises(ValueError):
        ObservedData([0.1], [-4.0, -4.1], [1, 0], [0.5, 0.0])
    with pytest.raises(ValueError):
        ObservedData([0.1, 0.2], [-4.0, -4.1], [2, 0], [0.5, 0.0])
