import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkessv.measures import (MU_43, V_BB, V_QQ, IntradayDay, bipower_variation,
                               build_dataset, day_measures, extract_jump, realized_variance,
                               relative_jump_stat, tripower_quarticity)

# magnitudes below 1e-100 would underflow when squared
returns_st = st.lists(st.floats(-0.05, 0.05, allow_nan=False).filter(
    lambda x: x == 0 or abs(x) > 1e-100), min_size=3, max_size=40)


def test_constants():
    assert V_BB == pytest.approx((math.pi / 2) ** 2 + math.pi - 3)
    assert V_BB - V_QQ == pytest.approx(0.6090, abs=1e-4)
    assert MU_43 == pytest.approx(0.8308609, rel=1e-6)


def test_realized_variance_fixture():
    assert realized_variance([0.01, -0.02, 0.005]) == pytest.approx(0.000525, abs=1e-15)
    assert realized_variance([0.0, 0.0, 0.0]) == 0.0
    with pytest.raises(ValueError, match="insufficient intraday returns"):
        realized_variance([])


def test_bipower_fixture():
    assert bipower_variation([0.01, -0.02]) == pytest.approx(math.pi / 2 * 2e-4, abs=1e-16)
    assert bipower_variation([0.0, 0.0]) == 0.0
    with pytest.raises(ValueError):
        bipower_variation([0.01])


def test_tripower_fixture():
    got = tripower_quarticity([0.01, 0.01, 0.01])
    assert got == pytest.approx(3 * MU_43 ** -3 * 0.01 ** 4, rel=1e-12)
    assert tripower_quarticity([0.0] * 5) == 0.0
    with pytest.raises(ValueError):
        tripower_quarticity([0.01, 0.02])


def test_relative_jump_stat_fixture():
    # RJ = 0.25, max(1, TQ/BV^2) = 2.2222, denominator sqrt(0.60898/78*2.2222) = 0.131719
    z = relative_jump_stat(0.02, 0.015, 0.0005, 78)
    rj = 0.25
    denom = math.sqrt((V_BB - V_QQ) / 78 * (0.0005 / 0.015 ** 2))
    assert z == pytest.approx(rj / denom, rel=1e-12)
    assert z == pytest.approx(1.89797, abs=1e-5)
    assert relative_jump_stat(0.02, 0.02, 0.0005, 78) == 0.0
    with pytest.raises(ValueError, match="degenerate day"):
        relative_jump_stat(0.0, 0.01, 0.0, 78)
    with pytest.raises(ValueError, match="degenerate day"):
        relative_jump_stat(0.01, 0.0, 0.0, 78)


def test_extract_jump_cases():
    assert extract_jump(0.02, 0.015, 0.5, 0.1, 0.001) == (0, None)
    dnp, zp = extract_jump(0.05, 0.01, 10.0, -0.3, 0.001)
    assert dnp == 1 and zp == pytest.approx(-0.2)
    dnp, zp = extract_jump(0.01, 0.02, 10.0, 0.3, 0.001)
    assert dnp == 1 and zp == 0.0


@given(st.floats(-5, 10), st.floats(-5, 10), st.floats(1e-4, 0.5))
def test_extract_jump_monotone_in_z(z1, z2, alpha):
    lo, hi = sorted((z1, z2))
    assert extract_jump(0.02, 0.01, lo, 0.1, alpha)[0] <= extract_jump(0.02, 0.01, hi, 0.1, alpha)[0]


@given(returns_st)
def test_measures_nonnegative(r):
    assert realized_variance(r) >= 0
    assert bipower_variation(r) >= 0
    assert tripower_quarticity(r) >= 0
    assert (realized_variance(r) == 0) == all(x == 0 for x in r)


@given(returns_st, st.floats(0.1, 10))
def test_scale_equivariance(r, c):
    r = np.array(r)
    assert realized_variance(c * r) == pytest.approx(c ** 2 * realized_variance(r), rel=1e-9, abs=1e-300)
    assert bipower_variation(c * r) == pytest.approx(c ** 2 * bipower_variation(r), rel=1e-9, abs=1e-300)
    assert tripower_quarticity(c * r) == pytest.approx(c ** 4 * tripower_quarticity(r), rel=1e-9, abs=1e-300)


def test_intraday_day_validation():
    with pytest.raises(ValueError):
        IntradayDay("d", [0.0, 0.1, 0.2])
    with pytest.raises(ValueError):
        IntradayDay("d", [0.0, np.nan, 0.1, 0.2])
    d = IntradayDay("d", [0.0, 0.01, -0.01, 0.02])
    assert d.open == 0.0 and d.close == 0.02 and d.returns.shape == (3,)


def test_two_day_hand_values():
    d1 = IntradayDay("a", np.cumsum([0.0, 0.01, -0.02, 0.005]))
    d2 = IntradayDay("b", np.cumsum([0.0, 0.002, 0.002, -0.001]))
    data, recs = build_dataset([d1, d2], alpha=0.001, annualization=252)
    assert recs[0].rv == pytest.approx(252 * 0.000525, rel=1e-12)
    assert recs[0].bv == pytest.approx(252 * math.pi / 2 * (0.01 * 0.02 + 0.02 * 0.005), rel=1e-12)
    assert recs[0].r == pytest.approx(252 * (-0.005), rel=1e-12)
    assert recs[1].rv == pytest.approx(252 * (4e-6 + 4e-6 + 1e-6), rel=1e-12)
    tq = 3 * MU_43 ** -3 * (0.002 * 0.002 * 0.001) ** (4 / 3)
    assert recs[1].tq == pytest.approx(252 ** 2 * tq, rel=1e-12)
    assert np.allclose(data.lnbv, np.log([recs[0].bv, recs[1].bv]))


def test_flat_day_imputation():
    flat = IntradayDay("flat", np.zeros(6))
    moving = IntradayDay("mov", np.cumsum([0.0, 0.01, -0.01, 0.01, -0.01, 0.01]))
    data, recs = build_dataset([flat, moving])
    assert recs[0].r == 0.0 and recs[0].dnp == 0 and recs[0].bv_imputed
    assert recs[0].bv == recs[1].bv
    data, recs = build_dataset([flat])
    assert np.isfinite(data.lnbv).all() and recs[0].dnp == 0


def test_build_dataset_empty():
    with pytest.raises(ValueError, match="no input days"):
        build_dataset([])


@settings(max_examples=20, deadline=None)
@given(st.permutations(range(5)))
def test_permuting_days_permutes_rows(perm):
    rng = np.random.default_rng(0)
    days = [IntradayDay(str(i), np.cumsum(np.r_[0, 0.01 * rng.standard_normal(20)]))
            for i in range(5)]
    base, _ = build_dataset(days)
    other, _ = build_dataset([days[i] for i in perm])
    assert np.array_equal(other.r, base.r[list(perm)])
    assert np.array_equal(other.lnbv, base.lnbv[list(perm)])


def test_rv_converges_to_integrated_variance():
    rng = np.random.default_rng(1)
    V = 0.01 / 252
    r = math.sqrt(V / 10000) * rng.standard_normal(10000)
    assert realized_variance(r) == pytest.approx(V, rel=0.02)
    tq = tripower_quarticity(r)
    assert tq == pytest.approx(V ** 2, rel=0.1)


def test_bv_robust_to_jump():
    rng = np.random.default_rng(2)
    V = 0.01 / 252
    r = math.sqrt(V / 10000) * rng.standard_normal(10000)
    # the jump is 80 intraday standard deviations and jump^2 is 63% of the day's
    # integrated variance; its cross terms move BV by about J*sqrt(2*pi*V/M) (2%)
    J = 0.005
    rj = r.copy()
    rj[5000] += J
    assert abs(bipower_variation(rj) / bipower_variation(r) - 1) < 0.05
    assert abs(bipower_variation(rj) / V - 1) < 0.1
    assert realized_variance(rj) - realized_variance(r) == pytest.approx(J ** 2, rel=0.05)


def test_day_measures_detects_large_jump():
    rng = np.random.default_rng(3)
    r = 0.001 * rng.standard_normal(78)
    r[40] += 0.03
    m = day_measures(IntradayDay("j", np.r_[0, np.cumsum(r)]))
    assert m.dnp == 1 and m.zp > 0 and np.sign(m.zp) == np.sign(m.r)
