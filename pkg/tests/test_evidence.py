import math

import numpy as np
import pytest
from scipy.stats import norm

from hawkessv.evidence import (EvidenceConfig, EvidenceError, EvidenceResult, LinearGaussianToy,
                               chib_jeliazkov, likelihood_ordinate, log_marginal_likelihood,
                               marginal_likelihood, project_to_support, rank_models)
from hawkessv.model import ObservedData, measurement_loglik, table2_params
from hawkessv.priors import coord_names, coords_log_jacobian, from_coords, to_coords
from hawkessv.sampler import ChainConfig


def test_toy_quadrature_matches_closed_form():
    toy = LinearGaussianToy.simulate(n=40, seed=3)
    assert toy.quadrature_log_marginal() == pytest.approx(toy.exact_log_marginal(), abs=1e-8)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_toy_evidence_matches_exact(seed):
    toy = LinearGaussianToy.simulate(n=50, seed=seed, keep=4000)
    res = marginal_likelihood(toy, "toy", seed=seed + 10)
    assert res.log_marginal == pytest.approx(toy.exact_log_marginal(), abs=0.05)
    assert len(res.blocks) == 2 and res.se < 0.05


def test_toy_evidence_single_joint_block():
    toy = LinearGaussianToy.simulate(n=50, seed=4, keep=4000)
    toy.blocks = [("a", "b")]
    res = marginal_likelihood(toy, "toy", seed=1)
    assert res.log_marginal == pytest.approx(toy.exact_log_marginal(), abs=0.05)


def test_one_parameter_conjugate_ordinate():
    # with b pinned by a prior of negligible variance the a-block ordinate is a
    # conjugate normal density that can be written down directly
    toy = LinearGaussianToy.simulate(n=30, seed=5, keep=6000, v_b=1e-12)
    toy.blocks = [("a",)]
    toy.names = ("a", "b")
    star = {"a": 0.4, "b": 0.0}
    _, lpost, blocks, _ = chib_jeliazkov(toy, seed=2, star=star)
    var = toy.tau2 + toy.s2
    prec = 1 / toy.v[0] + toy.y.size / var
    mean = (toy.m[0] / toy.v[0] + np.sum(toy.y) / var) / prec
    assert lpost == pytest.approx(norm.logpdf(0.4, mean, 1 / math.sqrt(prec)), abs=0.05)
    assert blocks[0].log_ordinate == pytest.approx(lpost)


def test_identity_is_exact_and_self_bayes_factor_zero():
    r = EvidenceResult("M2", -100.0, -5.5, 7.25, None)
    assert r.log_marginal == -100.0 - 5.5 - 7.25
    rows = rank_models([r])
    assert rows[0]["log_bf_vs_best"] == 0.0 and rows[0]["log_bf"]["M2"] == 0.0


def test_rank_models_order_and_bayes_factors():
    res = [EvidenceResult(m, v, 0.0, 0.0, None) for m, v in
           (("M7", -15.0), ("M2", -10.0), ("MF", -12.0))]
    rows = rank_models(res)
    assert [r["model"] for r in rows] == ["M2", "MF", "M7"]
    assert [r["rank"] for r in rows] == [1, 2, 3]
    assert [r["log_bf_vs_best"] for r in rows] == [0.0, -2.0, -5.0]
    assert rows[0]["log_bf"]["M7"] == 5.0
    assert rows[2]["log_bf"]["MF"] == -3.0
    assert rank_models([]) == []


def test_rank_models_ties_follow_model_order():
    res = [EvidenceResult(m, -3.0, 0.0, 0.0, None) for m in ("M6", "MF", "M3")]
    assert [r["model"] for r in rank_models(res)] == ["MF", "M3", "M6"]


def test_likelihood_ordinate_single_draw_and_underflow():
    p = table2_params("M7")
    data = ObservedData([0.1, -0.05, 0.2], [-4.8, -4.9, -4.7], [0, 0, 0], [0.0, 0.0, 0.0])
    V = np.array([0.0, 0.009, 0.007])
    est, se = likelihood_ordinate(data, p, [V])
    V2 = V.copy()
    V2[0] = p.v_bar
    assert est == pytest.approx(float(np.sum(measurement_loglik(p, data, V2))), abs=1e-12)
    assert se == 0.0
    est2, _ = likelihood_ordinate(data, p, [V, V])
    assert est2 == pytest.approx(est, abs=1e-12)
    with pytest.raises(EvidenceError, match="underflow"):
        likelihood_ordinate(data, p, [])


def test_project_to_support():
    valid = lambda c: c["x"] < 1.0 and c["y"] < 1.0  # noqa: E731
    out = project_to_support({"x": 2.0, "y": 0.5}, {"x": 0.0, "y": 0.0}, valid)
    assert valid(out) and out["y"] == 0.5
    out = project_to_support({"x": 2.0, "y": 2.0}, {"x": 0.0, "y": 0.0}, valid)
    assert valid(out)
    with pytest.raises(EvidenceError):
        project_to_support({"x": 2.0}, {"x": 3.0}, lambda c: c["x"] < 1.0)


def test_evidence_config_mapping():
    c = EvidenceConfig.from_mapping({"n_particles": "300", "scale": "0.4"})
    assert c.n_particles == 300 and c.scale == 0.4
    with pytest.raises(KeyError):
        EvidenceConfig.from_mapping({"bogus": 1})


@pytest.mark.slow
def test_model_evidence_is_deterministic_and_finite(m2_small):
    data, _ = m2_small
    cc = ChainConfig(burn_in=60, keep=60, thin=2, seed=0)
    ec = EvidenceConfig(n_particles=100, lik_reps=1, reduced_burn_in=20)
    a = log_marginal_likelihood(data, "M7", None, cc, ec, seed=3)
    b = log_marginal_likelihood(data, "M7", None, cc, ec, seed=3)
    assert a.log_marginal == b.log_marginal
    assert math.isfinite(a.log_marginal)
    assert a.log_marginal == pytest.approx(a.log_lik_ordinate + a.log_prior_ordinate
                                           - a.log_posterior_ordinate, abs=0)
    assert len(a.blocks) == 5
    assert a.phi_star.is_valid()


@pytest.mark.parametrize("variant", ["MF", "M2", "M3"])
def test_evidence_coordinates_round_trip(variant):
    p = table2_params(variant)
    c = to_coords(p)
    assert set(c) == set(coord_names(variant))
    back = from_coords(c, variant, p)
    for n in p.free_names:
        assert getattr(back, n) == pytest.approx(getattr(p, n), rel=1e-12)


def test_ratio_coordinates_keep_beta_below_alpha():
    p = table2_params("M2")
    c = to_coords(p)
    # an alpha below the current beta is still a valid point in ratio coordinates
    q = from_coords({**c, "alpha_v": 0.5 * p.beta_vv}, "M2", p)
    assert q.is_valid() and q.beta_vv < q.alpha_v


def test_ratio_jacobian_matches_finite_differences():
    p = table2_params("M2")
    c = to_coords(p)
    keys = ["alpha_p", "beta_pp_ratio", "alpha_v", "beta_vv_ratio"]
    nat = ["alpha_p", "beta_pp", "alpha_v", "beta_vv"]
    h = 1e-7
    J = np.empty((4, 4))
    for j, k in enumerate(keys):
        up = from_coords({**c, k: c[k] + h}, "M2", p)
        dn = from_coords({**c, k: c[k] - h}, "M2", p)
        J[:, j] = [(getattr(up, n) - getattr(dn, n)) / (2 * h) for n in nat]
    assert math.log(abs(np.linalg.det(J))) == pytest.approx(coords_log_jacobian(p), abs=1e-6)
