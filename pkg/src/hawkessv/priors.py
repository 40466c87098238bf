"""Prior distributions and the coordinate system in which they are stated.

The prior is specified on ``sigma_p**2``, ``sigma_bv**2`` and on the
leverage reparameterisation ``psi = rho*sigma_v``, ``omega =
sigma_v**2*(1-rho**2)``; the remaining parameters enter directly.  These are
the *evidence coordinates*: all posterior ordinates are densities in them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .model import FREE_PARAMS, ModelParams

#: natural parameter -> name of its evidence coordinate
COORD_OF = {"sigma_p": "sigma_p2", "sigma_bv": "sigma_bv2", "rho": "psi", "sigma_v": "omega",
            "beta_pp": "beta_pp_ratio", "beta_vv": "beta_vv_ratio"}

#: self-excitation coordinates stored as a share of their alpha, so that the
#: restriction beta < alpha becomes the box (0, 1) whatever alpha is
_RATIO_OF = {"beta_pp_ratio": ("beta_pp", "alpha_p"), "beta_vv_ratio": ("beta_vv", "alpha_v")}


@dataclass(frozen=True)
class PriorConfig:
    mu_lo: float = -10.0
    mu_hi: float = 10.0
    gamma_lo: float = -100.0
    gamma_hi: float = 0.0
    mu_p_lo: float = -10.0
    mu_p_hi: float = 10.0
    gamma_p_lo: float = -100.0
    gamma_p_hi: float = 100.0
    sigma_p2_shape: float = 3.0
    sigma_p2_scale: float = 1.0
    sigma_bv2_shape: float = 3.0
    sigma_bv2_scale: float = 1.0
    kappa_hi: float = 1.0
    theta_hi: float = 1.0
    psi_mean: float = -0.005
    psi_var_div: float = 5.0
    omega_shape: float = 10.0
    omega_scale: float = 0.001
    delta0_a: float = 10.0
    delta0_b: float = 90.0
    mu_v_shape: float = 20.0
    mu_v_scale: float = 1.0 / 7.2

    @classmethod
    def from_mapping(cls, m) -> "PriorConfig":
        names = {f.name for f in fields(cls)}
        bad = set(m) - names
        if bad:
            raise KeyError(f"unknown prior settings: {sorted(bad)}")
        return cls(**{k: float(v) for k, v in m.items()})


def coord_names(variant: str) -> tuple:
    """Evidence-coordinate names of the variant's free parameters."""
    return tuple(COORD_OF.get(n, n) for n in FREE_PARAMS[variant])


def to_coords(params: ModelParams) -> dict:
    """Map natural parameters to evidence coordinates."""
    out = {}
    for n in params.free_names:
        if n == "sigma_p":
            out["sigma_p2"] = params.sigma_p ** 2
        elif n == "sigma_bv":
            out["sigma_bv2"] = params.sigma_bv ** 2
        elif n == "rho":
            out["psi"] = params.psi
        elif n == "sigma_v":
            out["omega"] = params.omega
        elif n in ("beta_pp", "beta_vv"):
            a = params.alpha_p if n == "beta_pp" else params.alpha_v
            out[COORD_OF[n]] = getattr(params, n) / a
        else:
            out[n] = getattr(params, n)
    return out


def from_coords(coords: dict, variant: str, base: ModelParams | None = None) -> ModelParams:
    """Inverse of :func:`to_coords`. Invalid values give NaN natural values."""
    kw = dict(coords)
    if "sigma_p2" in kw:
        s = kw.pop("sigma_p2")
        kw["sigma_p"] = math.sqrt(s) if s > 0 else math.nan
    if "sigma_bv2" in kw:
        s = kw.pop("sigma_bv2")
        kw["sigma_bv"] = math.sqrt(s) if s > 0 else math.nan
    if "psi" in kw or "omega" in kw:
        psi = kw.pop("psi")
        om = kw.pop("omega")
        if om > 0:
            sv = math.sqrt(om + psi * psi)
            kw["sigma_v"] = sv
            kw["rho"] = psi / sv
        else:
            kw["sigma_v"] = math.nan
            kw["rho"] = math.nan
    base = base if base is not None else ModelParams(variant=variant)
    for c, (n, a) in _RATIO_OF.items():
        if c in kw:
            kw[n] = kw.pop(c) * kw.get(a, getattr(base, a))
    vals = {n: float(v) for n, v in kw.items()}
    return ModelParams(**{**{n: getattr(base, n) for n in base.as_dict()}, **vals,
                          "variant": variant}).restricted()


def coords_log_jacobian(params: ModelParams) -> float:
    """Log of |d(natural) / d(coords)| for the parts of the map that are not
    already priced into :func:`log_prior` (the beta-over-alpha ratios)."""
    out = 0.0
    for c, (_, a) in _RATIO_OF.items():
        if c in coord_names(params.variant):
            out += math.log(getattr(params, a))
    return out


def _ig_logpdf(x, shape, scale):
    if not x > 0:
        return -math.inf
    return shape * math.log(scale) - math.lgamma(shape) - (shape + 1) * math.log(x) - scale / x


def _beta_logpdf(x, a, b):
    if not 0 < x < 1:
        return -math.inf
    return (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + (a - 1) * math.log(x)
            + (b - 1) * math.log1p(-x))


def _unif(x, lo, hi):
    return -math.log(hi - lo) if lo < x < hi else -math.inf


def log_prior(params: ModelParams, priors: PriorConfig = PriorConfig()) -> float:
    """Log prior density in evidence coordinates (-inf outside the support).

    The intensity self-excitation terms are priced on the natural (alpha,
    beta) scale; add :func:`coords_log_jacobian` for the ratio coordinates.
    The Feller indicator multiplies the (psi, omega) prior without
    renormalisation.
    """
    p = params
    c = priors
    if p.violation() is not None:
        return -math.inf
    sp = p.spec
    v = p.variant
    lp = _unif(p.mu, c.mu_lo, c.mu_hi) + _unif(p.gamma, c.gamma_lo, c.gamma_hi)
    lp += _ig_logpdf(p.sigma_bv ** 2, c.sigma_bv2_shape, c.sigma_bv2_scale)
    lp += _unif(p.kappa, 0.0, c.kappa_hi) + _unif(p.theta, 0.0, c.theta_hi)
    om = p.omega
    lp += _ig_logpdf(om, c.omega_shape, c.omega_scale)
    pv = om / c.psi_var_div
    lp += -0.5 * math.log(2 * math.pi * pv) - 0.5 * (p.psi - c.psi_mean) ** 2 / pv
    if not math.isfinite(lp):
        return -math.inf
    if not sp.price_jumps:
        return lp
    lp += _unif(p.mu_p, c.mu_p_lo, c.mu_p_hi) + _unif(p.gamma_p, c.gamma_p_lo, c.gamma_p_hi)
    lp += _ig_logpdf(p.sigma_p ** 2, c.sigma_p2_shape, c.sigma_p2_scale)
    lp += _beta_logpdf(p.delta0_p, c.delta0_a, c.delta0_b)
    if sp.p_mode == 1:
        lp += math.log(2.0)
    if sp.var_jumps:
        lp += _ig_logpdf(p.mu_v, c.mu_v_shape, c.mu_v_scale)
        if v != "M3":
            lp += _beta_logpdf(p.delta0_v, c.delta0_a, c.delta0_b)
    if sp.v_mode == 1:
        lp += math.log(2.0)
        if v in ("MF", "M1"):
            u1 = p.delta0_v * (p.alpha_v - p.beta_vv) / p.delta0_p
            lp += _unif(p.beta_vp, 0.0, u1) if p.beta_vp > 0 else -math.log(u1)
        if v == "MF":
            u2 = ((p.delta0_v * (p.alpha_v - p.beta_vv) - p.beta_vp * p.delta0_p)
                  / (p.f_neg() * p.delta0_p))
            lp += _unif(p.beta_vp_neg, 0.0, u2) if p.beta_vp_neg > 0 else -math.log(u2)
    if v == "M5":
        vb = p.v_bar
        lp += -math.log(p.delta0_p / vb) - math.log(p.delta0_v / vb)
    return float(lp)


def prior_mean(variant: str, priors: PriorConfig = PriorConfig()) -> dict:
    """Prior means in evidence coordinates (used to shrink invalid points)."""
    c = priors
    out = {
        "mu": 0.5 * (c.mu_lo + c.mu_hi),
        "gamma": 0.5 * (c.gamma_lo + c.gamma_hi),
        "mu_p": 0.5 * (c.mu_p_lo + c.mu_p_hi),
        "gamma_p": 0.5 * (c.gamma_p_lo + c.gamma_p_hi),
        "sigma_p2": c.sigma_p2_scale / (c.sigma_p2_shape - 1),
        "sigma_bv2": c.sigma_bv2_scale / (c.sigma_bv2_shape - 1),
        "kappa": 0.5 * c.kappa_hi,
        "theta": 0.5 * c.theta_hi,
        "psi": c.psi_mean,
        "omega": c.omega_scale / (c.omega_shape - 1),
        "delta0_p": c.delta0_a / (c.delta0_a + c.delta0_b),
        "delta0_v": c.delta0_a / (c.delta0_a + c.delta0_b),
        "alpha_p": 2.0 / 3.0,
        "beta_pp_ratio": 0.5,
        "alpha_v": 2.0 / 3.0,
        "beta_vv_ratio": 0.5,
        "beta_vp": 0.0,
        "beta_vp_neg": 0.0,
        "mu_v": c.mu_v_scale / (c.mu_v_shape - 1),
    }
    names = coord_names(variant)
    return {n: out[n] for n in names}


def vector_coords(params: ModelParams) -> np.ndarray:
    d = to_coords(params)
    return np.array([d[n] for n in coord_names(params.variant)])
