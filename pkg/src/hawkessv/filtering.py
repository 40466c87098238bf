"""Bootstrap particle filter for the latent variance and variance-jump state.

One filter object runs ``G`` parameter vectors side by side, each with ``N``
particles, so that the predictive distribution integrates over parameter
uncertainty as well as over the latent state.  Day ``t`` is processed as:
predictive of the day's observables from particles for ``V_t``, weighting by
the observation density, resampling, then propagation to ``V_{t+1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .model import ModelParams, ObservedData, price_intensity
from .sampler.steps import rtruncnorm_pos

LOG2PI = math.log(2 * math.pi)
EPS = 1e-10


def _col(params, attr):
    return np.array([getattr(p, attr) for p in params], dtype=float)[:, None]


def systematic_resample(logw: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise systematic resampling indices for log-weights of shape (G, N)."""
    G, N = logw.shape
    w = np.exp(logw - logw.max(axis=1, keepdims=True))
    cw = np.cumsum(w, axis=1)
    cw /= cw[:, -1:]
    cw[:, -1] = 1.0
    pos = (u[:, None] + np.arange(N)[None, :]) / N
    off = np.arange(G)[:, None] * 2.0
    idx = np.searchsorted((cw + off).ravel(), (pos + off).ravel(), side="left")
    return (idx.reshape(G, N) - np.arange(G)[:, None] * N).clip(0, N - 1)


@dataclass
class DayPrediction:
    """Predictive mixture for one day's return, per (parameter, particle)."""

    loc0: np.ndarray
    var0: np.ndarray
    loc1: np.ndarray
    var1: np.ndarray
    pj: np.ndarray  # price-jump probability

    def logpdf(self, r: float) -> float:
        """Log predictive density of r, mixing over parameters and particles."""
        l0 = -0.5 * (LOG2PI + np.log(self.var0) + (r - self.loc0) ** 2 / self.var0)
        comp0 = np.log1p(-self.pj) + l0
        if np.any(self.pj > 0):
            l1 = -0.5 * (LOG2PI + np.log(self.var1) + (r - self.loc1) ** 2 / self.var1)
            with np.errstate(divide="ignore"):
                comp1 = np.log(self.pj) + l1
            comp = np.logaddexp(comp0, comp1)
        else:
            comp = comp0
        return float(logsumexp(comp) - math.log(comp.size))

    def draws(self, n: int, rng) -> np.ndarray:
        """Draws of the return from the predictive mixture."""
        flat = self.loc0.size
        k = rng.integers(0, flat, size=n)
        pj = np.broadcast_to(self.pj, self.loc0.shape).ravel()[k]
        jump = rng.random(n) < pj
        loc = np.where(jump, np.broadcast_to(self.loc1, self.loc0.shape).ravel()[k],
                       self.loc0.ravel()[k])
        var = np.where(jump, np.broadcast_to(self.var1, self.loc0.shape).ravel()[k],
                       self.var0.ravel()[k])
        return loc + np.sqrt(var) * rng.standard_normal(n)


class ParticleFilter:
    """Filter ``G`` parameter vectors with ``N`` particles each through ``data``."""

    def __init__(self, params: Sequence[ModelParams], data: ObservedData, n_particles: int,
                 rng):
        params = list(params)
        if not params:
            raise ValueError("need at least one parameter vector")
        variants = {p.variant for p in params}
        if len(variants) != 1:
            raise ValueError("all parameter vectors must share a variant")
        self.variant = variants.pop()
        self.params = params
        self.spec = params[0].spec
        self.data = data
        self.rng = rng
        self.G = len(params)
        self.N = int(n_particles)
        P = {a: _col(params, a) for a in (
            "mu", "gamma", "mu_p", "gamma_p", "sigma_p", "sigma_bv", "kappa", "theta", "psi",
            "omega", "mu_v", "alpha_v", "beta_vv", "beta_vp", "beta_vp_neg", "delta0_v",
            "alpha_p0", "alpha_p", "alpha_v0", "v_bar")}
        P["dinf_v"] = np.array([p.delta_inf()[1] for p in params])[:, None]
        self.P = P
        sp = self.spec
        self.x = data.diffusive_return(sp.price_jumps)
        self.neg = data.dnp_neg
        if sp.price_jumps and sp.p_mode != 2:
            # one extra column holds the intensity for the day after the sample
            ext = np.append(data.dnp, 0)
            self.dp = np.vstack([price_intensity(p, ext) for p in params])
        else:
            self.dp = None
        self.V = np.repeat(P["v_bar"], self.N, axis=1)
        self.dv = np.repeat(np.clip(P["delta0_v"], EPS, 1 - EPS), self.N, axis=1)
        self.t = 0
        self.loglik = np.zeros(self.G)

    # ------------------------------------------------------------------
    def _price_prob(self, t: int) -> np.ndarray:
        if not self.spec.price_jumps:
            return np.zeros((self.G, 1))
        if self.spec.p_mode == 2:
            return np.clip(self.P["alpha_p0"] + self.P["alpha_p"] * self.V, EPS, 1 - EPS)
        return self.dp[:, t][:, None]

    def next_price_prob(self) -> np.ndarray:
        """Price-jump probability for the next unassimilated day (may be day T)."""
        return self._price_prob(self.t)

    def predict(self) -> DayPrediction:
        """Predictive mixture of the return on day ``self.t``."""
        P = self.P
        V = self.V
        loc0 = P["mu"] + P["gamma"] * V
        pj = np.broadcast_to(self._price_prob(self.t), V.shape)
        if self.spec.price_jumps:
            loc1 = loc0 + P["mu_p"] + P["gamma_p"] * V
            var1 = V + P["sigma_p"] ** 2
        else:
            loc1, var1 = loc0, V
        return DayPrediction(loc0, V, loc1, var1, pj)

    def _obs_logdensity(self, t: int) -> np.ndarray:
        P = self.P
        V = self.V
        e = self.x[t] - P["mu"] - P["gamma"] * V
        lw = -0.5 * (LOG2PI + np.log(V) + e * e / V)
        e = self.data.lnbv[t] - np.log(V)
        lw = lw - 0.5 * (LOG2PI + 2 * np.log(P["sigma_bv"]) + e * e / P["sigma_bv"] ** 2)
        if self.spec.price_jumps:
            pj = self._price_prob(t)
            if self.data.dnp[t]:
                e = self.data.zp[t] - P["mu_p"] - P["gamma_p"] * V
                lw = lw - 0.5 * (LOG2PI + 2 * np.log(P["sigma_p"]) + e * e / P["sigma_p"] ** 2)
                lw = lw + np.log(pj)
            else:
                lw = lw + np.log1p(-pj)
        return lw

    def _propagate(self, t: int) -> None:
        P = self.P
        sp = self.spec
        rng = self.rng
        V = self.V
        shape = V.shape
        if sp.var_jumps:
            if sp.v_mode == 4 or t == 0:
                dnv = np.full(shape, float(self.data.dnp[t]))
            else:
                if sp.v_mode == 2:
                    dv = np.clip(P["alpha_v0"] + P["alpha_v"] * V, EPS, 1 - EPS)
                elif sp.v_mode == 3:
                    dv = np.clip(P["delta0_v"], EPS, 1 - EPS)
                else:
                    dv = self.dv
                dnv = (rng.random(shape) < dv).astype(float)
            zv = rng.standard_exponential(shape) * P["mu_v"]
            jump = zv * dnv
        else:
            dnv = None
            jump = 0.0
        m = (P["kappa"] * P["theta"] + (1 - P["kappa"]) * V
             + P["psi"] * (self.x[t] - P["mu"] - P["gamma"] * V) + jump)
        sd = np.sqrt(P["omega"] * V)
        newV = rtruncnorm_pos(m, sd, 1.0 - rng.random(shape))
        self.V = np.maximum(newV, 1e-300)
        if sp.v_mode == 1:
            drive = (P["beta_vv"] * dnv + P["beta_vp"] * self.data.dnp[t]
                     + P["beta_vp_neg"] * self.neg[t])
            self.dv = np.clip(P["alpha_v"] * P["dinf_v"] + (1 - P["alpha_v"]) * self.dv + drive,
                              EPS, 1 - EPS)

    def step(self) -> np.ndarray:
        """Assimilate day ``self.t``; returns the per-parameter log-likelihood increment."""
        t = self.t
        if t >= len(self.data):
            raise IndexError("no more data to assimilate")
        lw = self._obs_logdensity(t)
        inc = logsumexp(lw, axis=1) - math.log(self.N)
        self.loglik += inc
        idx = systematic_resample(lw, self.rng.random(self.G))
        rows = np.arange(self.G)[:, None]
        self.V = self.V[rows, idx]
        self.dv = self.dv[rows, idx]
        self._propagate(t)
        self.t += 1
        return inc

    def run(self, until: int | None = None) -> np.ndarray:
        until = len(self.data) if until is None else until
        while self.t < until:
            self.step()
        return self.loglik


def pf_loglik(params: ModelParams, data: ObservedData, n_particles: int = 2000,
              seed: int = 0, reps: int = 1) -> tuple[float, float]:
    """Particle-filter estimate of log p(data | params) and its Monte Carlo SE.

    With ``reps > 1`` the estimate is the log of the average likelihood over
    independent filters and the SE comes from their spread (delta method).
    """
    ss = np.random.SeedSequence(seed)
    vals = []
    for child in ss.spawn(reps):
        pf = ParticleFilter([params], data, n_particles, np.random.default_rng(child))
        vals.append(float(pf.run()[0]))
    vals = np.array(vals)
    est = float(logsumexp(vals) - math.log(reps))
    if reps > 1:
        w = np.exp(vals - vals.max())
        se = float(np.std(w, ddof=1) / math.sqrt(reps) / np.mean(w))
    else:
        se = float("nan")
    return est, se
