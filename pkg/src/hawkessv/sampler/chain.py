"""Chain driver: initialisation, sweeps, thinning, tuning and output."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..model import FREE_PARAMS, ModelParams, ObservedData
from ..priors import PriorConfig
from .diagnostics import hpd_interval, inefficiency_factor, mpm
from .steps import (SamplerState, Target, Tuner, sample_static_params,
                    sample_variance_jump_occurrences, sample_variance_jump_sizes,
                    sample_volatility)

log = logging.getLogger(__name__)


class NumericalFailure(RuntimeError):
    """A density evaluation failed; carries the offending sampler state."""

    def __init__(self, msg, state=None, iteration=None):
        super().__init__(msg)
        self.state = state
        self.iteration = iteration


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int = 100_000
    keep: int = 100_000
    thin: int = 10
    block_size: int = 20
    v_step: float = 1.0
    seed: int = 0
    adapt_every: int = 50
    target_accept: float = 0.25
    snapshot_stride: int = 0
    prior_only: bool = False

    def __post_init__(self):
        for k in ("burn_in", "keep", "thin", "block_size", "adapt_every"):
            if int(getattr(self, k)) != getattr(self, k) or getattr(self, k) < 0:
                raise ValueError(f"{k} must be a nonnegative integer")
        if self.thin < 1 or self.block_size < 1 or self.adapt_every < 1:
            raise ValueError("thin, block_size and adapt_every must be positive")
        if not 0 < self.v_step <= 1:
            raise ValueError("v_step must lie in (0, 1]")

    @classmethod
    def from_mapping(cls, m) -> "ChainConfig":
        kw = {}
        for f in cls.__dataclass_fields__.values():
            if f.name in m:
                v = m[f.name]
                if f.type in ("int", int):
                    v = int(v)
                elif f.type in ("float", float):
                    v = float(v)
                elif f.type in ("bool", bool):
                    v = str(v).lower() in ("1", "true", "yes", "on")
                kw[f.name] = v
        bad = set(m) - set(cls.__dataclass_fields__)
        if bad:
            raise KeyError(f"unknown chain settings: {sorted(bad)}")
        return cls(**kw)


@dataclass
class ChainOutput:
    variant: str
    names: tuple
    draws: np.ndarray
    acceptance: dict
    config: ChainConfig
    V_mean: np.ndarray
    V_sd: np.ndarray
    dnv_prob: np.ndarray
    logpost: np.ndarray
    snapshots: list = field(default_factory=list)
    final_state: SamplerState | None = None
    tuner: Tuner | None = None

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    def params_at(self, i: int) -> ModelParams:
        return ModelParams(variant=self.variant, **dict(zip(self.names, self.draws[i])))

    def mpm_params(self) -> ModelParams:
        return ModelParams(variant=self.variant,
                           **{n: mpm(self.column(n)) for n in self.names})

    def summary(self, level: float = 0.95) -> list[dict]:
        rows = []
        for n in self.names:
            x = self.column(n)
            lo, hi = hpd_interval(x, level)
            rows.append({"parameter": n, "mpm": mpm(x), "hpd_lo": lo, "hpd_hi": hi,
                         "if": inefficiency_factor(x) if x.shape[0] > 1 else 0.0})
        return rows

    def mh_rates(self) -> dict:
        return {k: v["rate"] for k, v in self.acceptance.items() if v["category"] == "mh"}


def _smooth(x, w=5):
    k = np.ones(2 * w + 1)
    num = np.convolve(x, k, mode="same")
    den = np.convolve(np.ones_like(x), k, mode="same")
    return num / den


def initial_params(data: ObservedData, variant: str) -> ModelParams:
    """A valid, data-informed starting point."""
    V = np.exp(_smooth(data.lnbv))
    theta = float(np.clip(np.mean(V), 1e-6, 0.5))
    kappa = 0.05
    jumps = data.zp[data.dnp == 1]
    kw = dict(
        mu=float(np.clip(np.mean(data.r), -5, 5)), gamma=-1.0,
        mu_p=float(np.clip(jumps.mean(), -5, 5)) if jumps.size else 0.0, gamma_p=0.0,
        sigma_p=float(np.clip(jumps.std(), 0.1, 5)) if jumps.size > 1 else 1.0,
        sigma_bv=float(np.clip(np.std(data.lnbv - _smooth(data.lnbv)), 0.05, 2.0)),
        kappa=kappa, theta=theta, sigma_v=math.sqrt(kappa * theta), rho=-0.3,
        delta0_p=float(np.clip(data.dnp.mean(), 0.01, 0.5)), alpha_p=0.1, beta_pp=0.05,
        delta0_v=0.05, alpha_v=0.1, beta_vv=0.05, mu_v=0.007,
    )
    p = ModelParams(variant=variant, **kw).restricted()
    if variant in ("MF", "M1"):
        room = p.delta0_v * (p.alpha_v - p.beta_vv) / p.delta0_p
        p = replace(p, beta_vp=0.1 * room)
    if variant == "MF":
        room = ((p.delta0_v * (p.alpha_v - p.beta_vv) - p.beta_vp * p.delta0_p)
                / (p.f_neg() * p.delta0_p))
        p = replace(p, beta_vp_neg=0.1 * room)
    if variant == "M5":
        vb = p.v_bar
        p = replace(p, alpha_p=0.5 * p.delta0_p / vb, alpha_v=0.5 * p.delta0_v / vb)
    return p.check()


def initial_state(target: Target, params: ModelParams, rng) -> SamplerState:
    data = target.data
    T = target.T
    V = np.exp(_smooth(data.lnbv))
    sp = params.spec
    if sp.var_jumps:
        zv = rng.standard_exponential(T) * params.mu_v
        dnv = np.zeros(T, dtype=np.int8)
        dnv[0] = data.dnp[0]
        if sp.v_mode == 4:
            dnv[:] = data.dnp
    else:
        zv = np.zeros(T)
        dnv = np.zeros(T, dtype=np.int8)
    st = SamplerState(params, V, zv, dnv, np.zeros(T), np.zeros(T))
    target.refresh(st)
    st.logpost = target.logpost(params, st)
    return st


def sweep(target: Target, st: SamplerState, rng, tuner: Tuner, cfg: ChainConfig,
          pinned=frozenset()) -> None:
    """One full sweep: V blocks, dNv, Zv, then the static parameters."""
    vstat = tuner.get("V", "v_block", cfg.v_step)
    if not vstat.size:
        vstat.size = cfg.block_size
    sample_volatility(target, st, rng, vstat.size, vstat.scale, vstat)
    sample_variance_jump_occurrences(target, st, rng)
    sample_variance_jump_sizes(target, st, rng, tuner.get("Zv", "gibbs"))
    sample_static_params(target, st, rng, tuner, pinned)


#: acceptance band for the variance blocks during burn-in
V_BAND = (0.15, 0.30)
MAX_V_BLOCK = 1000


def _adapt_v(tuner: Tuner) -> None:
    """Steer the variance-block acceptance into ``V_BAND``.

    The proposal is autoregressive around the block's Laplace approximation,
    so the step scale cannot exceed one.  When the rate is still above the
    band at full scale the blocks are lengthened instead, and they are
    shortened again once the scale has reached its floor.
    """
    b = tuner.blocks.get("V")
    if b is None or b.win_proposed < 50:
        return
    r = b.win_accepted / b.win_proposed
    if r < V_BAND[0]:
        if b.scale > 0.05:
            b.scale = max(b.scale * 0.8, 0.05)
        elif b.size > 2:
            b.size = max(int(b.size / 1.25), 2)
    elif r > V_BAND[1]:
        if b.scale < 1.0:
            b.scale = min(b.scale * 1.25, 1.0)
        else:
            b.size = min(int(b.size * 1.25) + 1, MAX_V_BLOCK)
    b.win_proposed = b.win_accepted = 0


def run_chain(data: ObservedData, variant: str = "MF", priors: PriorConfig | None = None,
              config: ChainConfig = ChainConfig(), init: ModelParams | None = None,
              pinned=(), callback: Callable | None = None,
              state: SamplerState | None = None, tuner: Tuner | None = None,
              rng=None) -> ChainOutput:
    """Run the hybrid sampler and return thinned draws.

    ``pinned`` names parameters held at their initial values (reduced runs).
    ``callback(state, index)`` is invoked at every retained draw.  A previous
    ``state``/``tuner`` can be passed to continue from where a run stopped.
    """
    if len(data) < 2:
        raise ValueError("data must contain at least two days")
    cfg = config
    pinned = frozenset(pinned)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    target = Target(data, variant, priors, prior_only=cfg.prior_only)
    if state is None:
        p = init if init is not None else initial_params(data, variant)
        st = initial_state(target, p.check(), rng)
    else:
        st = state.copy()
        if init is not None:
            st.params = init.check()
        target.refresh(st)
        st.logpost = target.logpost(st.params, st)
    if not math.isfinite(st.logpost):
        raise NumericalFailure("initial state has zero posterior density", st.copy(), 0)
    if tuner is None:
        tuner = Tuner(target_rate=cfg.target_accept)
    tuner.adapting = True
    names = FREE_PARAMS[variant]
    n_keep = cfg.keep // cfg.thin
    draws = np.empty((n_keep, len(names)))
    lps = np.empty(n_keep)
    V_sum = np.zeros(target.T)
    V_sq = np.zeros(target.T)
    dnv_sum = np.zeros(target.T)
    snaps = []
    total = cfg.burn_in + cfg.keep
    k = 0
    for it in range(total):
        if it == cfg.burn_in:
            tuner.adapting = False
            tuner.reset_counts()
        try:
            sweep(target, st, rng, tuner, cfg, pinned)
        except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"sweep {it} failed: {exc}", st.copy(), it) from exc
        if it < cfg.burn_in and (it + 1) % cfg.adapt_every == 0:
            tuner.adapt()
            _adapt_v(tuner)
        if it >= cfg.burn_in and (it - cfg.burn_in + 1) % cfg.thin == 0:
            draws[k] = st.params.vector(names)
            lps[k] = st.logpost
            V_sum += st.V
            V_sq += st.V ** 2
            dnv_sum += st.dnv
            if cfg.snapshot_stride and k % cfg.snapshot_stride == 0:
                snaps.append(st.V.copy())
            if callback is not None:
                callback(st, k)
            k += 1
        if log.isEnabledFor(logging.DEBUG) and (it + 1) % 1000 == 0:
            log.debug("sweep %d logpost %.3f", it + 1, st.logpost)
    m = max(k, 1)
    V_mean = V_sum / m
    V_sd = np.sqrt(np.maximum(V_sq / m - V_mean ** 2, 0.0))
    return ChainOutput(variant, names, draws[:k], tuner.rates(), cfg, V_mean, V_sd,
                       dnv_sum / m, lps[:k], snaps, st, tuner)
