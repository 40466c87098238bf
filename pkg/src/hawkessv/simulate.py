"""Forward simulation of the discretised model, with optional intraday grids."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .measures import IntradayDay
from .model import LatentPath, ModelParams, ObservedData


@dataclass(frozen=True)
class SimConfig:
    T: int
    params: ModelParams
    seed: int = 0
    M: int = 0
    emit_intraday: bool = False

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if not (self.M == 0 or self.M >= 3):
            raise ValueError("M must be 0 or at least 3")
        if self.emit_intraday and self.M == 0:
            raise ValueError("intraday output needs M >= 3")


_MODES = {1: "hawkes", 2: "linear", 3: "constant"}


def _mode_args(p: ModelParams):
    sp = p.spec
    dinf_p, dinf_v = p.delta_inf()
    if sp.p_mode == 1:
        pa, pb, pinf = p.alpha_p, p.beta_pp, dinf_p
    elif sp.p_mode == 2:
        pa, pb, pinf = p.alpha_p0, p.alpha_p, 0.0
    else:
        pa = pb = pinf = 0.0
    if sp.v_mode == 1:
        va, vb, vinf = p.alpha_v, p.beta_vv, dinf_v
    elif sp.v_mode == 2:
        va, vb, vinf = p.alpha_v0, p.alpha_v, 0.0
    else:
        va = vb = vinf = 0.0
    return pa, pb, pinf, p.delta0_p, va, vb, vinf, p.delta0_v


def simulate(config: SimConfig):
    """Simulate ``T`` days.

    Returns ``(data, latents, days)`` where ``days`` is a list of
    :class:`IntradayDay` (or None).  Intraday grids are in model units: the
    day's log-price increments sum to ``r`` and hold the variance constant
    within the day, the diffusive part being a Brownian bridge; a price jump
    is added to one uniformly chosen increment.  Feed them to
    :func:`hawkessv.measures.build_dataset` with ``annualization=1``.
    """
    p = config.params.check()
    T = config.T
    ss = np.random.SeedSequence(config.seed)
    day_seq, intra_seq = ss.spawn(2)
    rng = np.random.default_rng(day_seq)
    xi_p = rng.standard_normal(T)
    xi_bv = rng.standard_normal(T)
    xi_zp = rng.standard_normal(T)
    u_ind = 1.0 - rng.random(T)
    u_np = rng.random(T)
    u_nv = rng.random(T)
    e_zv = rng.standard_exponential(T)
    r = np.empty(T)
    lnbv = np.empty(T)
    dnp = np.empty(T, dtype=np.int8)
    zp = np.empty(T)
    V = np.empty(T)
    zv = np.empty(T)
    dnv = np.empty(T, dtype=np.int8)
    dp = np.empty(T)
    dv = np.empty(T)
    sp = p.spec
    kernels.simulate_path(
        sp.p_mode, sp.v_mode, int(sp.price_jumps), int(sp.var_jumps), p.mu, p.gamma, p.mu_p,
        p.gamma_p, p.sigma_p, p.sigma_bv, p.kappa, p.theta, p.psi, p.omega, p.mu_v,
        p.v_bar, *_mode_args(p), p.beta_vp, p.beta_vp_neg, xi_p, xi_bv, xi_zp, u_ind, u_np,
        u_nv, e_zv, r, lnbv, dnp, zp, V, zv, dnv, dp, dv)
    data = ObservedData(r, lnbv, dnp, zp)
    latents = LatentPath(V, zv, dnv, dp, dv)
    days = None
    if config.emit_intraday:
        days = intraday_grids(data, latents, config.M, np.random.default_rng(intra_seq))
    return data, latents, days


def intraday_grids(data: ObservedData, latents: LatentPath, M: int, rng) -> list:
    """Intraday log-price grids consistent with the simulated daily values."""
    T = len(data)
    z = rng.standard_normal((T, M))
    loc = rng.integers(0, M, size=T)
    x = data.r - data.zp * data.dnp
    inc = z * np.sqrt(latents.V / M)[:, None]
    inc += (x - inc.sum(axis=1))[:, None] / M
    inc[np.arange(T), loc] += data.zp * data.dnp
    lp = np.concatenate([np.zeros((T, 1)), np.cumsum(inc, axis=1)], axis=1)
    return [IntradayDay(str(d), lp[i]) for i, d in enumerate(data.dates)]


@dataclass
class TerminalState:
    """Quantities at day T needed to draw day T+1 (arrays broadcast)."""

    V: np.ndarray
    x: np.ndarray
    zv: np.ndarray
    dnv: np.ndarray
    delta_p_next: np.ndarray
    delta_v_next: np.ndarray | None = None


def draw_next_variance(p: ModelParams, V, x, zv, dnv, rng) -> np.ndarray:
    """V_{t+1} from the truncated transition, vectorised."""
    from .sampler.steps import rtruncnorm_pos

    V = np.asarray(V, dtype=float)
    m = (p.kappa * p.theta + (1 - p.kappa) * V + p.psi * (np.asarray(x) - p.mu - p.gamma * V)
         + np.asarray(zv) * np.asarray(dnv))
    sd = np.sqrt(p.omega * V)
    u = 1.0 - rng.random(V.shape)
    v = rtruncnorm_pos(m, sd, u)
    return np.maximum(v, 1e-300)


def simulate_predictive_step(params: ModelParams, state: TerminalState, rng):
    """Joint draw of (dNp, Zp, V, r) for day T+1 from the terminal state.

    Returns ``(r_next, V_next, dnp_next, zp_next)``.
    """
    p = params
    Vn = draw_next_variance(p, state.V, state.x, state.zv, state.dnv, rng)
    if p.variant == "M5":
        dp = np.clip(p.alpha_p0 + p.alpha_p * Vn, 1e-10, 1 - 1e-10)
    else:
        dp = np.broadcast_to(np.asarray(state.delta_p_next, dtype=float), Vn.shape)
    jump = (rng.random(Vn.shape) < dp).astype(np.int8) if p.spec.price_jumps \
        else np.zeros(Vn.shape, dtype=np.int8)
    zp = np.where(jump == 1, p.mu_p + p.gamma_p * Vn + p.sigma_p * rng.standard_normal(Vn.shape),
                  0.0)
    r = p.mu + p.gamma * Vn + np.sqrt(Vn) * rng.standard_normal(Vn.shape) + zp
    return r, Vn, jump, zp
