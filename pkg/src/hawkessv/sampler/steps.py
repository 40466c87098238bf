"""Individual sweep steps of the hybrid Gibbs / Metropolis-Hastings sampler.

Every static-parameter update is a Metropolis-Hastings move whose target is
the complete-data log posterior; conjugate regression or inverse-gamma
forms serve as proposals, and the acceptance ratio corrects for the terms
they ignore (truncation normalisers, the dependence of V_0 on the
parameters, intensity restrictions).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, log_ndtr, ndtr, ndtri

from .. import kernels
from ..model import ModelParams, ObservedData, LatentPath, intensity_paths
from ..priors import PriorConfig, log_prior

LOG2PI = math.log(2 * math.pi)


# ---------------------------------------------------------------------------
# small distributions


def rtruncnorm_pos(mean, sd, u):
    """Inverse-cdf draw from N(mean, sd^2) truncated to (0, inf); u in (0, 1]."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    a = -mean / sd
    tail = ndtr(-a)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = -ndtri(u * tail)
        far = ~(tail > 0) | ~np.isfinite(xi)
        if np.any(far):
            # deep lower tail: exponential approximation to the truncated law
            af = np.broadcast_to(a, xi.shape)[far]
            uf = np.broadcast_to(u, xi.shape)[far]
            xi[far] = af - np.log(uf) / af
    return np.maximum(mean + sd * xi, 0.0)


def _ig_logpdf(x, shape, scale):
    return shape * math.log(scale) - math.lgamma(shape) - (shape + 1) * math.log(x) - scale / x


def _beta_logpdf(x, a, b):
    return (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + (a - 1) * math.log(x)
            + (b - 1) * math.log1p(-x))


def _mvn_logpdf(x, mean, chol):
    z = np.linalg.solve(chol, x - mean)
    return float(-0.5 * z @ z - np.sum(np.log(np.diag(chol))) - 0.5 * len(x) * LOG2PI)


# ---------------------------------------------------------------------------
# state, target and tuning


@dataclass
class SamplerState:
    params: ModelParams
    V: np.ndarray
    zv: np.ndarray
    dnv: np.ndarray
    dp: np.ndarray
    dv: np.ndarray
    logpost: float = -math.inf

    def latents(self) -> LatentPath:
        return LatentPath(self.V.copy(), self.zv.copy(), self.dnv.copy(), self.dp.copy(),
                          self.dv.copy())

    def copy(self) -> "SamplerState":
        return SamplerState(self.params, self.V.copy(), self.zv.copy(), self.dnv.copy(),
                            self.dp.copy(), self.dv.copy(), self.logpost)


class Target:
    """Complete-data log posterior for one dataset and variant."""

    def __init__(self, data: ObservedData, variant: str, priors: PriorConfig | None = None,
                 prior_only: bool = False):
        self.data = data
        self.variant = variant
        self.priors = priors if priors is not None else PriorConfig()
        self.prior_only = prior_only
        from ..model import variant_spec

        self.spec = variant_spec(variant)
        sp = self.spec
        self.T = len(data)
        self.x = np.ascontiguousarray(data.diffusive_return(sp.price_jumps))
        self.lnbv = data.lnbv
        self.dnp = data.dnp
        self.zp = data.zp
        self.neg = data.dnp_neg
        self.njump = int(data.dnp.sum())

    def intensities(self, p: ModelParams, V, dnv):
        return intensity_paths(p, self.dnp, self.zp, dnv, V)

    def loglik(self, p: ModelParams, st: SamplerState, V=None, dnv=None, zv=None) -> float:
        if self.prior_only:
            return 0.0
        sp = self.spec
        V = (st.V if V is None else V).copy()
        V[0] = p.v_bar
        dnv = st.dnv if dnv is None else dnv
        zv = st.zv if zv is None else zv
        dp, dv = self.intensities(p, V, dnv)
        return kernels.data_logdensity(
            self.x, self.lnbv, self.dnp, self.zp, V, zv, dnv, dp, dv, p.mu, p.gamma, p.mu_p,
            p.gamma_p, p.sigma_p, p.sigma_bv, p.kappa, p.theta, p.psi, p.omega, p.mu_v,
            int(sp.price_jumps), int(sp.var_jumps), int(sp.dnv_bern))

    def logpost(self, p: ModelParams, st: SamplerState, **kw) -> float:
        if not p.is_valid():
            return -math.inf
        lp = log_prior(p, self.priors)
        if not math.isfinite(lp):
            return -math.inf
        return lp + self.loglik(p, st, **kw)

    def refresh(self, st: SamplerState) -> None:
        """Make V_0 and the intensity paths consistent with ``st.params``."""
        st.V[0] = st.params.v_bar
        if self.spec.v_mode == 4:
            st.dnv[:] = self.dnp
        st.dp, st.dv = self.intensities(st.params, st.V, st.dnv)


@dataclass
class BlockStat:
    """Acceptance bookkeeping and proposal scale for one update block."""

    category: str
    scale: float = 1.0
    size: int = 0
    proposed: int = 0
    accepted: int = 0
    win_proposed: int = 0
    win_accepted: int = 0
    sweeps: int = 0
    sweeps_moved: int = 0

    def record(self, ok: bool) -> None:
        self.proposed += 1
        self.win_proposed += 1
        self.accepted += int(ok)
        self.win_accepted += int(ok)

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


@dataclass
class Tuner:
    """Collects per-block statistics and adapts scales during burn-in."""

    target_rate: float = 0.25
    blocks: dict = field(default_factory=dict)
    adapting: bool = True

    def get(self, name: str, category: str, scale: float = 1.0) -> BlockStat:
        b = self.blocks.get(name)
        if b is None:
            b = self.blocks[name] = BlockStat(category, scale)
        return b

    def adapt(self) -> None:
        """Move log-scales toward the target acceptance (random-walk blocks only)."""
        if not self.adapting:
            return
        for name, b in self.blocks.items():
            if b.category != "mh" or b.win_proposed < 20:
                continue
            r = b.win_accepted / b.win_proposed
            f = math.exp(3.0 * (r - self.target_rate))
            if name.startswith("beta:"):
                # concentration: larger means smaller steps
                b.scale = min(max(b.scale / f, 2.0), 1e9)
            else:
                b.scale = min(max(b.scale * f, 1e-8), 1e4)
            b.win_proposed = b.win_accepted = 0

    def reset_counts(self) -> None:
        for b in self.blocks.values():
            b.proposed = b.accepted = b.win_proposed = b.win_accepted = 0
            b.sweeps = b.sweeps_moved = 0

    def rates(self) -> dict:
        out = {}
        for k, b in self.blocks.items():
            out[k] = {"category": b.category, "rate": b.rate, "proposed": b.proposed,
                      "scale": b.scale}
            if b.size:
                out[k]["block_size"] = b.size
            if b.sweeps:
                # share of sweeps in which at least one block moved
                out[k]["sweep_rate"] = b.sweeps_moved / b.sweeps
        return out


def _accept(target: Target, st: SamplerState, new: ModelParams, log_q_ratio: float,
            rng, stat: BlockStat, lp_new: float | None = None, adjust: float = 0.0) -> bool:
    """MH accept/reject of ``new`` given log q(old|new) - log q(new|old)."""
    if lp_new is None:
        lp_new = target.logpost(new, st)
    # the uniform is always drawn so the stream does not depend on rounding in la
    u = 1.0 - rng.random()
    ok = False
    if math.isfinite(lp_new):
        la = lp_new - st.logpost + log_q_ratio + adjust
        ok = math.log(u) <= la
    if ok:
        st.params = new
        st.logpost = lp_new
        target.refresh(st)
    stat.record(ok)
    return ok


# ---------------------------------------------------------------------------
# step 1: variance path


def sample_volatility(target: Target, st: SamplerState, rng, block_size: int = 20,
                      step: float = 1.0, stat: BlockStat | None = None) -> int:
    """Blocked MH update of V_1..V_{T-1} (V_0 is fixed by the parameters).

    Each block's proposal is built from a Laplace approximation of its
    conditional in log V; see :func:`hawkessv.kernels.sample_v_blocks`.
    Returns the number of accepted blocks.
    """
    T = target.T
    if T < 2 or target.prior_only:
        return 0
    p = st.params
    sp = target.spec
    off = int(rng.integers(1, block_size + 1))
    starts = np.unique(np.r_[1, np.arange(1 + off, T, block_size), T]).astype(np.int_)
    z = rng.standard_normal(T)
    u = 1.0 - rng.random(starts.shape[0] - 1)
    acc = np.zeros(starts.shape[0] - 1, dtype=np.int8)
    blk = kernels.VBlock(
        st.V, target.x, target.lnbv, target.dnp, target.zp, st.zv, st.dnv, p.mu, p.gamma,
        p.mu_p, p.gamma_p, p.sigma_p, p.sigma_bv, p.kappa, p.theta, p.psi, p.omega,
        int(sp.price_jumps), int(target.variant == "M5"), p.alpha_p0, p.alpha_p,
        p.alpha_v0, p.alpha_v, int(sp.dnv_bern))
    n_acc = kernels.sample_v_blocks(blk, starts, z, u, float(step), acc)
    if stat is not None:
        stat.proposed += acc.shape[0]
        stat.accepted += int(n_acc)
        stat.win_proposed += acc.shape[0]
        stat.win_accepted += int(n_acc)
        stat.sweeps += 1
        stat.sweeps_moved += int(n_acc > 0)
    if target.variant == "M5":
        st.dp, st.dv = target.intensities(p, st.V, st.dnv)
    return int(n_acc)


# ---------------------------------------------------------------------------
# step 2: variance jump occurrences


def _transition_jump_logratio(target: Target, st: SamplerState) -> np.ndarray:
    """log p(V_{t+1} | jump at t) - log p(V_{t+1} | no jump at t); 0 at t = T-1."""
    p = st.params
    V = st.V
    out = np.zeros(target.T)
    if target.T < 2:
        return out
    m0 = (p.kappa * p.theta + p.psi * (target.x[:-1] - p.mu)
          + (1 - p.kappa - p.psi * p.gamma) * V[:-1])
    sd = np.sqrt(p.omega * V[:-1])
    m1 = m0 + st.zv[:-1]
    e0 = (V[1:] - m0) / sd
    e1 = (V[1:] - m1) / sd
    out[:-1] = -0.5 * (e1 * e1 - e0 * e0) - log_ndtr(m1 / sd) + log_ndtr(m0 / sd)
    return out


def sample_variance_jump_occurrences(target: Target, st: SamplerState, rng) -> int:
    """Gibbs update of dNv_t, t >= 1, from the exact full conditionals."""
    sp = target.spec
    if not sp.dnv_free or target.prior_only or target.T < 2:
        return 0
    p = st.params
    lt = _transition_jump_logratio(target, st)
    u = rng.random(target.T)
    if sp.v_mode == 1:
        _, dinf = p.delta_inf()
        base = p.beta_vp * target.dnp + p.beta_vp_neg * target.neg
        work = np.empty(target.T)
        return kernels.sweep_dnv(st.dnv, st.dv, lt, np.ascontiguousarray(base, dtype=float),
                                 u, p.alpha_v, dinf, p.beta_vv,
                                 p.beta_vv + p.beta_vp + p.beta_vp_neg, work)
    # intensities do not depend on dNv: independent two-point conditionals
    lo = lt + np.log(st.dv) - np.log1p(-st.dv)
    prob = expit(lo)
    new = (u < prob).astype(np.int8)
    new[0] = st.dnv[0]
    flips = int(np.sum(new != st.dnv))
    st.dnv[:] = new
    return flips


# ---------------------------------------------------------------------------
# step 3: variance jump sizes


def sample_variance_jump_sizes(target: Target, st: SamplerState, rng,
                               stat: BlockStat | None = None) -> None:
    """Update Zv: prior draws where no jump is active, MH-corrected truncated
    normal draws where a jump feeds the next transition."""
    sp = target.spec
    if not sp.var_jumps:
        return
    p = st.params
    T = target.T
    fresh = rng.standard_exponential(T) * p.mu_v
    u_prop = 1.0 - rng.random(T)
    u_acc = 1.0 - rng.random(T)
    new = fresh
    if target.prior_only or T < 2:
        st.zv[:] = new
        return
    idx = np.flatnonzero(st.dnv[:-1] == 1)
    if idx.size:
        V = st.V
        m0 = (p.kappa * p.theta + p.psi * (target.x[idx] - p.mu)
              + (1 - p.kappa - p.psi * p.gamma) * V[idx])
        s2 = p.omega * V[idx]
        sd = np.sqrt(s2)
        pm = V[idx + 1] - m0 - s2 / p.mu_v
        prop = rtruncnorm_pos(pm, sd, u_prop[idx])
        old = st.zv[idx]
        la = log_ndtr((m0 + old) / sd) - log_ndtr((m0 + prop) / sd)
        ok = np.log(u_acc[idx]) < la
        new[idx] = np.where(ok, prop, old)
        if stat is not None:
            stat.proposed += idx.size
            stat.accepted += int(ok.sum())
            stat.win_proposed += idx.size
            stat.win_accepted += int(ok.sum())
    st.zv[:] = new


# ---------------------------------------------------------------------------
# step 4: static parameters


def _regression(X, y, w):
    """Weighted least squares mean and covariance (flat prior)."""
    Xw = X * w[:, None]
    prec = X.T @ Xw
    cov = np.linalg.inv(prec)
    return cov @ (Xw.T @ y), cov


def _cond_gauss(mean, cov, free, fixed_val):
    """Conditional of component ``free`` given the other component fixed."""
    j = 1 - free
    m = mean[free] + cov[free, j] / cov[j, j] * (fixed_val - mean[j])
    v = cov[free, free] - cov[free, j] ** 2 / cov[j, j]
    return m, math.sqrt(max(v, 1e-300))


def _gauss_pair_step(target, st, rng, stat, names, mean, cov, box, pinned, transform=None):
    """Independence MH using a Gaussian (possibly conditioned on a pinned
    member) truncated to ``box`` by rejection."""
    p = st.params
    pin = [n in pinned for n in names]
    if all(pin):
        return
    if transform is not None:
        cur_t = transform[0](p)
    else:
        cur_t = np.array([getattr(p, n) for n in names])
    if any(pin):
        f = pin.index(False)
        m, s = _cond_gauss(mean, cov, f, cur_t[1 - f])
        for _ in range(200):
            v = m + s * rng.standard_normal()
            prop_t = cur_t.copy()
            prop_t[f] = v
            if box[f][0] < v < box[f][1]:
                break
        else:
            stat.record(False)
            return
        lq_new = -0.5 * ((prop_t[f] - m) / s) ** 2
        lq_old = -0.5 * ((cur_t[f] - m) / s) ** 2
    else:
        L = np.linalg.cholesky(cov)
        for _ in range(200):
            prop_t = mean + L @ rng.standard_normal(2)
            if all(box[i][0] < prop_t[i] < box[i][1] for i in range(2)):
                break
        else:
            stat.record(False)
            return
        lq_new = _mvn_logpdf(prop_t, mean, L)
        lq_old = _mvn_logpdf(cur_t, mean, L)
    if transform is not None:
        new, jac = transform[1](p, prop_t, cur_t)
    else:
        new = p.with_values(names, prop_t)
        jac = 0.0
    _accept(target, st, new, lq_old - lq_new + jac, rng, stat)


def _resid_terms(target, st):
    """Common quantities of the return and transition regressions."""
    p = st.params
    V = st.V.copy()
    V[0] = p.v_bar
    jump = st.zv[:-1] * st.dnv[:-1] if target.spec.var_jumps else 0.0
    return p, V, jump


def step_mu_gamma(target, st, rng, tuner, pinned):
    stat = tuner.get("mu_gamma", "gibbs")
    p, V, jump = _resid_terms(target, st)
    x = target.x
    Vt = V[:-1]
    X1 = np.column_stack([np.ones_like(V), V])
    y1 = x
    w1 = 1.0 / V
    z = V[1:] - p.kappa * p.theta - (1 - p.kappa) * Vt - jump - p.psi * x[:-1]
    X2 = np.column_stack([-p.psi * np.ones_like(Vt), -p.psi * Vt])
    w2 = 1.0 / (p.omega * Vt)
    X = np.vstack([X1, X2])
    y = np.concatenate([y1, z])
    w = np.concatenate([w1, w2])
    mean, cov = _regression(X, y, w)
    c = target.priors
    box = ((c.mu_lo, c.mu_hi), (c.gamma_lo, c.gamma_hi))
    _gauss_pair_step(target, st, rng, stat, ("mu", "gamma"), mean, cov, box, pinned)


def step_psi_omega(target, st, rng, tuner, pinned):
    if "rho" in pinned or "sigma_v" in pinned:
        return
    stat = tuner.get("psi_omega", "gibbs")
    p, V, jump = _resid_terms(target, st)
    c = target.priors
    Vt = V[:-1]
    e = (target.x[:-1] - p.mu - p.gamma * Vt) / np.sqrt(Vt)
    y = (V[1:] - p.kappa * p.theta - (1 - p.kappa) * Vt - jump) / np.sqrt(Vt)
    k0 = c.psi_var_div
    kn = k0 + e @ e
    psin = (k0 * c.psi_mean + e @ y) / kn
    an = c.omega_shape + 0.5 * y.shape[0]
    bn = c.omega_scale + 0.5 * (y @ y + k0 * c.psi_mean ** 2 - kn * psin ** 2)
    om = bn / rng.gamma(an)
    ps = psin + math.sqrt(om / kn) * rng.standard_normal()

    def lq(ps_, om_):
        return _ig_logpdf(om_, an, bn) - 0.5 * math.log(2 * math.pi * om_ / kn) \
            - 0.5 * kn * (ps_ - psin) ** 2 / om_

    sv = math.sqrt(om + ps * ps)
    new = replace(p, sigma_v=sv, rho=ps / sv)
    _accept(target, st, new, lq(p.psi, p.omega) - lq(ps, om), rng, stat)


def step_kappa_theta(target, st, rng, tuner, pinned):
    if "kappa" in pinned and "theta" in pinned:
        return
    stat = tuner.get("kappa_theta", "gibbs")
    p, V, jump = _resid_terms(target, st)
    Vt = V[:-1]
    y = V[1:] - Vt - p.psi * (target.x[:-1] - p.mu - p.gamma * Vt) - jump
    w = 1.0 / (p.omega * Vt)
    c = target.priors
    if "theta" in pinned:
        # y = kappa (theta - V_t) + noise
        X = (p.theta - Vt)[:, None]
        mean, cov = _regression(X, y, w)
        m, s = float(mean[0]), math.sqrt(cov[0, 0])
        for _ in range(200):
            k = m + s * rng.standard_normal()
            if 0 < k < 1:
                break
        else:
            stat.record(False)
            return
        lq = (-0.5 * ((p.kappa - m) / s) ** 2) - (-0.5 * ((k - m) / s) ** 2)
        _accept(target, st, replace(p, kappa=k), lq, rng, stat)
        return
    X = np.column_stack([np.ones_like(Vt), -Vt])
    mean, cov = _regression(X, y, w)  # coordinates (a = kappa*theta, kappa)
    box = ((0.0, c.kappa_hi * c.theta_hi), (0.0, c.kappa_hi))

    def fwd(pp):
        return np.array([pp.kappa * pp.theta, pp.kappa])

    def back(pp, prop, cur):
        a, k = prop
        if not k > 0:
            return replace(pp, kappa=k, theta=math.nan), 0.0
        # density in (kappa, theta) = density in (a, kappa) * kappa
        return replace(pp, kappa=k, theta=a / k), math.log(cur[1]) - math.log(k)

    _gauss_pair_step(target, st, rng, stat, ("a", "kappa"), mean, cov, box,
                     {"kappa"} if "kappa" in pinned else set(), transform=(fwd, back))


def step_sigma_p(target, st, rng, tuner, pinned):
    if "sigma_p" in pinned or not target.spec.price_jumps:
        return
    stat = tuner.get("sigma_p", "gibbs")
    p = st.params
    c = target.priors
    V = st.V.copy()
    V[0] = p.v_bar
    j = target.dnp == 1
    e = target.zp[j] - p.mu_p - p.gamma_p * V[j]
    an = c.sigma_p2_shape + 0.5 * e.shape[0]
    bn = c.sigma_p2_scale + 0.5 * e @ e
    s2 = bn / rng.gamma(an)
    lq = _ig_logpdf(p.sigma_p ** 2, an, bn) - _ig_logpdf(s2, an, bn)
    _accept(target, st, replace(p, sigma_p=math.sqrt(s2)), lq, rng, stat)


def step_jump_mean(target, st, rng, tuner, pinned):
    if not target.spec.price_jumps or target.njump < 2:
        return
    stat = tuner.get("mu_p_gamma_p", "gibbs")
    p = st.params
    V = st.V.copy()
    V[0] = p.v_bar
    j = target.dnp == 1
    X = np.column_stack([np.ones(j.sum()), V[j]])
    mean, cov = _regression(X, target.zp[j], np.full(j.sum(), 1.0 / p.sigma_p ** 2))
    c = target.priors
    box = ((c.mu_p_lo, c.mu_p_hi), (c.gamma_p_lo, c.gamma_p_hi))
    _gauss_pair_step(target, st, rng, stat, ("mu_p", "gamma_p"), mean, cov, box, pinned)


def step_sigma_bv(target, st, rng, tuner, pinned):
    if "sigma_bv" in pinned:
        return
    stat = tuner.get("sigma_bv", "gibbs")
    p = st.params
    c = target.priors
    V = st.V.copy()
    V[0] = p.v_bar
    e = target.lnbv - np.log(V)
    an = c.sigma_bv2_shape + 0.5 * e.shape[0]
    bn = c.sigma_bv2_scale + 0.5 * e @ e
    s2 = bn / rng.gamma(an)
    lq = _ig_logpdf(p.sigma_bv ** 2, an, bn) - _ig_logpdf(s2, an, bn)
    _accept(target, st, replace(p, sigma_bv=math.sqrt(s2)), lq, rng, stat)


def step_mu_v(target, st, rng, tuner, pinned):
    """Collapsed update: sizes of inactive jumps are integrated out, then redrawn."""
    sp = target.spec
    if not sp.var_jumps or "mu_v" in pinned:
        return
    stat = tuner.get("mu_v", "gibbs")
    p = st.params
    c = target.priors
    on = st.dnv == 1
    an = c.mu_v_shape + on.sum()
    bn = c.mu_v_scale + st.zv[on].sum()
    mv = bn / rng.gamma(an)
    off = ~on

    def corr(m):
        return float(np.sum(-math.log(m) - st.zv[off] / m))

    lq = _ig_logpdf(p.mu_v, an, bn) - _ig_logpdf(mv, an, bn)
    new = replace(p, mu_v=mv)
    lp_new = target.logpost(new, st)
    _accept(target, st, new, lq, rng, stat, lp_new=lp_new,
            adjust=-corr(mv) + corr(p.mu_v))
    # refresh the integrated-out sizes and the cached posterior
    st.zv[off] = rng.standard_exponential(int(off.sum())) * st.params.mu_v
    st.logpost = target.logpost(st.params, st)


def _beta_rw(target, st, rng, tuner, name, get_u, set_u, pinned):
    """Random walk on a (0,1)-mapped scale with a beta candidate whose mode
    is the current value; the map is affine in the parameter so no Jacobian.

    The shapes are ``1 + c*u`` and ``1 + c*(1-u)``, which keeps the candidate
    unimodal when ``u`` sits close to 0 or 1 (``c*u`` alone would put a pole
    at the boundary and starve the acceptance rate).
    """
    if name in pinned:
        return
    stat = tuner.get("beta:" + name, "mh", 50.0)
    p = st.params
    u = get_u(p)
    if not 0 < u < 1:
        stat.record(False)
        return
    c = stat.scale
    a, b = 1.0 + c * u, 1.0 + c * (1 - u)
    un = rng.beta(a, b)
    if not 0 < un < 1:
        stat.record(False)
        return
    lq = _beta_logpdf(u, 1.0 + c * un, 1.0 + c * (1 - un)) - _beta_logpdf(un, a, b)
    _accept(target, st, set_u(p, un), lq, rng, stat)


def step_intensity_params(target, st, rng, tuner, pinned):
    sp = target.spec
    v = target.variant
    p = st.params
    if sp.price_jumps:
        if v == "M6" and "delta0_p" not in pinned and not target.prior_only:
            stat = tuner.get("delta0_p", "gibbs")
            c = target.priors
            k = int(target.dnp.sum())
            a_, b_ = c.delta0_a + k, c.delta0_b + target.T - k
            d = rng.beta(a_, b_)
            lq = _beta_logpdf(p.delta0_p, a_, b_) - _beta_logpdf(d, a_, b_)
            _accept(target, st, replace(p, delta0_p=d), lq, rng, stat)
        else:
            _beta_rw(target, st, rng, tuner, "delta0_p", lambda q: q.delta0_p,
                     lambda q, x: replace(q, delta0_p=x), pinned)
    if sp.var_jumps and v != "M3":
        if v == "M6" and "delta0_v" not in pinned and not target.prior_only:
            stat = tuner.get("delta0_v", "gibbs")
            c = target.priors
            k = int(st.dnv[1:].sum())
            a_, b_ = c.delta0_a + k, c.delta0_b + target.T - 1 - k
            p = st.params
            d = rng.beta(a_, b_)
            lq = _beta_logpdf(p.delta0_v, a_, b_) - _beta_logpdf(d, a_, b_)
            _accept(target, st, replace(p, delta0_v=d), lq, rng, stat)
        else:
            _beta_rw(target, st, rng, tuner, "delta0_v", lambda q: q.delta0_v,
                     lambda q, x: replace(q, delta0_v=x), pinned)
    if sp.p_mode == 1:
        # alpha on (beta, 1), beta on (0, alpha)
        _beta_rw(target, st, rng, tuner, "alpha_p",
                 lambda q: (q.alpha_p - q.beta_pp) / (1 - q.beta_pp),
                 lambda q, x: replace(q, alpha_p=q.beta_pp + x * (1 - q.beta_pp)), pinned)
        _beta_rw(target, st, rng, tuner, "beta_pp", lambda q: q.beta_pp / q.alpha_p,
                 lambda q, x: replace(q, beta_pp=x * q.alpha_p), pinned)
    if sp.v_mode == 1:
        _beta_rw(target, st, rng, tuner, "alpha_v",
                 lambda q: (q.alpha_v - q.beta_vv) / (1 - q.beta_vv),
                 lambda q, x: replace(q, alpha_v=q.beta_vv + x * (1 - q.beta_vv)), pinned)
        _beta_rw(target, st, rng, tuner, "beta_vv", lambda q: q.beta_vv / q.alpha_v,
                 lambda q, x: replace(q, beta_vv=x * q.alpha_v), pinned)
        if v in ("MF", "M1"):
            def cap_vp(q):
                room = q.delta0_v * (q.alpha_v - q.beta_vv) / q.delta0_p
                return room - q.beta_vp_neg * q.f_neg()

            _beta_rw(target, st, rng, tuner, "beta_vp", lambda q: q.beta_vp / cap_vp(q),
                     lambda q, x: replace(q, beta_vp=x * cap_vp(q)), pinned)
        if v == "MF":
            def cap_neg(q):
                return ((q.delta0_v * (q.alpha_v - q.beta_vv) - q.beta_vp * q.delta0_p)
                        / (q.f_neg() * q.delta0_p))

            _beta_rw(target, st, rng, tuner, "beta_vp_neg",
                     lambda q: q.beta_vp_neg / cap_neg(q),
                     lambda q, x: replace(q, beta_vp_neg=x * cap_neg(q)), pinned)
    if v == "M5":
        _beta_rw(target, st, rng, tuner, "alpha_p", lambda q: q.alpha_p * q.v_bar / q.delta0_p,
                 lambda q, x: replace(q, alpha_p=x * q.delta0_p / q.v_bar), pinned)
        _beta_rw(target, st, rng, tuner, "alpha_v", lambda q: q.alpha_v * q.v_bar / q.delta0_v,
                 lambda q, x: replace(q, alpha_v=x * q.delta0_v / q.v_bar), pinned)


# prior-only replacements for the data-driven proposals ---------------------

_RW_COORDS = ("mu", "gamma", "mu_p", "gamma_p", "sigma_p2", "sigma_bv2", "kappa", "theta",
              "psi", "omega", "mu_v")


def _prior_rw(target, st, rng, tuner, pinned):
    from ..priors import coord_names, to_coords, from_coords, COORD_OF

    inv = {v: k for k, v in COORD_OF.items()}
    names = [n for n in coord_names(target.variant) if n in _RW_COORDS]
    for n in names:
        nat = inv.get(n, n)
        if nat in pinned:
            continue
        stat = tuner.get("rw:" + n, "mh", 0.1 * max(abs(to_coords(st.params)[n]), 1e-3))
        cur = to_coords(st.params)
        prop = dict(cur)
        prop[n] = cur[n] + stat.scale * rng.standard_normal()
        new = from_coords(prop, target.variant, st.params)
        lp = target.logpost(new, st) if all(
            math.isfinite(getattr(new, k)) for k in new.as_dict()) else -math.inf
        _accept(target, st, new, 0.0, rng, stat, lp_new=lp)


def sample_static_params(target: Target, st: SamplerState, rng, tuner: Tuner,
                         pinned=frozenset()) -> None:
    """One pass over all static-parameter blocks, in a fixed order."""
    st.logpost = target.logpost(st.params, st)
    if not math.isfinite(st.logpost):
        raise FloatingPointError("current state has zero posterior density")
    if target.prior_only:
        _prior_rw(target, st, rng, tuner, pinned)
    else:
        step_sigma_bv(target, st, rng, tuner, pinned)
        step_mu_gamma(target, st, rng, tuner, pinned)
        step_psi_omega(target, st, rng, tuner, pinned)
        step_kappa_theta(target, st, rng, tuner, pinned)
        step_sigma_p(target, st, rng, tuner, pinned)
        step_jump_mean(target, st, rng, tuner, pinned)
        step_mu_v(target, st, rng, tuner, pinned)
    step_intensity_params(target, st, rng, tuner, pinned)
