"""Marginal likelihood by the basic marginal likelihood identity.

``log p(y) = log p(y | phi*) + log p(phi*) - log p(phi* | y)`` at a high
density point ``phi*``.  The posterior ordinate is factorised over five
parameter blocks; each factor is estimated with the Metropolis-Hastings
ordinate estimator of Chib and Jeliazkov, using a Gaussian random-walk
candidate on the block and the complete-data posterior (latent states held at
their current values) as the kernel's target.  Run ``j`` pins blocks
``1..j`` at ``phi*``; it supplies the numerator of block ``j+1`` and the
denominator of block ``j``.

The engine is written against a small adapter interface so that it can be
validated on a toy model whose marginal likelihood is known.
"""
from __future__ import annotations

import copy
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol, Sequence

import numpy as np

from .filtering import pf_loglik
from .model import VARIANTS, LatentPath, ModelParams, ObservedData, measurement_loglik
from .priors import (PriorConfig, coord_names, coords_log_jacobian, from_coords, log_prior,
                     prior_mean, to_coords)
from .sampler.chain import ChainConfig, run_chain
from .sampler.diagnostics import batch_means_se
from .sampler.steps import Target

#: posterior-ordinate blocks, in evidence coordinates
EVIDENCE_BLOCKS = (
    ("sigma_bv2", "mu_v", "delta0_p", "delta0_v", "psi", "omega", "mu_p"),
    ("alpha_p", "alpha_v", "kappa", "gamma_p"),
    ("beta_pp_ratio", "beta_vv_ratio", "theta", "sigma_p2"),
    ("beta_vp", "mu"),
    ("beta_vp_neg", "gamma"),
)

#: natural parameter names behind each evidence coordinate
_NATURAL = {"sigma_p2": ("sigma_p",), "sigma_bv2": ("sigma_bv",), "psi": ("rho", "sigma_v"),
            "omega": ("rho", "sigma_v")}


class EvidenceError(RuntimeError):
    """Failure in an evidence computation; ``block`` is the 1-based block index."""

    def __init__(self, msg, block=None):
        super().__init__(msg)
        self.block = block


# ----------------------------------------------------------------------
# results


@dataclass
class BlockOrdinate:
    names: tuple
    log_ordinate: float
    se: float
    log_numerator: float
    log_denominator: float


@dataclass
class EvidenceResult:
    model: str
    log_lik_ordinate: float
    log_prior_ordinate: float
    log_posterior_ordinate: float
    phi_star: object
    blocks: list = field(default_factory=list)
    log_lik_se: float = 0.0

    @property
    def log_marginal(self) -> float:
        return self.log_lik_ordinate + self.log_prior_ordinate - self.log_posterior_ordinate

    @property
    def se(self) -> float:
        v = self.log_lik_se ** 2 if math.isfinite(self.log_lik_se) else 0.0
        v += sum(b.se ** 2 for b in self.blocks if math.isfinite(b.se))
        return math.sqrt(v)

    def row(self) -> dict:
        return {"model": self.model, "log_ml": self.log_marginal,
                "log_lik": self.log_lik_ordinate, "log_prior": self.log_prior_ordinate,
                "log_post": self.log_posterior_ordinate, "se": self.se}


def rank_models(results: Sequence[EvidenceResult]) -> list[dict]:
    """Sort by log marginal likelihood (ties by model order); add log Bayes factors.

    Each row carries ``log_bf_vs_best`` and ``log_bf`` (a dict of pairwise
    ``logML_i - logML_j`` against every model).
    """
    def order(r):
        idx = VARIANTS.index(r.model) if r.model in VARIANTS else len(VARIANTS)
        return (-r.log_marginal, idx, r.model)

    ranked = sorted(results, key=order)
    if not ranked:
        return []
    best = ranked[0].log_marginal
    rows = []
    for k, r in enumerate(ranked, 1):
        row = r.row()
        row["rank"] = k
        row["log_bf_vs_best"] = r.log_marginal - best
        row["log_bf"] = {o.model: r.log_marginal - o.log_marginal for o in ranked}
        rows.append(row)
    return rows


# ----------------------------------------------------------------------
# generic engine


class EvidenceAdapter(Protocol):
    """What the engine needs from a model.

    ``run(fixed, seed, callback)`` runs the model's own sampler with the
    coordinates in ``fixed`` held constant and calls ``callback(coords,
    log_target, current)`` at each retained draw, where ``log_target(c)`` is
    the complete-data log posterior at coordinate vector ``c`` with the latent
    state of that draw, and ``current`` is its value at ``coords``.  ``start``
    is a full valid point that may be used to initialise the free coordinates.
    It returns the retained coordinate draws.
    """

    names: tuple
    blocks: list

    def run(self, fixed: dict, seed, callback: Callable | None,
            start: dict | None = None) -> np.ndarray: ...

    def log_prior(self, coords: dict) -> float: ...

    def log_likelihood(self, coords: dict, seed) -> tuple[float, float]: ...

    def prior_mean(self) -> dict: ...

    def label(self, coords: dict): ...


def project_to_support(coords: dict, mean: dict, valid: Callable[[dict], bool]) -> dict:
    """Shrink an invalid point toward ``mean`` until ``valid`` holds.

    Single coordinates are tried first (the smallest shrink that restores
    validity wins); if none suffices all coordinates are shrunk together.
    """
    if valid(coords):
        return dict(coords)
    grid = np.linspace(0.05, 1.0, 20)
    best = None
    for n in coords:
        for s in grid:
            c = dict(coords)
            c[n] = coords[n] + s * (mean[n] - coords[n])
            if valid(c):
                if best is None or s < best[0]:
                    best = (s, c)
                break
    if best is not None:
        return best[1]
    for s in grid:
        c = {n: coords[n] + s * (mean[n] - coords[n]) for n in coords}
        if valid(c):
            return c
    raise EvidenceError("no valid point between the posterior mean and the prior mean")


def _log_mean(logv: np.ndarray) -> tuple[float, float]:
    """log of the mean of exp(logv) and the SE of that log (batch means)."""
    logv = np.asarray(logv, dtype=float)
    if logv.size == 0 or not np.any(np.isfinite(logv)):
        return -math.inf, math.nan
    m = np.max(logv)
    w = np.exp(logv - m)
    mean = float(np.mean(w))
    se = batch_means_se(w, n_batches=min(20, max(2, w.size // 5))) / mean if w.size > 3 \
        else math.nan
    return float(m + math.log(mean)), float(se)


#: share of the marginal block covariance added to the conditional one
MARGINAL_SHARE = 0.01


@dataclass
class _Proposal:
    idx: np.ndarray
    chol: np.ndarray
    logdet: float


def _block_proposals(names, blocks, draws, scale) -> list[_Proposal]:
    """Random-walk candidates from the conditional posterior covariance of each block.

    A share of the block's marginal covariance is mixed in: when a block is
    nearly a deterministic function of the others (a binding restriction),
    the conditional covariance collapses and the candidate density at phi*
    underflows for every reduced-run draw.
    """
    cov = np.atleast_2d(np.cov(draws, rowvar=False))
    d = len(names)
    sd = np.sqrt(np.maximum(np.diag(cov), 0.0))
    tiny = np.maximum(1e-12, 1e-6 * np.abs(draws).mean(axis=0))
    cov = cov + np.diag(np.where(sd > 0, 1e-9 * sd ** 2, tiny ** 2))
    out = []
    for blk in blocks:
        idx = np.array([names.index(n) for n in blk])
        rest = np.setdiff1d(np.arange(d), idx)
        c = marg = cov[np.ix_(idx, idx)]
        if rest.size:
            crr = cov[np.ix_(rest, rest)]
            cbr = cov[np.ix_(idx, rest)]
            c = c - cbr @ np.linalg.solve(crr, cbr.T) + MARGINAL_SHARE * marg
        c = 0.5 * (c + c.T)
        w, v = np.linalg.eigh(c)
        floor = 1e-6 * max(w.max(), 1e-300)
        c = (v * np.maximum(w, floor)) @ v.T
        c *= scale ** 2 * 2.38 ** 2 / len(idx)
        L = np.linalg.cholesky(c)
        out.append(_Proposal(idx, L, float(2 * np.sum(np.log(np.diag(L))))))
    return out


def _log_q(prop: _Proposal, frm: np.ndarray, to: np.ndarray) -> float:
    z = np.linalg.solve(prop.chol, to - frm)
    k = len(z)
    return float(-0.5 * (k * math.log(2 * math.pi) + prop.logdet + z @ z))


def _seq(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def _ordinate_run(adapter, j: int, star: np.ndarray, props, seed) -> tuple:
    """Run ``j`` (blocks < j pinned) and collect CJ numerator/denominator terms."""
    names = adapter.names
    K = len(props)
    fixed = {}
    for b in range(j):
        for i in props[b].idx:
            fixed[names[i]] = float(star[i])
    rng = np.random.default_rng(_seq(seed).spawn(1)[0])
    num, den = [], []

    def cb(coords, log_target, current):
        if j < K:
            p = props[j]
            prop = coords.copy()
            prop[p.idx] = star[p.idx]
            lt = log_target(prop)
            la = min(0.0, lt - current) if math.isfinite(lt) else -math.inf
            num.append(la + _log_q(p, coords[p.idx], star[p.idx]))
        if j > 0:
            p = props[j - 1]
            prop = coords.copy()
            prop[p.idx] = star[p.idx] + p.chol @ rng.standard_normal(len(p.idx))
            lt = log_target(prop)
            den.append(min(0.0, lt - current) if math.isfinite(lt) else -math.inf)

    try:
        adapter.run(fixed, seed, cb, start=dict(zip(names, star)))
    except Exception as exc:  # reduced run failure names the block it serves
        raise EvidenceError(f"reduced run for block {max(j, 1)} failed: {exc}",
                            block=max(j, 1)) from exc
    return np.array(num), np.array(den)


def chib_jeliazkov(adapter: EvidenceAdapter, seed: int = 0, scale: float = 1.0,
                   jobs: int = 1, star: dict | None = None, main_draws=None):
    """Posterior ordinate at ``phi*`` plus the pieces of the identity.

    Returns ``(star_coords, log_posterior_ordinate, blocks, main_draws)``.
    """
    names = tuple(adapter.names)
    blocks = [tuple(b) for b in adapter.blocks if len(b)]
    seeds = _seq(seed).spawn(len(blocks) + 3)
    if main_draws is None:
        main_draws = np.asarray(adapter.run({}, seeds[0], None))
    if star is None:
        raw = dict(zip(names, main_draws.mean(axis=0)))
        star = project_to_support(raw, adapter.prior_mean(),
                                  lambda c: math.isfinite(adapter.log_prior(c)))
    star_v = np.array([star[n] for n in names], dtype=float)
    props = _block_proposals(list(names), blocks, main_draws, scale)
    K = len(blocks)
    args = [(adapter, j, star_v, props, seeds[j + 1]) for j in range(K + 1)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outs = list(ex.map(_ordinate_run_star, args))
    else:
        outs = [_ordinate_run(*a) for a in args]
    res = []
    total = 0.0
    for k in range(K):
        ln, sn = _log_mean(outs[k][0])
        ld, sd = _log_mean(outs[k + 1][1])
        if not (math.isfinite(ln) and math.isfinite(ld)):
            raise EvidenceError(f"block {k + 1} ordinate is not finite "
                                f"(numerator {ln}, denominator {ld})", block=k + 1)
        se = math.sqrt(np.nan_to_num(sn) ** 2 + np.nan_to_num(sd) ** 2)
        res.append(BlockOrdinate(blocks[k], ln - ld, se, ln, ld))
        total += ln - ld
    return star, total, res, main_draws


def _ordinate_run_star(a):
    return _ordinate_run(*a)


def marginal_likelihood(adapter: EvidenceAdapter, model: str = "", seed: int = 0,
                        scale: float = 1.0, jobs: int = 1) -> EvidenceResult:
    """Assemble the identity for any adapter."""
    star, lpost, blocks, _ = chib_jeliazkov(adapter, seed=seed, scale=scale, jobs=jobs)
    ll, se = adapter.log_likelihood(star, _seq(seed).spawn(len(blocks) + 4)[-1])
    return EvidenceResult(model, float(ll), float(adapter.log_prior(star)), float(lpost),
                          adapter.label(star), blocks, float(se))


# ----------------------------------------------------------------------
# likelihood ordinate by latent averaging


def likelihood_ordinate(data: ObservedData, phi_star: ModelParams,
                        latent_draws: Sequence) -> tuple[float, float]:
    """Log of the average, over latent draws, of the measurement likelihood.

    Each draw supplies a variance path (a :class:`LatentPath` or an array).
    The average is taken in log space with a max shift; the SE is the delta
    method SE of the log of the average.  For unbiasedness the draws must come
    from the latent distribution given ``phi_star`` alone; the estimator is
    generic and does not check this.
    """
    vals = []
    for d in latent_draws:
        V = d.V if isinstance(d, LatentPath) else np.asarray(d, dtype=float)
        V = V.copy()
        V[0] = phi_star.v_bar
        vals.append(float(np.sum(measurement_loglik(phi_star, data, V))))
    vals = np.array(vals)
    if vals.size == 0 or not np.any(np.isfinite(vals)):
        raise EvidenceError("ordinate underflow")
    m = vals.max()
    w = np.exp(vals - m)
    est = float(m + math.log(w.mean()))
    se = float(w.std(ddof=1) / math.sqrt(w.size) / w.mean()) if w.size > 1 else 0.0
    return est, se


# ----------------------------------------------------------------------
# the model adapter


@dataclass(frozen=True)
class EvidenceConfig:
    """Settings of the evidence computation beyond the chain settings.

    ``reduced_burn_in`` defaults to the main run's burn-in; reduced runs keep
    the main run's ``keep``/``thin``.  ``scale`` multiplies the random-walk
    candidate covariance.
    """

    n_particles: int = 2000
    lik_reps: int = 4
    reduced_burn_in: int | None = None
    scale: float = 0.5

    @classmethod
    def from_mapping(cls, m) -> "EvidenceConfig":
        kw = {}
        for k, v in m.items():
            if k not in cls.__dataclass_fields__:
                raise KeyError(f"unknown evidence setting: {k}")
            kw[k] = float(v) if k == "scale" else int(v)
        return cls(**kw)


class ModelAdapter:
    """Adapter binding the engine to the hybrid sampler for one variant."""

    def __init__(self, data: ObservedData, variant: str, priors: PriorConfig | None = None,
                 chain_cfg: ChainConfig = ChainConfig(), ev_cfg: EvidenceConfig = EvidenceConfig()):
        self.data = data
        self.variant = variant
        self.priors = priors if priors is not None else PriorConfig()
        self.chain_cfg = chain_cfg
        self.ev_cfg = ev_cfg
        self.names = coord_names(variant)
        self.blocks = [tuple(n for n in b if n in self.names) for b in EVIDENCE_BLOCKS]
        self.main = None

    # coordinate helpers
    def params(self, coords: dict, base: ModelParams | None = None) -> ModelParams:
        return from_coords(coords, self.variant, base)

    def label(self, coords: dict) -> ModelParams:
        return self.params(coords)

    def log_prior(self, coords: dict) -> float:
        try:
            p = self.params(coords)
        except (ValueError, ZeroDivisionError):
            return -math.inf
        if not p.is_valid():
            return -math.inf
        return log_prior(p, self.priors) + coords_log_jacobian(p)

    def prior_mean(self) -> dict:
        return prior_mean(self.variant, self.priors)

    def log_likelihood(self, coords: dict, seed) -> tuple[float, float]:
        p = self.params(coords).check()
        s = int(_seq(seed).generate_state(1)[0])
        return pf_loglik(p, self.data, self.ev_cfg.n_particles, seed=s, reps=self.ev_cfg.lik_reps)

    def run(self, fixed: dict, seed, callback, start=None):
        seed_int = int(_seq(seed).generate_state(1)[0])
        pinned = sorted({m for n in fixed for m in _NATURAL.get(n, (n,))})
        if not fixed:
            cfg = replace(self.chain_cfg, seed=seed_int)
            if self.main is None:
                out = run_chain(self.data, self.variant, self.priors, cfg,
                                callback=self._wrap(callback))
                self.main = out
            else:
                cfg = replace(cfg, burn_in=self._reduced_burn())
                out = run_chain(self.data, self.variant, self.priors, cfg,
                                state=self.main.final_state, tuner=copy.deepcopy(self.main.tuner),
                                callback=self._wrap(callback))
        else:
            if self.main is None:
                raise EvidenceError("reduced runs need the main run first")
            base = self.main.final_state.params
            init = self.params({**to_coords(base), **fixed}, base)
            if not init.is_valid() and start is not None:
                init = self.params({**start, **fixed}, base)
            cfg = replace(self.chain_cfg, seed=seed_int, burn_in=self._reduced_burn())
            out = run_chain(self.data, self.variant, self.priors, cfg, init=init, pinned=pinned,
                            state=self.main.final_state, tuner=copy.deepcopy(self.main.tuner),
                            callback=self._wrap(callback))
        return np.array([[to_coords(out.params_at(i))[n] for n in self.names]
                         for i in range(out.draws.shape[0])])

    def _reduced_burn(self) -> int:
        b = self.ev_cfg.reduced_burn_in
        return self.chain_cfg.burn_in if b is None else int(b)

    def _wrap(self, callback):
        if callback is None:
            return None
        target = Target(self.data, self.variant, self.priors)
        names = self.names

        def cb(st, k):
            coords = np.array([to_coords(st.params)[n] for n in names])

            def log_target(c):
                try:
                    p = from_coords(dict(zip(names, c)), self.variant, st.params)
                except (ValueError, ZeroDivisionError):
                    return -math.inf
                lp = target.logpost(p, st)
                return lp + coords_log_jacobian(p) if math.isfinite(lp) else -math.inf

            callback(coords, log_target, st.logpost + coords_log_jacobian(st.params))

        return cb


def posterior_ordinate(data: ObservedData, phi_star: ModelParams, variant: str,
                       priors: PriorConfig | None = None, chain_cfg: ChainConfig = ChainConfig(),
                       ev_cfg: EvidenceConfig = EvidenceConfig(), seed: int = 0,
                       jobs: int = 1) -> tuple[float, list]:
    """Log posterior ordinate at ``phi_star`` and the per-block estimates."""
    ad = ModelAdapter(data, variant, priors, chain_cfg, ev_cfg)
    star = to_coords(phi_star)
    _, lpost, blocks, _ = chib_jeliazkov(ad, seed=seed, scale=ev_cfg.scale, jobs=jobs, star=star)
    return lpost, blocks


def log_marginal_likelihood(data: ObservedData, variant: str, priors: PriorConfig | None = None,
                            chain_cfg: ChainConfig = ChainConfig(),
                            ev_cfg: EvidenceConfig = EvidenceConfig(), seed: int = 0,
                            jobs: int = 1) -> EvidenceResult:
    """Log marginal likelihood of one variant at the projected posterior mean."""
    ad = ModelAdapter(data, variant, priors, chain_cfg, ev_cfg)
    s_main, s_cj, s_lik = _seq(seed).spawn(3)
    main = np.asarray(ad.run({}, s_main, None))
    raw = dict(zip(ad.names, main.mean(axis=0)))
    star = project_to_support(raw, ad.prior_mean(), lambda c: math.isfinite(ad.log_prior(c)))
    _, lpost, blocks, _ = chib_jeliazkov(ad, seed=s_cj, scale=ev_cfg.scale, jobs=jobs, star=star,
                                         main_draws=main)
    ll, se = ad.log_likelihood(star, s_lik)
    return EvidenceResult(variant, float(ll), float(ad.log_prior(star)), float(lpost),
                          ad.params(star), blocks, float(se))


# ----------------------------------------------------------------------
# toy model with a known answer


class LinearGaussianToy:
    """Latent linear-Gaussian model used to validate the engine.

    ``y_i = z_i + e_i`` with ``e_i ~ N(0, s2)`` and latent
    ``z_i ~ N(a + b x_i, tau2)``; independent priors ``a ~ N(m_a, v_a)``,
    ``b ~ N(m_b, v_b)``.  The sampler is Gibbs over ``z``, ``a`` and ``b``;
    blocks are ``(a,)`` and ``(b,)``.  Draws after burn-in are thinned by one.
    """

    names = ("a", "b")
    blocks = [("a",), ("b",)]

    def __init__(self, y, x, s2=0.5, tau2=0.5, m_a=0.0, v_a=4.0, m_b=0.0, v_b=4.0,
                 burn_in=500, keep=5000):
        self.y = np.asarray(y, dtype=float)
        self.x = np.asarray(x, dtype=float)
        self.s2, self.tau2 = float(s2), float(tau2)
        self.m = np.array([m_a, m_b], dtype=float)
        self.v = np.array([v_a, v_b], dtype=float)
        self.burn_in, self.keep = int(burn_in), int(keep)

    @classmethod
    def simulate(cls, n=50, a=0.5, b=-1.0, seed=0, **kw):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(n)
        s2, tau2 = kw.get("s2", 0.5), kw.get("tau2", 0.5)
        z = a + b * x + math.sqrt(tau2) * rng.standard_normal(n)
        return cls(z + math.sqrt(s2) * rng.standard_normal(n), x, **kw)

    def label(self, coords: dict) -> dict:
        return dict(coords)

    def prior_mean(self) -> dict:
        return {"a": self.m[0], "b": self.m[1]}

    def log_prior(self, coords: dict) -> float:
        c = np.array([coords["a"], coords["b"]])
        return float(np.sum(-0.5 * np.log(2 * np.pi * self.v) - 0.5 * (c - self.m) ** 2 / self.v))

    def _loglik_ab(self, a, b) -> float:
        var = self.tau2 + self.s2
        e = self.y - a - b * self.x
        return float(-0.5 * np.sum(np.log(2 * np.pi * var) + e * e / var))

    def log_likelihood(self, coords: dict, seed=None) -> tuple[float, float]:
        return self._loglik_ab(coords["a"], coords["b"]), 0.0

    def _complete(self, c, z) -> float:
        e = z - c[0] - c[1] * self.x
        return float(self.log_prior({"a": c[0], "b": c[1]})
                     - 0.5 * np.sum(np.log(2 * np.pi * self.tau2) + e * e / self.tau2)
                     - 0.5 * np.sum(np.log(2 * np.pi * self.s2) + (self.y - z) ** 2 / self.s2))

    def run(self, fixed: dict, seed, callback, start=None) -> np.ndarray:
        rng = np.random.default_rng(_seq(seed))
        c = np.array([fixed.get("a", self.m[0]), fixed.get("b", self.m[1])])
        free = [i for i, n in enumerate(self.names) if n not in fixed]
        X = np.column_stack([np.ones_like(self.x), self.x])
        zv = 1.0 / (1.0 / self.s2 + 1.0 / self.tau2)
        out = np.empty((self.keep, 2))
        for it in range(self.burn_in + self.keep):
            zm = zv * (self.y / self.s2 + (c[0] + c[1] * self.x) / self.tau2)
            z = zm + math.sqrt(zv) * rng.standard_normal(self.y.size)
            for i in free:
                o = 1 - i
                resid = z - c[o] * X[:, o]
                prec = 1.0 / self.v[i] + np.sum(X[:, i] ** 2) / self.tau2
                mean = (self.m[i] / self.v[i] + np.sum(X[:, i] * resid) / self.tau2) / prec
                c[i] = mean + rng.standard_normal() / math.sqrt(prec)
            if it >= self.burn_in:
                out[it - self.burn_in] = c
                if callback is not None:
                    zz = z.copy()
                    callback(c.copy(), lambda cc, zz=zz: self._complete(cc, zz),
                             self._complete(c, zz))
        return out

    def exact_log_marginal(self) -> float:
        """Closed form: y ~ N(X m, X diag(v) X' + (tau2 + s2) I)."""
        X = np.column_stack([np.ones_like(self.x), self.x])
        cov = (X * self.v) @ X.T + (self.tau2 + self.s2) * np.eye(self.y.size)
        from scipy.stats import multivariate_normal

        return float(multivariate_normal(X @ self.m, cov).logpdf(self.y))

    def quadrature_log_marginal(self, width: float = 10.0, n: int = 401) -> float:
        """Log marginal by tensor-grid quadrature over (a, b) around the posterior mode."""
        from scipy.integrate import simpson

        X = np.column_stack([np.ones_like(self.x), self.x])
        prec = np.diag(1 / self.v) + X.T @ X / (self.tau2 + self.s2)
        cov = np.linalg.inv(prec)
        mode = cov @ (self.m / self.v + X.T @ self.y / (self.tau2 + self.s2))
        sd = np.sqrt(np.diag(cov))
        ga = np.linspace(mode[0] - width * sd[0], mode[0] + width * sd[0], n)
        gb = np.linspace(mode[1] - width * sd[1], mode[1] + width * sd[1], n)
        A, B = np.meshgrid(ga, gb, indexing="ij")
        var = self.tau2 + self.s2
        E = self.y[None, None, :] - A[..., None] - B[..., None] * self.x[None, None, :]
        ll = -0.5 * np.sum(np.log(2 * np.pi * var) + E * E / var, axis=2)
        lp = (-0.5 * np.log(2 * np.pi * self.v[0]) - 0.5 * (A - self.m[0]) ** 2 / self.v[0]
              - 0.5 * np.log(2 * np.pi * self.v[1]) - 0.5 * (B - self.m[1]) ** 2 / self.v[1])
        f = ll + lp
        mx = f.max()
        return float(mx + np.log(simpson(simpson(np.exp(f - mx), x=gb, axis=1), x=ga)))
