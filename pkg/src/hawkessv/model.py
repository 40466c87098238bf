"""Parameter vector, data and latent containers, intensity recursions and
densities of the discretised jump model.

Time is indexed from 0 in code; day 0 carries the initial conditions
(``V_0 = theta + mu_v * delta0_v / kappa``, ``delta_0 = delta0`` and
``dNv_0 = dNp_0``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping

import numpy as np
from scipy.special import log_ndtr, ndtr

from . import kernels

EPS = 1e-10

VARIANTS = ("MF", "M1", "M2", "M3", "M4", "M5", "M6", "M7")

PARAM_NAMES = (
    "mu", "gamma", "mu_p", "gamma_p", "sigma_p", "sigma_bv",
    "kappa", "theta", "sigma_v", "rho",
    "delta0_p", "alpha_p", "beta_pp",
    "delta0_v", "alpha_v", "beta_vv", "beta_vp", "beta_vp_neg", "mu_v",
)

_BASE = ("mu", "gamma", "mu_p", "gamma_p", "sigma_p", "sigma_bv", "kappa", "theta",
         "sigma_v", "rho")

FREE_PARAMS = {
    "MF": PARAM_NAMES,
    "M1": tuple(n for n in PARAM_NAMES if n != "beta_vp_neg"),
    "M2": tuple(n for n in PARAM_NAMES if n not in ("beta_vp", "beta_vp_neg")),
    "M3": _BASE + ("delta0_p", "alpha_p", "beta_pp", "mu_v"),
    "M4": _BASE + ("delta0_p", "alpha_p", "beta_pp"),
    "M5": _BASE + ("delta0_p", "alpha_p", "delta0_v", "alpha_v", "mu_v"),
    "M6": _BASE + ("delta0_p", "delta0_v", "mu_v"),
    "M7": ("mu", "gamma", "sigma_bv", "kappa", "theta", "sigma_v", "rho"),
}


class InvalidParameters(ValueError):
    """Raised when a parameter vector violates the model restrictions."""


@dataclass(frozen=True)
class VariantSpec:
    """Structural switches derived from a variant tag."""

    price_jumps: bool
    var_jumps: bool
    p_mode: int  # 0 none, 1 self-exciting, 2 linear in V, 3 constant
    v_mode: int  # 0 none, 1 self-exciting, 2 linear in V, 3 constant, 4 equal to dNp
    dnv_free: bool

    @property
    def dnv_bern(self) -> bool:
        return self.dnv_free


_SPECS = {
    "MF": VariantSpec(True, True, 1, 1, True),
    "M1": VariantSpec(True, True, 1, 1, True),
    "M2": VariantSpec(True, True, 1, 1, True),
    "M3": VariantSpec(True, True, 1, 4, False),
    "M4": VariantSpec(True, False, 1, 0, False),
    "M5": VariantSpec(True, True, 2, 2, True),
    "M6": VariantSpec(True, True, 3, 3, True),
    "M7": VariantSpec(False, False, 0, 0, False),
}


def variant_spec(variant: str) -> VariantSpec:
    try:
        return _SPECS[variant]
    except KeyError:
        raise ValueError(f"unknown model variant {variant!r}; expected one of {VARIANTS}") from None


@dataclass(frozen=True)
class ModelParams:
    """Static parameters. Parameters absent from the variant are held at 0.

    For M5, ``alpha_p`` and ``alpha_v`` are the slopes of the intensities in
    V; the intercepts follow from matching ``delta0`` at the stationary
    variance (see :attr:`alpha_p0`).
    """

    mu: float = 0.0
    gamma: float = 0.0
    mu_p: float = 0.0
    gamma_p: float = 0.0
    sigma_p: float = 1.0
    sigma_bv: float = 0.5
    kappa: float = 0.1
    theta: float = 0.01
    sigma_v: float = 0.01
    rho: float = 0.0
    delta0_p: float = 0.0
    alpha_p: float = 0.0
    beta_pp: float = 0.0
    delta0_v: float = 0.0
    alpha_v: float = 0.0
    beta_vv: float = 0.0
    beta_vp: float = 0.0
    beta_vp_neg: float = 0.0
    mu_v: float = 0.0
    variant: str = "MF"

    def __post_init__(self):
        variant_spec(self.variant)

    # derived quantities -------------------------------------------------
    @property
    def spec(self) -> VariantSpec:
        return variant_spec(self.variant)

    @property
    def free_names(self) -> tuple:
        return FREE_PARAMS[self.variant]

    @property
    def psi(self) -> float:
        return self.sigma_v * self.rho

    @property
    def omega(self) -> float:
        return self.sigma_v ** 2 * (1.0 - self.rho ** 2)

    @property
    def v_bar(self) -> float:
        """Stationary mean variance, also the initial value V_0."""
        if self.variant == "M3":
            return self.theta + self.mu_v * self.delta0_p / self.kappa
        if self.spec.var_jumps:
            return self.theta + self.mu_v * self.delta0_v / self.kappa
        return self.theta

    @property
    def alpha_p0(self) -> float:
        return self.delta0_p - self.alpha_p * self.v_bar

    @property
    def alpha_v0(self) -> float:
        return self.delta0_v - self.alpha_v * self.v_bar

    # conversions ----------------------------------------------------------
    def as_dict(self) -> dict:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def vector(self, names: Iterable[str] | None = None) -> np.ndarray:
        names = self.free_names if names is None else names
        return np.array([getattr(self, n) for n in names], dtype=float)

    def with_values(self, names: Iterable[str], values) -> "ModelParams":
        return replace(self, **{n: float(v) for n, v in zip(names, values)})

    def restricted(self) -> "ModelParams":
        """Copy with every parameter absent from the variant set to zero."""
        keep = set(self.free_names)
        return replace(self, **{n: 0.0 for n in PARAM_NAMES if n not in keep})

    def to_text(self) -> str:
        lines = [f"variant={self.variant}"]
        lines += [f"{n}={getattr(self, n)!r}" for n in PARAM_NAMES]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelParams":
        kv = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            kv[k.strip()] = v.strip()
        return cls.from_mapping(kv)

    @classmethod
    def from_mapping(cls, m: Mapping) -> "ModelParams":
        kw = {n: float(m[n]) for n in PARAM_NAMES if n in m}
        if "variant" in m:
            kw["variant"] = str(m["variant"])
        unknown = set(m) - set(PARAM_NAMES) - {"variant"}
        if unknown:
            raise KeyError(f"unknown parameter names: {sorted(unknown)}")
        return cls(**kw)

    # restrictions ----------------------------------------------------------
    def violation(self) -> str | None:
        """Return a description of the first violated restriction, or None."""
        v = self.variant
        vals = self.as_dict()
        if not all(math.isfinite(x) for x in vals.values()):
            return "non-finite parameter"
        if v != "M7" and not self.sigma_p > 0:
            return "sigma_p must be positive"
        if not self.sigma_bv > 0:
            return "sigma_bv must be positive"
        if not self.sigma_v > 0:
            return "sigma_v must be positive"
        if not 0 < self.kappa < 1:
            return "kappa must lie in (0, 1)"
        if not self.theta > 0:
            return "theta must be positive"
        if not -1 < self.rho < 1:
            return "rho must lie in (-1, 1)"
        if not self.sigma_v ** 2 <= 2 * self.kappa * self.theta:
            return "Feller condition sigma_v^2 <= 2 kappa theta violated"
        for n in PARAM_NAMES:
            if n not in self.free_names and vals[n] != 0.0:
                return f"{n} must be 0 under {v}"
        sp = self.spec
        if sp.price_jumps and not 0 < self.delta0_p < 1:
            return "delta0_p must lie in (0, 1)"
        if sp.var_jumps and v != "M3":
            if not 0 < self.delta0_v < 1:
                return "delta0_v must lie in (0, 1)"
            if not self.mu_v > 0:
                return "mu_v must be positive"
        if v == "M3" and not self.mu_v > 0:
            return "mu_v must be positive"
        if sp.p_mode == 1 and not 0 < self.beta_pp < self.alpha_p < 1:
            return "nonstationary intensity configuration: need 0 < beta_pp < alpha_p < 1"
        if sp.v_mode == 1:
            if not 0 < self.beta_vv < self.alpha_v < 1:
                return "nonstationary intensity configuration: need 0 < beta_vv < alpha_v < 1"
            if self.beta_vp < 0 or self.beta_vp_neg < 0:
                return "beta_vp and beta_vp_neg must be nonnegative"
            if not self.delta_inf()[1] > 0:
                return "nonstationary intensity configuration: delta_inf_v <= 0"
        if v == "M5":
            vb = self.v_bar
            if not 0 <= self.alpha_p <= self.delta0_p / vb:
                return "M5 slope alpha_p outside [0, delta0_p / v_bar]"
            if not 0 <= self.alpha_v <= self.delta0_v / vb:
                return "M5 slope alpha_v outside [0, delta0_v / v_bar]"
        return None

    def is_valid(self) -> bool:
        return self.violation() is None

    def check(self) -> "ModelParams":
        msg = self.violation()
        if msg is not None:
            raise InvalidParameters(msg)
        return self

    def f_neg(self) -> float:
        """P(Zp < 0) at the stationary variance."""
        if self.sigma_p <= 0:
            return 0.5
        return float(ndtr(-(self.mu_p + self.gamma_p * self.v_bar) / self.sigma_p))

    def delta_inf(self) -> tuple[float, float]:
        """Long-run intensity levels of the self-exciting recursions (unchecked)."""
        sp = self.spec
        dp = dv = 0.0
        if sp.p_mode == 1:
            dp = self.delta0_p * (self.alpha_p - self.beta_pp) / self.alpha_p
        if sp.v_mode == 1:
            num = (self.delta0_v * (self.alpha_v - self.beta_vv) - self.beta_vp * self.delta0_p
                   - self.beta_vp_neg * self.f_neg() * self.delta0_p)
            dv = num / self.alpha_v
        return dp, dv


#: Parameter values reported for the full model on the S&P 500 sample.
TABLE2 = ModelParams(
    mu=0.179, gamma=-7.683, mu_p=0.353, gamma_p=-13.43, sigma_p=1.773, sigma_bv=0.468,
    kappa=0.101, theta=0.0078, sigma_v=0.016, rho=-0.328,
    delta0_p=0.104, alpha_p=0.095, beta_pp=0.059,
    delta0_v=0.058, alpha_v=0.041, beta_vv=0.032, beta_vp=4.79e-4, beta_vp_neg=1.04e-3,
    mu_v=0.021, variant="MF",
)


def table2_params(variant: str = "MF") -> ModelParams:
    """Full-model values mapped to ``variant`` (absent parameters zeroed).

    M5 slopes are set to half their upper bound ``delta0 / v_bar`` (the reference
    values have no M5 counterpart); M3 keeps the price-intensity parameters.
    """
    p = replace(TABLE2, variant=variant).restricted()
    if variant == "M5":
        p = replace(p, alpha_p=0.0, alpha_v=0.0)
        vb = p.v_bar
        p = replace(p, alpha_p=0.5 * p.delta0_p / vb, alpha_v=0.5 * p.delta0_v / vb)
    return p


# ---------------------------------------------------------------------------
# containers


@dataclass
class ObservedData:
    """Daily observables: returns, log bipower variation and extracted jumps."""

    r: np.ndarray
    lnbv: np.ndarray
    dnp: np.ndarray
    zp: np.ndarray
    dates: np.ndarray = field(default=None)

    def __post_init__(self):
        self.r = np.ascontiguousarray(self.r, dtype=float)
        self.lnbv = np.ascontiguousarray(self.lnbv, dtype=float)
        self.dnp = np.ascontiguousarray(self.dnp, dtype=np.int8)
        zp = np.ascontiguousarray(self.zp, dtype=float).copy()
        zp[self.dnp == 0] = 0.0
        self.zp = zp
        n = self.r.shape[0]
        if self.dates is None:
            # zero-padded so that lexical order (e.g. of day files) is day order
            w = len(str(n))
            self.dates = np.array([f"{i + 1:0{w}d}" for i in range(n)])
        else:
            self.dates = np.asarray(self.dates).astype(str)
        if not (self.lnbv.shape[0] == self.dnp.shape[0] == self.zp.shape[0]
                == self.dates.shape[0] == n):
            raise ValueError("observed series must have equal lengths")
        if not np.all((self.dnp == 0) | (self.dnp == 1)):
            raise ValueError("dnp must be 0/1")
        if not (np.all(np.isfinite(self.r)) and np.all(np.isfinite(self.lnbv))
                and np.all(np.isfinite(self.zp))):
            raise ValueError("observed series must be finite")

    def __len__(self) -> int:
        return self.r.shape[0]

    @property
    def T(self) -> int:
        return len(self)

    @property
    def dnp_neg(self) -> np.ndarray:
        return ((self.dnp == 1) & (self.zp < 0)).astype(np.int8)

    def diffusive_return(self, price_jumps: bool = True) -> np.ndarray:
        """Return net of the price jump (the raw return when jumps are off)."""
        if not price_jumps:
            return self.r.copy()
        return self.r - self.zp * self.dnp

    def slice(self, start: int, stop: int) -> "ObservedData":
        return ObservedData(self.r[start:stop], self.lnbv[start:stop], self.dnp[start:stop],
                            self.zp[start:stop], self.dates[start:stop])


@dataclass
class LatentPath:
    """Latent variance path, variance-jump sizes/occurrences and intensities."""

    V: np.ndarray
    zv: np.ndarray
    dnv: np.ndarray
    delta_p: np.ndarray
    delta_v: np.ndarray

    def __post_init__(self):
        self.V = np.ascontiguousarray(self.V, dtype=float)
        self.zv = np.ascontiguousarray(self.zv, dtype=float)
        self.dnv = np.ascontiguousarray(self.dnv, dtype=np.int8)
        self.delta_p = np.ascontiguousarray(self.delta_p, dtype=float)
        self.delta_v = np.ascontiguousarray(self.delta_v, dtype=float)

    def copy(self) -> "LatentPath":
        return LatentPath(self.V.copy(), self.zv.copy(), self.dnv.copy(),
                          self.delta_p.copy(), self.delta_v.copy())


# ---------------------------------------------------------------------------
# intensities


def invert_unconditional(params: ModelParams) -> tuple[float, float]:
    """Long-run levels (delta_inf_p, delta_inf_v) from the unconditional means."""
    p = params
    sp = p.spec
    if sp.p_mode == 1 and not 0 < p.beta_pp < p.alpha_p < 1:
        if not (p.beta_pp == 0 and 0 < p.alpha_p < 1):
            raise InvalidParameters("nonstationary intensity configuration")
    if sp.v_mode == 1 and not (0 <= p.beta_vv < p.alpha_v < 1 and p.beta_vp >= 0
                               and p.beta_vp_neg >= 0):
        raise InvalidParameters("nonstationary intensity configuration")
    dp, dv = p.delta_inf()
    if sp.p_mode != 1:
        dp = p.delta0_p if sp.price_jumps else 0.0
    if sp.v_mode != 1:
        dv = p.delta0_v if sp.v_mode in (2, 3) else 0.0
    if sp.p_mode == 1 and not 0 < dp < 1:
        raise InvalidParameters("nonstationary intensity configuration")
    if sp.v_mode == 1 and not 0 < dv < 1:
        raise InvalidParameters("nonstationary intensity configuration")
    return dp, dv


def f_zp_at_zero(params: ModelParams, V_path) -> float:
    """P(Zp < 0) averaged over a variance path."""
    V = np.asarray(V_path, dtype=float)
    if V.size == 0 or np.any(V <= 0):
        raise ValueError("V_path must be nonempty and positive")
    return float(np.mean(ndtr(-(params.mu_p + params.gamma_p * V) / params.sigma_p)))


def _hawkes(alpha, dinf, d1, drive):
    out = np.empty(drive.shape[0])
    kernels.hawkes_path(float(alpha), float(dinf), float(d1),
                        np.ascontiguousarray(drive, dtype=float), out)
    return out


def price_intensity(params: ModelParams, dnp, V=None) -> np.ndarray:
    p = params
    sp = p.spec
    dnp = np.asarray(dnp)
    n = dnp.shape[0]
    if sp.p_mode == 0:
        return np.zeros(n)
    if sp.p_mode == 1:
        dinf = p.delta0_p * (p.alpha_p - p.beta_pp) / p.alpha_p
        return _hawkes(p.alpha_p, dinf, p.delta0_p, p.beta_pp * dnp.astype(float))
    if sp.p_mode == 2:
        if V is None:
            raise ValueError("M5 intensities require the variance path")
        return np.clip(p.alpha_p0 + p.alpha_p * np.asarray(V, dtype=float), EPS, 1 - EPS)
    return np.full(n, min(max(p.delta0_p, EPS), 1 - EPS))


def variance_drive(params: ModelParams, dnp, zp) -> np.ndarray:
    """Excitation of the variance intensity from price jumps (without dNv)."""
    dnp = np.asarray(dnp)
    neg = (dnp == 1) & (np.asarray(zp) < 0)
    return params.beta_vp * dnp + params.beta_vp_neg * neg


def variance_intensity(params: ModelParams, dnp, zp, dnv, V=None) -> np.ndarray:
    p = params
    sp = p.spec
    n = np.asarray(dnp).shape[0]
    if sp.v_mode in (0, 4):
        return np.zeros(n)
    if sp.v_mode == 1:
        _, dinf = p.delta_inf()
        drive = variance_drive(p, dnp, zp) + p.beta_vv * np.asarray(dnv, dtype=float)
        return _hawkes(p.alpha_v, dinf, p.delta0_v, drive)
    if sp.v_mode == 2:
        if V is None:
            raise ValueError("M5 intensities require the variance path")
        return np.clip(p.alpha_v0 + p.alpha_v * np.asarray(V, dtype=float), EPS, 1 - EPS)
    return np.full(n, min(max(p.delta0_v, EPS), 1 - EPS))


def intensity_paths(params: ModelParams, dnp, zp, dnv, V=None) -> tuple[np.ndarray, np.ndarray]:
    """Price and variance jump intensities implied by the jump histories.

    Under M5 the intensities are linear in the variance path ``V``; under M3
    the variance intensity is not used (jumps coincide) and is returned as 0.
    """
    return price_intensity(params, dnp, V), variance_intensity(params, dnp, zp, dnv, V)


# ---------------------------------------------------------------------------
# densities


def transition_mean(params: ModelParams, V_t, x_t, zv_t=0.0, dnv_t=0):
    """Mean of V_{t+1} given V_t and the diffusive return x_t = r_t - Zp_t dNp_t."""
    p = params
    return (p.kappa * p.theta + (1 - p.kappa) * V_t + p.psi * (x_t - p.mu - p.gamma * V_t)
            + zv_t * dnv_t)


def variance_transition_logpdf(V_next, V_t, r_t, zp_t, dnp_t, zv_t, dnv_t,
                               params: ModelParams):
    """Log density of V_{t+1} under the positively truncated Gaussian transition."""
    V_t = np.asarray(V_t, dtype=float)
    if np.any(V_t <= 0):
        raise ValueError("V_t must be positive")
    V_next = np.asarray(V_next, dtype=float)
    x = np.asarray(r_t, dtype=float) - np.asarray(zp_t, dtype=float) * np.asarray(dnp_t)
    m = transition_mean(params, V_t, x, zv_t, dnv_t)
    sd = np.sqrt(params.omega * V_t)
    e = (V_next - m) / sd
    out = -0.5 * np.log(2 * np.pi) - np.log(sd) - 0.5 * e * e - log_ndtr(m / sd)
    out = np.where(V_next > 0, out, -np.inf)
    return out[()] if out.ndim == 0 else out


def complete_data_loglik(params: ModelParams, latents: LatentPath, data: ObservedData,
                         recompute_intensities: bool = True) -> float:
    """Joint log density of data and latents given the parameters.

    Includes the measurement, transition, jump-size and jump-occurrence
    terms.  ``latents.V[0]`` is replaced by the initial value implied by the
    parameters, and the intensity paths are rebuilt unless told otherwise.
    """
    p = params
    sp = p.spec
    V = latents.V.copy()
    V[0] = p.v_bar
    dnv = latents.dnv
    if sp.v_mode == 4:
        dnv = data.dnp
    if sp.var_jumps and dnv[0] != data.dnp[0]:
        return -math.inf
    if recompute_intensities:
        dp, dv = intensity_paths(p, data.dnp, data.zp, dnv, V)
    else:
        dp, dv = latents.delta_p, latents.delta_v
    zv = latents.zv if sp.var_jumps else np.zeros_like(V)
    return kernels.data_logdensity(
        data.diffusive_return(sp.price_jumps), data.lnbv, data.dnp, data.zp, V, zv,
        np.ascontiguousarray(dnv, dtype=np.int8) if sp.var_jumps else np.zeros_like(data.dnp),
        dp, dv, p.mu, p.gamma, p.mu_p, p.gamma_p, p.sigma_p, p.sigma_bv, p.kappa,
        p.theta, p.psi, p.omega, p.mu_v, int(sp.price_jumps), int(sp.var_jumps),
        int(sp.dnv_bern))


def complete_data_logposterior(params: ModelParams, latents: LatentPath, data: ObservedData,
                               priors=None) -> float:
    """Complete-data log posterior kernel; -inf outside the parameter support."""
    from .priors import PriorConfig, log_prior

    if not params.is_valid():
        return -math.inf
    lp = log_prior(params, priors if priors is not None else PriorConfig())
    if not math.isfinite(lp):
        return -math.inf
    if np.any(latents.V[1:] <= 0) or (params.spec.var_jumps and np.any(latents.zv < 0)):
        return -math.inf
    return lp + complete_data_loglik(params, latents, data)


def measurement_loglik(params: ModelParams, data: ObservedData, V) -> np.ndarray:
    """Per-day log density of (r, lnBV, Zp, dNp) given V and the intensity path.

    Used by the evidence likelihood ordinate.  Intensities are rebuilt from
    the observed price jumps (and V for M5).
    """
    p = params
    sp = p.spec
    V = np.asarray(V, dtype=float)
    x = data.diffusive_return(sp.price_jumps)
    e = x - p.mu - p.gamma * V
    out = -0.5 * (np.log(2 * np.pi * V) + e * e / V)
    e = data.lnbv - np.log(V)
    out += -0.5 * np.log(2 * np.pi * p.sigma_bv ** 2) - 0.5 * e * e / p.sigma_bv ** 2
    if sp.price_jumps:
        dp = price_intensity(p, data.dnp, V)
        e = data.zp - p.mu_p - p.gamma_p * V
        zterm = -0.5 * np.log(2 * np.pi * p.sigma_p ** 2) - 0.5 * e * e / p.sigma_p ** 2
        out += np.where(data.dnp == 1, zterm + np.log(dp), np.log1p(-dp))
    return out


def param_fields() -> tuple:
    return tuple(f.name for f in fields(ModelParams))
