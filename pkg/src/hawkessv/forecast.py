"""One-step-ahead predictive distributions, scoring and backtests.

Static parameters are held at posterior draws from a fitted chain; for each
draw the latent variance and jump-intensity state is carried forward by a
particle filter, and the next day's return is drawn from the model's
one-step predictive.  The predictive density of a return is the mixture of
the per-particle conditional densities, which is exact for the model's
integrand up to Monte Carlo error in the particles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .filtering import DayPrediction, ParticleFilter
from .model import ObservedData
from .sampler.chain import ChainOutput

FORECAST_COLUMNS = ("date", "mean", "var", "skew", "kurt", "logscore", "hpp_lo", "hpp_hi",
                    "var5", "var1")


# ----------------------------------------------------------------------
# pure scoring and summary functions


class Moments(NamedTuple):
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    degenerate: bool


def predictive_moments(draws) -> Moments:
    """Sample mean, variance, skewness and (non-excess) kurtosis of the draws.

    For constant draws the variance is 0, the skewness is reported as 0 and
    the kurtosis as NaN, and ``degenerate`` is set.
    """
    x = np.asarray(draws, dtype=float)
    m = float(x.mean())
    d = x - m
    v = float(np.mean(d * d))
    if v <= 0.0 or not np.isfinite(v) or v <= 1e-300:
        return Moments(m, 0.0, 0.0, math.nan, True)
    return Moments(m, v, float(np.mean(d ** 3) / v ** 1.5), float(np.mean(d ** 4) / v ** 2),
                   False)


def log_score(draws, observed_r: float, method: str = "kde") -> float:
    """Log predictive density at ``observed_r`` from draws alone.

    ``method="kde"`` uses a Gaussian kernel density with Silverman's
    bandwidth.  The exact mixture form needs more than draws; see
    :meth:`hawkessv.filtering.DayPrediction.logpdf`.
    """
    x = np.asarray(draws, dtype=float)
    if x.size < 2:
        raise ValueError("log score needs at least two draws")
    if method != "kde":
        raise ValueError(f"unknown log score method: {method}")
    if np.ptp(x) == 0:
        return math.inf if observed_r == x[0] else -math.inf
    return float(stats.gaussian_kde(x, bw_method="silverman").logpdf(observed_r)[0])


def cls_path(scores_ref, scores_alt) -> np.ndarray:
    """Cumulative log-score difference; positive values favour the reference."""
    a = np.asarray(scores_ref, dtype=float)
    b = np.asarray(scores_alt, dtype=float)
    if a.shape != b.shape:
        raise ValueError("score series must have equal length")
    return np.cumsum(a - b)


def hpp_interval(draws, level: float = 0.95) -> tuple[float, float]:
    """Shortest interval containing ``ceil(level*n)`` of the sorted draws."""
    x = np.sort(np.asarray(draws, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("no draws")
    k = min(n, max(1, int(math.ceil(level * n))))
    widths = x[k - 1:] - x[:n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def empirical_coverage(intervals, observed) -> float:
    """Fraction of observations inside their closed intervals."""
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    y = np.asarray(observed, dtype=float)
    if iv.shape[0] != y.size:
        raise ValueError("intervals and observations differ in length")
    return float(np.mean((y >= iv[:, 0]) & (y <= iv[:, 1])))


def var_quantile(draws, level: float) -> float:
    """Lower-tail quantile of the predictive draws (value at risk as a return)."""
    return float(np.quantile(np.asarray(draws, dtype=float), level))


def futures_price_draws(r_draws, P_T: float, r_f: float, T_now: int, T_maturity: int,
                        annualization: float = 252.0) -> np.ndarray:
    """Cost-of-carry map ``F = P_T exp(r/annualization + r_f (T_M - (T+1)))``.

    ``r_draws`` are annualised daily returns; ``annualization=1`` treats them
    as plain daily log increments.  ``r_f`` is a per-day rate.
    """
    if not P_T > 0:
        raise ValueError("P_T must be positive")
    if T_maturity < T_now + 1:
        raise ValueError("maturity must be at least one day ahead")
    r = np.asarray(r_draws, dtype=float)
    return P_T * np.exp(r / annualization + r_f * (T_maturity - (T_now + 1)))


# ----------------------------------------------------------------------
# backtests


@dataclass
class BacktestReport:
    name: str
    nominal: float
    n: int
    hits: int
    coverage: float
    lr_uc: float
    p_uc: float
    lr_ind: float
    p_ind: float

    def row(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _xlogy(x, y):
    return 0.0 if x == 0 else x * math.log(y)


def _hits(hits) -> np.ndarray:
    h = np.asarray(hits)
    if h.ndim != 1 or h.size < 2:
        raise ValueError("need a sequence of at least two hits")
    if not np.all((h == 0) | (h == 1)):
        raise ValueError("hits must be 0/1")
    return h.astype(int)


def _uc(h: np.ndarray, p: float) -> tuple[float, float]:
    n, x = h.size, int(h.sum())
    pi = x / n
    l0 = _xlogy(n - x, 1 - p) + _xlogy(x, p)
    l1 = _xlogy(n - x, 1 - pi) + _xlogy(x, pi)
    lr = max(0.0, -2.0 * (l0 - l1))
    return lr, float(stats.chi2.sf(lr, 1))


def _ind(h: np.ndarray) -> tuple[float, float]:
    a, b = h[:-1], h[1:]
    n00 = int(np.sum((a == 0) & (b == 0)))
    n01 = int(np.sum((a == 0) & (b == 1)))
    n10 = int(np.sum((a == 1) & (b == 0)))
    n11 = int(np.sum((a == 1) & (b == 1)))
    p01 = n01 / (n00 + n01) if n00 + n01 else 0.0
    p11 = n11 / (n10 + n11) if n10 + n11 else 0.0
    p = (n01 + n11) / (n00 + n01 + n10 + n11)
    l0 = _xlogy(n00 + n10, 1 - p) + _xlogy(n01 + n11, p)
    l1 = (_xlogy(n00, 1 - p01) + _xlogy(n01, p01) + _xlogy(n10, 1 - p11) + _xlogy(n11, p11))
    lr = max(0.0, -2.0 * (l0 - l1))
    return lr, float(stats.chi2.sf(lr, 1))


def christoffersen_uc(hits, level: float, name: str = "uc") -> BacktestReport:
    """Unconditional coverage LR test of a hit rate against ``level``."""
    h = _hits(hits)
    lr, p = _uc(h, level)
    return BacktestReport(name, level, h.size, int(h.sum()), float(h.mean()), lr, p,
                          math.nan, math.nan)


def christoffersen_ind(hits, name: str = "ind") -> BacktestReport:
    """First-order Markov independence LR test of a hit sequence."""
    h = _hits(hits)
    lr, p = _ind(h)
    return BacktestReport(name, math.nan, h.size, int(h.sum()), float(h.mean()), math.nan,
                          math.nan, lr, p)


def backtest(rows: Sequence[dict], observed, level: float = 0.95) -> list[BacktestReport]:
    """HPP coverage and VaR exceedance tests for forecast rows and realised returns."""
    y = np.asarray(observed, dtype=float)
    lo = np.array([r["hpp_lo"] for r in rows], dtype=float)
    hi = np.array([r["hpp_hi"] for r in rows], dtype=float)
    out = []
    miss = ((y < lo) | (y > hi)).astype(int)
    uc = _uc(miss, 1 - level)
    ind = _ind(miss)
    out.append(BacktestReport("hpp", level, y.size, int(miss.sum()), 1 - float(miss.mean()),
                              *uc, *ind))
    for col, a in (("var5", 0.05), ("var1", 0.01)):
        q = np.array([r[col] for r in rows], dtype=float)
        h = (y < q).astype(int)
        out.append(BacktestReport(col, a, y.size, int(h.sum()), float(h.mean()), *_uc(h, a),
                                  *_ind(h)))
    return out


# ----------------------------------------------------------------------
# predictive distributions from a fitted chain


@dataclass
class PredictiveResult:
    date: str
    draws: np.ndarray
    moments: Moments
    logscore: float
    hpp: tuple
    var5: float
    var1: float
    jump_prob: float
    futures: np.ndarray | None = None
    futures_hpp: tuple | None = None
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        m = self.moments
        return {"date": self.date, "mean": m.mean, "var": m.variance, "skew": m.skewness,
                "kurt": m.kurtosis, "logscore": self.logscore, "hpp_lo": self.hpp[0],
                "hpp_hi": self.hpp[1], "var5": self.var5, "var1": self.var1}


def parameter_draws(chain: ChainOutput, n_params: int) -> list:
    """Evenly spaced retained parameter draws."""
    n = chain.draws.shape[0]
    if n == 0:
        raise ValueError("chain has no retained draws")
    idx = np.unique(np.linspace(0, n - 1, min(n_params, n)).round().astype(int))
    return [chain.params_at(int(i)) for i in idx]


def summarize_prediction(pred: DayPrediction, n_draws: int, rng, date: str = "",
                         observed: float | None = None, level: float = 0.95) -> PredictiveResult:
    draws = pred.draws(n_draws, rng)
    q5, q1 = np.quantile(draws, [0.05, 0.01])
    return PredictiveResult(
        date=date, draws=draws, moments=predictive_moments(draws),
        logscore=pred.logpdf(observed) if observed is not None else math.nan,
        hpp=hpp_interval(draws, level), var5=float(q5), var1=float(q1),
        jump_prob=float(np.mean(pred.pj)))


def rolling_forecasts(chain: ChainOutput, data: ObservedData, start: int,
                      n_days: int | None = None, window: int | None = None, n_params: int = 50,
                      n_particles: int = 200, n_draws: int = 5000, level: float = 0.95,
                      seed: int = 0) -> list[PredictiveResult]:
    """Forecast days ``start .. start+n_days-1`` one step ahead.

    The filter assimilates every day before a forecast day, so each forecast
    uses exactly the information up to the previous close.  ``start`` may
    equal ``len(data)`` for a single out-of-sample day.  ``window``, when
    given, is the minimum number of days required before the first forecast.
    """
    T = len(data)
    if n_days is None:
        n_days = T - start if start < T else 1
    if window is not None and start < window:
        raise ValueError(f"window shorter than configured n={window} (have {start} days)")
    if start < 1 or start + n_days > T + 1:
        raise ValueError("forecast range outside the data")
    ss = np.random.SeedSequence(seed)
    pf_seq, draw_seq = ss.spawn(2)
    params = parameter_draws(chain, n_params)
    if chain.variant != params[0].variant:
        raise ValueError("chain variant mismatch")
    pf = ParticleFilter(params, data, n_particles, np.random.default_rng(pf_seq))
    rng = np.random.default_rng(draw_seq)
    pf.run(start)
    out = []
    for t in range(start, start + n_days):
        obs = float(data.r[t]) if t < T else None
        date = str(data.dates[t]) if t < T else "next"
        out.append(summarize_prediction(pf.predict(), n_draws, rng, date, obs, level))
        if t < T:
            pf.step()
    return out


def predictive_draws(chain: ChainOutput, data_window: ObservedData, variant: str | None = None,
                     n_draws: int = 5000, window: int | None = None, n_params: int = 50,
                     n_particles: int = 200, seed: int = 0) -> np.ndarray:
    """Draws of the return on the day after ``data_window``."""
    if variant is not None and variant != chain.variant:
        raise ValueError(f"chain was fitted for {chain.variant}, not {variant}")
    res = rolling_forecasts(chain, data_window, len(data_window), 1, window, n_params,
                            n_particles, n_draws, seed=seed)
    return res[0].draws
