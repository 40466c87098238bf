"""Daily realized measures and nonparametric price-jump extraction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import ndtri

from .model import ObservedData

#: E|Z|^{4/3} for a standard normal Z
MU_43 = 2.0 ** (2.0 / 3.0) * gamma_fn(7.0 / 6.0) / gamma_fn(0.5)
V_BB = (math.pi / 2.0) ** 2 + math.pi - 3.0
V_QQ = 2.0
#: imputed BV when no day in the sample has positive bipower variation
BV_FALLBACK = 1e-12


@dataclass(frozen=True)
class IntradayDay:
    """One trading day of intraday log prices on a fixed grid."""

    date: str
    log_prices: np.ndarray

    def __post_init__(self):
        lp = np.asarray(self.log_prices, dtype=float)
        if lp.ndim != 1 or lp.shape[0] < 4:
            raise ValueError(f"{self.date}: need at least 4 intraday prices (3 returns)")
        if not np.all(np.isfinite(lp)):
            raise ValueError(f"{self.date}: non-finite intraday price")
        object.__setattr__(self, "log_prices", lp)

    @property
    def open(self) -> float:
        return float(self.log_prices[0])

    @property
    def close(self) -> float:
        return float(self.log_prices[-1])

    @property
    def returns(self) -> np.ndarray:
        return np.diff(self.log_prices)


@dataclass(frozen=True)
class DailyMeasures:
    date: str
    r: float
    rv: float
    bv: float
    tq: float
    z_rj: float
    dnp: int
    zp: float | None
    bv_imputed: bool = False


def _as_returns(returns, min_len: int) -> np.ndarray:
    x = np.asarray(returns, dtype=float)
    if x.ndim != 1 or x.shape[0] < min_len:
        raise ValueError("insufficient intraday returns")
    if not np.all(np.isfinite(x)):
        raise ValueError("intraday returns must be finite")
    return x


def realized_variance(returns) -> float:
    """Sum of squared intraday returns."""
    x = _as_returns(returns, 1)
    return float(np.dot(x, x))


def bipower_variation(returns) -> float:
    """(pi/2) * sum |r_i||r_{i-1}|."""
    a = np.abs(_as_returns(returns, 2))
    return float(math.pi / 2.0 * np.dot(a[1:], a[:-1]))


def tripower_quarticity(returns) -> float:
    """M * mu_{4/3}^{-3} * sum |r_i r_{i-1} r_{i-2}|^{4/3}."""
    a = np.abs(_as_returns(returns, 3)) ** (4.0 / 3.0)
    m = a.shape[0]
    return float(m * MU_43 ** -3 * np.sum(a[2:] * a[1:-1] * a[:-2]))


def relative_jump_stat(rv: float, bv: float, tq: float, M: int) -> float:
    """Studentised relative jump statistic, asymptotically N(0,1) without jumps."""
    if not (rv > 0 and bv > 0):
        raise ValueError("degenerate day: rv and bv must be positive")
    if tq < 0 or M < 3:
        raise ValueError("tq must be nonnegative and M >= 3")
    rj = (rv - bv) / rv
    return float(rj / math.sqrt((V_BB - V_QQ) / M * max(1.0, tq / bv ** 2)))


def extract_jump(rv: float, bv: float, z_rj: float, daily_return: float,
                 alpha: float = 0.001) -> tuple[int, float | None]:
    """Jump indicator and signed size; the size is None on no-jump days."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if z_rj > ndtri(1.0 - alpha):
        size = math.sqrt(max(rv - bv, 0.0))
        return 1, float(np.sign(daily_return) * size)
    return 0, None


def day_measures(day: IntradayDay, alpha: float = 0.001, annualization: float = 252.0,
                 bv_floor: float | None = None) -> DailyMeasures:
    """Measures for one day. ``bv_floor`` replaces a zero BV (already annualised)."""
    x = day.returns
    M = x.shape[0]
    rv = realized_variance(x) * annualization
    bv = bipower_variation(x) * annualization
    tq = tripower_quarticity(x) * annualization ** 2
    r = (day.close - day.open) * annualization
    imputed = False
    if not bv > 0:
        if bv_floor is None:
            raise ValueError(f"{day.date}: zero bipower variation and no imputation value")
        bv = bv_floor
        imputed = True
    z = relative_jump_stat(rv, bv, tq, M) if rv > 0 else 0.0
    dnp, zp = extract_jump(rv, bv, z, r, alpha)
    return DailyMeasures(day.date, r, rv, bv, tq, z, dnp, zp, imputed)


def build_dataset(days: Sequence[IntradayDay], alpha: float = 0.001,
                  annualization: float = 252.0) -> tuple[ObservedData, list[DailyMeasures]]:
    """Daily observables from intraday grids.

    Days with zero bipower variation are imputed with the smallest positive
    BV in the sample before logs are taken (``BV_FALLBACK`` if no day has a
    positive BV).  Returns the dataset and the per-day measure records.
    """
    if len(days) == 0:
        raise ValueError("no input days")
    raw_bv = np.array([bipower_variation(d.returns) * annualization for d in days])
    pos = raw_bv[raw_bv > 0]
    floor = float(pos.min()) if pos.size else BV_FALLBACK
    recs = [day_measures(d, alpha, annualization, floor) for d in days]
    data = ObservedData(
        r=np.array([m.r for m in recs]),
        lnbv=np.log([m.bv for m in recs]),
        dnp=np.array([m.dnp for m in recs]),
        zp=np.array([m.zp if m.dnp else 0.0 for m in recs]),
        dates=np.array([m.date for m in recs]),
    )
    return data, recs
