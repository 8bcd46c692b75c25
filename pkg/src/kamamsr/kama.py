"""Kaufman's adaptive moving average, its volatility filter, and trend signals.

The indicator chain is: efficiency ratio over an n-day window -> scaled
smoothing coefficient -> KAMA recursion -> filter (gamma times the rolling
standard deviation of KAMA increments) -> persistent bullish/bearish signal.
All tracks are full-length arrays with NaN through their warm-up, so indices
line up with the price series everywhere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin

from .data import PriceSeries
from .validation import as_float_1d

CONVENTIONAL = "conventional"
AS_PRINTED = "as_printed"
COEFFICIENT_FORMS = (CONVENTIONAL, AS_PRINTED)
SELL_REFERENCES = ("low", "high")


class Signal(enum.IntEnum):
    """Per-day trend state. Undefined only before the first trigger."""

    UNDEFINED = 0
    BULLISH = 1
    BEARISH = -1


@dataclass(frozen=True)
class KamaParams:
    """Indicator hyperparameters.

    n drives the efficiency ratio, the filter standard deviation, and the
    prior-extreme lookback; n_s/n_l are the short and long smoothing windows;
    gamma scales the filter.
    """

    n: int = 10
    n_s: int = 2
    n_l: int = 30
    gamma: float = 1.0
    coefficient_form: str = CONVENTIONAL

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if not 2 <= self.n_s < self.n_l:
            raise ValueError(f"need 2 <= n_s < n_l, got n_s={self.n_s}, n_l={self.n_l}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.coefficient_form not in COEFFICIENT_FORMS:
            raise ValueError(f"coefficient_form must be one of {COEFFICIENT_FORMS}")

    @property
    def k_short(self) -> float:
        return 2.0 / (self.n_s + 1)

    @property
    def k_long(self) -> float:
        return 2.0 / (self.n_l + 1)

    def to_dict(self) -> dict:
        return {"n": self.n, "n_s": self.n_s, "n_l": self.n_l,
                "gamma": self.gamma, "coefficient_form": self.coefficient_form}

    @classmethod
    def from_dict(cls, d: dict) -> "KamaParams":
        return cls(n=int(d["n"]), n_s=int(d["n_s"]), n_l=int(d["n_l"]),
                   gamma=float(d["gamma"]),
                   coefficient_form=d.get("coefficient_form", CONVENTIONAL))


@dataclass(frozen=True)
class KamaSeries:
    """KAMA, efficiency-ratio, and filter tracks aligned to the price dates.

    warmup_end is the first index at which every track is defined (2n).
    """

    dates: tuple
    kama: np.ndarray
    er: np.ndarray
    filter: np.ndarray
    warmup_end: int


def efficiency_ratio(closes, n: int) -> np.ndarray:
    """|n-day price change| / sum of |daily changes| over the same window.

    Full-length array, NaN for t < n; windows with zero total movement get 0.
    The absolute numerator keeps the ratio inside [0, 1].
    """
    closes = as_float_1d(closes, "closes")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    size = closes.shape[0]
    if size <= n:
        raise ValueError(f"need more than n={n} closes, got {size}")
    out = np.full(size, np.nan)
    momentum = np.abs(closes[n:] - closes[:-n])
    abs_diff = np.abs(np.diff(closes))
    volatility = np.convolve(abs_diff, np.ones(n), mode="valid")
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(volatility > 0, momentum / np.maximum(volatility, 1e-300), 0.0)
    out[n:] = np.clip(ratio, 0.0, 1.0)
    return out


def smoothing_coefficient(er, params: KamaParams):
    """Scaled smoothing coefficient.

    conventional: [er*(k_s - k_l) + k_l]^2, rising from k_l^2 to k_s^2 with er.
    as_printed:   [er*(k_s - k_l) + k_s]^2, which can exceed 1 for very short
    n_s at high er; it is kept verbatim for comparison runs.
    """
    er = np.asarray(er, dtype=float)
    ks, kl = params.k_short, params.k_long
    base = kl if params.coefficient_form == CONVENTIONAL else ks
    c = (er * (ks - kl) + base) ** 2
    return float(c) if np.isscalar(er) or er.ndim == 0 else c


def kama_series(prices: PriceSeries, params: KamaParams) -> KamaSeries:
    """Run the KAMA recursion over a price series.

    The average of the first n+1 closes seeds KAMA at index n; afterwards
    KAMA_t = KAMA_{t-1} + C_t * (P_t - KAMA_{t-1}).
    """
    closes = prices.closes
    size = closes.shape[0]
    if size <= params.n or size <= params.n_l:
        raise ValueError(
            f"series of length {size} too short for n={params.n}, n_l={params.n_l}"
        )
    n = params.n
    er = efficiency_ratio(closes, n)
    coeff = smoothing_coefficient(er[n:], params)

    kama = np.full(size, np.nan)
    kama[n] = float(np.mean(closes[: n + 1]))
    closes_l = closes.tolist()
    coeff_l = np.asarray(coeff).tolist()
    current = kama[n]
    values = [current]
    for t in range(n + 1, size):
        current = current + coeff_l[t - n] * (closes_l[t] - current)
        values.append(current)
    kama[n:] = values

    filt = np.full(size, np.nan)
    dense = filter_series(kama[n:], n, params.gamma)
    filt[n:] = dense
    return KamaSeries(prices.dates, kama, er, filt, warmup_end=2 * n)


def filter_series(kama_values, n: int, gamma: float) -> np.ndarray:
    """gamma times the sample standard deviation of the last n KAMA increments.

    Input must be dense (no NaN gaps); output is aligned to it with NaN until
    n increments have accumulated.
    """
    values = np.asarray(kama_values, dtype=float)
    if values.ndim != 1 or values.shape[0] < n + 1:
        raise ValueError(f"need at least n+1={n + 1} KAMA values, got {values.shape}")
    increments = np.diff(values)
    out = np.full(values.shape[0], np.nan)
    windows = sliding_window_view(increments, n)
    out[n:] = gamma * windows.std(axis=1, ddof=1)
    return out


def trend_signals(series: KamaSeries, params: KamaParams, sell_reference: str = "low") -> np.ndarray:
    """Persistent bullish/bearish state from filtered KAMA breakouts.

    Buy fires when KAMA exceeds its low over the prior n days by more than the
    filter; sell fires when it drops below that low by more than the filter
    (or below the prior high, with sell_reference="high", Kaufman's original
    exit; if both fire on one day in that mode the state is left unchanged).
    """
    if sell_reference not in SELL_REFERENCES:
        raise ValueError(f"sell_reference must be one of {SELL_REFERENCES}")
    kama = series.kama
    filt = series.filter
    n = params.n
    size = kama.shape[0]
    signals = np.full(size, Signal.UNDEFINED, dtype=np.int8)
    start = series.warmup_end
    if start >= size:
        return signals

    windows = sliding_window_view(kama, n)  # window i covers kama[i .. i+n-1]
    prior_min = np.full(size, np.nan)
    prior_max = np.full(size, np.nan)
    prior_min[n:] = windows[:-1].min(axis=1)
    prior_max[n:] = windows[:-1].max(axis=1)

    buy = (kama - prior_min) > filt
    if sell_reference == "low":
        sell = (prior_min - kama) > filt
    else:
        sell = (prior_max - kama) > filt

    state = Signal.UNDEFINED
    for t in range(start, size):
        if buy[t] and not sell[t]:
            state = Signal.BULLISH
        elif sell[t] and not buy[t]:
            state = Signal.BEARISH
        signals[t] = state
    return signals


class KamaIndicator(BaseEstimator, TransformerMixin):
    """Stateless transformer producing KAMA, ER, filter, and signal columns.

    Accepts a 1-d array of closes or a PriceSeries; transform returns an
    (n_days, 4) float array (signal encoded as -1/0/+1).
    """

    def __init__(self, n: int = 10, n_s: int = 2, n_l: int = 30, gamma: float = 1.0,
                 coefficient_form: str = CONVENTIONAL, sell_reference: str = "low"):
        self.n = n
        self.n_s = n_s
        self.n_l = n_l
        self.gamma = gamma
        self.coefficient_form = coefficient_form
        self.sell_reference = sell_reference

    def _params(self) -> KamaParams:
        return KamaParams(n=self.n, n_s=self.n_s, n_l=self.n_l, gamma=self.gamma,
                          coefficient_form=self.coefficient_form)

    def fit(self, X, y=None):
        self._params()  # validate hyperparameters
        return self

    def transform(self, X) -> np.ndarray:
        import datetime as dt

        from .data import AssetClass

        if isinstance(X, PriceSeries):
            prices = X
        else:
            closes = as_float_1d(X, "closes")
            dates = tuple(dt.date(2000, 1, 3) + dt.timedelta(days=i) for i in range(len(closes)))
            prices = PriceSeries("input", AssetClass.EQUITIES, dates, closes)
        params = self._params()
        series = kama_series(prices, params)
        signals = trend_signals(series, params, self.sell_reference)
        return np.column_stack([series.kama, series.er, series.filter, signals.astype(float)])

    def get_feature_names_out(self, input_features=None):
        return np.array(["kama", "er", "filter", "signal"])
