"""Synthetic price scenarios with planted ground truth, for oracle testing."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .data import AssetClass, PriceSeries, ReturnSeries
from .regime import RegimeLabel

SCENARIOS = ("two_state", "three_state", "trend_regimes")


def synthetic_dates(n: int, start: dt.date | None = None) -> tuple[dt.date, ...]:
    """n consecutive weekdays, starting at `start` (default 2000-01-03, a Monday)."""
    day = start or dt.date(2000, 1, 3)
    out = []
    while len(out) < n:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return tuple(out)


def prices_from_returns(returns: ReturnSeries, *, base: float = 100.0,
                        asset_id: str = "synthetic",
                        asset_class: AssetClass = AssetClass.EQUITIES) -> PriceSeries:
    """Exponentiate cumulative log returns from a base price of 100.

    The output has one more day than the return series; its first date is the
    weekday immediately before the first return date.
    """
    first = returns.dates[0]
    prev = first - dt.timedelta(days=1)
    while prev.weekday() >= 5:
        prev -= dt.timedelta(days=1)
    closes = np.empty(len(returns) + 1)
    closes[0] = base
    closes[1:] = base * np.exp(np.cumsum(returns.values))
    return PriceSeries(asset_id, asset_class, (prev,) + returns.dates, closes)


@dataclass(frozen=True)
class Scenario:
    """A generated price path plus per-day planted truth.

    `states` and `labels` align with the return dates (= price days 1..N-1);
    `labels` is only populated for the trend_regimes scenario.
    """

    prices: PriceSeries
    returns: ReturnSeries
    states: np.ndarray
    labels: np.ndarray | None = None


def _two_state_params():
    from .msr import MsrParams

    return MsrParams(
        mu=np.array([0.0005, -0.001]),
        beta=np.array([0.0, 0.0]),
        sigma=np.array([0.005, 0.02]),
        transition=np.array([[0.98, 0.02], [0.02, 0.98]]),
        delta=np.array([0.5, 0.5]),
    )


def _three_state_params():
    from .msr import MsrParams

    return MsrParams(
        mu=np.array([0.0006, 0.0, -0.0012]),
        beta=np.array([0.0, 0.0, 0.0]),
        sigma=np.array([0.004, 0.012, 0.03]),
        transition=np.array([
            [0.97, 0.02, 0.01],
            [0.02, 0.96, 0.02],
            [0.01, 0.02, 0.97],
        ]),
        delta=np.array([1 / 3, 1 / 3, 1 / 3]),
    )


def generate_two_state(T: int, seed: int = 0) -> Scenario:
    from .msr import sample_path

    states, returns = sample_path(_two_state_params(), T, seed=seed)
    return Scenario(prices_from_returns(returns), returns, states)


def generate_three_state(T: int, seed: int = 0) -> Scenario:
    from .msr import sample_path

    states, returns = sample_path(_three_state_params(), T, seed=seed)
    return Scenario(prices_from_returns(returns), returns, states)


def generate_trend_regimes(
    T: int,
    seed: int = 0,
    *,
    episode_days: tuple[int, int] = (180, 360),
    low_vol: float = 0.005,
    high_vol: float = 0.028,
    low_drift: float = 0.0030,
    high_drift: float = 0.0110,
) -> Scenario:
    """Alternating bull/bear drift episodes at two distinct volatility levels.

    Episodes cycle low/bull, high/bear, low/bear, high/bull with lengths drawn
    uniformly from `episode_days`, giving four well-separated composite regimes
    in (slope, volatility) space.
    """
    if T < 2:
        raise ValueError(f"need T >= 2, got {T}")
    rng = np.random.default_rng(seed)
    cycle = [
        (RegimeLabel.LOW_BULL, low_drift, low_vol),
        (RegimeLabel.HIGH_BEAR, -high_drift, high_vol),
        (RegimeLabel.LOW_BEAR, -low_drift, low_vol),
        (RegimeLabel.HIGH_BULL, high_drift, high_vol),
    ]
    labels = np.empty(T, dtype=np.int8)
    drift = np.empty(T)
    vol = np.empty(T)
    pos = 0
    step = 0
    while pos < T:
        label, d, v = cycle[step % 4]
        length = min(int(rng.integers(episode_days[0], episode_days[1] + 1)), T - pos)
        labels[pos:pos + length] = label
        drift[pos:pos + length] = d
        vol[pos:pos + length] = v
        pos += length
        step += 1
    values = drift + vol * rng.standard_normal(T)
    returns = ReturnSeries(synthetic_dates(T), values)
    states = (vol > (low_vol + high_vol) / 2).astype(np.int8)
    return Scenario(prices_from_returns(returns), returns, states, labels)


def generate(scenario: str, T: int, seed: int = 0) -> Scenario:
    if scenario == "two_state":
        return generate_two_state(T, seed)
    if scenario == "three_state":
        return generate_three_state(T, seed)
    if scenario == "trend_regimes":
        return generate_trend_regimes(T, seed)
    raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
