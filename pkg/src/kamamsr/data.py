"""Daily closing-price ingestion, log returns, chronological splits, cash index."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DataError

TRADING_DAYS_PER_YEAR = 252
DEFAULT_MIN_SERIES_LENGTH = 260


class AssetClass(str, Enum):
    EQUITIES = "equities"
    CURRENCIES = "currencies"
    COMMODITIES = "commodities"
    FIXED_INCOME = "fixed_income"
    CASH = "cash"


@dataclass(frozen=True)
class PriceSeries:
    """Dated daily closing prices for a single asset.

    Dates must be strictly increasing and every close strictly positive.
    """

    asset_id: str
    asset_class: AssetClass
    dates: tuple[dt.date, ...]
    closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=float)
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "dates", tuple(self.dates))
        if len(self.dates) != closes.shape[0]:
            raise DataError(
                f"{self.asset_id}: {len(self.dates)} dates but {closes.shape[0]} closes"
            )
        if closes.shape[0] == 0:
            raise DataError(f"{self.asset_id}: empty price series")
        if not np.all(np.isfinite(closes)) or np.any(closes <= 0):
            raise DataError(f"{self.asset_id}: closes must be finite and > 0")
        for a, b in zip(self.dates, self.dates[1:]):
            if b <= a:
                raise DataError(f"{self.asset_id}: dates not strictly increasing at {b}")

    def __len__(self) -> int:
        return self.closes.shape[0]

    def window(self, start: int, stop: int) -> "PriceSeries":
        """Contiguous sub-series over [start, stop)."""
        return PriceSeries(self.asset_id, self.asset_class, self.dates[start:stop], self.closes[start:stop])


@dataclass(frozen=True)
class ReturnSeries:
    """Daily log returns, dated by the later close of each pair."""

    dates: tuple[dt.date, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        if len(self.dates) != values.shape[0]:
            raise DataError(f"{len(self.dates)} dates but {values.shape[0]} return values")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DataSplit:
    train_end_index: int
    train_fraction: float = 0.85


def load_csv(
    path,
    asset_class: AssetClass,
    *,
    asset_id: str | None = None,
    min_rows: int = DEFAULT_MIN_SERIES_LENGTH,
) -> PriceSeries:
    """Parse a `date,close` CSV (header required, ISO-8601 dates) into a PriceSeries.

    Any malformed, missing, or non-positive close aborts the load with the
    offending row number. `min_rows` may be lowered for tests.
    """
    path = str(path)
    if asset_id is None:
        asset_id = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    dates: list[dt.date] = []
    closes: list[float] = []
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip().lower() for h in header[:2]] != ["date", "close"]:
            raise DataError(f"{path}: expected header 'date,close', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise DataError(f"{path}: row {lineno}: expected 'date,close', got {row!r}")
            try:
                day = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise DataError(f"{path}: row {lineno}: unparseable date {row[0]!r}") from None
            cell = row[1].strip()
            if not cell:
                raise DataError(f"{path}: row {lineno}: missing close")
            try:
                close = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {lineno}: unparseable close {row[1]!r}") from None
            if not math.isfinite(close) or close <= 0:
                raise DataError(f"{path}: row {lineno}: close must be > 0, got {close}")
            if dates and day <= dates[-1]:
                raise DataError(f"{path}: row {lineno}: date {day} not after {dates[-1]}")
            dates.append(day)
            closes.append(close)
    if len(dates) < min_rows:
        raise DataError(f"{path}: only {len(dates)} valid rows, need at least {min_rows}")
    return PriceSeries(asset_id, asset_class, tuple(dates), np.array(closes))


def log_returns(prices: PriceSeries) -> ReturnSeries:
    """values[t] = ln(closes[t+1] / closes[t]), dated at the later close."""
    if len(prices) < 2:
        raise DataError(f"{prices.asset_id}: need at least 2 prices for returns")
    values = np.log(prices.closes[1:] / prices.closes[:-1])
    return ReturnSeries(prices.dates[1:], values)


def split_train_test(
    prices: PriceSeries, train_fraction: float = 0.85
) -> tuple[PriceSeries, PriceSeries, DataSplit]:
    """Chronological split: earliest floor(fraction * N) days train, rest test."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(prices)
    n_train = int(math.floor(train_fraction * n))
    if n_train < 1 or n_train >= n:
        raise DataError(f"split of {n} days at fraction {train_fraction} leaves an empty partition")
    return (
        prices.window(0, n_train),
        prices.window(n_train, n),
        DataSplit(train_end_index=n_train, train_fraction=train_fraction),
    )


def synth_cash_index(
    dates,
    annual_rate: float = 0.0,
    *,
    asset_id: str = "cash",
    base: float = 100.0,
) -> PriceSeries:
    """Synthetic money-parking index compounding at a constant annual rate.

    One compounding step of (1 + rate)^(1/252) per listed trading day.
    """
    dates = tuple(dates)
    if not dates:
        raise DataError("cash index needs at least one date")
    if annual_rate < 0:
        raise DataError(f"cash annual_rate must be >= 0, got {annual_rate}")
    daily_factor = (1.0 + annual_rate) ** (1.0 / TRADING_DAYS_PER_YEAR)
    closes = base * daily_factor ** np.arange(len(dates))
    return PriceSeries(asset_id, AssetClass.CASH, dates, closes)
