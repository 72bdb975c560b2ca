"""Daily price series: file ingestion, log returns, historical volatility."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .errors import ValidationError

TRADING_DAYS_PER_YEAR = 252


@dataclass(frozen=True)
class PriceSeries:
    """Daily closes keyed by strictly increasing dates.

    ``closes`` is stored as a float64 array of the same length as ``dates``;
    every close must be positive.
    """

    dates: tuple[date, ...]
    closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=float)
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "dates", tuple(self.dates))
        if closes.ndim != 1 or len(self.dates) != closes.shape[0]:
            raise ValidationError(
                f"dates and closes must align: {len(self.dates)} dates vs "
                f"{closes.shape} closes"
            )
        if len(self.dates) == 0:
            raise ValidationError("price series must not be empty")
        for a, b in zip(self.dates, self.dates[1:]):
            if a >= b:
                raise ValidationError(f"dates must strictly increase, got {a} then {b}")
        if not np.all(np.isfinite(closes)) or np.any(closes <= 0.0):
            raise ValidationError("every close must be finite and positive")
        object.__setattr__(
            self, "_positions", {d: i for i, d in enumerate(self.dates)}
        )

    def __len__(self) -> int:
        return len(self.dates)

    def index_of(self, day: date) -> int | None:
        """Position of ``day`` in the series, or None when absent."""
        return self._positions.get(day)


@dataclass(frozen=True)
class VolEstimate:
    """Annualized volatility with the sample size it came from."""

    sigma_annual: float
    window_days: int

    def __post_init__(self):
        if not math.isfinite(self.sigma_annual) or self.sigma_annual < 0.0:
            raise ValidationError(f"sigma_annual must be >= 0, got {self.sigma_annual}")
        if self.window_days < 2:
            raise ValidationError(f"window_days must be >= 2, got {self.window_days}")


def load_price_series(path: str | Path, format: str = "csv") -> PriceSeries:
    """Read a ``date,close`` CSV into a PriceSeries, sorting rows by date.

    Any malformed content is reported with its 1-based line number, counting
    the header as line 1. ``format`` exists for forward compatibility; only
    'csv' is supported.
    """
    if format != "csv":
        raise ValidationError(f"unsupported format {format!r}; only 'csv'")
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"price file not found: {path}")
    rows: list[tuple[date, float, int]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != ["date", "close"]:
            raise ValidationError(
                f"{path}: expected header 'date,close', got {header!r} (line 1)"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}: expected 2 fields (line {lineno})")
            try:
                day = date.fromisoformat(row[0].strip())
            except ValueError:
                raise ValidationError(
                    f"{path}: bad date {row[0]!r} (line {lineno})"
                ) from None
            try:
                close = float(row[1])
            except ValueError:
                raise ValidationError(
                    f"{path}: bad close {row[1]!r} (line {lineno})"
                ) from None
            if not math.isfinite(close) or close <= 0.0:
                raise ValidationError(
                    f"{path}: close must be positive, got {close} (line {lineno})"
                )
            rows.append((day, close, lineno))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    seen: dict[date, int] = {}
    for day, _, lineno in rows:
        if day in seen:
            raise ValidationError(
                f"{path}: duplicate date {day} (line {lineno}, first seen line {seen[day]})"
            )
        seen[day] = lineno
    rows.sort(key=lambda r: r[0])
    return PriceSeries(
        dates=tuple(r[0] for r in rows),
        closes=np.array([r[1] for r in rows], dtype=float),
    )


def save_price_series(series: PriceSeries, path: str | Path) -> None:
    """Write a PriceSeries as a ``date,close`` CSV that round-trips exactly."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "close"])
        for day, close in zip(series.dates, series.closes):
            # repr() keeps the full float so load(save(x)) == x bit for bit
            writer.writerow([day.isoformat(), repr(float(close))])


def log_returns(series: PriceSeries) -> np.ndarray:
    """Daily log returns ln(close_t / close_{t-1}); length is len(series) - 1."""
    if len(series) < 2:
        raise ValidationError("need at least 2 closes to form a return")
    return np.diff(np.log(series.closes))


def historical_volatility(
    returns: np.ndarray, trading_days_per_year: int = TRADING_DAYS_PER_YEAR
) -> VolEstimate:
    """Annualized sample standard deviation of daily log returns.

    Uses the (n-1)-denominator sample estimator scaled by
    sqrt(trading_days_per_year).
    """
    returns = np.asarray(returns, dtype=float)
    if returns.ndim != 1 or returns.shape[0] < 2:
        raise ValidationError("need at least 2 returns for a sample stdev")
    if not np.all(np.isfinite(returns)):
        raise ValidationError("returns must be finite")
    if trading_days_per_year <= 0:
        raise ValidationError(
            f"trading_days_per_year must be positive, got {trading_days_per_year}"
        )
    sigma = float(np.std(returns, ddof=1) * math.sqrt(trading_days_per_year))
    return VolEstimate(sigma_annual=sigma, window_days=int(returns.shape[0]))
