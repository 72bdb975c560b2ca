"""Backtesting: score a pricer against recorded option quotes.

Quotes are priced one by one with a volatility input resolved from the
underlying's trailing history; the report carries RMSE and MAE of theoretical
minus market price, plus wall time. Quote identity is positional: a quote's
id is its 0-based row index in the quotes CSV, and prediction files from
other models refer to quotes by that id.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .dynamics import HestonParams, VasicekParams
from .errors import ValidationError
from .market_data import PriceSeries, VolEstimate, historical_volatility, log_returns
from .pde import Grid4D, OptionContract, solve_extended_pde, stable_n_t, surface_lookup

QUOTE_FIELDS = ["date", "strike", "maturity_years", "kind", "market_price", "underlying_close"]


@dataclass(frozen=True)
class MarketQuote:
    """One observed option quote with the underlying close on the same day."""

    date: date
    strike: float
    maturity: float
    kind: str
    market_price: float
    underlying_close: float

    def __post_init__(self):
        if self.kind not in ("call", "put"):
            raise ValidationError(f"kind must be 'call' or 'put', got {self.kind!r}")
        if not math.isfinite(self.strike) or self.strike <= 0.0:
            raise ValidationError(f"strike must be positive, got {self.strike}")
        if not math.isfinite(self.maturity) or self.maturity <= 0.0:
            raise ValidationError(f"maturity must be positive, got {self.maturity}")
        if not math.isfinite(self.market_price) or self.market_price < 0.0:
            raise ValidationError(
                f"market_price must be >= 0, got {self.market_price}"
            )
        if not math.isfinite(self.underlying_close) or self.underlying_close <= 0.0:
            raise ValidationError(
                f"underlying_close must be positive, got {self.underlying_close}"
            )

    def contract(self) -> OptionContract:
        return OptionContract(kind=self.kind, strike=self.strike, maturity=self.maturity)


@dataclass
class BacktestReport:
    """Aggregate pricing errors for one model over one quote set."""

    model_name: str
    rmse: float
    mae: float
    n_quotes: int
    skipped: int
    wall_time_seconds: float
    residuals: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "rmse": self.rmse,
            "mae": self.mae,
            "n_quotes": self.n_quotes,
            "skipped": self.skipped,
            "wall_time_seconds": self.wall_time_seconds,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BacktestReport":
        return cls(
            model_name=str(data["model_name"]),
            rmse=float(data["rmse"]),
            mae=float(data["mae"]),
            n_quotes=int(data["n_quotes"]),
            skipped=int(data["skipped"]),
            wall_time_seconds=float(data["wall_time_seconds"]),
        )


def rmse(predicted, actual) -> float:
    """Root mean squared error between two equal-length sequences."""
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1 or p.shape[0] == 0:
        raise ValidationError(
            f"predicted and actual must be equal-length nonempty 1-d, got {p.shape} vs {a.shape}"
        )
    return float(np.sqrt(np.mean((p - a) ** 2)))


def mae(predicted, actual) -> float:
    """Mean absolute error between two equal-length sequences."""
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1 or p.shape[0] == 0:
        raise ValidationError(
            f"predicted and actual must be equal-length nonempty 1-d, got {p.shape} vs {a.shape}"
        )
    return float(np.mean(np.abs(p - a)))


def load_quotes(path: str | Path) -> list[MarketQuote]:
    """Read a quotes CSV, keeping row order (row index is the quote id)."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"quotes file not found: {path}")
    quotes: list[MarketQuote] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != QUOTE_FIELDS:
            raise ValidationError(
                f"{path}: expected header {','.join(QUOTE_FIELDS)!r}, got {header!r} (line 1)"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 6:
                raise ValidationError(f"{path}: expected 6 fields (line {lineno})")
            try:
                day = date.fromisoformat(row[0].strip())
                quote = MarketQuote(
                    date=day,
                    strike=float(row[1]),
                    maturity=float(row[2]),
                    kind=row[3].strip(),
                    market_price=float(row[4]),
                    underlying_close=float(row[5]),
                )
            except (ValueError, ValidationError) as exc:
                raise ValidationError(f"{path}: {exc} (line {lineno})") from None
            quotes.append(quote)
    if not quotes:
        raise ValidationError(f"{path}: no data rows")
    return quotes


def write_quotes(quotes: list[MarketQuote], path: str | Path) -> None:
    """Write quotes as CSV in the given order; row index becomes the quote id."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(QUOTE_FIELDS)
        for q in quotes:
            writer.writerow(
                [
                    q.date.isoformat(),
                    repr(float(q.strike)),
                    repr(float(q.maturity)),
                    q.kind,
                    repr(float(q.market_price)),
                    repr(float(q.underlying_close)),
                ]
            )


class VolSource(Protocol):
    def vol_for(self, day: date) -> VolEstimate | None: ...


class TrailingVolPolicy:
    """Annualized vol from the trailing window of returns ending on a date.

    The window uses the ``window_days`` returns formed by the ``window_days + 1``
    closes up to and including the quote date. Dates absent from the series,
    or with too little history, resolve to None (the caller skips the quote).
    """

    def __init__(
        self, series: PriceSeries, window_days: int = 30, trading_days_per_year: int = 252
    ):
        if window_days < 2:
            raise ValidationError(f"window_days must be >= 2, got {window_days}")
        self.series = series
        self.window_days = window_days
        self.trading_days_per_year = trading_days_per_year
        self._returns = log_returns(series) if len(series) >= 2 else np.empty(0)

    def vol_for(self, day: date) -> VolEstimate | None:
        pos = self.series.index_of(day)
        if pos is None or pos < self.window_days:
            return None
        window = self._returns[pos - self.window_days : pos]
        return historical_volatility(window, self.trading_days_per_year)


Pricer = Callable[[MarketQuote, float, float], float]


def passthrough_pricer(quote: MarketQuote, sigma: float, r: float) -> float:
    """Echo the market price; pins the error metrics of the harness at zero."""
    return quote.market_price


def degenerate_pde_pricer(
    n_s: int = 241,
    s_max_multiple: float = 3.0,
    scheme: str = "explicit",
    n_t: int | None = None,
    sigma_floor: float = 1e-4,
) -> Pricer:
    """Build a quote pricer around a single-point (sigma, r) grid.

    Each quote is priced on its own grid: one sigma node at the supplied vol,
    one r node at the supplied rate, with both drifts zeroed so the solve is
    plain Black-Scholes at that point. s_max spans s_max_multiple times the
    larger of spot and strike; for the explicit scheme n_t defaults to the
    stability bound.
    """
    if n_s < 3:
        raise ValidationError(f"n_s must be >= 3, got {n_s}")
    if s_max_multiple <= 1.0:
        raise ValidationError(f"s_max_multiple must exceed 1, got {s_max_multiple}")

    def pricer(quote: MarketQuote, sigma: float, r: float) -> float:
        sigma = max(float(sigma), sigma_floor)
        contract = quote.contract()
        s_max = s_max_multiple * max(quote.underlying_close, quote.strike)
        if n_t is not None:
            steps = n_t
        elif scheme == "explicit":
            steps = stable_n_t(s_max, n_s, sigma, abs(r), contract.maturity)
        else:
            steps = 200
        grid = Grid4D(
            s_max=s_max,
            n_s=n_s,
            n_t=steps,
            sigma_nodes=np.array([sigma]),
            r_nodes=np.array([r]),
        )
        heston = HestonParams(kappa=1.0, theta=sigma * sigma, xi=0.0)
        vasicek = VasicekParams(a=1.0, b=r, s=0.0)
        surface = solve_extended_pde(contract, grid, heston, vasicek, scheme=scheme)
        return surface_lookup(surface, quote.underlying_close, sigma, r)

    return pricer


def run_backtest(
    quotes: list[MarketQuote],
    pricer: Pricer,
    vol_source: VolSource,
    r0: float,
    model_name: str = "pde_fd",
) -> BacktestReport:
    """Price every resolvable quote and aggregate the errors.

    Quotes whose date cannot be resolved to a trailing vol are counted in
    ``skipped`` and excluded from the metrics. n_quotes counts the quotes
    actually priced; at least one must survive.
    """
    if not quotes:
        raise ValidationError("quote list must not be empty")
    theo: list[float] = []
    market: list[float] = []
    residuals: list[float] = []
    skipped = 0
    start = time.perf_counter()
    for quote in quotes:
        estimate = vol_source.vol_for(quote.date)
        if estimate is None:
            skipped += 1
            continue
        value = pricer(quote, estimate.sigma_annual, r0)
        theo.append(value)
        market.append(quote.market_price)
        residuals.append(value - quote.market_price)
    wall = time.perf_counter() - start
    if not theo:
        raise ValidationError("every quote was skipped; nothing to score")
    return BacktestReport(
        model_name=model_name,
        rmse=rmse(theo, market),
        mae=mae(theo, market),
        n_quotes=len(theo),
        skipped=skipped,
        wall_time_seconds=wall,
        residuals=residuals,
    )


def write_features_csv(
    quotes: list[MarketQuote],
    vol_source: VolSource,
    r0: float,
    path: str | Path,
) -> int:
    """Write one ``quote_id,date,close,sigma,r`` row per resolvable quote.

    ``close`` is the quote's own closing market price, so a downstream
    sequence model can be trained to predict option prices directly; sigma
    and r are the pricing inputs resolved for that day. Row ids refer to
    positions in ``quotes``; quotes without a resolvable trailing vol are
    omitted. Returns the number of rows written.
    """
    path = Path(path)
    written = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quote_id", "date", "close", "sigma", "r"])
        for quote_id, quote in enumerate(quotes):
            estimate = vol_source.vol_for(quote.date)
            if estimate is None:
                continue
            writer.writerow(
                [
                    quote_id,
                    quote.date.isoformat(),
                    repr(float(quote.market_price)),
                    repr(float(estimate.sigma_annual)),
                    repr(float(r0)),
                ]
            )
            written += 1
    return written


def load_predictions(path: str | Path) -> list[tuple[int, float]]:
    """Read a ``quote_id,predicted_price`` CSV, sorted by id.

    Ids must be unique nonnegative integers forming a contiguous run; a gap
    is reported by its first missing id.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"predictions file not found: {path}")
    rows: list[tuple[int, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != [
            "quote_id",
            "predicted_price",
        ]:
            raise ValidationError(
                f"{path}: expected header 'quote_id,predicted_price', got {header!r} (line 1)"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}: expected 2 fields (line {lineno})")
            try:
                quote_id = int(row[0])
                value = float(row[1])
            except ValueError:
                raise ValidationError(f"{path}: bad row {row!r} (line {lineno})") from None
            if quote_id < 0:
                raise ValidationError(f"{path}: negative quote_id (line {lineno})")
            if not math.isfinite(value):
                raise ValidationError(f"{path}: non-finite prediction (line {lineno})")
            rows.append((quote_id, value))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    ids = [r[0] for r in rows]
    for a, b in zip(ids, ids[1:]):
        if b == a:
            raise ValidationError(f"{path}: duplicate quote_id {a}")
        if b != a + 1:
            raise ValidationError(f"{path}: missing quote_id {a + 1}")
    return rows


def prediction_report(
    quotes: list[MarketQuote],
    predictions: list[tuple[int, float]],
    model_name: str = "lstm",
) -> BacktestReport:
    """Score externally produced predictions against the quoted prices."""
    if not predictions:
        raise ValidationError("predictions must not be empty")
    start = time.perf_counter()
    predicted = []
    actual = []
    residuals = []
    for quote_id, value in predictions:
        if quote_id >= len(quotes):
            raise ValidationError(
                f"quote_id {quote_id} is out of range for {len(quotes)} quotes"
            )
        predicted.append(value)
        actual.append(quotes[quote_id].market_price)
        residuals.append(value - quotes[quote_id].market_price)
    wall = time.perf_counter() - start
    return BacktestReport(
        model_name=model_name,
        rmse=rmse(predicted, actual),
        mae=mae(predicted, actual),
        n_quotes=len(predictions),
        skipped=0,
        wall_time_seconds=wall,
        residuals=residuals,
    )


@dataclass(frozen=True)
class TimingStats:
    """Wall-clock statistics over repeated runs of the same workload."""

    median_seconds: float
    p95_seconds: float
    repetitions: int
    checksum: float
    times: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "median_seconds": self.median_seconds,
            "p95_seconds": self.p95_seconds,
            "repetitions": self.repetitions,
            "checksum": self.checksum,
        }


def timing_benchmark(task: Callable[[object], float], workload, repetitions: int = 5) -> TimingStats:
    """Time ``task`` over the whole workload, repeated ``repetitions`` times.

    Each repetition runs every workload item once and accumulates the float
    results into a checksum so the work cannot be optimized away; the
    checksum must agree across repetitions. p95 uses linear interpolation
    between order statistics. Requires at least 3 repetitions.
    """
    workload = list(workload)
    if repetitions < 3:
        raise ValidationError(f"repetitions must be >= 3, got {repetitions}")
    if not workload:
        raise ValidationError("workload must not be empty")
    times = []
    checksum = None
    for _ in range(repetitions):
        start = time.perf_counter()
        total = 0.0
        for item in workload:
            total += float(task(item))
        times.append(time.perf_counter() - start)
        if checksum is None:
            checksum = total
        elif total != checksum:
            raise ValidationError(
                f"workload is not deterministic: checksum {total!r} != {checksum!r}"
            )
    return TimingStats(
        median_seconds=float(np.median(times)),
        p95_seconds=float(np.percentile(times, 95)),
        repetitions=repetitions,
        checksum=float(checksum),
        times=tuple(times),
    )
