"""Synthetic market data: price histories, quote sets, feature tables.

Quotes are at-the-money contracts struck at each day's close and priced with
the closed-form model from the trailing historical vol, so a pricer fed the
same vol policy should reproduce them almost exactly. Run as a module
(``python -m xbs.fixtures``) to write a ready-made dataset to disk.
"""

from __future__ import annotations

import argparse
import math
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .backtest import MarketQuote, TrailingVolPolicy, write_features_csv, write_quotes
from .errors import ValidationError
from .market_data import PriceSeries, save_price_series
from .pde import OptionContract, bs_closed_form

DEFAULT_START = date(2019, 5, 1)


def _weekdays(start: date, count: int) -> tuple[date, ...]:
    days = []
    day = start
    while len(days) < count:
        if day.weekday() < 5:
            days.append(day)
        day = day + timedelta(days=1)
    return tuple(days)


def synthetic_price_series(
    n_days: int = 400,
    s0: float = 100.0,
    drift: float = 0.05,
    vol: float = 0.2,
    seed: int = 7,
    start: date = DEFAULT_START,
    mode: str = "gbm",
) -> PriceSeries:
    """Generate a daily close series on consecutive weekdays.

    mode='gbm' draws seeded lognormal daily returns with the given annual
    drift and vol. mode='smooth' is a deterministic two-tone wave with a
    gentle upward trend: noiseless, so trailing statistics evolve smoothly
    and a sequence model can fit it tightly.
    """
    if n_days < 2:
        raise ValidationError(f"n_days must be >= 2, got {n_days}")
    if s0 <= 0.0:
        raise ValidationError(f"s0 must be positive, got {s0}")
    dates = _weekdays(start, n_days)
    if mode == "gbm":
        rng = np.random.default_rng(seed)
        z = rng.standard_normal(n_days - 1)
        increments = (drift - 0.5 * vol * vol) / 252.0 + vol / math.sqrt(252.0) * z
        closes = s0 * np.exp(np.concatenate([[0.0], np.cumsum(increments)]))
    elif mode == "smooth":
        i = np.arange(n_days, dtype=float)
        closes = s0 * (
            1.0
            + 0.12 * np.sin(2.0 * math.pi * i / 63.0)
            + 0.04 * np.sin(2.0 * math.pi * i / 21.0)
            + 0.0005 * i
        )
    else:
        raise ValidationError(f"mode must be 'gbm' or 'smooth', got {mode!r}")
    return PriceSeries(dates=dates, closes=closes)


def synthetic_quotes(
    series: PriceSeries,
    r0: float = 0.03,
    window_days: int = 30,
    maturity: float = 0.25,
    kinds: tuple[str, ...] = ("call",),
    noise: float = 0.0,
    seed: int = 0,
) -> list[MarketQuote]:
    """At-the-money quotes for every day with enough trailing history.

    Each quote is struck exactly at that day's close and priced closed-form
    from the trailing vol, optionally perturbed by additive Gaussian noise
    (floored at zero). With noise=0 the quotes are exactly consistent with a
    Black-Scholes pricer driven by the same vol policy.
    """
    policy = TrailingVolPolicy(series, window_days=window_days)
    rng = np.random.default_rng(seed)
    quotes: list[MarketQuote] = []
    for pos in range(window_days, len(series)):
        day = series.dates[pos]
        close = float(series.closes[pos])
        estimate = policy.vol_for(day)
        if estimate is None:
            continue
        kind = kinds[len(quotes) % len(kinds)]
        contract = OptionContract(kind=kind, strike=close, maturity=maturity)
        price = bs_closed_form(contract, close, estimate.sigma_annual, r0)
        if noise > 0.0:
            price = max(price + noise * float(rng.standard_normal()), 0.0)
        quotes.append(
            MarketQuote(
                date=day,
                strike=close,
                maturity=maturity,
                kind=kind,
                market_price=price,
                underlying_close=close,
            )
        )
    if not quotes:
        raise ValidationError("series too short for the requested window")
    return quotes


def write_dataset(
    out_dir: str | Path,
    n_days: int = 400,
    s0: float = 100.0,
    drift: float = 0.05,
    vol: float = 0.2,
    seed: int = 7,
    mode: str = "gbm",
    r0: float = 0.03,
    window_days: int = 30,
    maturity: float = 0.25,
    kinds: tuple[str, ...] = ("call",),
    noise: float = 0.0,
) -> dict[str, Path]:
    """Write prices.csv, quotes.csv and features.csv under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = synthetic_price_series(
        n_days=n_days, s0=s0, drift=drift, vol=vol, seed=seed, mode=mode
    )
    quotes = synthetic_quotes(
        series,
        r0=r0,
        window_days=window_days,
        maturity=maturity,
        kinds=kinds,
        noise=noise,
        seed=seed + 1,
    )
    paths = {
        "prices": out_dir / "prices.csv",
        "quotes": out_dir / "quotes.csv",
        "features": out_dir / "features.csv",
    }
    save_price_series(series, paths["prices"])
    write_quotes(quotes, paths["quotes"])
    policy = TrailingVolPolicy(series, window_days=window_days)
    write_features_csv(quotes, policy, r0, paths["features"])
    return paths


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m xbs.fixtures",
        description="Write a synthetic prices/quotes/features dataset.",
    )
    parser.add_argument("--out-dir", required=True, help="directory for the CSV files")
    parser.add_argument("--days", type=int, default=400)
    parser.add_argument("--s0", type=float, default=100.0)
    parser.add_argument("--drift", type=float, default=0.05)
    parser.add_argument("--vol", type=float, default=0.2)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--mode", choices=["gbm", "smooth"], default="gbm")
    parser.add_argument("--r0", type=float, default=0.03)
    parser.add_argument("--window-days", type=int, default=30)
    parser.add_argument("--maturity", type=float, default=0.25)
    parser.add_argument(
        "--kinds", default="call", help="comma-separated cycle of call/put"
    )
    parser.add_argument("--noise", type=float, default=0.0)
    args = parser.parse_args(argv)
    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    paths = write_dataset(
        args.out_dir,
        n_days=args.days,
        s0=args.s0,
        drift=args.drift,
        vol=args.vol,
        seed=args.seed,
        mode=args.mode,
        r0=args.r0,
        window_days=args.window_days,
        maturity=args.maturity,
        kinds=kinds,
        noise=args.noise,
    )
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
