"""Option pricing on a (t, S, sigma, r) finite-difference grid.

The package prices European options under a Black-Scholes operator extended
with advection along the drifts of a mean-reverting variance process and a
mean-reverting short rate. Cross-checks come from the closed-form solution
(degenerate grids) and a Monte Carlo engine sharing the same dynamics;
a backtesting harness scores pricers against quoted option prices.
"""

from .backtest import (
    BacktestReport,
    MarketQuote,
    TimingStats,
    TrailingVolPolicy,
    degenerate_pde_pricer,
    load_predictions,
    load_quotes,
    mae,
    passthrough_pricer,
    prediction_report,
    rmse,
    run_backtest,
    timing_benchmark,
    write_features_csv,
    write_quotes,
)
from .dynamics import (
    HestonParams,
    PathEnsemble,
    PathState,
    VasicekParams,
    euler_step,
    rate_drift,
    sigma_drift_from_variance,
    simulate_paths,
    variance_drift,
)
from .errors import ConvergenceError, PricingError, StabilityError, ValidationError
from .market_data import (
    PriceSeries,
    VolEstimate,
    historical_volatility,
    load_price_series,
    log_returns,
    save_price_series,
)
from .mc import ComparisonRecord, McEstimate, default_mc_steps, mc_price, mc_vs_pde_report
from .pde import (
    Grid4D,
    OptionContract,
    PriceSurface,
    assemble_tridiagonal,
    boundary_values,
    bs_closed_form,
    explicit_dt_bound,
    explicit_step,
    export_surface_csv,
    payoff,
    solve_extended_pde,
    stable_n_t,
    surface_lookup,
)
from .tridiag import TridiagonalSystem, iterative_solve

__version__ = "0.1.0"

__all__ = [
    "BacktestReport",
    "ComparisonRecord",
    "ConvergenceError",
    "Grid4D",
    "HestonParams",
    "MarketQuote",
    "McEstimate",
    "OptionContract",
    "PathEnsemble",
    "PathState",
    "PriceSeries",
    "PriceSurface",
    "PricingError",
    "StabilityError",
    "TimingStats",
    "TrailingVolPolicy",
    "TridiagonalSystem",
    "ValidationError",
    "VasicekParams",
    "VolEstimate",
    "assemble_tridiagonal",
    "boundary_values",
    "bs_closed_form",
    "default_mc_steps",
    "degenerate_pde_pricer",
    "euler_step",
    "explicit_dt_bound",
    "explicit_step",
    "export_surface_csv",
    "historical_volatility",
    "iterative_solve",
    "load_predictions",
    "load_price_series",
    "load_quotes",
    "log_returns",
    "mae",
    "mc_price",
    "mc_vs_pde_report",
    "passthrough_pricer",
    "payoff",
    "prediction_report",
    "rate_drift",
    "rmse",
    "run_backtest",
    "save_price_series",
    "sigma_drift_from_variance",
    "simulate_paths",
    "solve_extended_pde",
    "stable_n_t",
    "surface_lookup",
    "timing_benchmark",
    "variance_drift",
    "write_features_csv",
    "write_quotes",
]
