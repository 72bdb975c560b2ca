"""Command-line front end: price, surface, simulate, backtest, compare.

Configuration comes from an optional JSON file (``--config``) plus flags;
flags always win. Exit codes: 0 success, 1 numerical failure (instability or
non-convergence), 2 configuration or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .backtest import (
    TrailingVolPolicy,
    degenerate_pde_pricer,
    load_predictions,
    load_quotes,
    passthrough_pricer,
    prediction_report,
    run_backtest,
    write_features_csv,
)
from .dynamics import HestonParams, PathState, VasicekParams, simulate_paths
from .errors import ConvergenceError, PricingError, StabilityError, ValidationError
from .market_data import load_price_series
from .mc import default_mc_steps
from .pde import (
    Grid4D,
    OptionContract,
    export_surface_csv,
    solve_extended_pde,
    stable_n_t,
    surface_lookup,
)

SCHEMA_VERSION = 1
# node spans used when a config asks for n_sigma/n_r counts without explicit lists
SIGMA_SPAN = (0.05, 0.8)
R_SPAN = (0.0, 0.10)


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"{path}: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})"
        )
    return data


def _config_of(args) -> dict:
    return load_config(args.config) if args.config else {}


def _section(cfg: dict, name: str) -> dict:
    section = cfg.get(name, {})
    if not isinstance(section, dict):
        raise ValidationError(f"config section {name!r} must be a JSON object")
    return section


def _pick(flag_value, section: dict, key: str, default=None):
    return flag_value if flag_value is not None else section.get(key, default)


def _require(value, what: str):
    if value is None:
        raise ValidationError(f"{what} is required (set a flag or config entry)")
    return value


def _resolve_contract(args, cfg: dict, need_strike: bool = True) -> dict:
    sec = _section(cfg, "contract")
    fields = {
        "kind": str(_pick(getattr(args, "kind", None), sec, "kind", "call")),
        "maturity": float(
            _require(_pick(getattr(args, "maturity", None), sec, "maturity"), "maturity")
        ),
    }
    strike = _pick(getattr(args, "strike", None), sec, "strike")
    if need_strike:
        strike = _require(strike, "strike")
    if strike is not None:
        fields["strike"] = float(strike)
    return fields


def _resolve_market(args, cfg: dict) -> tuple[float, float, float]:
    sec = _section(cfg, "market")
    s0 = float(_require(_pick(getattr(args, "s0", None), sec, "s0"), "s0"))
    sigma0 = float(_require(_pick(getattr(args, "sigma0", None), sec, "sigma0"), "sigma0"))
    r0 = float(_pick(getattr(args, "r0", None), sec, "r0", 0.0))
    return s0, sigma0, r0


def _resolve_r0(args, cfg: dict) -> float:
    return float(_pick(getattr(args, "r0", None), _section(cfg, "market"), "r0", 0.0))


def _resolve_scheme(args, cfg: dict) -> str:
    return str(_pick(getattr(args, "scheme", None), cfg, "scheme", "explicit"))


def _resolve_seed(args, cfg: dict) -> int:
    return int(_pick(getattr(args, "seed", None), cfg, "seed", 0))


def _resolve_dynamics(cfg: dict, sigma0: float, r0: float) -> tuple[HestonParams, VasicekParams]:
    """Default dynamics pin both drifts to zero at the query point."""
    hsec = _section(cfg, "heston")
    vsec = _section(cfg, "vasicek")
    heston = HestonParams(
        kappa=float(hsec.get("kappa", 1.0)),
        theta=float(hsec.get("theta", sigma0 * sigma0)),
        xi=float(hsec.get("xi", 0.0)),
    )
    vasicek = VasicekParams(
        a=float(vsec.get("a", 1.0)),
        b=float(vsec.get("b", r0)),
        s=float(vsec.get("s", 0.0)),
    )
    return heston, vasicek


def _node_list(sec: dict, list_key: str, count_key: str, span: tuple[float, float],
               fallback: float) -> np.ndarray:
    if list_key in sec:
        return np.asarray(sec[list_key], dtype=float)
    count = int(sec.get(count_key, 1))
    if count > 1:
        return np.linspace(span[0], span[1], count)
    return np.array([fallback])


def _resolve_grid(
    args, cfg: dict, contract: OptionContract, s0: float, sigma0: float, r0: float,
    scheme: str,
) -> Grid4D:
    sec = _section(cfg, "grid")
    s_max = float(
        _pick(getattr(args, "s_max", None), sec, "s_max", 3.0 * max(s0, contract.strike))
    )
    n_s = int(_pick(getattr(args, "n_s", None), sec, "n_s", 200))
    sigma_nodes = _node_list(sec, "sigma_nodes", "n_sigma", SIGMA_SPAN, sigma0)
    r_nodes = _node_list(sec, "r_nodes", "n_r", R_SPAN, r0)
    n_t_value = _pick(getattr(args, "n_t", None), sec, "n_t")
    if n_t_value is not None:
        n_t = int(n_t_value)
    elif scheme == "explicit":
        n_t = stable_n_t(
            s_max,
            n_s,
            float(np.max(sigma_nodes)),
            float(np.max(np.abs(r_nodes))),
            contract.maturity,
        )
    else:
        n_t = 200
    return Grid4D(s_max=s_max, n_s=n_s, n_t=n_t, sigma_nodes=sigma_nodes, r_nodes=r_nodes)


def _grid_record(grid: Grid4D) -> dict:
    return {
        "s_max": grid.s_max,
        "n_s": grid.n_s,
        "n_t": grid.n_t,
        "sigma_nodes": [float(x) for x in grid.sigma_nodes],
        "r_nodes": [float(x) for x in grid.r_nodes],
    }


def _emit(args, record: dict, human: str) -> None:
    text = json.dumps(record, indent=2)
    print(text if args.json else human)
    if getattr(args, "out", None) and record.get("command") != "surface":
        Path(args.out).write_text(text + "\n")


def cmd_price(args) -> int:
    cfg = _config_of(args)
    cf = _resolve_contract(args, cfg)
    contract = OptionContract(kind=cf["kind"], strike=cf["strike"], maturity=cf["maturity"])
    s0, sigma0, r0 = _resolve_market(args, cfg)
    scheme = _resolve_scheme(args, cfg)
    heston, vasicek = _resolve_dynamics(cfg, sigma0, r0)
    grid = _resolve_grid(args, cfg, contract, s0, sigma0, r0, scheme)
    surface = solve_extended_pde(contract, grid, heston, vasicek, scheme=scheme)
    value = surface_lookup(surface, s0, sigma0, r0)
    if getattr(args, "surface_out", None):
        export_surface_csv(surface, args.surface_out)
    record = {
        "command": "price",
        "value": value,
        "kind": contract.kind,
        "strike": contract.strike,
        "maturity": contract.maturity,
        "s0": s0,
        "sigma0": sigma0,
        "r0": r0,
        "scheme": scheme,
        "grid": _grid_record(grid),
    }
    _emit(args, record, f"price: {value:.6f}")
    return 0


def cmd_surface(args) -> int:
    cfg = _config_of(args)
    sweep = _section(cfg, "sweep")
    mode = str(_pick(args.mode, sweep, "mode", "strike"))
    out = _pick(args.out, sweep, "out")
    out = Path(_require(out, "surface output path (--out)"))
    s0, sigma0, r0 = _resolve_market(args, cfg)
    scheme = _resolve_scheme(args, cfg)
    heston, vasicek = _resolve_dynamics(cfg, sigma0, r0)

    if mode == "strike":
        cf = _resolve_contract(args, cfg, need_strike=False)
        k_min = float(_require(_pick(args.strike_min, sweep, "strike_min"), "strike_min"))
        k_max = float(_require(_pick(args.strike_max, sweep, "strike_max"), "strike_max"))
        step = float(_pick(args.strike_step, sweep, "strike_step", 10.0))
        if step <= 0.0:
            raise ValidationError(f"strike_step must be positive, got {step}")
        if k_min > k_max:
            raise ValidationError(f"empty sweep: strike_min {k_min} > strike_max {k_max}")
        count = int(np.floor((k_max - k_min) / step + 1e-9)) + 1
        strikes = [k_min + i * step for i in range(count)]
        rows = []
        for strike in strikes:
            contract = OptionContract(kind=cf["kind"], strike=strike, maturity=cf["maturity"])
            grid = _resolve_grid(args, cfg, contract, s0, sigma0, r0, scheme)
            surface = solve_extended_pde(contract, grid, heston, vasicek, scheme=scheme)
            for sig in grid.sigma_nodes:
                for r in grid.r_nodes:
                    rows.append(
                        (strike, float(sig), float(r),
                         surface_lookup(surface, s0, float(sig), float(r)))
                    )
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["strike", "sigma", "r", "value"])
            for row in rows:
                writer.writerow([repr(float(x)) for x in row])
    elif mode == "spot-time":
        cf = _resolve_contract(args, cfg)
        contract = OptionContract(kind=cf["kind"], strike=cf["strike"], maturity=cf["maturity"])
        grid = _resolve_grid(args, cfg, contract, s0, sigma0, r0, scheme)
        surface = solve_extended_pde(
            contract, grid, heston, vasicek, scheme=scheme, keep_time_slices=True
        )
        t_samples = int(_pick(args.t_samples, sweep, "t_samples", 50))
        if t_samples < 2:
            raise ValidationError(f"t_samples must be >= 2, got {t_samples}")
        n_levels = min(t_samples, grid.n_t + 1)
        level_idx = np.unique(np.round(np.linspace(0, grid.n_t, n_levels)).astype(int))
        dt = contract.maturity / grid.n_t
        s = grid.s_nodes
        rows = []
        for i in level_idx:
            for j in range(grid.n_s):
                for k, sig in enumerate(grid.sigma_nodes):
                    for l, r in enumerate(grid.r_nodes):
                        rows.append(
                            (i * dt, float(s[j]), float(sig), float(r),
                             float(surface.time_slices[i, j, k, l]))
                        )
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "s", "sigma", "r", "value"])
            for row in rows:
                writer.writerow([repr(float(x)) for x in row])
    else:
        raise ValidationError(f"mode must be 'strike' or 'spot-time', got {mode!r}")

    record = {"command": "surface", "mode": mode, "rows": len(rows), "out": str(out)}
    _emit(args, record, f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config_of(args)
    s0, sigma0, r0 = _resolve_market(args, cfg)
    heston, vasicek = _resolve_dynamics(cfg, sigma0, r0)
    sec = _section(cfg, "simulate")
    horizon = float(_pick(args.horizon, sec, "horizon", 1.0))
    steps = int(_pick(args.steps, sec, "steps", default_mc_steps(horizon)))
    n_paths = int(_pick(args.n_paths, sec, "n_paths", 10000))
    seed = _resolve_seed(args, cfg)
    ensemble = simulate_paths(
        PathState(stock=s0, variance=sigma0 * sigma0, rate=r0),
        heston, vasicek, horizon, steps, n_paths, seed,
    )
    record = {
        "command": "simulate",
        "n_paths": n_paths,
        "steps": steps,
        "horizon": horizon,
        "seed": seed,
        "mean_stock": float(np.mean(ensemble.stock)),
        "std_stock": float(np.std(ensemble.stock, ddof=1)) if n_paths > 1 else 0.0,
        "mean_variance": float(np.mean(ensemble.variance)),
        "mean_rate": float(np.mean(ensemble.rate)),
        "mean_discount": float(np.mean(np.exp(-ensemble.rate_integral))),
    }
    _emit(
        args,
        record,
        f"simulated {n_paths} paths over {horizon}y: "
        f"mean terminal stock {record['mean_stock']:.4f}, "
        f"mean rate {record['mean_rate']:.4f}",
    )
    return 0


def _backtest_inputs(args, cfg: dict):
    data = _section(cfg, "data")
    bsec = _section(cfg, "backtest")
    quotes_path = _require(_pick(args.quotes, data, "quotes"), "quotes path")
    prices_path = _require(_pick(args.prices, data, "prices"), "prices path")
    series = load_price_series(prices_path)
    quotes = load_quotes(quotes_path)
    window_days = int(_pick(getattr(args, "window_days", None), bsec, "window_days", 30))
    policy = TrailingVolPolicy(series, window_days=window_days)
    r0 = _resolve_r0(args, cfg)
    pricer_name = str(_pick(getattr(args, "pricer", None), bsec, "pricer", "pde"))
    if pricer_name == "pde":
        pricer = degenerate_pde_pricer(
            n_s=int(bsec.get("n_s", 241)),
            scheme=str(bsec.get("scheme", "explicit")),
        )
        model_name = "pde_fd"
    elif pricer_name == "passthrough":
        pricer = passthrough_pricer
        model_name = "passthrough"
    else:
        raise ValidationError(f"pricer must be 'pde' or 'passthrough', got {pricer_name!r}")
    return quotes, pricer, policy, r0, model_name


def cmd_backtest(args) -> int:
    cfg = _config_of(args)
    quotes, pricer, policy, r0, model_name = _backtest_inputs(args, cfg)
    report = run_backtest(quotes, pricer, policy, r0, model_name=model_name)
    if args.features_out:
        written = write_features_csv(quotes, policy, r0, args.features_out)
        print(f"wrote {written} feature rows to {args.features_out}", file=sys.stderr)
    record = {"command": "backtest", **report.to_dict()}
    _emit(
        args,
        record,
        f"{report.model_name}: rmse={report.rmse:.6f} mae={report.mae:.6f} "
        f"n={report.n_quotes} skipped={report.skipped} "
        f"time={report.wall_time_seconds:.2f}s",
    )
    return 0


def cmd_compare(args) -> int:
    cfg = _config_of(args)
    data = _section(cfg, "data")
    quotes, pricer, policy, r0, _ = _backtest_inputs(args, cfg)
    predictions_path = _pick(args.lstm_predictions, data, "lstm_predictions")

    if predictions_path is None or not Path(predictions_path).exists():
        where = f" at {predictions_path}" if predictions_path else ""
        print(
            f"notice: no LSTM predictions file{where}; emitting PDE report only",
            file=sys.stderr,
        )
        pde_report = run_backtest(quotes, pricer, policy, r0, model_name="pde_fd")
        record = {
            "command": "compare",
            "pde": pde_report.to_dict(),
            "lstm": None,
            "delta_rmse": None,
        }
        _emit(
            args,
            record,
            f"pde_fd: rmse={pde_report.rmse:.6f} (no LSTM predictions to compare)",
        )
        return 0

    predictions = load_predictions(predictions_path)
    first_id = predictions[0][0]
    last_id = predictions[-1][0]
    if last_id >= len(quotes):
        raise ValidationError(
            f"quote_id {last_id} is out of range for {len(quotes)} quotes"
        )
    # score both models over the quote range the predictions cover
    subset = quotes[first_id : last_id + 1]
    pde_report = run_backtest(subset, pricer, policy, r0, model_name="pde_fd")
    lstm_report = prediction_report(quotes, predictions, model_name="lstm")
    record = {
        "command": "compare",
        "pde": pde_report.to_dict(),
        "lstm": lstm_report.to_dict(),
        "delta_rmse": pde_report.rmse - lstm_report.rmse,
    }
    _emit(
        args,
        record,
        f"pde_fd rmse={pde_report.rmse:.6f} vs lstm rmse={lstm_report.rmse:.6f} "
        f"(delta {record['delta_rmse']:+.6f}; positive favors the LSTM)",
    )
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--json", action="store_true", help="print a JSON record")
    p.add_argument("--seed", type=int, help="seed for anything random")
    p.add_argument("--out", help="write the record (CSV for surface) to this path")


def _add_market(p: argparse.ArgumentParser) -> None:
    p.add_argument("--s0", type=float, help="spot price")
    p.add_argument("--sigma0", type=float, help="annualized volatility")
    p.add_argument("--r0", type=float, help="short rate (default 0)")


def _add_grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--s-max", dest="s_max", type=float, help="top of the S grid")
    p.add_argument("--n-s", dest="n_s", type=int, help="S node count (default 200)")
    p.add_argument("--n-t", dest="n_t", type=int, help="time step count")
    p.add_argument("--scheme", choices=["explicit", "implicit"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xbs",
        description="Finite-difference option pricing with stochastic-parameter "
        "drift terms, plus simulation and backtesting utilities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    price = sub.add_parser("price", help="price one contract at (s0, sigma0, r0)")
    _add_common(price)
    _add_market(price)
    _add_grid(price)
    price.add_argument("--kind", choices=["call", "put"])
    price.add_argument("--strike", type=float)
    price.add_argument("--maturity", type=float, help="years to expiry")
    price.add_argument("--surface-out", help="also export the full surface CSV here")
    price.set_defaults(func=cmd_price)

    surface = sub.add_parser("surface", help="export a strike sweep or S/t slab as CSV")
    _add_common(surface)
    _add_market(surface)
    _add_grid(surface)
    surface.add_argument("--mode", choices=["strike", "spot-time"])
    surface.add_argument("--kind", choices=["call", "put"])
    surface.add_argument("--strike", type=float, help="contract strike (spot-time mode)")
    surface.add_argument("--maturity", type=float)
    surface.add_argument("--strike-min", dest="strike_min", type=float)
    surface.add_argument("--strike-max", dest="strike_max", type=float)
    surface.add_argument("--strike-step", dest="strike_step", type=float)
    surface.add_argument("--t-samples", dest="t_samples", type=int,
                         help="time levels to export in spot-time mode (default 50)")
    surface.set_defaults(func=cmd_surface)

    simulate = sub.add_parser("simulate", help="simulate joint stock/variance/rate paths")
    _add_common(simulate)
    _add_market(simulate)
    simulate.add_argument("--horizon", type=float, help="years (default 1)")
    simulate.add_argument("--steps", type=int)
    simulate.add_argument("--n-paths", dest="n_paths", type=int)
    simulate.set_defaults(func=cmd_simulate)

    backtest = sub.add_parser("backtest", help="score a pricer against quoted prices")
    _add_common(backtest)
    backtest.add_argument("--quotes", help="quotes CSV path")
    backtest.add_argument("--prices", help="underlying daily close CSV path")
    backtest.add_argument("--r0", type=float)
    backtest.add_argument("--window-days", dest="window_days", type=int)
    backtest.add_argument("--pricer", choices=["pde", "passthrough"])
    backtest.add_argument("--features-out", dest="features_out",
                          help="write the aligned feature table here")
    backtest.set_defaults(func=cmd_backtest)

    compare = sub.add_parser(
        "compare", help="backtest the PDE pricer and score LSTM predictions beside it"
    )
    _add_common(compare)
    compare.add_argument("--quotes", help="quotes CSV path")
    compare.add_argument("--prices", help="underlying daily close CSV path")
    compare.add_argument("--r0", type=float)
    compare.add_argument("--window-days", dest="window_days", type=int)
    compare.add_argument("--pricer", choices=["pde", "passthrough"])
    compare.add_argument("--lstm-predictions", dest="lstm_predictions",
                         help="predictions CSV from the sequence model")
    compare.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StabilityError, ConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except PricingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
