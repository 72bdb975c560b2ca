"""End-to-end acceptance gate for the pricing engine.

One test per numbered acceptance criterion, each ending in a single printed
PASS/FAIL line (visible with ``pytest -v -rA`` or ``-s``) plus the assertion
that enforces the stated tolerance. Criteria cover closed-form agreement,
grid convergence, put-call parity, explicit/implicit scheme agreement, the
Monte Carlo cross-check, qualitative surface shape, the iterative solvers
against direct elimination, wall-clock budget, backtest self-consistency,
and the PDE-only comparison path of the CLI.
"""

import json
import math
import time

import numpy as np

from xbs.backtest import (
    TrailingVolPolicy,
    degenerate_pde_pricer,
    passthrough_pricer,
    run_backtest,
    timing_benchmark,
    write_quotes,
)
from xbs.cli import main as cli_main
from xbs.dynamics import HestonParams, VasicekParams
from xbs.fixtures import synthetic_price_series, synthetic_quotes
from xbs.market_data import save_price_series
from xbs.mc import PathState, mc_vs_pde_report
from xbs.pde import (
    Grid4D,
    OptionContract,
    solve_extended_pde,
    stable_n_t,
    surface_lookup,
)
from xbs.tridiag import TridiagonalSystem, iterative_solve

from oracles import BS_CALL_QUAD_REF, random_dominant_system, thomas_solve

S0, STRIKE, RATE, SIGMA, MATURITY = 100.0, 100.0, 0.05, 0.2, 1.0
S_MAX = 300.0

SINGLE_SIGMA = np.array([SIGMA])
SINGLE_RATE = np.array([RATE])
# zero vol-of-vol and rate-vol pin both state variables at their start values
FLAT_HESTON = HestonParams(kappa=2.0, theta=SIGMA * SIGMA, xi=0.0)
FLAT_VASICEK = VasicekParams(a=0.5, b=RATE, s=0.0)

CALL = OptionContract(kind="call", strike=STRIKE, maturity=MATURITY)
PUT = OptionContract(kind="put", strike=STRIKE, maturity=MATURITY)


def report(criterion: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"criterion {criterion}: {status} ({detail})")
    assert ok, f"criterion {criterion} failed: {detail}"


def benchmark_grid() -> Grid4D:
    return Grid4D(S_MAX, 200, 2000, SINGLE_SIGMA, SINGLE_RATE)


def benchmark_value(grid: Grid4D, contract: OptionContract = CALL) -> float:
    surface = solve_extended_pde(contract, grid, FLAT_HESTON, FLAT_VASICEK)
    return surface_lookup(surface, S0, SIGMA, RATE)


def test_criterion_01_closed_form_agreement():
    start = time.perf_counter()
    value = benchmark_value(benchmark_grid())
    elapsed = time.perf_counter() - start
    rel_err = abs(value - BS_CALL_QUAD_REF) / BS_CALL_QUAD_REF
    report(
        1,
        rel_err < 0.005 and elapsed < 5.0,
        f"rel err {rel_err:.3e} (limit 5e-3), {elapsed:.2f}s (limit 5s)",
    )


def test_criterion_02_error_shrinks_with_the_grid():
    coarse = abs(benchmark_value(benchmark_grid()) - BS_CALL_QUAD_REF)
    # 399 nodes exactly halves the spacing; the time step is re-derived from
    # the stability bound rather than halved blindly
    n_t = stable_n_t(S_MAX, 399, SIGMA, RATE, MATURITY)
    fine_grid = Grid4D(S_MAX, 399, n_t, SINGLE_SIGMA, SINGLE_RATE)
    fine = abs(benchmark_value(fine_grid) - BS_CALL_QUAD_REF)
    ratio = coarse / fine
    report(2, 2.5 <= ratio <= 6.0, f"error ratio {ratio:.3f} (needs [2.5, 6])")


def test_criterion_03_put_call_parity_on_the_grid():
    grid = benchmark_grid()
    call_surface = solve_extended_pde(CALL, grid, FLAT_HESTON, FLAT_VASICEK)
    put_surface = solve_extended_pde(PUT, grid, FLAT_HESTON, FLAT_VASICEK)
    s = grid.s_nodes[1:-1]
    gap = (
        call_surface.values[1:-1, 0, 0]
        - put_surface.values[1:-1, 0, 0]
        - (s - STRIKE * math.exp(-RATE * MATURITY))
    )
    worst = float(np.max(np.abs(gap)))
    limit = 0.002 * S0
    report(3, worst < limit, f"max parity gap {worst:.3e} (limit {limit})")


def test_criterion_04_schemes_agree_on_the_full_model():
    sigma_nodes = np.array([0.15, 0.2, 0.25])
    r_nodes = np.array([0.03, 0.05, 0.07])
    heston = HestonParams(kappa=2.0, theta=0.04, xi=0.1)
    vasicek = VasicekParams(a=0.5, b=0.05, s=0.01)
    n_t = stable_n_t(
        S_MAX, 61, float(sigma_nodes.max()), float(np.abs(r_nodes).max()), MATURITY
    )
    grid = Grid4D(S_MAX, 61, n_t, sigma_nodes, r_nodes)
    explicit = solve_extended_pde(CALL, grid, heston, vasicek, scheme="explicit")
    implicit = solve_extended_pde(CALL, grid, heston, vasicek, scheme="implicit")
    v_explicit = surface_lookup(explicit, S0, SIGMA, RATE)
    v_implicit = surface_lookup(implicit, S0, SIGMA, RATE)
    rel_gap = abs(v_explicit - v_implicit) / abs(v_explicit)
    report(
        4,
        rel_gap < 0.005,
        f"explicit {v_explicit:.6f} vs implicit {v_implicit:.6f}, "
        f"rel gap {rel_gap:.3e} (limit 5e-3)",
    )


def test_criterion_05_monte_carlo_cross_check():
    start = time.perf_counter()
    record = mc_vs_pde_report(
        CALL,
        PathState(stock=S0, variance=SIGMA * SIGMA, rate=RATE),
        FLAT_HESTON,
        FLAT_VASICEK,
        benchmark_grid(),
        n_paths=200_000,
        seed=0,
    )
    elapsed = time.perf_counter() - start
    gap = abs(record.pde - record.mc)
    limit = max(3.0 * record.std_error, 0.005 * abs(record.mc))
    report(
        5,
        gap <= limit and elapsed < 60.0,
        f"|pde-mc| {gap:.4f} vs max(3se, 0.5%) {limit:.4f}, {elapsed:.1f}s (limit 60s)",
    )


def test_criterion_06_surfaces_have_the_right_shape():
    # put value per strike, struck from 50 to 150 in steps of 10
    values = []
    for strike in range(50, 151, 10):
        n_t = stable_n_t(S_MAX, 101, SIGMA, RATE, MATURITY)
        grid = Grid4D(S_MAX, 101, n_t, SINGLE_SIGMA, SINGLE_RATE)
        contract = OptionContract(kind="put", strike=float(strike), maturity=MATURITY)
        values.append(benchmark_value(grid, contract))
    values = np.array(values)
    puts_monotone = bool(np.all(np.diff(values) >= -1e-12))
    slope = (values[-1] - values[-2]) / 10.0
    discount = math.exp(-RATE * MATURITY)
    slope_dev = abs(slope - discount) / discount

    # call surface in the spot and calendar-time directions
    n_t = stable_n_t(S_MAX, 241, SIGMA, RATE, MATURITY)
    grid = Grid4D(S_MAX, 241, n_t, SINGLE_SIGMA, SINGLE_RATE)
    surface = solve_extended_pde(
        CALL, grid, FLAT_HESTON, FLAT_VASICEK, keep_time_slices=True
    )
    call_in_s = bool(np.all(np.diff(surface.values[:, 0, 0]) >= -1e-10))
    atm_node = 80  # grid spacing 1.25 puts S0=100 exactly on node 80
    assert grid.s_nodes[atm_node] == S0
    # slice index moves toward expiry, so value must not increase along it
    atm_through_time = surface.time_slices[:, atm_node, 0, 0]
    call_in_tau = bool(np.all(np.diff(atm_through_time) <= 1e-10))

    ok = puts_monotone and slope_dev <= 0.15 and call_in_s and call_in_tau
    report(
        6,
        ok,
        f"puts monotone {puts_monotone}, deep strike slope dev {slope_dev:.3f} "
        f"(limit 0.15), call monotone in S {call_in_s}, in maturity {call_in_tau}",
    )


def test_criterion_07_iterative_solvers_match_elimination():
    rng = np.random.default_rng(20260819)
    worst_residual = 0.0
    worst_gap = 0.0
    for _ in range(100):
        n = int(rng.integers(50, 501))
        # slack 0.5 keeps over-relaxation at the default omega inside its
        # guaranteed-convergence region for arbitrary sign patterns
        lower, diag, upper = random_dominant_system(rng, n, slack=0.5)
        rhs = rng.standard_normal(n)
        system = TridiagonalSystem(lower=lower, diag=diag, upper=upper)
        direct = thomas_solve(lower, diag, upper, rhs)
        for method in ("gauss_seidel", "sor"):
            x, _ = iterative_solve(
                system, rhs, method=method, omega=1.2, tol=1e-10, max_iters=10_000
            )
            worst_residual = max(worst_residual, system.residual_norm(x, rhs))
            worst_gap = max(worst_gap, float(np.max(np.abs(x - direct))))
    report(
        7,
        worst_residual <= 1e-8 and worst_gap <= 1e-8,
        f"worst residual {worst_residual:.2e}, worst gap to elimination "
        f"{worst_gap:.2e} (limits 1e-8)",
    )


def test_criterion_08_benchmark_solve_fits_the_time_budget():
    stats = timing_benchmark(
        lambda _: benchmark_value(benchmark_grid()), [0], repetitions=3
    )
    print("timing report:", json.dumps(stats.to_dict()))
    report(
        8,
        stats.median_seconds < 5.0,
        f"median {stats.median_seconds:.3f}s over {stats.repetitions} runs (limit 5s)",
    )


def test_criterion_09_backtest_reproduces_synthetic_quotes():
    series = synthetic_price_series(n_days=150, seed=7)
    quotes = synthetic_quotes(series, r0=0.03, window_days=30)
    policy = TrailingVolPolicy(series, window_days=30)
    model = run_backtest(quotes, degenerate_pde_pricer(n_s=241), policy, r0=0.03)
    passthrough = run_backtest(
        quotes, passthrough_pricer, policy, r0=0.03, model_name="passthrough"
    )
    mean_quote = sum(q.market_price for q in quotes) / len(quotes)
    ok = model.rmse < 0.005 * mean_quote and passthrough.rmse == 0.0
    report(
        9,
        ok,
        f"pde rmse {model.rmse:.4f} vs 0.5% of mean quote "
        f"{0.005 * mean_quote:.4f}, passthrough rmse {passthrough.rmse!r}",
    )


def test_criterion_12_compare_runs_without_a_predictions_file(tmp_path, capsys):
    series = synthetic_price_series(n_days=45, seed=7)
    quotes = synthetic_quotes(series, r0=0.03, window_days=30)
    prices_path = tmp_path / "prices.csv"
    quotes_path = tmp_path / "quotes.csv"
    save_price_series(series, prices_path)
    write_quotes(quotes, quotes_path)
    code = cli_main([
        "compare", "--quotes", str(quotes_path), "--prices", str(prices_path),
        "--r0", "0.03", "--pricer", "passthrough", "--json",
    ])
    captured = capsys.readouterr()
    record = json.loads(captured.out)
    ok = (
        code == 0
        and record["lstm"] is None
        and record["delta_rmse"] is None
        and record["pde"]["n_quotes"] == len(quotes)
        and "notice" in captured.err
    )
    with capsys.disabled():
        report(
            12,
            ok,
            f"exit {code}, pde report on {record['pde']['n_quotes']} quotes, "
            "degraded to PDE-only with a notice",
        )
