"""Mean-reverting variance and short-rate dynamics with path simulation.

The stock follows geometric Brownian motion whose instantaneous variance and
short rate are themselves mean-reverting diffusions:

    dv = kappa * (theta - v) dt + xi * sqrt(v) dW_v
    dr = a * (b - r) dt + s dW_r

driven by Brownian motions independent of each other and of the stock's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# Paths per RNG sub-stream. Fixed so results depend only on (seed, n_paths),
# never on how the work is batched.
CHUNK_PATHS = 65536


@dataclass(frozen=True)
class HestonParams:
    """Square-root variance process dv = kappa*(theta - v) dt + xi*sqrt(v) dW."""

    kappa: float
    theta: float
    xi: float

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ValidationError(f"kappa must be positive, got {self.kappa}")
        # theta = 0 is allowed so zero-volatility deterministic limits exist
        if self.theta < 0.0:
            raise ValidationError(f"theta must be >= 0, got {self.theta}")
        if self.xi < 0.0:
            raise ValidationError(f"xi must be >= 0, got {self.xi}")


@dataclass(frozen=True)
class VasicekParams:
    """Ornstein-Uhlenbeck short rate dr = a*(b - r) dt + s dW."""

    a: float
    b: float
    s: float

    def __post_init__(self):
        if self.a <= 0.0:
            raise ValidationError(f"a must be positive, got {self.a}")
        if self.s < 0.0:
            raise ValidationError(f"s must be >= 0, got {self.s}")


@dataclass(frozen=True)
class PathState:
    """One point of a simulated path: stock level, variance, short rate."""

    stock: float
    variance: float
    rate: float

    def __post_init__(self):
        if not math.isfinite(self.stock) or self.stock <= 0.0:
            raise ValidationError(f"stock must be positive, got {self.stock}")
        if not math.isfinite(self.variance) or self.variance < 0.0:
            raise ValidationError(f"variance must be >= 0, got {self.variance}")
        if not math.isfinite(self.rate):
            raise ValidationError(f"rate must be finite, got {self.rate}")


@dataclass(frozen=True)
class PathEnsemble:
    """Terminal states of a batch of simulated paths.

    ``rate_integral`` holds the left-endpoint Riemann sum of the short rate
    along each path, i.e. the pathwise discount exponent.
    """

    stock: np.ndarray
    variance: np.ndarray
    rate: np.ndarray
    rate_integral: np.ndarray
    horizon: float
    steps: int
    seed: int

    def __post_init__(self):
        n = self.stock.shape[0]
        for name in ("variance", "rate", "rate_integral"):
            if getattr(self, name).shape != (n,):
                raise ValidationError(f"{name} must have shape ({n},)")


def variance_drift(params: HestonParams, variance: float) -> float:
    """Drift of the variance process, kappa*(theta - v)."""
    if variance < 0.0:
        raise ValidationError(f"variance must be >= 0, got {variance}")
    return params.kappa * (params.theta - variance)


def rate_drift(params: VasicekParams, rate: float) -> float:
    """Drift of the short rate, a*(b - r)."""
    return params.a * (params.b - rate)


def sigma_drift_from_variance(params: HestonParams, sigma: float) -> float:
    """Drift of volatility sigma = sqrt(v) implied by the variance drift.

    Chain rule on v = sigma^2 gives d(sigma)/dt = kappa*(theta - sigma^2) / (2*sigma).
    Only defined for sigma > 0.
    """
    if sigma <= 0.0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    return params.kappa * (params.theta - sigma * sigma) / (2.0 * sigma)


def euler_step(
    state: PathState,
    heston: HestonParams,
    vasicek: VasicekParams,
    dt: float,
    shocks: tuple[float, float, float],
) -> PathState:
    """One Euler-Maruyama step of (stock, variance, rate).

    The stock update is exponential, S' = S * exp((r - v/2) dt + sqrt(v dt) z),
    so the stock stays positive for any shock. The variance update is the
    plain Euler scheme truncated at zero; the rate update is plain Euler and
    may go negative.

    ``shocks`` are three independent standard normal draws (z_stock,
    z_variance, z_rate).
    """
    if dt <= 0.0:
        raise ValidationError(f"dt must be positive, got {dt}")
    z_s, z_v, z_r = shocks
    vol_dt = math.sqrt(state.variance * dt)
    stock = state.stock * math.exp(
        (state.rate - 0.5 * state.variance) * dt + vol_dt * z_s
    )
    variance = max(
        0.0,
        state.variance + variance_drift(heston, state.variance) * dt + heston.xi * vol_dt * z_v,
    )
    rate = state.rate + rate_drift(vasicek, state.rate) * dt + vasicek.s * math.sqrt(dt) * z_r
    return PathState(stock=stock, variance=variance, rate=rate)


def simulate_paths(
    initial: PathState,
    heston: HestonParams,
    vasicek: VasicekParams,
    horizon: float,
    steps: int,
    n_paths: int,
    seed: int,
) -> PathEnsemble:
    """Simulate ``n_paths`` joint paths over ``horizon`` years in ``steps`` steps.

    Paths are generated in fixed-size chunks of CHUNK_PATHS, each from its own
    child of ``SeedSequence(seed)``. Within a chunk, every step draws a
    (3, chunk) block of standard normals whose rows are the stock, variance
    and rate shocks, in that order, and applies exactly the ``euler_step``
    update. The draw discipline makes results reproducible for a given
    (seed, steps, n_paths) regardless of chunking internals.
    """
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    if n_paths < 1:
        raise ValidationError(f"n_paths must be >= 1, got {n_paths}")
    if horizon <= 0.0:
        raise ValidationError(f"horizon must be positive, got {horizon}")
    dt = horizon / steps
    sqrt_dt = math.sqrt(dt)

    stock_out = np.empty(n_paths)
    var_out = np.empty(n_paths)
    rate_out = np.empty(n_paths)
    integral_out = np.empty(n_paths)

    n_chunks = (n_paths + CHUNK_PATHS - 1) // CHUNK_PATHS
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for c in range(n_chunks):
        lo = c * CHUNK_PATHS
        hi = min(lo + CHUNK_PATHS, n_paths)
        m = hi - lo
        rng = np.random.default_rng(children[c])

        stock = np.full(m, initial.stock)
        variance = np.full(m, initial.variance)
        rate = np.full(m, initial.rate)
        integral = np.zeros(m)
        for _ in range(steps):
            z = rng.standard_normal((3, m))
            integral += rate * dt
            vol_dt = np.sqrt(variance * dt)
            new_stock = stock * np.exp((rate - 0.5 * variance) * dt + vol_dt * z[0])
            new_variance = np.maximum(
                0.0, variance + heston.kappa * (heston.theta - variance) * dt + heston.xi * vol_dt * z[1]
            )
            new_rate = rate + vasicek.a * (vasicek.b - rate) * dt + vasicek.s * sqrt_dt * z[2]
            stock, variance, rate = new_stock, new_variance, new_rate

        stock_out[lo:hi] = stock
        var_out[lo:hi] = variance
        rate_out[lo:hi] = rate
        integral_out[lo:hi] = integral

    return PathEnsemble(
        stock=stock_out,
        variance=var_out,
        rate=rate_out,
        rate_integral=integral_out,
        horizon=horizon,
        steps=steps,
        seed=seed,
    )
