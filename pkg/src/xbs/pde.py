"""Finite-difference pricing on a (t, S, sigma, r) grid.

The value surface satisfies a Black-Scholes equation extended with first-order
terms that advect the surface along the drifts of the variance and short-rate
processes:

    dV/dt + 0.5 sigma^2 S^2 d2V/dS2 + r S dV/dS - r V
         + (dsigma/dt) dV/dsigma + (dr/dt) dV/dr = 0

with dsigma/dt = kappa*(theta - sigma^2)/(2 sigma) and dr/dt = a*(b - r),
the deterministic parts of the two diffusions. Space is discretized with
central differences in S and first-order upwind differences in sigma and r;
time marches backward from the payoff at maturity, either fully explicit or
implicit in S with the advection terms kept explicit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .dynamics import HestonParams, VasicekParams
from .errors import PricingError, StabilityError, ValidationError
from .tridiag import TridiagonalSystem, iterative_solve

KINDS = ("call", "put")


@dataclass(frozen=True)
class OptionContract:
    """A European option: kind is 'call' or 'put', maturity in years."""

    kind: str
    strike: float
    maturity: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not math.isfinite(self.strike) or self.strike <= 0.0:
            raise ValidationError(f"strike must be positive, got {self.strike}")
        if not math.isfinite(self.maturity) or self.maturity <= 0.0:
            raise ValidationError(f"maturity must be positive, got {self.maturity}")


@dataclass(frozen=True)
class Grid4D:
    """Discretization of the (t, S, sigma, r) box.

    S runs over n_s evenly spaced nodes from 0 to s_max, time over n_t steps
    from 0 to the contract maturity. The sigma and r axes are explicit node
    lists (often a single node each, which reduces the problem to plain
    Black-Scholes at that point).
    """

    s_max: float
    n_s: int
    n_t: int
    sigma_nodes: np.ndarray
    r_nodes: np.ndarray

    def __post_init__(self):
        sigma_nodes = np.atleast_1d(np.asarray(self.sigma_nodes, dtype=float))
        r_nodes = np.atleast_1d(np.asarray(self.r_nodes, dtype=float))
        object.__setattr__(self, "sigma_nodes", sigma_nodes)
        object.__setattr__(self, "r_nodes", r_nodes)
        if not math.isfinite(self.s_max) or self.s_max <= 0.0:
            raise ValidationError(f"s_max must be positive, got {self.s_max}")
        if self.n_s < 3:
            raise ValidationError(f"n_s must be >= 3, got {self.n_s}")
        if self.n_t < 1:
            raise ValidationError(f"n_t must be >= 1, got {self.n_t}")
        for name, nodes in (("sigma_nodes", sigma_nodes), ("r_nodes", r_nodes)):
            if nodes.ndim != 1 or nodes.shape[0] == 0:
                raise ValidationError(f"{name} must be a nonempty 1-d list")
            if not np.all(np.isfinite(nodes)):
                raise ValidationError(f"{name} must be finite")
            if np.any(np.diff(nodes) <= 0.0):
                raise ValidationError(f"{name} must be strictly increasing")
        # a lone sigma node may be 0 (zero-volatility degenerate solves); a
        # multi-node sigma axis must stay positive since the advection
        # coefficient carries a 1/sigma factor
        if sigma_nodes[0] < 0.0 or (sigma_nodes.shape[0] > 1 and sigma_nodes[0] == 0.0):
            raise ValidationError("sigma nodes must be positive (>= 0 if single)")

    @property
    def d_s(self) -> float:
        return self.s_max / (self.n_s - 1)

    @property
    def s_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.s_max, self.n_s)

    @property
    def n_sigma(self) -> int:
        return self.sigma_nodes.shape[0]

    @property
    def n_r(self) -> int:
        return self.r_nodes.shape[0]


@dataclass(frozen=True)
class PriceSurface:
    """Solved values at valuation time, shaped (n_s, n_sigma, n_r).

    When the solver is asked to keep intermediate levels, ``time_slices`` has
    shape (n_t + 1, n_s, n_sigma, n_r) with index i holding the surface at
    time i * maturity / n_t; the last slice is the payoff.
    """

    values: np.ndarray
    grid: Grid4D
    contract: OptionContract
    time_slices: np.ndarray | None = None

    def __post_init__(self):
        shape = (self.grid.n_s, self.grid.n_sigma, self.grid.n_r)
        if self.values.shape != shape:
            raise ValidationError(
                f"values must have shape {shape}, got {self.values.shape}"
            )
        if self.time_slices is not None and self.time_slices.shape != (
            self.grid.n_t + 1,
            *shape,
        ):
            raise ValidationError(
                f"time_slices must have shape {(self.grid.n_t + 1, *shape)}, "
                f"got {self.time_slices.shape}"
            )


def payoff(contract: OptionContract, s):
    """Terminal payoff at stock level(s) ``s``; scalar in, scalar out."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0.0):
        raise ValidationError("stock levels must be >= 0")
    if contract.kind == "call":
        out = np.maximum(s_arr - contract.strike, 0.0)
    else:
        out = np.maximum(contract.strike - s_arr, 0.0)
    return float(out) if out.ndim == 0 else out


def bs_closed_form(
    contract: OptionContract, s0: float, sigma: float, r: float
) -> float:
    """Black-Scholes value with constant volatility and rate.

    sigma = 0 collapses to the discounted deterministic payoff.
    """
    if not math.isfinite(s0) or s0 <= 0.0:
        raise ValidationError(f"s0 must be positive, got {s0}")
    if not math.isfinite(sigma) or sigma < 0.0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")
    tau = contract.maturity
    disc_strike = contract.strike * math.exp(-r * tau)
    if sigma == 0.0:
        if contract.kind == "call":
            return max(s0 - disc_strike, 0.0)
        return max(disc_strike - s0, 0.0)
    vol = sigma * math.sqrt(tau)
    d1 = (math.log(s0 / contract.strike) + (r + 0.5 * sigma * sigma) * tau) / vol
    d2 = d1 - vol
    if contract.kind == "call":
        return float(s0 * norm.cdf(d1) - disc_strike * norm.cdf(d2))
    return float(disc_strike * norm.cdf(-d2) - s0 * norm.cdf(-d1))


def boundary_values(
    contract: OptionContract, grid: Grid4D, t: float, r: float
) -> tuple[float, float]:
    """Dirichlet values at S = 0 and S = s_max for time ``t`` and rate ``r``.

    A call is worthless at S = 0 and worth S - K*exp(-r*(T-t)) at the far
    boundary (floored at zero in case the grid is too short for the strike);
    a put mirrors this.
    """
    if not 0.0 <= t <= contract.maturity:
        raise ValidationError(
            f"t must lie in [0, {contract.maturity}], got {t}"
        )
    disc_strike = contract.strike * math.exp(-r * (contract.maturity - t))
    if contract.kind == "call":
        return 0.0, max(grid.s_max - disc_strike, 0.0)
    return disc_strike, 0.0


def explicit_dt_bound(grid: Grid4D) -> float:
    """Largest stable time step for the explicit scheme on this grid."""
    ds = grid.d_s
    sigma_max = float(grid.sigma_nodes[-1])
    r_max = float(np.max(np.abs(grid.r_nodes)))
    denom = (
        sigma_max**2 * grid.s_max**2 + r_max * grid.s_max * ds + r_max * ds * ds
    )
    if denom == 0.0:
        return math.inf
    return ds * ds / denom


def stable_n_t(grid_s_max: float, n_s: int, sigma_max: float, r_max: float,
               maturity: float, safety: float = 1.0) -> int:
    """Smallest n_t keeping the explicit scheme stable, with a safety factor."""
    ds = grid_s_max / (n_s - 1)
    denom = sigma_max**2 * grid_s_max**2 + r_max * grid_s_max * ds + r_max * ds * ds
    bound = ds * ds / denom
    return max(1, math.ceil(safety * maturity / bound))


def _check_surface_shape(values: np.ndarray, grid: Grid4D) -> None:
    shape = (grid.n_s, grid.n_sigma, grid.n_r)
    if values.shape != shape:
        raise ValidationError(f"surface must have shape {shape}, got {values.shape}")


def _upwind_advection(
    values: np.ndarray,
    grid: Grid4D,
    heston: HestonParams,
    vasicek: VasicekParams,
) -> np.ndarray:
    """First-order upwind evaluation of the sigma and r advection terms.

    The difference direction follows the drift sign at each node (forward for
    nonnegative drift, backward otherwise); at an edge where the upwind
    neighbor is missing, the one-sided difference from the nearest interior
    pair is used instead. An axis with a single node contributes nothing.
    """
    out = np.zeros_like(values)
    sig = grid.sigma_nodes
    if sig.shape[0] > 1:
        drift = heston.kappa * (heston.theta - sig**2) / (2.0 * sig)
        slopes = (values[:, 1:, :] - values[:, :-1, :]) / np.diff(sig)[None, :, None]
        fwd = np.concatenate([slopes, slopes[:, -1:, :]], axis=1)
        bwd = np.concatenate([slopes[:, :1, :], slopes], axis=1)
        deriv = np.where(drift[None, :, None] >= 0.0, fwd, bwd)
        out += drift[None, :, None] * deriv
    r = grid.r_nodes
    if r.shape[0] > 1:
        drift = vasicek.a * (vasicek.b - r)
        slopes = (values[:, :, 1:] - values[:, :, :-1]) / np.diff(r)[None, None, :]
        fwd = np.concatenate([slopes, slopes[:, :, -1:]], axis=2)
        bwd = np.concatenate([slopes[:, :, :1], slopes], axis=2)
        deriv = np.where(drift[None, None, :] >= 0.0, fwd, bwd)
        out += drift[None, None, :] * deriv
    return out


def explicit_step(
    values: np.ndarray,
    grid: Grid4D,
    contract: OptionContract,
    heston: HestonParams,
    vasicek: VasicekParams,
    t_new: float,
) -> np.ndarray:
    """One backward time step of the fully explicit scheme.

    ``values`` holds the surface at the later time level; the result is the
    surface at ``t_new`` one step earlier. Interior nodes take the discretized
    operator scaled by dt; the S-boundary rows are overwritten with the
    Dirichlet values for ``t_new``. Raises StabilityError when dt exceeds the
    stability bound for this grid.
    """
    values = np.asarray(values, dtype=float)
    _check_surface_shape(values, grid)
    if not np.all(np.isfinite(values)):
        raise ValidationError("input surface must be finite")
    dt = contract.maturity / grid.n_t
    bound = explicit_dt_bound(grid)
    if dt > bound * (1.0 + 1e-12):
        raise StabilityError(
            f"dt={dt:.6g} exceeds the explicit stability bound {bound:.6g}; "
            f"need n_t >= {math.ceil(contract.maturity / bound)}"
        )

    s = grid.s_nodes
    ds = grid.d_s
    # alpha = sigma^2 S^2 / (2 dS^2), beta = r S / (2 dS), per (S, sigma/r) node
    alpha = 0.5 * (grid.sigma_nodes[None, :] ** 2) * (s[:, None] / ds) ** 2
    beta = (s[:, None] / (2.0 * ds)) * grid.r_nodes[None, :]

    second = values[2:] - 2.0 * values[1:-1] + values[:-2]
    centered = values[2:] - values[:-2]
    operator = (
        alpha[1:-1, :, None] * second
        + beta[1:-1, None, :] * centered
        - grid.r_nodes[None, None, :] * values[1:-1]
        + _upwind_advection(values, grid, heston, vasicek)[1:-1]
    )

    new = np.empty_like(values)
    new[1:-1] = values[1:-1] + dt * operator
    for l, r in enumerate(grid.r_nodes):
        low, high = boundary_values(contract, grid, t_new, float(r))
        new[0, :, l] = low
        new[-1, :, l] = high
    return new


def assemble_tridiagonal(
    grid: Grid4D, contract: OptionContract, sigma: float, r: float, dt: float
):
    """Implicit-in-S system (I - dt*L_S) for one (sigma, r) slice.

    With S_j = j*dS, alpha_j = sigma^2 j^2 / 2 and beta_j = r j / 2, interior
    row j has sub-diagonal -dt*(alpha_j - beta_j), diagonal
    1 + dt*(2*alpha_j + r) and super-diagonal -dt*(alpha_j + beta_j).

    Returns (system, build_rhs) where build_rhs(prev_interior, (low, high))
    forms the right-hand side from the previous time level, folding the known
    boundary values into the first and last equations.
    """
    if sigma < 0.0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")
    if dt <= 0.0:
        raise ValidationError(f"dt must be positive, got {dt}")
    j = np.arange(1, grid.n_s - 1, dtype=float)
    alpha = 0.5 * sigma * sigma * j * j
    beta = 0.5 * r * j
    lower = -dt * (alpha - beta)
    diag = 1.0 + dt * (2.0 * alpha + r)
    upper = -dt * (alpha + beta)
    system = TridiagonalSystem(lower=lower[1:], diag=diag, upper=upper[:-1])
    n_interior = j.shape[0]

    def build_rhs(prev_interior: np.ndarray, boundary: tuple[float, float]) -> np.ndarray:
        prev = np.asarray(prev_interior, dtype=float)
        if prev.shape != (n_interior,):
            raise ValidationError(
                f"previous level must have shape ({n_interior},), got {prev.shape}"
            )
        low, high = boundary
        rhs = prev.copy()
        rhs[0] -= lower[0] * low
        rhs[-1] -= upper[-1] * high
        return rhs

    return system, build_rhs


def _implicit_step(
    values: np.ndarray,
    grid: Grid4D,
    contract: OptionContract,
    heston: HestonParams,
    vasicek: VasicekParams,
    t_new: float,
    dt: float,
    systems,
    *,
    method: str,
    omega: float,
    tol: float,
    max_iters: int,
) -> np.ndarray:
    """One backward step, implicit in S with advection taken explicitly."""
    advection = _upwind_advection(values, grid, heston, vasicek)
    new = np.empty_like(values)
    for k in range(grid.n_sigma):
        for l in range(grid.n_r):
            low, high = boundary_values(contract, grid, t_new, float(grid.r_nodes[l]))
            system, build_rhs = systems[k][l]
            rhs = build_rhs(
                values[1:-1, k, l] + dt * advection[1:-1, k, l], (low, high)
            )
            x, _ = iterative_solve(
                system,
                rhs,
                method=method,
                omega=omega,
                tol=tol,
                max_iters=max_iters,
                x0=values[1:-1, k, l],
            )
            new[1:-1, k, l] = x
            new[0, k, l] = low
            new[-1, k, l] = high
    return new


def solve_extended_pde(
    contract: OptionContract,
    grid: Grid4D,
    heston: HestonParams,
    vasicek: VasicekParams,
    scheme: str = "explicit",
    *,
    method: str = "sor",
    omega: float = 1.2,
    tol: float = 1e-8,
    max_iters: int = 10000,
    keep_time_slices: bool = False,
) -> PriceSurface:
    """March the payoff backward from maturity to time zero.

    scheme='explicit' uses the fully explicit update and enforces the
    stability bound. scheme='implicit' treats the S direction implicitly,
    solving one tridiagonal system per (sigma, r) node and time step with the
    chosen iterative method, warm-started from the previous level; the sigma
    and r advection terms stay explicit.

    The returned surface is floored at zero. Pass keep_time_slices=True to
    also keep every intermediate level (memory scales with n_t).
    """
    if scheme not in ("explicit", "implicit"):
        raise ValidationError(f"scheme must be 'explicit' or 'implicit', got {scheme!r}")
    shape = (grid.n_s, grid.n_sigma, grid.n_r)
    dt = contract.maturity / grid.n_t
    values = np.broadcast_to(
        payoff(contract, grid.s_nodes)[:, None, None], shape
    ).copy()
    slices = [values.copy()] if keep_time_slices else None

    systems = None
    if scheme == "implicit":
        systems = [
            [
                assemble_tridiagonal(grid, contract, float(sig), float(r), dt)
                for r in grid.r_nodes
            ]
            for sig in grid.sigma_nodes
        ]

    for i in range(grid.n_t - 1, -1, -1):
        t_new = i * dt
        if scheme == "explicit":
            values = explicit_step(values, grid, contract, heston, vasicek, t_new)
        else:
            values = _implicit_step(
                values,
                grid,
                contract,
                heston,
                vasicek,
                t_new,
                dt,
                systems,
                method=method,
                omega=omega,
                tol=tol,
                max_iters=max_iters,
            )
        if slices is not None:
            slices.append(values.copy())

    if not np.all(np.isfinite(values)):
        raise PricingError("solve produced non-finite values")
    time_slices = None
    if keep_time_slices:
        slices.reverse()
        time_slices = np.maximum(np.asarray(slices), 0.0)
    return PriceSurface(
        values=np.maximum(values, 0.0),
        grid=grid,
        contract=contract,
        time_slices=time_slices,
    )


def _bracket(nodes: np.ndarray, x: float, name: str) -> tuple[int, int, float]:
    if not nodes[0] <= x <= nodes[-1]:
        raise ValidationError(
            f"{name}={x} outside grid range [{nodes[0]}, {nodes[-1]}]"
        )
    if nodes.shape[0] == 1:
        return 0, 0, 0.0
    idx = int(np.searchsorted(nodes, x, side="right")) - 1
    idx = min(max(idx, 0), nodes.shape[0] - 2)
    w = (x - nodes[idx]) / (nodes[idx + 1] - nodes[idx])
    return idx, idx + 1, float(w)


def surface_lookup(
    surface: PriceSurface, s0: float, sigma0: float, r0: float
) -> float:
    """Trilinear interpolation of the solved surface at (s0, sigma0, r0).

    Queries must lie inside the grid box; a query exactly on a node returns
    the stored value. Degenerate axes (a single sigma or r node) require the
    query to sit exactly on that node.
    """
    grid = surface.grid
    i0, i1, ws = _bracket(grid.s_nodes, s0, "s")
    j0, j1, wg = _bracket(grid.sigma_nodes, sigma0, "sigma")
    k0, k1, wr = _bracket(grid.r_nodes, r0, "r")
    v = surface.values
    total = 0.0
    for i, wi in ((i0, 1.0 - ws), (i1, ws)):
        for j, wj in ((j0, 1.0 - wg), (j1, wg)):
            for k, wk in ((k0, 1.0 - wr), (k1, wr)):
                weight = wi * wj * wk
                if weight != 0.0:
                    total += weight * float(v[i, j, k])
    return total


def export_surface_csv(surface: PriceSurface, path: str | Path) -> None:
    """Write the valuation-time surface as ``s,sigma,r,value`` rows.

    Rows iterate S outermost, then sigma, then r, so the file order matches
    C-order traversal of the value array.
    """
    path = Path(path)
    s = surface.grid.s_nodes
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "sigma", "r", "value"])
        for i, s_val in enumerate(s):
            for j, sig in enumerate(surface.grid.sigma_nodes):
                for k, r in enumerate(surface.grid.r_nodes):
                    writer.writerow(
                        [
                            repr(float(s_val)),
                            repr(float(sig)),
                            repr(float(r)),
                            repr(float(surface.values[i, j, k])),
                        ]
                    )
