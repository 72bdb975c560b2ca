"""Monte Carlo pricing under the joint stock / variance / rate dynamics.

Serves as an independent check on the finite-difference engine: both price
the same contract from the same model parameters by entirely different
numerics, and a comparison record quantifies the gap in standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import HestonParams, PathState, VasicekParams, simulate_paths
from .errors import ValidationError
from .pde import Grid4D, OptionContract, payoff, solve_extended_pde, surface_lookup

STEPS_PER_YEAR = 250


def default_mc_steps(maturity: float) -> int:
    """Default Euler step count: about STEPS_PER_YEAR per year, at least 1."""
    return max(1, round(STEPS_PER_YEAR * maturity))


@dataclass(frozen=True)
class McEstimate:
    """Discounted-payoff mean with its sampling standard error."""

    price: float
    std_error: float
    n_paths: int
    seed: int

    def __post_init__(self):
        if not math.isfinite(self.std_error) or self.std_error < 0.0:
            raise ValidationError(f"std_error must be >= 0, got {self.std_error}")
        if self.n_paths < 1:
            raise ValidationError(f"n_paths must be >= 1, got {self.n_paths}")


def mc_price(
    contract: OptionContract,
    initial: PathState,
    heston: HestonParams,
    vasicek: VasicekParams,
    steps: int,
    n_paths: int,
    seed: int,
) -> McEstimate:
    """Price by pathwise discounting: mean of exp(-int r dt) * payoff(S_T).

    The standard error is the (n-1)-denominator sample standard deviation of
    the discounted payoffs divided by sqrt(n_paths); at least 2 paths are
    required for it to exist.
    """
    if n_paths < 2:
        raise ValidationError(f"n_paths must be >= 2, got {n_paths}")
    ensemble = simulate_paths(
        initial, heston, vasicek, contract.maturity, steps, n_paths, seed
    )
    discounted = np.exp(-ensemble.rate_integral) * payoff(contract, ensemble.stock)
    price = float(np.mean(discounted))
    if np.all(discounted == discounted[0]):
        # identical samples have zero sample variance; np.std would report
        # rounding noise from the mean subtraction
        std_error = 0.0
    else:
        std_error = float(np.std(discounted, ddof=1) / math.sqrt(n_paths))
    return McEstimate(price=price, std_error=std_error, n_paths=n_paths, seed=seed)


@dataclass(frozen=True)
class ComparisonRecord:
    """PDE price against an MC estimate of the same contract.

    ``z`` is the gap in standard errors, (pde - mc) / std_error. A run whose
    payoffs are all identical has std_error 0; then z is None and ``mode`` is
    'exact' (the two prices are compared directly), otherwise 'statistical'.
    """

    pde: float
    mc: float
    std_error: float
    z: float | None
    n_paths: int
    seed: int
    mode: str = "statistical"
    flags: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "pde": self.pde,
            "mc": self.mc,
            "std_error": self.std_error,
            "z": self.z,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "mode": self.mode,
            "flags": list(self.flags),
        }


def mc_vs_pde_report(
    contract: OptionContract,
    initial: PathState,
    heston: HestonParams,
    vasicek: VasicekParams,
    grid: Grid4D,
    *,
    scheme: str = "explicit",
    steps: int | None = None,
    n_paths: int = 200_000,
    seed: int = 0,
    extra_flags: tuple[str, ...] = (),
) -> ComparisonRecord:
    """Price one contract both ways and report the discrepancy.

    The PDE price is the solved surface interpolated at the initial state
    (sigma taken as sqrt of the initial variance). Flags mark |z| > 3 or, in
    exact mode, a relative gap above 0.5%; callers that detect problems with
    the setup itself (say, mismatched inputs between engines) can append
    their own flags via ``extra_flags``.
    """
    if steps is None:
        steps = default_mc_steps(contract.maturity)
    surface = solve_extended_pde(contract, grid, heston, vasicek, scheme=scheme)
    pde = surface_lookup(
        surface, initial.stock, math.sqrt(initial.variance), initial.rate
    )
    est = mc_price(contract, initial, heston, vasicek, steps, n_paths, seed)
    flags: list[str] = list(extra_flags)
    if est.std_error > 0.0:
        z = (pde - est.price) / est.std_error
        mode = "statistical"
        if abs(z) > 3.0:
            flags.append("z_above_3")
    else:
        z = None
        mode = "exact"
        scale = max(abs(est.price), 1e-12)
        if abs(pde - est.price) / scale > 0.005:
            flags.append("gap_above_half_percent")
    return ComparisonRecord(
        pde=pde,
        mc=est.price,
        std_error=est.std_error,
        z=z,
        n_paths=n_paths,
        seed=seed,
        mode=mode,
        flags=tuple(flags),
    )
