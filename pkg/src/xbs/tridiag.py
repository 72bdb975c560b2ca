"""Tridiagonal linear systems with classical iterative solvers.

Gauss-Seidel and SOR are realized as matrix splittings: each sweep solves the
lower-bidiagonal system (D + w*L) x_new = w*b - (w*U + (w-1)*D) x_old, which
reproduces the textbook in-place update order exactly while letting LAPACK do
the triangular solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConvergenceError, ValidationError


@dataclass(frozen=True)
class TridiagonalSystem:
    """A tridiagonal matrix stored as its three diagonals.

    ``lower[i]`` multiplies x[i] in row i+1, ``upper[i]`` multiplies x[i+1]
    in row i. Diagonal entries must be nonzero for the iterative sweeps to be
    defined.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        diag = np.asarray(self.diag, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "upper", upper)
        n = diag.shape[0]
        if n < 1:
            raise ValidationError("system must have at least one unknown")
        if lower.shape != (max(n - 1, 0),) or upper.shape != (max(n - 1, 0),):
            raise ValidationError(
                f"off-diagonals must have length {n - 1}, got "
                f"{lower.shape[0]} and {upper.shape[0]}"
            )
        if not (
            np.all(np.isfinite(diag))
            and np.all(np.isfinite(lower))
            and np.all(np.isfinite(upper))
        ):
            raise ValidationError("matrix entries must be finite")
        if np.any(diag == 0.0):
            raise ValidationError("diagonal entries must be nonzero")

    @property
    def n(self) -> int:
        return self.diag.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """A @ x."""
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        if self.n > 1:
            y[:-1] += self.upper * x[1:]
            y[1:] += self.lower * x[:-1]
        return y

    def residual_norm(self, x: np.ndarray, rhs: np.ndarray) -> float:
        """Max-norm of the residual A x - rhs."""
        return float(np.max(np.abs(self.matvec(x) - np.asarray(rhs, dtype=float))))


def iterative_solve(
    system: TridiagonalSystem,
    rhs: np.ndarray,
    method: str = "sor",
    omega: float = 1.2,
    tol: float = 1e-8,
    max_iters: int = 10000,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Solve A x = rhs by Gauss-Seidel or SOR sweeps.

    Returns (x, iterations) where iterations counts full sweeps; the result
    satisfies max|A x - rhs| <= tol. A starting guess ``x0`` (for example the
    previous time level of a marching scheme) cuts the count sharply on
    well-conditioned systems; the default start is the zero vector.

    Raises ConvergenceError when max_iters sweeps leave the residual above
    tol, reporting the final residual.
    """
    if method not in ("gauss_seidel", "sor"):
        raise ValidationError(f"method must be 'gauss_seidel' or 'sor', got {method!r}")
    w = 1.0 if method == "gauss_seidel" else float(omega)
    if not 0.0 < w < 2.0:
        raise ValidationError(f"omega must lie in (0, 2), got {omega}")
    if tol <= 0.0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if max_iters < 1:
        raise ValidationError(f"max_iters must be >= 1, got {max_iters}")
    rhs = np.asarray(rhs, dtype=float)
    n = system.n
    if rhs.shape != (n,):
        raise ValidationError(f"rhs must have shape ({n},), got {rhs.shape}")

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float, copy=True)
    if x.shape != (n,):
        raise ValidationError(f"x0 must have shape ({n},), got {x.shape}")
    if system.residual_norm(x, rhs) <= tol:
        return x, 0

    # (D + w*L) as a lower-banded matrix for solve_banded
    sweep_ab = np.zeros((2, n))
    sweep_ab[0] = system.diag
    if n > 1:
        sweep_ab[1, :-1] = w * system.lower

    for iteration in range(1, max_iters + 1):
        b_eff = w * rhs + (1.0 - w) * system.diag * x
        if n > 1:
            b_eff[:-1] -= w * system.upper * x[1:]
        x = solve_banded((1, 0), sweep_ab, b_eff)
        residual = system.residual_norm(x, rhs)
        if residual <= tol:
            return x, iteration
        if not np.isfinite(residual):
            raise ConvergenceError(
                f"{method} diverged after {iteration} sweeps (residual is not finite)"
            )
    raise ConvergenceError(
        f"{method} did not reach tol={tol:g} in {max_iters} sweeps; "
        f"final residual {residual:.3e}"
    )
