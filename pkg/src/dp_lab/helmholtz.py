"""The nonlocal operators (kappa^2 - d^2)^-1 for kappa in {1, 2} and their
forward counterparts, as Fourier multipliers on the periodic grid."""

from __future__ import annotations

import numpy as np

from .grid import Grid, GridFunction, apply_multiplier, check_same_grid, integrate

KAPPAS = (1, 2)


def _check_kappa(kappa) -> int:
    if kappa not in KAPPAS:
        raise ValueError(f"kappa must be 1 or 2, got {kappa!r}")
    return int(kappa)


def _kappa_squared(kappa: int) -> float:
    return float(kappa * kappa)


def inverse_symbol(kappa, grid: Grid) -> np.ndarray:
    return 1.0 / (_kappa_squared(_check_kappa(kappa)) + grid.omega**2)


def helmholtz_inverse(kappa, f: GridFunction) -> GridFunction:
    """Solve (kappa^2 - d^2) g = f."""
    return apply_multiplier(f, inverse_symbol(kappa, f.grid))


def helmholtz_forward(kappa, f: GridFunction) -> GridFunction:
    """Apply (kappa^2 - d^2) to a resolved (C^2) profile."""
    sym = _kappa_squared(_check_kappa(kappa)) + f.grid.omega**2
    return apply_multiplier(f, sym)


def composed_inverse(f: GridFunction) -> GridFunction:
    """(1 - d^2)^-1 (4 - d^2)^-1 f via the partial-fraction split
    ``(1/3)(1 - d^2)^-1 f - (1/3)(4 - d^2)^-1 f``."""
    sym = (inverse_symbol(1, f.grid) - inverse_symbol(2, f.grid)) / 3.0
    return apply_multiplier(f, sym)


def green_kernel_inverse(kappa, f: GridFunction) -> GridFunction:
    """Direct quadrature against the kernel exp(-kappa|x|)/(2 kappa).

    O(n^2); a test oracle for :func:`helmholtz_inverse`, not used in production
    paths. The kernel is periodised over the neighbouring images, and the
    diagonal carries the trapezoid correction for the kernel's slope jump.
    """
    kappa = _check_kappa(kappa)
    grid = f.grid
    x = grid.x
    out = np.empty(grid.n_points)
    for k, xk in enumerate(x):
        d = np.abs(x - xk)
        d = np.minimum(d, grid.length - d)
        kern = np.exp(-kappa * d) / (2.0 * kappa)
        out[k] = grid.dx * np.dot(kern, f.values) - grid.dx**2 / 12.0 * f.values[k]
    return GridFunction(grid, out)


def smoothing_bound(kappa, f: GridFunction) -> float:
    """Upper bound on sup|(kappa^2 - d^2)^-1 f| from Cauchy-Schwarz with the
    kernel: ``||f||_2 / (2 kappa) * sqrt(1/kappa)``."""
    kappa = _check_kappa(kappa)
    l2 = float(np.sqrt(integrate(f * f)))
    return l2 * np.sqrt(1.0 / kappa) / (2.0 * kappa)


def max_abs_difference(f: GridFunction, g: GridFunction) -> float:
    check_same_grid(f, g)
    return float(np.max(np.abs(f.values - g.values)))
