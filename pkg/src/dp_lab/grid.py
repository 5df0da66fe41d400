"""Uniform periodic grid on [-D, D), sampled functions, quadrature and
Fourier differentiation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_HALF_WIDTH = 40.0
DEFAULT_N_POINTS = 2**14


class GridMismatchError(ValueError):
    """Two grid functions live on different grids."""


@dataclass(frozen=True)
class Grid:
    half_width: float = DEFAULT_HALF_WIDTH
    n_points: int = DEFAULT_N_POINTS

    def __post_init__(self):
        n = int(self.n_points)
        if n < 16 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 16, got {self.n_points}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def length(self) -> float:
        return 2.0 * self.half_width

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.half_width + self.dx * np.arange(self.n_points)
        x.flags.writeable = False
        return x

    @cached_property
    def omega(self) -> np.ndarray:
        """Angular wavenumbers matching ``np.fft.rfft`` ordering."""
        w = 2.0 * np.pi * np.fft.rfftfreq(self.n_points, d=self.dx)
        w.flags.writeable = False
        return w

    @property
    def omega_max(self) -> float:
        return np.pi / self.dx

    def contains(self, position: float, clearance: float = 0.0) -> bool:
        return abs(position) < self.half_width - clearance

    def node_index(self, position: float) -> int:
        """Index of the node at or immediately left of ``position`` (periodic)."""
        return int(np.floor((position + self.half_width) / self.dx)) % self.n_points

    def function(self, values) -> "GridFunction":
        return GridFunction(self, np.asarray(values, dtype=float))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n_points))

    def sample(self, fn) -> "GridFunction":
        """Evaluate a vectorised callable at the nodes."""
        return GridFunction(self, np.asarray(fn(self.x), dtype=float))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples of a function at the nodes of ``grid``.

    Arithmetic works elementwise with scalars and with functions on the same
    grid. Instances are immutable; the value array is flagged read-only.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise ValueError(
                f"expected {self.grid.n_points} samples, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("grid function contains NaN or Inf")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def _other(self, other):
        if isinstance(other, GridFunction):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._other(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values))

    def __pow__(self, p):
        return GridFunction(self.grid, self.values**p)

    def __len__(self):
        return self.grid.n_points

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    def shifted(self, n_nodes: int) -> "GridFunction":
        """Periodic translation by a whole number of nodes (to the right)."""
        return GridFunction(self.grid, np.roll(self.values, n_nodes))

    def __call__(self, position: float) -> float:
        return evaluate(self, position)


def check_same_grid(*fs: GridFunction) -> Grid:
    grid = fs[0].grid
    for f in fs[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


def integrate(f: GridFunction) -> float:
    """Periodic trapezoid rule, ``dx * sum(f)``."""
    return float(f.grid.dx * np.sum(f.values))


def l2_norm(f: GridFunction) -> float:
    return float(np.sqrt(integrate(f * f)))


def apply_multiplier(f: GridFunction, symbol: np.ndarray) -> GridFunction:
    """Apply the Fourier multiplier ``symbol(omega)`` (rfft layout)."""
    return GridFunction(f.grid, np.fft.irfft(symbol * np.fft.rfft(f.values), n=f.grid.n_points))


def derivative_symbol(grid: Grid, order: int) -> np.ndarray:
    sym = (1j * grid.omega) ** order
    if order % 2 == 1:
        # odd derivatives of the Nyquist mode are not representable on the grid
        sym = sym.copy()
        sym[-1] = 0.0
    return sym


def differentiate(f: GridFunction, order: int = 1) -> GridFunction:
    """Spectral derivative of order 1..4.

    Only meaningful for profiles whose Fourier coefficients decay; raw peakons
    must be smoothed (for instance through the (4 - d^2)^-1 map) first.
    """
    if order not in (1, 2, 3, 4):
        raise ValueError(f"derivative order must be 1..4, got {order}")
    return apply_multiplier(f, derivative_symbol(f.grid, order))


def evaluate(f: GridFunction, position: float) -> float:
    """Value of the trigonometric interpolant of ``f`` at an arbitrary point."""
    grid = f.grid
    n = grid.n_points
    coef = np.fft.rfft(f.values) / n
    phase = np.exp(1j * grid.omega * (position + grid.half_width))
    weights = np.full(coef.shape, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
        # Nyquist mode interpolated by its real cosine part
        return float(np.real(np.sum(weights[:-1] * coef[:-1] * phase[:-1]))
                     + np.real(coef[-1]) * np.cos(grid.omega[-1] * (position + grid.half_width)))
    return float(np.real(np.sum(weights * coef * phase)))
