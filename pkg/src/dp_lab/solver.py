"""Pseudo-spectral RK4 integrator for u_t + (u^2/2)_x + (3/2)(1 - d^2)^-1 (u^2)_x = 0,
plus the weighted-energy virial check and the monotonicity series."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterator, Sequence

import numpy as np

from .functionals import WeightPartition, energy_density, psi_K
from .grid import Grid, GridFunction, check_same_grid, differentiate, integrate
from .helmholtz import helmholtz_inverse

CFL_NUMBER = 0.5
FILTER_ORDER = 36
FILTER_ALPHA = 36.0


class SolverDiverged(FloatingPointError):
    """The solution left the finite numbers."""


def stable_dt(u: GridFunction, cfl: float = CFL_NUMBER) -> float:
    umax = float(np.max(np.abs(u.values)))
    return np.inf if umax == 0 else cfl * u.grid.dx / umax


@dataclass(frozen=True)
class SolverState:
    t: float
    u: GridFunction
    dt: float
    filter_strength: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.filter_strength < 0:
            raise ValueError("filter strength must be nonnegative")
        # small slack so a dt computed by stable_dt itself is accepted
        if self.dt > stable_dt(self.u) * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} violates dt <= {CFL_NUMBER} dx / max|u|")

    @property
    def grid(self) -> Grid:
        return self.u.grid


class _Operators:
    """Cached spectral symbols for one grid."""

    _cache: dict = {}

    def __init__(self, grid: Grid):
        w = grid.omega
        ik = 1j * w
        ik[-1] = 0.0  # Nyquist of an odd derivative
        self.flux = -ik * (0.5 + 1.5 / (1.0 + w**2))
        self.dealias = np.arange(w.size) <= grid.n_points // 3
        self.ratio = w / grid.omega_max

    @classmethod
    def of(cls, grid: Grid) -> "_Operators":
        if grid not in cls._cache:
            cls._cache[grid] = cls(grid)
        return cls._cache[grid]

    def filter(self, strength: float) -> np.ndarray:
        return np.exp(-FILTER_ALPHA * strength * self.ratio**FILTER_ORDER)


def _rhs_values(values: np.ndarray, ops: _Operators, n: int) -> np.ndarray:
    w_hat = np.fft.rfft(values * values)
    return np.fft.irfft(ops.flux * ops.dealias * w_hat, n=n)


def rhs(u: GridFunction) -> GridFunction:
    """-(u^2/2)_x - (3/2)(1 - d^2)^-1 (u^2)_x with u^2 truncated to the lower
    two thirds of the spectrum."""
    ops = _Operators.of(u.grid)
    return GridFunction(u.grid, _rhs_values(u.values, ops, u.grid.n_points))


def _rk4(values: np.ndarray, dt: float, ops: _Operators, n: int) -> np.ndarray:
    k1 = _rhs_values(values, ops, n)
    k2 = _rhs_values(values + 0.5 * dt * k1, ops, n)
    k3 = _rhs_values(values + 0.5 * dt * k2, ops, n)
    k4 = _rhs_values(values + dt * k3, ops, n)
    return values + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance(values: np.ndarray, dt: float, strength: float, ops: _Operators, n: int) -> np.ndarray:
    out = _rk4(values, dt, ops, n)
    if strength > 0:
        out = np.fft.irfft(np.fft.rfft(out) * ops.filter(strength), n=n)
    return out


def step(s: SolverState) -> SolverState:
    """One classical RK4 step followed by the spectral filter."""
    ops = _Operators.of(s.grid)
    out = _advance(s.u.values, s.dt, s.filter_strength, ops, s.grid.n_points)
    if not np.all(np.isfinite(out)):
        raise SolverDiverged(f"non-finite values after the step from t={s.t}")
    return replace(s, t=s.t + s.dt, u=GridFunction(s.grid, out))


def evolve(u0: GridFunction, t_end: float, sample_every: float, dt: float | None = None,
           filter_strength: float = 1.0, t0: float = 0.0) -> Iterator[SolverState]:
    """Yield the state at t0 and at every multiple of ``sample_every`` up to
    ``t_end``.

    Each sampling interval is split into equal steps no longer than ``dt``
    and no longer than 0.9 times the CFL limit of the current profile, since
    peaks may steepen between samples.
    """
    if sample_every <= 0 or t_end < t0:
        raise ValueError("need sample_every > 0 and t_end >= t0")
    ops = _Operators.of(u0.grid)
    n = u0.grid.n_points

    def substeps(values):
        umax = float(np.max(np.abs(values)))
        h = sample_every if umax == 0 else 0.9 * CFL_NUMBER * u0.grid.dx / umax
        if dt is not None:
            h = min(h, dt)
        k = max(1, int(np.ceil(sample_every / h - 1e-9)))
        return k, sample_every / k

    n_sub, h = substeps(u0.values)
    yield SolverState(t0, u0, h, filter_strength)
    n_samples = int(np.floor((t_end - t0) / sample_every + 1e-9))
    values = u0.values
    for k in range(1, n_samples + 1):
        for _ in range(n_sub):
            values = _advance(values, h, filter_strength, ops, n)
        if not np.all(np.isfinite(values)):
            raise SolverDiverged(f"non-finite values before t={t0 + k * sample_every}")
        n_sub, h = substeps(values)
        yield SolverState(t0 + k * sample_every, GridFunction(u0.grid, values), h, filter_strength)


# -- weighted energies -----------------------------------------------------


@dataclass(frozen=True)
class StaticWeight:
    """A time-independent weight g and its derivatives of order 1..4 on a grid."""

    derivatives: tuple[np.ndarray, ...]  # g, g', g'', g''', g''''

    @classmethod
    def logistic(cls, grid: Grid, center: float, K: float) -> "StaticWeight":
        return cls(tuple(psi_K(grid.x, center, K, q) for q in range(5)))

    @classmethod
    def constant(cls, grid: Grid) -> "StaticWeight":
        one = np.ones(grid.n_points)
        return cls((one,) + tuple(np.zeros(grid.n_points) for _ in range(4)))


def weighted_energy(u: GridFunction, g: StaticWeight) -> float:
    return integrate(energy_density(u) * g.derivatives[0])


def virial_rhs(u: GridFunction, g: StaticWeight) -> float:
    """Exact time derivative of the g-weighted energy along the flow,
    expressed through u, v = (4 - d^2)^-1 u and h = (1 - d^2)^-1 u^2."""
    _, g1, g2, g3, g4 = g.derivatives
    v = helmholtz_inverse(2, u).values
    vx = differentiate(helmholtz_inverse(2, u), 1).values
    u2 = u * u
    hf = helmholtz_inverse(1, u2)
    h, hx = hf.values, differentiate(hf, 1).values
    a = u.values
    dx = u.grid.dx
    terms = (
        2.0 / 3.0 * a**3 * g1
        - 4.0 * a**2 * v * g1
        - 0.5 * a**2 * v * g3
        + 0.5 * a**2 * vx * g2
        + a * h * g1
        + 0.5 * a * hx * g2
        - 2.5 * v * hx * g2
        - 2.0 * vx * h * g2
        + 0.5 * v * hx * g4
    )
    return float(dx * np.sum(terms))


def virial_residual(s_prev: SolverState, s_next: SolverState, g: StaticWeight) -> float:
    """|centred difference of the weighted energy - virial_rhs at the mean state|."""
    check_same_grid(s_prev.u, s_next.u)
    dt = s_next.t - s_prev.t
    if not dt > 0:
        raise ValueError("states must be in increasing time order")
    lhs = (weighted_energy(s_next.u, g) - weighted_energy(s_prev.u, g)) / dt
    mid = 0.5 * (s_prev.u + s_next.u)
    return abs(lhs - virial_rhs(mid, g))


def monotonicity_track(trajectory: Sequence[SolverState], partitions: Sequence[WeightPartition],
                       i: int) -> np.ndarray:
    """J_{i,K}(t) - J_{i,K}(0) along a trajectory (``i`` 1-based, J_1 = E).

    ``partitions`` holds one partition per sample, rebuilt from the tracked
    midpoints at that time.
    """
    if len(trajectory) != len(partitions):
        raise ValueError("need one partition per trajectory sample")
    if not 1 <= i <= len(partitions[0]):
        raise ValueError(f"bump index {i} out of range")
    J = []
    for s, p in zip(trajectory, partitions):
        dens = energy_density(s.u)
        weight = p.right_weights[i - 2] if i >= 2 else None
        J.append(integrate(dens if weight is None else dens * weight))
    J = np.asarray(J)
    return J - J[0]


def rhs_callable(grid: Grid) -> Callable[[np.ndarray], np.ndarray]:
    """Raw-array right-hand side, for external integrators."""
    ops = _Operators.of(grid)
    return lambda values: _rhs_values(values, ops, grid.n_points)
