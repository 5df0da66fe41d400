"""Peak tracking: argmax points, modulated centres from the orthogonality
conditions, speed fits and the distance to the nearest peakon train."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .functionals import h_distance
from .grid import GridFunction
from .peakons import PeakonTrain, sample_train, smooth_peakon_derivative, smooth_peakon_profile

MAX_NEWTON_ITERATIONS = 20
NEWTON_TOLERANCE = 1e-9


class TrackingLost(RuntimeError):
    """The modulation equations have no root near the guess."""


def track_argmax(v: GridFunction, intervals: Sequence[tuple[float, float]]) -> np.ndarray:
    """Per interval, the maximiser of v refined by a parabola through the
    three nodes around the discrete maximum. Plateaus resolve to the leftmost
    node, unrefined."""
    x = v.grid.x
    out = []
    for lo, hi in intervals:
        idx = np.nonzero((x >= lo) & (x <= hi))[0]
        if idx.size == 0:
            raise ValueError(f"interval [{lo}, {hi}] contains no grid nodes")
        vals = v.values[idx]
        j = int(np.argmax(vals))  # first occurrence: leftmost on ties
        pos = float(x[idx[j]])
        if 0 < j < idx.size - 1 and vals[j - 1] < vals[j] and vals[j + 1] < vals[j]:
            a, b, c = vals[j - 1], vals[j], vals[j + 1]
            pos += 0.5 * (a - c) / (a - 2.0 * b + c) * v.grid.dx
        out.append(pos)
    return np.asarray(out)


def modulation_residual(v: GridFunction, speeds: Sequence[float], centers: Sequence[float]) -> np.ndarray:
    """Y_i = int (v - sum_j R_j) d_x R_i with R_j the smooth peakon at x_j."""
    x = v.grid.x
    c = np.asarray(speeds, dtype=float)
    z = np.asarray(centers, dtype=float)
    fit = sum(smooth_peakon_profile(ci, x - zi) for ci, zi in zip(c, z))
    rest = v.values - fit
    return np.array([v.grid.dx * np.dot(rest, smooth_peakon_derivative(ci, x - zi, 1))
                     for ci, zi in zip(c, z)])


def solve_modulation(v: GridFunction, speeds: Sequence[float], guess: Sequence[float],
                     max_shift: float | None = None) -> np.ndarray:
    """Centres making v - sum R_j orthogonal to every d_x R_i.

    Newton iteration with the diagonal Jacobian c_i^2/54 (the squared norm
    of d_x R_i). Raises :class:`TrackingLost` when it fails to converge, when
    a centre moves further than ``max_shift`` (default a quarter of the
    smallest gap of the guess, or 5 for a single bump), or when the root is
    not a genuine fit: the diagonal derivative must stay above half its
    nominal value and v must carry at least half of each R_i.
    """
    c = np.asarray(speeds, dtype=float)
    z0 = np.asarray(guess, dtype=float)
    if c.shape != z0.shape:
        raise ValueError("speeds and guess differ in length")
    if max_shift is None:
        max_shift = 0.25 * float(np.min(np.diff(z0))) if z0.size > 1 else 5.0
    diag = c**2 / 54.0
    z = z0.copy()
    for _ in range(MAX_NEWTON_ITERATIONS):
        Y = modulation_residual(v, c, z)
        if np.max(np.abs(Y)) <= NEWTON_TOLERANCE:
            break
        z = z - Y / diag
        if np.any(np.abs(z - z0) > max_shift):
            raise TrackingLost(f"centres drifted beyond {max_shift} from the guess")
    else:
        raise TrackingLost(f"no convergence in {MAX_NEWTON_ITERATIONS} iterations")

    x = v.grid.x
    for i, (ci, zi) in enumerate(zip(c, z)):
        R = smooth_peakon_profile(ci, x - zi)
        R_xx = smooth_peakon_derivative(ci, x - zi, 2)
        others = sum((smooth_peakon_profile(cj, x - zj) for j, (cj, zj) in enumerate(zip(c, z)) if j != i),
                     np.zeros_like(x))
        rest = v.values - others - R
        slope = diag[i] - v.grid.dx * np.dot(rest, R_xx)
        carried = np.dot(v.values - others, R) / np.dot(R, R)
        if slope < 0.5 * diag[i] or carried < 0.5:
            raise TrackingLost(f"bump {i + 1} is not present near x = {zi:.4g}")
    return z


def estimate_speeds(times: Sequence[float], centers: np.ndarray,
                    window: tuple[float, float] | None = None) -> np.ndarray:
    """Least-squares slope of each centre history (rows: samples)."""
    t = np.asarray(times, dtype=float)
    z = np.asarray(centers, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, z = t[keep], z[keep]
    if t.size < 3:
        raise ValueError(f"need at least 3 samples to fit speeds, got {t.size}")
    return np.polyfit(t, z, 1)[0]


def stability_distance(u: GridFunction, speeds: Sequence[float], centers: Sequence[float]) -> float:
    """H-distance from u to the peakon train with the given speeds and centres."""
    return h_distance(u, sample_train(PeakonTrain.from_arrays(speeds, centers), u.grid))


@dataclass(frozen=True)
class ModulationState:
    x_tilde: tuple[float, ...]
    xi1: tuple[float, ...]
    intervals: tuple[tuple[float, float], ...]
    speeds_est: tuple[float, ...]
    distance: float

    @property
    def midpoints(self) -> tuple[float, ...]:
        x = self.x_tilde
        return tuple(0.5 * (a + b) for a, b in zip(x[:-1], x[1:]))


def tracking_intervals(centers: Sequence[float], half_width: float) -> list[tuple[float, float]]:
    """J_i = [y_i, y_{i+1}] between midpoints, closed off at +-half_width."""
    z = np.asarray(centers, dtype=float)
    y = np.concatenate(([-half_width], 0.5 * (z[:-1] + z[1:]), [half_width]))
    return [(float(a), float(b)) for a, b in zip(y[:-1], y[1:])]


def reference_peak_values(speeds: Sequence[float]) -> np.ndarray:
    return np.asarray(speeds, dtype=float) / 6.0

