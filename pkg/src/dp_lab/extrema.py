"""Extrema of the smoothed profile on a bump, the sign-switching combinations
g and h built from them, and positivity margins."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functionals import (WeightPartition, cubic_density_v_form, energy_density,
                          smoothed_profile)
from .grid import Grid, GridFunction, check_same_grid, differentiate, integrate
from .helmholtz import helmholtz_inverse
from .peakons import gaussian_smooth

LEVEL_FRACTION = 1.0 / 2400.0
HYSTERESIS = 1e-9


class BumpAbsentError(ValueError):
    """The profile never rises above the detection level inside the window."""


@dataclass(frozen=True)
class ExtremaDecomposition:
    """Interlaced maxima xi_1..xi_{k+1} and minima eta_1..eta_k of v between
    the level crossings alpha < beta, in spatial order."""

    c: float
    alpha: float
    beta: float
    xi: tuple[float, ...]
    eta: tuple[float, ...]
    M: tuple[float, ...]
    m: tuple[float, ...]
    interlaced: bool = field(default=True)

    @property
    def k(self) -> int:
        return len(self.eta)

    def sorted_view(self) -> tuple[np.ndarray, np.ndarray]:
        """Maxima and minima each sorted decreasingly, checking that every
        max of rank j+1 dominates the min of rank j."""
        M = np.sort(np.asarray(self.M))[::-1]
        m = np.sort(np.asarray(self.m))[::-1]
        if m.size and np.any(M[1:] < m):
            raise ArithmeticError("sorted maxima do not dominate sorted minima")
        return M, m


def _refine(values: np.ndarray, x: np.ndarray, j: int) -> tuple[float, float]:
    """Parabolic peak position and value through nodes j-1, j, j+1."""
    if j == 0 or j == values.size - 1:
        return float(x[j]), float(values[j])
    a, b, c = values[j - 1], values[j], values[j + 1]
    curv = a - 2.0 * b + c
    if curv == 0.0:
        return float(x[j]), float(b)
    delta = float(np.clip(0.5 * (a - c) / curv, -0.5, 0.5))
    dx = x[1] - x[0]
    return float(x[j] + delta * dx), float(b - 0.25 * (a - c) * delta)


def _turning_points(values: np.ndarray, tol: float) -> list[tuple[int, str]]:
    """Alternating max/min node indices of a run that starts and ends at the
    detection level; a turn counts only after a retreat larger than ``tol``."""
    found = []
    cand, rising = 0, True
    for j in range(1, values.size):
        if rising:
            if values[j] > values[cand]:
                cand = j
            elif values[cand] - values[j] > tol:
                found.append((cand, "max"))
                cand, rising = j, False
        else:
            if values[j] < values[cand]:
                cand = j
            elif values[j] - values[cand] > tol:
                found.append((cand, "min"))
                cand, rising = j, True
    if rising:
        found.append((cand, "max"))
    return found


def decompose(v: GridFunction, c: float, search_center: float,
              window: tuple[float, float] | None = None,
              level: float | None = None) -> ExtremaDecomposition:
    """Locate the bump of v around ``search_center``.

    The bump is the stretch where v exceeds ``level`` (default c/2400)
    containing ``search_center``, or the highest such stretch in the window
    when the centre itself is below the level. Crossings are linearly
    interpolated between nodes.
    """
    grid = v.grid
    if window is None:
        window = (-grid.half_width, grid.half_width - grid.dx)
    lo, hi = window
    if lo < -grid.half_width or hi > grid.half_width or lo >= hi:
        raise ValueError(f"window {window} is not inside the grid")
    level = c * LEVEL_FRACTION if level is None else level
    x = grid.x
    idx = np.nonzero((x >= lo) & (x <= hi))[0]
    vals = v.values[idx]
    above = vals > level
    if not np.any(above):
        raise BumpAbsentError(f"bump absent: v stays below {level:.3g} in {window}")

    j0 = int(np.argmin(np.abs(x[idx] - search_center)))
    if not above[j0]:
        j0 = int(np.argmax(np.where(above, vals, -np.inf)))
    left = j0
    while left > 0 and above[left - 1]:
        left -= 1
    right = j0
    while right < above.size - 1 and above[right + 1]:
        right += 1
    if left == 0 or right == above.size - 1:
        raise BumpAbsentError("level is not crossed on both sides inside the window")

    def crossing(i_out, i_in):
        f0, f1 = vals[i_out], vals[i_in]
        t = (level - f0) / (f1 - f0)
        return float(x[idx[i_out]] + t * (x[idx[i_in]] - x[idx[i_out]]))

    alpha = crossing(left - 1, left)
    beta = crossing(right + 1, right)
    run = vals[left:right + 1]
    run_x = x[idx[left:right + 1]]
    xi, eta, M, m = [], [], [], []
    for j, kind in _turning_points(run, HYSTERESIS * c):
        pos, val = _refine(run, run_x, j)
        if kind == "max":
            xi.append(pos)
            M.append(val)
        else:
            eta.append(pos)
            m.append(val)
    points = [alpha] + [p for pair in zip(xi, eta + [beta]) for p in pair]
    interlaced = bool(np.all(np.diff(points) > 0)) and len(xi) == len(eta) + 1
    return ExtremaDecomposition(c=float(c), alpha=alpha, beta=beta, xi=tuple(xi), eta=tuple(eta),
                                M=tuple(M), m=tuple(m), interlaced=interlaced)


def switch_sign(grid: Grid, d: ExtremaDecomposition) -> np.ndarray:
    """-1 where v rises (left of xi_1 and on each ]eta_j, xi_{j+1}[), +1 where
    it falls."""
    x = grid.x
    s = np.where(x < d.xi[0], -1.0, 1.0)
    for a, b in zip(d.eta, d.xi[1:]):
        s[(x > a) & (x < b)] = -1.0
    return s


def _second_derivative(v: GridFunction, u: GridFunction | None) -> GridFunction:
    # v_xx = 4v - u holds pointwise; the spectral v_xx rings where v''' jumps
    if u is None:
        return differentiate(v, 2)
    check_same_grid(u, v)
    return 4.0 * v - u


def build_g(v: GridFunction, d: ExtremaDecomposition, u: GridFunction | None = None) -> GridFunction:
    """2v + v_xx + 3 s v_x with s the rise/fall sign.

    Passing the pointwise profile ``u`` with v = (4 - d^2)^-1 u replaces the
    spectral v_xx by 4v - u, which is sharper for peaked u.
    """
    s = switch_sign(v.grid, d)
    return 2.0 * v + _second_derivative(v, u) + 3.0 * s * differentiate(v, 1)


def build_h(v: GridFunction, d: ExtremaDecomposition, u: GridFunction | None = None) -> GridFunction:
    """16v - v_xx + 6 s v_x with s the rise/fall sign (``u`` as in build_g)."""
    s = switch_sign(v.grid, d)
    return 16.0 * v - _second_derivative(v, u) + 6.0 * s * differentiate(v, 1)


def energy_extrema_residual(u: GridFunction, d: ExtremaDecomposition) -> float:
    """|int g^2 - (E(u) - 12 (sum M^2 - sum m^2))|."""
    v = helmholtz_inverse(2, u)
    g = build_g(v, d)
    rhs = integrate(energy_density(u)) - 12.0 * (np.sum(np.square(d.M)) - np.sum(np.square(d.m)))
    return abs(integrate(g * g) - rhs)


def cubic_extrema_residual(u: GridFunction, d: ExtremaDecomposition) -> float:
    """|int h g^2 - (F(u) - 144 (sum M^3 - sum m^3))|, F in its v-form."""
    v = helmholtz_inverse(2, u)
    g = build_g(v, d)
    h = build_h(v, d)
    F = integrate(cubic_density_v_form(u))
    rhs = F - 144.0 * (np.sum(np.power(d.M, 3)) - np.sum(np.power(d.m, 3)))
    return abs(integrate(h * g * g) - rhs)


def localized_identity_residuals(u: GridFunction, p: WeightPartition,
                                 decompositions) -> list[tuple[float, float]]:
    """Per bump, the weighted versions of the two identities above, each
    with the extremal values weighted by phi_i at the extremum."""
    check_same_grid(u, p.partition[0])
    if len(decompositions) != len(p):
        raise ValueError("need one decomposition per bump")
    v = helmholtz_inverse(2, u)
    dens = energy_density(u)
    cube = cubic_density_v_form(u)
    out = []
    for i, (phi, d) in enumerate(zip(p.partition, decompositions)):
        g = build_g(v, d)
        h = build_h(v, d)
        wM = p.phi_at(i, np.asarray(d.xi))
        wm = p.phi_at(i, np.asarray(d.eta)) if d.eta else np.zeros(0)
        M, m = np.asarray(d.M), np.asarray(d.m)
        rE = integrate(g * g * phi) - (integrate(dens * phi) - 12.0 * (np.sum(M**2 * wM) - np.sum(m**2 * wm)))
        rF = integrate(h * g * g * phi) - (integrate(cube * phi) - 144.0 * (np.sum(M**3 * wM) - np.sum(m**3 * wm)))
        out.append((abs(rE), abs(rF)))
    return out


def h_bound_excess(u: GridFunction, d: ExtremaDecomposition) -> float:
    """max of h over [alpha, beta] minus 18 M_1 (nonpositive when y >= 0)."""
    v = helmholtz_inverse(2, u)
    h = build_h(v, d)
    x = u.grid.x
    inside = (x >= d.alpha) & (x <= d.beta)
    return float(np.max(h.values[inside]) - 18.0 * max(d.M))


def cubic_inequality_value(M1: float, E: float, F: float) -> float:
    """M1^3 - E M1 / 4 + F / 72."""
    return M1**3 - E * M1 / 4 + F / 72


@dataclass(frozen=True)
class PositivityReport:
    margins: dict

    @property
    def worst(self) -> float:
        return min(self.margins.values())

    def flagged(self, tol: float = 1e-6) -> list[str]:
        return [k for k, val in self.margins.items() if val < -tol]

    def ok(self, tol: float = 1e-6) -> bool:
        return not self.flagged(tol)


POSITIVITY_MARGINS = (
    "u_plus_ux", "u_minus_ux",
    "w2p_1p", "w2m_1p", "w2p_1m", "w2m_1m",
    "v2_plus_vx", "v2_minus_vx",
    "h_plus_hx", "h_minus_hx",
)


def positivity_diagnostics(u: GridFunction, resolution_width: float | None = None) -> PositivityReport:
    """Minima over the grid of the combinations that stay nonnegative when
    the momentum density (1 - d^2)u is nonnegative.

    ``resolution_width`` first convolves u with a Gaussian of that width. The
    kernel is positive and commutes with every operator involved, so
    nonnegative momentum density is preserved, while the ringing of a peak
    sharper than the grid is removed. A few dx is enough.

    Margin names: ``u_plus_ux`` is min(u + u_x); ``w2p_1m`` is
    min of (2 + d)(4 - d^2)^-1 (1 - d)u, and so on; ``v2_plus_vx`` is
    min(2v + v_x); ``h_plus_hx`` is min(h + h_x) with h = (1 - d^2)^-1 u^2.
    """
    if resolution_width:
        u = gaussian_smooth(u, resolution_width)
    ux = differentiate(u, 1)
    margins = {"u_plus_ux": (u + ux).min(), "u_minus_ux": (u - ux).min()}
    for a, sa in ((1.0, "p"), (-1.0, "m")):
        w = helmholtz_inverse(2, u + a * ux)  # (4 - d^2)^-1 (1 +- d) u
        wx = differentiate(w, 1)
        for b, sb in ((1.0, "p"), (-1.0, "m")):
            margins[f"w2{sb}_1{sa}"] = (2.0 * w + b * wx).min()
    v, vx, _ = smoothed_profile(u)
    margins["v2_plus_vx"] = (2.0 * v + vx).min()
    margins["v2_minus_vx"] = (2.0 * v - vx).min()
    h = helmholtz_inverse(1, u * u)
    hx = differentiate(h, 1)
    margins["h_plus_hx"] = (h + hx).min()
    margins["h_minus_hx"] = (h - hx).min()
    return PositivityReport({k: float(margins[k]) for k in POSITIVITY_MARGINS})
