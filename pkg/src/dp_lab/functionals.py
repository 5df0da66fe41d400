"""Conserved quantities, the logistic weight family, the partition of unity
and localized energies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import Grid, GridFunction, check_same_grid, differentiate, integrate
from .helmholtz import helmholtz_inverse
from .peakons import Peakon, PeakonTrain, sample_peakon, sample_train

PSI_MAX_ORDER = 4
PSI_DERIVATIVE_RATIO = 10.0


def smoothed_profile(u: GridFunction) -> tuple[GridFunction, GridFunction, GridFunction]:
    """v = (4 - d^2)^-1 u together with v_x and v_xx."""
    v = helmholtz_inverse(2, u)
    return v, differentiate(v, 1), differentiate(v, 2)


def energy_density(u: GridFunction) -> GridFunction:
    v, vx, vxx = smoothed_profile(u)
    return 4.0 * v * v + 5.0 * vx * vx + vxx * vxx


def energy_E(u: GridFunction) -> float:
    """Quadratic invariant, always evaluated through the smoothed profile v."""
    return integrate(energy_density(u))


def cubic_density_v_form(u: GridFunction) -> GridFunction:
    v, _, vxx = smoothed_profile(u)
    return -vxx**3 + 12.0 * v * vxx**2 - 48.0 * v**2 * vxx + 64.0 * v**3


def energy_F(u: GridFunction, v_form: bool = False) -> float:
    """Cubic invariant, the integral of u^3.

    ``v_form=True`` expands u = 4v - v_xx instead, which is a useful cross
    check on smooth data.
    """
    if v_form:
        return integrate(cubic_density_v_form(u))
    return integrate(u**3)


def h_norm(u: GridFunction) -> float:
    return float(np.sqrt(max(energy_E(u), 0.0)))


def h_distance(u: GridFunction, w: GridFunction) -> float:
    check_same_grid(u, w)
    return h_norm(u - w)


# -- weight family -------------------------------------------------------


def psi(x, order: int = 0):
    """Logistic weight 1/(1 + e^-x) and its derivatives up to order 4."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))  # never overflows
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    if order == 0:
        return s
    d1 = s * (1.0 - s)
    if order == 1:
        return d1
    if order == 2:
        return d1 * (1.0 - 2.0 * s)
    if order == 3:
        return d1 * (1.0 - 6.0 * s + 6.0 * s * s)
    if order == 4:
        return d1 * (1.0 - 2.0 * s) * (1.0 - 12.0 * s + 12.0 * s * s)
    raise ValueError(f"psi derivatives are available for orders 0..4, got {order}")


def check_psi_bounds(lo: float = -10.0, hi: float = 10.0, n: int = 20001) -> float:
    """Largest |psi^(q)| / psi' over q = 2..4 on a fine grid; must stay <= 10."""
    x = np.linspace(lo, hi, n)
    d1 = psi(x, 1)
    if np.any(d1 <= 0):
        raise ArithmeticError("psi is not strictly increasing")
    worst = max(float(np.max(np.abs(psi(x, q)) / d1)) for q in range(2, PSI_MAX_ORDER + 1))
    if worst > PSI_DERIVATIVE_RATIO:
        raise ArithmeticError(f"derivative ratio {worst} exceeds {PSI_DERIVATIVE_RATIO}")
    return worst


def psi_K(x, center: float, K: float, order: int = 0):
    """psi((x - center)/K) and its x-derivatives."""
    return psi((np.asarray(x) - center) / K, order) / K**order


def default_K(L: float) -> float:
    """sqrt(L)/8 clamped below at 4."""
    return max(4.0, float(np.sqrt(L)) / 8.0)


def sigma0(speeds: Sequence[float]) -> float:
    """A quarter of the smallest of c_1 and the consecutive speed gaps."""
    c = np.asarray(speeds, dtype=float)
    return 0.25 * float(np.min(np.concatenate(([c[0]], np.diff(c)))))


# -- partition of unity --------------------------------------------------


@dataclass(frozen=True)
class WeightPartition:
    K: float
    L: float
    midpoints: tuple[float, ...]  # y_2..y_N
    partition: tuple[GridFunction, ...]  # phi_1..phi_N
    right_weights: tuple[GridFunction, ...]  # psi_{2,K}..psi_{N,K}

    @property
    def grid(self) -> Grid:
        return self.partition[0].grid

    def __len__(self):
        return len(self.partition)

    def phi_at(self, i: int, x):
        """Closed-form value of phi_{i+1} (0-based ``i``) at arbitrary points."""
        cuts = [np.ones_like(np.asarray(x, dtype=float))]
        cuts += [psi_K(x, y, self.K) for y in self.midpoints]
        cuts += [np.zeros_like(cuts[0])]
        return cuts[i] - cuts[i + 1]


def partition_tail_bound(L: float, K: float) -> float:
    return 2.0 * float(np.exp(-L / (8.0 * K)))


def build_partition(centers: Sequence[float], K: float | None, grid: Grid,
                    L: float | None = None) -> WeightPartition:
    """Partition of unity phi_i = psi_{i,K} - psi_{i+1,K} cut at the midpoints
    between consecutive centres.

    ``L`` is the separation scale, by default the smallest gap between
    centres. ``K=None`` picks :func:`default_K`. The tail bounds of the
    partition are checked on the grid before returning.
    """
    z = np.asarray(centers, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("need at least one centre")
    if np.any(np.diff(z) <= 0):
        raise ValueError(f"centres must be strictly increasing, got {list(z)}")
    if L is None:
        L = float(np.min(np.diff(z))) if z.size > 1 else np.inf
    if K is None:
        K = default_K(L) if np.isfinite(L) else 4.0
    if K < 4:
        raise ValueError(f"K must be >= 4, got {K}")
    if z.size > 1 and not L / K > 4:
        raise ValueError(f"need L/K > 4, got L={L}, K={K}")

    x = grid.x
    y = 0.5 * (z[:-1] + z[1:])
    right = [psi_K(x, yi, K) for yi in y]
    cuts = [np.ones_like(x)] + right + [np.zeros_like(x)]
    phis = [cuts[i] - cuts[i + 1] for i in range(z.size)]

    total = np.sum(phis, axis=0)
    if np.max(np.abs(total - 1.0)) > 1e-12:
        raise ArithmeticError("partition does not sum to one")
    if z.size > 1:
        bound = partition_tail_bound(L, K)
        edges = np.concatenate(([-np.inf], y, [np.inf]))
        for i, phi in enumerate(phis):
            inside = (x > edges[i] + L / 8) & (x < edges[i + 1] - L / 8)
            outside = (x < edges[i] - L / 8) | (x > edges[i + 1] + L / 8)
            if np.any(np.abs(1.0 - phi[inside]) > bound) or np.any(np.abs(phi[outside]) > bound):
                raise ArithmeticError(f"partition tail bound violated for bump {i + 1}")

    return WeightPartition(
        K=float(K),
        L=float(L),
        midpoints=tuple(float(v) for v in y),
        partition=tuple(GridFunction(grid, p) for p in phis),
        right_weights=tuple(GridFunction(grid, r) for r in right),
    )


@dataclass(frozen=True)
class EnergyReport:
    E: float
    F: float
    H_norm: float
    per_bump: tuple[tuple[float, float, float], ...]  # (E_i, F_i, J_iK)


def localized_energies(u: GridFunction, p: WeightPartition) -> EnergyReport:
    """E_i, F_i against phi_i and the monotonicity functional J_{i,K}
    against psi_{i,K} (J_{1,K} is the full E)."""
    check_same_grid(u, p.partition[0])
    dens = energy_density(u)
    cube = u**3
    E = integrate(dens)
    F = integrate(cube)
    J = [E] + [integrate(dens * w) for w in p.right_weights]
    per_bump = tuple(
        (integrate(dens * phi), integrate(cube * phi), J[i]) for i, phi in enumerate(p.partition)
    )
    return EnergyReport(E=E, F=F, H_norm=float(np.sqrt(max(E, 0.0))), per_bump=per_bump)


# -- quadratic identities ------------------------------------------------


def quadratic_identity_residual(u: GridFunction, xi: float, c: float) -> float:
    """|E(u) - E(phi_c) - ||u - phi_c(. - xi)||^2 - 4c(v(xi) - c/6)|."""
    phi = sample_peakon(Peakon(c, xi), u.grid)
    v = helmholtz_inverse(2, u)
    lhs = energy_E(u) - c * c / 3.0
    rhs = energy_E(u - phi) + 4.0 * c * (v(xi) - c / 6.0)
    return abs(lhs - rhs)


def general_quadratic_identity_residual(u: GridFunction, train: PeakonTrain) -> float:
    """Multi-bump version against the sum of peakons S_Z, without the
    exponentially small cross terms."""
    s = sample_train(train, u.grid)
    v = helmholtz_inverse(2, u)
    c = train.speeds
    lhs = energy_E(u) - float(np.sum(c**2)) / 3.0
    rhs = energy_E(u - s) + 4.0 * sum(ci * (v(zi) - ci / 6.0) for ci, zi in zip(c, train.centers))
    return abs(lhs - rhs)


def general_identity_bound(train: PeakonTrain, L: float) -> float:
    return 5.0 * float(np.exp(-L / 4.0)) * float(np.sum(train.speeds)) ** 2 + 1e-5


def abel_diagnostic(M1: Sequence[float], deltaE: Sequence[float], deltaJ: Sequence[float]) -> float:
    """Residual of summation by parts,
    sum_i M_i dE_i = sum_i (M_i - M_{i-1}) dJ_i with M_0 = 0, dJ_1 = sum dE.

    ``deltaJ`` holds dJ_2..dJ_N; the identity holds when
    dE_i = dJ_i - dJ_{i+1}.
    """
    M = np.asarray(M1, dtype=float)
    dE = np.asarray(deltaE, dtype=float)
    dJ = np.asarray(deltaJ, dtype=float)
    if M.shape != dE.shape or dJ.shape != (M.size - 1,):
        raise ValueError(
            f"need N multipliers, N energy changes and N-1 weight changes, got {M.size}, {dE.size}, {dJ.size}"
        )
    full_dJ = np.concatenate(([dE.sum()], dJ))
    steps = np.diff(np.concatenate(([0.0], M)))
    return abs(float(np.dot(M, dE) - np.dot(steps, full_dJ)))
