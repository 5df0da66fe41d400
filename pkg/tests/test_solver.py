import numpy as np
import pytest

from dp_lab.functionals import build_partition, energy_E, energy_F
from dp_lab.grid import Grid, differentiate
from dp_lab.peakons import Peakon, mollified_peakon
from dp_lab.solver import (SolverDiverged, SolverState, StaticWeight, evolve, monotonicity_track,
                           rhs, stable_dt, step, virial_residual)


def test_rhs_of_zero_and_constants(coarse_grid):
    assert np.all(rhs(coarse_grid.zeros()).values == 0.0)
    const = coarse_grid.function(np.full(coarse_grid.n_points, 0.7))
    assert np.max(np.abs(rhs(const).values)) < 1e-13


def test_traveling_wave_balance(grid):
    # a peakon moving at speed c satisfies u_t = -c u_x
    u = mollified_peakon(Peakon(1.5, 0.0), grid, 0.1)
    expected = -1.5 * differentiate(u, 1).values
    err = np.max(np.abs(rhs(u).values - expected)) / np.max(np.abs(expected))
    assert err < 0.05


def test_zero_stays_zero(coarse_grid):
    states = list(evolve(coarse_grid.zeros(), 1.0, 0.5))
    assert [s.t for s in states] == [0.0, 0.5, 1.0]
    assert all(np.all(s.u.values == 0.0) for s in states)


def test_cfl_violation_is_rejected(coarse_grid):
    u = mollified_peakon(Peakon(1.0, 0.0), coarse_grid, 0.2)
    with pytest.raises(ValueError):
        SolverState(0.0, u, 2 * stable_dt(u))
    SolverState(0.0, u, stable_dt(u))


def test_non_finite_values_raise(coarse_grid):
    bad = np.zeros(coarse_grid.n_points)
    bad[3] = 1e200
    u = coarse_grid.function(bad)
    with pytest.raises(SolverDiverged), np.errstate(all="ignore"):
        step(SolverState(0.0, u, 1e-300 * stable_dt(u) + 1e-310))


def test_short_run_conserves_invariants(coarse_grid):
    u0 = mollified_peakon(Peakon(1.0, 0.0), coarse_grid, 0.5)
    last = list(evolve(u0, 1.0, 0.5, filter_strength=0.0))[-1]
    assert energy_E(last.u) == pytest.approx(energy_E(u0), rel=1e-7)
    assert energy_F(last.u) == pytest.approx(energy_F(u0), rel=1e-7)


def virial_pair(grid, dt):
    u0 = mollified_peakon(Peakon(1.0, 0.0), grid, 0.5)
    s0 = SolverState(0.0, u0, dt, 0.0)
    return s0, step(s0)


def test_virial_with_constant_weight_is_energy_conservation(coarse_grid):
    s0, s1 = virial_pair(coarse_grid, 0.01)
    assert virial_residual(s0, s1, StaticWeight.constant(coarse_grid)) < 1e-10


def test_virial_residual_converges_at_second_order():
    g = Grid(40.0, 1024)
    weight = StaticWeight.logistic(g, 1.0, 4.0)
    res = [virial_residual(*virial_pair(g, dt), weight) for dt in (0.032, 0.016, 0.008)]
    ratios = [a / b for a, b in zip(res[:-1], res[1:])]
    assert all(3.5 < r < 4.5 for r in ratios)


def test_virial_states_must_be_ordered(coarse_grid):
    s0, s1 = virial_pair(coarse_grid, 0.01)
    with pytest.raises(ValueError):
        virial_residual(s1, s0, StaticWeight.constant(coarse_grid))


def test_monotonicity_track_for_a_single_bump(coarse_grid):
    u0 = mollified_peakon(Peakon(1.0, 0.0), coarse_grid, 0.5)
    states = list(evolve(u0, 1.0, 0.5))
    parts = [build_partition([0.0], 4.0, coarse_grid)] * len(states)
    track = monotonicity_track(states, parts, 1)
    assert track[0] == 0.0
    assert np.max(np.abs(track)) < 1e-6 * energy_E(u0)
    with pytest.raises(ValueError):
        monotonicity_track(states, parts, 2)
