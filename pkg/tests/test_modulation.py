import numpy as np
import pytest

from dp_lab.helmholtz import helmholtz_inverse
from dp_lab.modulation import (TrackingLost, estimate_speeds, modulation_residual,
                               reference_peak_values, solve_modulation, stability_distance,
                               track_argmax, tracking_intervals)
from dp_lab.peakons import Peakon, PeakonTrain, sample_peakon, sample_smooth_peakon, sample_train


def test_argmax_on_a_parabola(coarse_grid):
    x = coarse_grid.x
    v = coarse_grid.function(-(x - 1.2345) ** 2)
    assert track_argmax(v, [(-5.0, 5.0)])[0] == pytest.approx(1.2345, abs=1e-10)


def test_argmax_plateau_resolves_leftmost(coarse_grid):
    x = coarse_grid.x
    v = coarse_grid.function(np.where(np.abs(x) < 1.0, 1.0, 0.0))
    assert track_argmax(v, [(-5.0, 5.0)])[0] == x[np.argmax(np.abs(x) < 1.0)]


def test_argmax_per_interval(grid):
    tr = PeakonTrain.from_arrays([1.0, 2.0], [-10.0, 12.0])
    v = sample_train(tr, grid, smooth=True)
    got = track_argmax(v, tracking_intervals(tr.centers, grid.half_width))
    assert got == pytest.approx([-10.0, 12.0], abs=1e-3)
    with pytest.raises(ValueError):
        track_argmax(v, [(100.0, 101.0)])


def test_modulation_finds_exact_centres(grid):
    tr = PeakonTrain.from_arrays([1.0, 2.0], [-10.3, 9.7])
    v = sample_train(tr, grid, smooth=True)
    assert np.max(np.abs(modulation_residual(v, tr.speeds, tr.centers))) < 1e-10
    z = solve_modulation(v, tr.speeds, [-10.0, 10.0])
    assert z == pytest.approx([-10.3, 9.7], abs=1e-8)


def test_modulation_is_translation_equivariant(grid, rng):
    base = sample_smooth_peakon(Peakon(1.0, 0.0), grid).values
    bump = 0.01 * np.exp(-0.5 * ((grid.x - 0.5) / 0.7) ** 2)
    shift = 512
    a = solve_modulation(grid.function(base + bump), [1.0], [0.0])[0]
    b = solve_modulation(grid.function(np.roll(base + bump, shift)), [1.0], [0.0])[0]
    # Newton stops at residual 1e-9, i.e. about 54e-9 in position
    assert b - a == pytest.approx(shift * grid.dx, abs=1e-6)
    assert a > 0


def test_far_guess_loses_tracking(grid):
    v = sample_smooth_peakon(Peakon(1.0, 0.0), grid)
    with pytest.raises(TrackingLost):
        solve_modulation(v, [1.0], [15.0])
    with pytest.raises(TrackingLost):
        solve_modulation(grid.zeros(), [1.0], [0.0])


def test_speed_fit():
    t = np.linspace(0, 10, 101)
    z = np.stack([1.0 * t - 5, 2.0 * t + 3], axis=1)
    assert estimate_speeds(t, z) == pytest.approx([1.0, 2.0])
    assert estimate_speeds(t, z[:, 0], window=(2, 8)) == pytest.approx([1.0])
    with pytest.raises(ValueError):
        estimate_speeds(t[:2], z[:2])


def test_distance_of_a_scaled_peakon(grid):
    # (1 + e) phi_c is at H-distance e c / sqrt(3) from phi_c
    for eps in (1e-3, 1e-2):
        u = sample_peakon(Peakon(1.0, 0.0), grid) * (1 + eps)
        d = stability_distance(u, [1.0], [0.0])
        assert eps / (2 * np.sqrt(3)) <= d <= eps / np.sqrt(3) * (1 + 1e-6)


def test_peak_heights_of_a_train(grid):
    L = 24.0
    tr = PeakonTrain.from_arrays([1.0, 2.0], [-L / 2, L / 2])
    v = helmholtz_inverse(2, sample_train(tr, grid))
    xi = track_argmax(v, tracking_intervals(tr.centers, grid.half_width))
    M = np.array([v(p) for p in xi])
    assert np.all(np.abs(M - reference_peak_values(tr.speeds)) <= 2 * np.exp(-L / 4) + 1e-6)
