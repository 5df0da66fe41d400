from __future__ import annotations

import numpy as np
import pytest

from dp_lab.grid import Grid, differentiate
from dp_lab.helmholtz import (composed_inverse, green_kernel_inverse, helmholtz_forward,
                              helmholtz_inverse, smoothing_bound)
from dp_lab.peakons import Peakon, sample_peakon, sample_smooth_peakon, gaussian_smooth


def random_profile(g, rng, width=0.3):
    f = gaussian_smooth(g.function(rng.standard_normal(g.n_points)), width)
    return f * np.exp(-0.5 * (g.x / 5.0) ** 2)


def test_kappa_must_be_one_or_two(grid):
    with pytest.raises(ValueError):
        helmholtz_inverse(3, grid.zeros())


@pytest.mark.parametrize("c", [1.0, 2.0, 3.0])
def test_inverse_of_peakon_is_smooth_peakon(grid, c):
    p = Peakon(c, 0.0)
    got = helmholtz_inverse(2, sample_peakon(p, grid)).values
    assert np.max(np.abs(got - sample_smooth_peakon(p, grid).values)) < 1e-6


def test_inverse_matches_green_kernel_quadrature(rng):
    g = Grid(40.0, 1024)
    f = random_profile(g, rng, 1.0)
    for kappa in (1, 2):
        spectral = helmholtz_inverse(kappa, f).values
        direct = green_kernel_inverse(kappa, f).values
        assert np.max(np.abs(spectral - direct)) < 1e-6 * np.max(np.abs(spectral))


def test_kappa_one_round_trip_on_double_exponential(grid):
    f = grid.sample(lambda x: np.exp(-2.0 * np.abs(x)))
    back = helmholtz_forward(1, helmholtz_inverse(1, f))
    assert np.max(np.abs(back.values - f.values)) < 1e-6


def test_kernel_value_at_translate_centre(grid):
    v = helmholtz_inverse(2, sample_peakon(Peakon(1.0, 5.0), grid))
    assert v(5.0) == pytest.approx(1.0 / 6.0, abs=1e-6)


def test_forward_of_smooth_peakon_recovers_peakon_off_kink(grid):
    p = Peakon(1.0, 0.0)
    fwd = helmholtz_forward(2, sample_smooth_peakon(p, grid)).values
    away = np.abs(grid.x) > 0.5
    assert np.max(np.abs(fwd[away] - np.exp(-np.abs(grid.x[away])))) < 1e-6


def test_forward_of_constant_is_constant(grid):
    one = grid.function(np.ones(grid.n_points))
    assert np.max(np.abs(helmholtz_forward(1, one).values - 1.0)) < 1e-12


def test_kappa_one_forward_of_smooth_peakon(grid):
    fwd = helmholtz_forward(1, sample_smooth_peakon(Peakon(1.0, 0.0), grid)).values
    away = np.abs(grid.x) > 0.5
    assert np.max(np.abs(fwd[away] - 0.5 * np.exp(-2.0 * np.abs(grid.x[away])))) < 1e-6


def test_partial_fractions_against_direct_composition(grid, rng):
    f = random_profile(grid, rng)
    direct = helmholtz_inverse(1, helmholtz_inverse(2, f)).values
    other_order = helmholtz_inverse(2, helmholtz_inverse(1, f)).values
    split = composed_inverse(f).values
    scale = np.max(np.abs(direct))
    assert np.max(np.abs(split - direct)) < 1e-12 * scale
    assert np.max(np.abs(other_order - direct)) < 1e-12 * scale


def test_partial_fractions_on_peakon(grid):
    f = sample_peakon(Peakon(1.0, 0.0), grid)
    a = helmholtz_inverse(1, helmholtz_inverse(2, f)).values
    assert np.max(np.abs(composed_inverse(f).values - a)) < 1e-12 * np.max(np.abs(a))


def test_composed_inverse_of_zero(grid):
    assert np.all(composed_inverse(grid.zeros()).values == 0.0)


def test_round_trip_on_random_data(grid, rng):
    f = random_profile(grid, rng)
    for kappa in (1, 2):
        back = helmholtz_forward(kappa, helmholtz_inverse(kappa, f)).values
        assert np.max(np.abs(back - f.values)) < 1e-10 * np.max(np.abs(f.values))


def test_positivity_and_derivative_domination(grid, rng):
    r = random_profile(grid, rng)
    f = r * r
    v = helmholtz_inverse(2, f)
    h = helmholtz_inverse(1, f)
    tiny = 1e-12 * v.max()
    assert v.min() > -tiny and h.min() > -tiny
    assert np.all(np.abs(differentiate(v, 1).values) <= 2.0 * v.values + tiny)
    assert np.all(np.abs(differentiate(h, 1).values) <= h.values + tiny)


def test_sup_norm_smoothing_bounds(grid, rng):
    for _ in range(5):
        f = random_profile(grid, rng)
        assert np.max(np.abs(helmholtz_inverse(2, f).values)) <= smoothing_bound(2, f)
        assert np.max(np.abs(helmholtz_inverse(1, f).values)) <= smoothing_bound(1, f)
    assert smoothing_bound(2, grid.function(np.ones(grid.n_points))) == pytest.approx(
        np.sqrt(grid.length) / (4 * np.sqrt(2)))


def test_fault_injection_hook_changes_the_operator(grid, monkeypatch):
    from dp_lab import helmholtz

    monkeypatch.setattr(helmholtz, "_kappa_squared", lambda k: 1.9**2 if k == 2 else 1.0)
    p = Peakon(1.0, 0.0)
    got = helmholtz_inverse(2, sample_peakon(p, grid)).values
    assert np.max(np.abs(got - sample_smooth_peakon(p, grid).values)) > 1e-3
