import numpy as np
import pandas as pd
import pytest

from exceptions import PotentialError
from grid import SpatialGrid
from modulation import cosine, empty, one_sided, one_sided_negative, two_tone
from potential import (
    GaussianPotential,
    SampledPotential,
    effective_barrier_height,
    effective_potential,
    effective_potential_gaussian_analytic,
    eval_potential,
    load_sampled_potential,
)

FIG2 = GaussianPotential(7.0, 1 / 64)


@pytest.fixture
def wide_grid() -> SpatialGrid:
    return SpatialGrid(-160.0, 160.0, 2048)


def test_gaussian_values():
    assert eval_potential(FIG2, 0.0) == pytest.approx(7.0)
    assert eval_potential(FIG2, 8.0) == pytest.approx(7 / np.e)
    assert eval_potential(GaussianPotential(0.0, 1 / 64), 3.0) == 0.0


def test_gaussian_requires_positive_beta():
    with pytest.raises(PotentialError):
        GaussianPotential(7.0, 0.0)


def test_gaussian_derivative_matches_spectral_derivative(wide_grid):
    sampled = SampledPotential(wide_grid, FIG2.sample(wide_grid))
    np.testing.assert_allclose(sampled.derivative(wide_grid), FIG2.derivative(wide_grid), atol=1e-10)


def test_sampled_potential_must_decay_at_edges():
    grid = SpatialGrid(-10.0, 10.0, 64)
    with pytest.raises(PotentialError):
        SampledPotential(grid, np.ones(grid.n))


def test_sampled_potential_refuses_other_grids(wide_grid):
    sampled = SampledPotential(wide_grid, FIG2.sample(wide_grid))
    with pytest.raises(PotentialError):
        sampled.sample(SpatialGrid(-160.0, 160.0, 1024))


def test_eval_sampled_potential_at_grid_point(wide_grid):
    sampled = SampledPotential(wide_grid, FIG2.sample(wide_grid))
    assert eval_potential(sampled, 0.0) == pytest.approx(7.0)


def test_load_sampled_potential_from_csv(tmp_path, wide_grid):
    path = tmp_path / "well.csv"
    pd.DataFrame({"x": wide_grid.x, "value": FIG2.sample(wide_grid)}).to_csv(path, index=False)
    loaded = load_sampled_potential(path)
    assert loaded.grid.n == wide_grid.n
    assert loaded.grid.x_min == pytest.approx(wide_grid.x_min)
    assert loaded.grid.x_max == pytest.approx(wide_grid.x_max)
    np.testing.assert_allclose(loaded.values, FIG2.sample(wide_grid))


def test_load_sampled_potential_rejects_bad_files(tmp_path):
    missing = tmp_path / "missing.csv"
    pd.DataFrame({"x": [0.0, 1.0], "v": [0.0, 0.0]}).to_csv(missing, index=False)
    with pytest.raises(PotentialError):
        load_sampled_potential(missing)

    uneven = tmp_path / "uneven.csv"
    pd.DataFrame({"x": [0.0, 1.0, 3.0, 4.0], "value": [0.0] * 4}).to_csv(uneven, index=False)
    with pytest.raises(PotentialError):
        load_sampled_potential(uneven)


def test_effective_potential_matches_closed_form_for_cos_drive(wide_grid):
    field = effective_potential(FIG2, wide_grid, cosine(0.9))
    analytic = effective_potential_gaussian_analytic(7.0, 1 / 64, 0.9, wide_grid.x)
    assert np.abs(field.values - analytic).max() < 1e-8 * np.abs(analytic).max()
    assert np.all(field.values.real >= 0)
    assert np.abs(field.values.imag).max() < 1e-15


def test_effective_potential_of_sampled_profile_matches_closed_form(wide_grid):
    sampled = SampledPotential(wide_grid, FIG2.sample(wide_grid))
    field = effective_potential(sampled, wide_grid, cosine(0.9))
    analytic = effective_potential_gaussian_analytic(7.0, 1 / 64, 0.9, wide_grid.x)
    assert np.abs(field.values - analytic).max() < 1e-8 * np.abs(analytic).max()


@pytest.mark.parametrize("mod", [one_sided(0.9), one_sided_negative(0.9), two_tone(0.9), empty()])
def test_effective_potential_vanishes_for_one_sided_drives(wide_grid, mod):
    field = effective_potential(FIG2, wide_grid, mod)
    assert np.abs(field.values).max() < 1e-14 * 7.0 ** 2
    assert field.scale == 0


def test_effective_potential_scales_quadratically_with_depth(wide_grid):
    single = effective_potential(GaussianPotential(3.0, 1 / 64), wide_grid, cosine(0.9))
    double = effective_potential(GaussianPotential(6.0, 1 / 64), wide_grid, cosine(0.9))
    np.testing.assert_allclose(double.values, 4 * single.values, rtol=1e-13, atol=1e-300)


def test_closed_form_peak_values():
    assert effective_potential_gaussian_analytic(7.0, 1 / 64, 0.9, 0.0) == 0.0
    peak = 2 * 49 / 64 ** 2 / 0.81 * 32 * np.exp(-1)
    assert effective_potential_gaussian_analytic(7.0, 1 / 64, 0.9, np.sqrt(32)) == pytest.approx(peak, rel=1e-12)
    assert peak == pytest.approx(0.34776, abs=1e-4)
    assert effective_potential_gaussian_analytic(20.0, 1 / 64, 3.0, np.sqrt(32)) == pytest.approx(0.2554, abs=1e-4)


def test_barrier_height_is_closed_form_maximum():
    assert effective_barrier_height(7.0, 1 / 64, 0.9) == pytest.approx(49 / 64 / (0.81 * np.e), rel=1e-12)
    x = np.linspace(0, 30, 30001)
    assert effective_potential_gaussian_analytic(7.0, 1 / 64, 0.9, x).max() <= effective_barrier_height(7.0, 1 / 64, 0.9) * (1 + 1e-12)


def test_closed_form_rejects_bad_parameters():
    with pytest.raises(PotentialError):
        effective_potential_gaussian_analytic(7.0, 1 / 64, 0.0, 1.0)
