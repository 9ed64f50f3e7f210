import numpy as np
import pytest

from diagnostics import (
    DiagnosticsRecord,
    compute_diagnostics,
    cycle_average,
    free_reference,
    intensity_frame,
    invisibility_error,
    normalized_intensity,
    oscillation_amplitude,
    reflected_fraction,
    width,
)
from exceptions import DiagnosticsError
from grid import WaveFunction, make_gaussian_packet
from propagator import Trajectory


@pytest.fixture
def centered(small_grid) -> WaveFunction:
    return make_gaussian_packet(small_grid, center=0.0, width=5.0)


def test_width_of_centered_gaussian(centered):
    assert width(centered) == pytest.approx(2.5, rel=1e-10)


def test_width_is_measured_about_origin(small_grid):
    values = np.zeros(small_grid.n)
    values[small_grid.index_of(-6.0)] = 1.0
    values[small_grid.index_of(6.0)] = 1.0
    assert width(WaveFunction(small_grid, values)) == pytest.approx(6.0)

    shifted = make_gaussian_packet(small_grid, center=4.0, width=2.0)
    assert width(shifted) == pytest.approx(np.sqrt(16.0 + 1.0), rel=1e-10)


def test_width_of_zero_state_is_rejected(small_grid):
    with pytest.raises(DiagnosticsError):
        width(WaveFunction(small_grid, np.zeros(small_grid.n)))


def test_normalized_intensity_rows_peak_at_one(small_grid, centered):
    constant = WaveFunction(small_grid, np.full(small_grid.n, 0.3 + 0.4j))
    traj = Trajectory(small_grid, np.array([0.0, 1.0]), np.array([centered.values, constant.values]))
    intensity = normalized_intensity(traj)
    assert intensity.max(axis=1) == pytest.approx([1.0, 1.0])
    np.testing.assert_allclose(intensity[1], 1.0)
    assert intensity.min() >= 0.0


def test_normalized_intensity_ignores_complex_scaling(small_grid, centered):
    plain = Trajectory(small_grid, np.array([0.0]), np.array([centered.values]))
    scaled = Trajectory(small_grid, np.array([0.0]), np.array([(2 - 3j) * centered.values]))
    np.testing.assert_allclose(normalized_intensity(plain), normalized_intensity(scaled), rtol=1e-12)


def test_normalized_intensity_rejects_zero_snapshot(small_grid):
    traj = Trajectory(small_grid, np.array([0.0]), np.zeros((1, small_grid.n)))
    with pytest.raises(DiagnosticsError):
        normalized_intensity(traj)


def test_invisibility_error_basics(centered):
    assert invisibility_error(centered, centered) == 0.0
    flipped = centered.with_values(-centered.values)
    assert invisibility_error(flipped, centered) == pytest.approx(2.0)


def test_invisibility_error_ignores_common_phase(small_grid, centered):
    other = make_gaussian_packet(small_grid, center=1.0, width=5.0, carrier=0.2)
    phase = np.exp(1.1j)
    assert invisibility_error(other.with_values(phase * other.values), centered.with_values(phase * centered.values)) == \
        pytest.approx(invisibility_error(other, centered), rel=1e-12)


def test_invisibility_error_requires_matching_time(centered):
    with pytest.raises(DiagnosticsError):
        invisibility_error(centered, centered.with_values(centered.values, time=1.0))


def test_invisibility_error_rejects_zero_reference(small_grid, centered):
    with pytest.raises(DiagnosticsError):
        invisibility_error(centered, WaveFunction(small_grid, np.zeros(small_grid.n)))


def test_reflected_fraction(small_grid, centered):
    right = make_gaussian_packet(small_grid, center=10.0, width=2.0)
    assert reflected_fraction(right, x_split=-5.0) < 1e-12
    assert reflected_fraction(centered, x_split=0.0) == pytest.approx(0.5, abs=0.03)
    with pytest.raises(DiagnosticsError):
        reflected_fraction(centered, x_split=100.0)


def test_reflected_fraction_of_exactly_symmetric_state(small_grid):
    # samples mirrored about the split, so left and right halves carry equal weight
    x = small_grid.x + small_grid.dx / 2
    state = WaveFunction(small_grid, np.exp(-x ** 2 / 25))
    split = small_grid.x[small_grid.n // 2]
    assert reflected_fraction(state, x_split=split) == pytest.approx(0.5, abs=1e-12)


def test_free_reference_matches_times(centered):
    times = np.array([0.0, 2.0, 6.25])
    ref = free_reference(centered, times)
    assert len(ref) == 3
    assert width(ref.state(2)) == pytest.approx(2.5 * np.sqrt(2), rel=1e-8)


def test_compute_diagnostics_assembles_aligned_series(centered):
    times = np.linspace(0.0, 4.0, 5)
    traj = free_reference(centered, times)
    record = compute_diagnostics(traj, reference=traj, x_split=0.0, include_intensity=True)
    assert record.norm == pytest.approx(np.ones(5), abs=1e-12)
    np.testing.assert_allclose(record.invisibility_error, 0.0)
    assert record.intensity_map.shape == (5, centered.grid.n)
    frame = record.to_frame()
    assert list(frame.columns) == ["time", "norm", "width", "invisibility_error", "reflected_fraction"]
    assert len(frame) == 5


def test_compute_diagnostics_rejects_misaligned_reference(centered):
    traj = free_reference(centered, np.array([0.0, 1.0, 2.0]))
    other = free_reference(centered, np.array([0.0, 1.0]))
    with pytest.raises(DiagnosticsError):
        compute_diagnostics(traj, reference=other)


def test_record_validates_alignment():
    with pytest.raises(DiagnosticsError):
        DiagnosticsRecord(times=np.arange(3.0), norm=np.ones(3), width=np.ones(2))


def test_intensity_frame_has_x_header(small_grid, centered):
    traj = free_reference(centered, np.array([0.0, 1.0]))
    frame = intensity_frame(traj)
    assert frame.columns[0] == "time"
    np.testing.assert_allclose(np.asarray(frame.columns[1:], dtype=float), small_grid.x)
    assert frame.shape == (2, small_grid.n + 1)


def test_cycle_average_of_pure_oscillation():
    period = 2.0
    times = np.linspace(0.0, 10.0, 1001)
    values = 3.0 + np.sin(2 * np.pi * times / period)
    averaged = cycle_average(times, values, period)
    assert np.isnan(averaged[0])
    assert np.isnan(averaged[np.searchsorted(times, 1.5)])
    np.testing.assert_allclose(averaged[times >= period], 3.0, atol=1e-4)


def test_oscillation_amplitude():
    assert oscillation_amplitude(np.array([0.9, 1.1, 1.0])) == pytest.approx(0.2)
    assert oscillation_amplitude(np.zeros(4)) == 0.0
