"""Observables over trajectories: norm, width, intensity map, reflection, invisibility."""
from dataclasses import dataclass
from typing import Optional
import logging

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from exceptions import DiagnosticsError
from grid import WaveFunction, inner_norm
from propagator import Trajectory, free_propagate

logger = logging.getLogger(__name__)


@dataclass
class DiagnosticsRecord:
    times: np.ndarray
    norm: np.ndarray
    width: np.ndarray
    invisibility_error: Optional[np.ndarray] = None
    reflected_fraction: Optional[np.ndarray] = None
    intensity_map: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("norm", "width", "invisibility_error", "reflected_fraction"):
            series = getattr(self, name)
            if series is not None and len(series) != len(self.times):
                raise DiagnosticsError(f"{name} is not aligned with times")

    def to_frame(self) -> pd.DataFrame:
        columns = {"time": self.times, "norm": self.norm, "width": self.width}
        if self.invisibility_error is not None:
            columns["invisibility_error"] = self.invisibility_error
        if self.reflected_fraction is not None:
            columns["reflected_fraction"] = self.reflected_fraction
        return pd.DataFrame(columns)


def width(state: WaveFunction) -> float:
    """sqrt(<x^2>) about x = 0 (not about the centroid)."""
    weight = state.intensity
    total = weight.sum()
    if total <= 0:
        raise DiagnosticsError("width of a zero-norm state is undefined")
    return float(np.sqrt(np.sum(state.grid.x ** 2 * weight) / total))


def normalized_intensity(traj: Trajectory) -> np.ndarray:
    intensity = np.abs(traj.snapshots) ** 2
    peaks = intensity.max(axis=1)
    if np.any(peaks <= 0):
        raise DiagnosticsError("cannot normalize an all-zero snapshot")
    return intensity / peaks[:, None]


def invisibility_error(state: WaveFunction, reference: WaveFunction) -> float:
    """Relative L2 distance of the full complex fields."""
    if state.grid != reference.grid:
        raise DiagnosticsError("state and reference live on different grids")
    if not np.isclose(state.time, reference.time, rtol=1e-12, atol=1e-12):
        raise DiagnosticsError(f"time stamps differ: {state.time} vs {reference.time}")
    scale = np.linalg.norm(reference.values)
    if scale == 0:
        raise DiagnosticsError("reference field is identically zero")
    return float(np.linalg.norm(state.values - reference.values) / scale)


def reflected_fraction(state: WaveFunction, x_split: float) -> float:
    grid = state.grid
    if not grid.contains(x_split):
        raise DiagnosticsError(f"x_split={x_split} lies outside the grid")
    norm = inner_norm(state)
    if norm == 0:
        return 0.0
    left = grid.x < x_split
    return float(np.sum(state.intensity[left]) * grid.dx / norm)


def norm_history(traj: Trajectory) -> np.ndarray:
    return np.sum(np.abs(traj.snapshots) ** 2, axis=1) * traj.grid.dx


def width_history(traj: Trajectory) -> np.ndarray:
    return np.array([width(traj.state(i)) for i in range(len(traj))])


def free_reference(initial: WaveFunction, times: np.ndarray) -> Trajectory:
    """Exact free evolution of `initial` sampled at `times`."""
    snapshots = [free_propagate(initial, t - initial.time).values for t in times]
    return Trajectory(initial.grid, np.asarray(times, dtype=np.float64), np.array(snapshots))


def cycle_average(times: np.ndarray, values: np.ndarray, period: float) -> np.ndarray:
    """Average of `values` over the trailing window [t - period, t] (trapezoid rule).

    Entries whose window reaches before the first record are NaN.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    averaged = np.full(values.shape, np.nan)
    for i, t in enumerate(times):
        if t - period < times[0] - 1e-12:
            continue
        window = times >= t - period - 1e-12
        window[i + 1:] = False
        tw, vw = times[window], values[window]
        span = tw[-1] - tw[0]
        if span <= 0:
            continue
        averaged[i] = trapezoid(vw, tw) / span
    return averaged


def oscillation_amplitude(values: np.ndarray) -> float:
    """Peak-to-peak excursion relative to the mean."""
    values = np.asarray(values, dtype=np.float64)
    mean = values.mean()
    if mean == 0:
        return 0.0
    return float((values.max() - values.min()) / abs(mean))


def compute_diagnostics(
    traj: Trajectory,
    reference: Optional[Trajectory] = None,
    x_split: Optional[float] = None,
    include_intensity: bool = False,
) -> DiagnosticsRecord:
    record = DiagnosticsRecord(
        times=np.array(traj.times),
        norm=norm_history(traj),
        width=width_history(traj),
    )
    if reference is not None:
        if len(reference) != len(traj) or not np.allclose(reference.times, traj.times, rtol=1e-12):
            raise DiagnosticsError("reference trajectory is not aligned with the run")
        record.invisibility_error = np.array([
            invisibility_error(traj.state(i), reference.state(i)) for i in range(len(traj))
        ])
    if x_split is not None:
        record.reflected_fraction = np.array([
            reflected_fraction(traj.state(i), x_split) for i in range(len(traj))
        ])
    if include_intensity:
        record.intensity_map = normalized_intensity(traj)
    return record


def intensity_frame(traj: Trajectory) -> pd.DataFrame:
    """Normalized intensity map: one row per time, one column per x sample."""
    frame = pd.DataFrame(normalized_intensity(traj), columns=traj.grid.x)
    frame.insert(0, "time", traj.times)
    return frame
