"""Uniform periodic 1D grid, its wavenumber grid, and the wave field container."""
from dataclasses import dataclass, field
from functools import cached_property
import logging

import numpy as np
from scipy import fft

from exceptions import GridError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpatialGrid:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise GridError(f"grid size must be a power of two >= 8, got {self.n}")
        if not np.isfinite(self.x_min) or not np.isfinite(self.x_max) or self.x_max <= self.x_min:
            raise GridError(f"invalid grid extent [{self.x_min}, {self.x_max})")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @cached_property
    def x(self) -> np.ndarray:
        # periodic: x_max itself is not a sample
        values = self.x_min + self.dx * np.arange(self.n)
        values.setflags(write=False)
        return values

    @cached_property
    def k(self) -> np.ndarray:
        values = 2 * np.pi * fft.fftfreq(self.n, d=self.dx)
        # signed index range is (-n/2, n/2]
        values[self.n // 2] = np.pi / self.dx
        values.setflags(write=False)
        return values

    def contains(self, position: float) -> bool:
        return self.x_min <= position < self.x_max

    def index_of(self, position: float, atol: float = 1e-9) -> int:
        """Index of the sample at `position`; raises if it is not a grid point."""
        offset = (position - self.x_min) / self.dx
        index = int(round(offset))
        if abs(offset - index) > atol or not 0 <= index < self.n:
            raise GridError(f"x={position} is not a grid point")
        return index


@dataclass(frozen=True)
class WaveFunction:
    grid: SpatialGrid
    values: np.ndarray = field(compare=False)
    time: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != (self.grid.n,):
            raise GridError(f"expected {self.grid.n} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError("wave function contains non-finite amplitudes")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray, time: float = None) -> "WaveFunction":
        return WaveFunction(self.grid, values, self.time if time is None else time)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2


def to_momentum(values: np.ndarray) -> np.ndarray:
    """Unitary forward transform (norm-preserving in the discrete sense)."""
    return fft.fft(values, norm="ortho")


def from_momentum(coefficients: np.ndarray) -> np.ndarray:
    return fft.ifft(coefficients, norm="ortho")


def spectral_derivative(values: np.ndarray, grid: SpatialGrid, order: int = 1) -> np.ndarray:
    if order < 1:
        raise GridError("derivative order must be positive")
    multiplier = (1j * grid.k) ** order
    if order % 2:
        # the Nyquist mode has no odd-derivative partner
        multiplier[grid.n // 2] = 0.0
    result = fft.ifft(multiplier * fft.fft(values))
    return result.real if np.isrealobj(values) else result


def make_gaussian_packet(
    grid: SpatialGrid,
    center: float,
    width: float,
    carrier: float = 0.0,
    normalize: bool = True,
) -> WaveFunction:
    """Gaussian packet A exp(-(x - center)^2 / width^2 + i carrier x) at time 0."""
    if not width > 0:
        raise GridError(f"packet width must be positive, got {width}")

    # 6 standard deviations of |psi|
    half_support = 6 * width / np.sqrt(2)
    if center - half_support < grid.x_min or center + half_support > grid.x_max:
        raise GridError(
            f"packet support [{center - half_support:.3g}, {center + half_support:.3g}] "
            f"exceeds the grid [{grid.x_min}, {grid.x_max}); enlarge the domain"
        )

    x = grid.x
    values = np.exp(-((x - center) ** 2) / width ** 2 + 1j * carrier * x)
    if normalize:
        values /= np.sqrt(np.sum(np.abs(values) ** 2) * grid.dx)
    return WaveFunction(grid, values, 0.0)


def inner_norm(state: WaveFunction) -> float:
    return float(np.sum(np.abs(state.values) ** 2) * state.grid.dx)
