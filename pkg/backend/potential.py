"""Bound potentials V(x) and the averaged effective potential V_eff = (dV/dx)^2 <g^2>."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union
import logging

import numpy as np
import pandas as pd

from exceptions import PotentialError
from grid import SpatialGrid, spectral_derivative
from modulation import ModulationSpec, mean_square_antiderivative

logger = logging.getLogger(__name__)

# fraction of the grid (per side) that must hold a decayed sampled potential
EDGE_FRACTION = 0.05
EDGE_DECAY = 1e-10


@dataclass(frozen=True)
class GaussianPotential:
    v0: float
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise PotentialError(f"beta must be positive, got {self.beta}")

    def at(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.v0 * np.exp(-self.beta * x ** 2)

    def sample(self, grid: SpatialGrid) -> np.ndarray:
        return self.at(grid.x)

    def derivative(self, grid: SpatialGrid) -> np.ndarray:
        x = grid.x
        return -2 * self.beta * x * self.at(x)

    def support_radius(self, decay: float = 1e-15) -> float:
        """|x| beyond which V < decay * |v0|."""
        return float(np.sqrt(np.log(1 / decay) / self.beta))


@dataclass(frozen=True)
class SampledPotential:
    grid: SpatialGrid
    values: np.ndarray = field(compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.n,):
            raise PotentialError(f"expected {self.grid.n} potential samples, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise PotentialError("sampled potential contains non-finite values")
        peak = np.abs(values).max()
        edge = max(1, int(np.ceil(EDGE_FRACTION * self.grid.n)))
        tails = np.concatenate([values[:edge], values[-edge:]])
        if peak > 0 and np.abs(tails).max() >= EDGE_DECAY * peak:
            raise PotentialError(
                "sampled potential does not decay at the grid edges "
                f"(|V| must fall below {EDGE_DECAY:g} x max in the outer {EDGE_FRACTION:.0%} per side)"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def sample(self, grid: SpatialGrid) -> np.ndarray:
        if grid != self.grid:
            raise PotentialError("sampled potential lives on a different grid; no interpolation is done")
        return self.values

    def derivative(self, grid: SpatialGrid) -> np.ndarray:
        return spectral_derivative(self.sample(grid), grid, order=1)


PotentialSpec = Union[GaussianPotential, SampledPotential]


@dataclass(frozen=True)
class EffectiveField:
    grid: SpatialGrid
    values: np.ndarray = field(compare=False)
    scale: complex = 0j

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != (self.grid.n,):
            raise PotentialError(f"expected {self.grid.n} effective-potential samples")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def load_sampled_potential(path: Union[str, Path]) -> SampledPotential:
    """Read a CSV with columns x,value on a uniform periodic grid."""
    frame = pd.read_csv(path)
    missing = {"x", "value"} - set(frame.columns)
    if missing:
        raise PotentialError(f"{path}: missing column(s) {sorted(missing)}")

    x = frame["x"].to_numpy(dtype=np.float64)
    if x.size < 2:
        raise PotentialError(f"{path}: need at least two rows")
    steps = np.diff(x)
    dx = steps[0]
    if dx <= 0 or not np.allclose(steps, dx, rtol=1e-9, atol=0):
        raise PotentialError(f"{path}: x column is not uniformly increasing")

    grid = SpatialGrid(float(x[0]), float(x[0] + x.size * dx), int(x.size))
    logger.info(f"Loaded sampled potential from {path}: n={grid.n}, dx={grid.dx:.4g}")
    return SampledPotential(grid, frame["value"].to_numpy(dtype=np.float64))


def eval_potential(spec: PotentialSpec, x: float) -> float:
    if isinstance(spec, GaussianPotential):
        return float(spec.at(x))
    return float(spec.values[spec.grid.index_of(x)])


def effective_potential(spec: PotentialSpec, grid: SpatialGrid, mod: ModulationSpec) -> EffectiveField:
    scale = mean_square_antiderivative(mod)
    if scale == 0:
        return EffectiveField(grid, np.zeros(grid.n, dtype=np.complex128), 0j)
    slope = spec.derivative(grid)
    return EffectiveField(grid, slope ** 2 * scale, scale)


def effective_potential_gaussian_analytic(v0: float, beta: float, omega: float, x):
    """Closed form of V_eff for V0 exp(-beta x^2) under f = cos(omega t)."""
    if not omega > 0 or not beta > 0:
        raise PotentialError("omega and beta must be positive")
    x = np.asarray(x, dtype=np.float64)
    return (2 * v0 ** 2 * beta ** 2 / omega ** 2 * x ** 2 * np.exp(-2 * beta * x ** 2))[()]


def effective_barrier_height(v0: float, beta: float, omega: float) -> float:
    """Peak of the double-humped cos-drive V_eff, reached at x^2 = 1/(2 beta)."""
    return float(effective_potential_gaussian_analytic(v0, beta, omega, np.sqrt(0.5 / beta)))
