"""Split-step Fourier integration of i dpsi/dt = -psi'' + f(t) V(x) psi.

Each Strang step is half kinetic / potential / half kinetic. The potential
factor uses the exact integral of f over the step, so the step is
non-unitary whenever that integral has an imaginary part.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional
import logging
import math
import time

import numpy as np
from scipy import fft
from scipy.integrate import solve_ivp

from config import settings
from exceptions import PlanError
from grid import SpatialGrid, WaveFunction, spectral_derivative
from modulation import (
    ModulationSpec,
    antiderivative_zero_mean,
    eval_modulation,
    integrate_modulation,
)
from potential import EffectiveField, PotentialSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Absorber:
    ramp_width: float
    strength: float

    def __post_init__(self):
        if not self.ramp_width > 0 or not self.strength > 0:
            raise PlanError("absorber ramp_width and strength must be positive")

    def mask(self, grid: SpatialGrid, dt: float) -> np.ndarray:
        """Per-step damping factor, a cosine-ramped imaginary potential at both edges."""
        x = grid.x
        depth = np.maximum(
            np.clip(grid.x_min + self.ramp_width - x, 0, None),
            np.clip(x - (grid.x_max - self.ramp_width), 0, None),
        ) / self.ramp_width
        profile = 0.5 * (1 - np.cos(np.pi * np.clip(depth, 0, 1)))
        return np.exp(-self.strength * profile * dt)


@dataclass(frozen=True)
class PropagationPlan:
    dt: float
    total_time: float
    steps_per_record: int = 1
    absorber: Optional[Absorber] = None

    def __post_init__(self):
        if not self.dt > 0 or not self.total_time > 0:
            raise PlanError("dt and total_time must be positive")
        if self.steps_per_record < 1:
            raise PlanError("steps_per_record must be a positive integer")
        steps = round(self.total_time / self.dt)
        if steps < 1 or abs(steps * self.dt - self.total_time) > 1e-9 * self.total_time:
            raise PlanError(
                f"total_time / dt = {self.total_time / self.dt:.6f} is not an integer"
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.total_time / self.dt))

    @classmethod
    def for_modulation(
        cls,
        mod: ModulationSpec,
        total_time: float,
        dt: Optional[float] = None,
        steps_per_record: Optional[int] = None,
        record_interval: Optional[float] = None,
        absorber: Optional[Absorber] = None,
    ) -> "PropagationPlan":
        """Plan with dt defaulted from the fastest tone and snapped to divide total_time."""
        if dt is None:
            if mod.max_frequency > 0:
                dt = (2 * np.pi / mod.max_frequency) / settings.STEPS_PER_PERIOD
            else:
                dt = total_time / (settings.DEFAULT_RECORD_COUNT * 8)
        n_steps = max(1, math.ceil(total_time / dt - 1e-9))
        dt = total_time / n_steps

        if steps_per_record is None:
            interval = record_interval or total_time / settings.DEFAULT_RECORD_COUNT
            steps_per_record = max(1, int(round(interval / dt)))
        return cls(dt, total_time, steps_per_record, absorber)

    def check_resolves(self, mod: ModulationSpec) -> None:
        if mod.max_frequency == 0:
            return
        limit = (2 * np.pi / mod.max_frequency) / settings.MIN_STEPS_PER_PERIOD
        if self.dt > limit * (1 + 1e-12):
            raise PlanError(
                f"dt={self.dt:.4g} does not resolve the fastest tone "
                f"(|nu|={mod.max_frequency:g}); need dt <= {limit:.4g}"
            )


@dataclass
class Trajectory:
    grid: SpatialGrid
    times: np.ndarray
    snapshots: np.ndarray
    runaway_gain: bool = False
    flagged_times: List[float] = field(default_factory=list)
    completed: bool = True

    def __post_init__(self):
        if len(self.times) != len(self.snapshots):
            raise PlanError("times and snapshots are misaligned")
        if np.any(np.diff(self.times) <= 0):
            raise PlanError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def state(self, index: int) -> WaveFunction:
        return WaveFunction(self.grid, self.snapshots[index], float(self.times[index]))

    @property
    def final_state(self) -> WaveFunction:
        return self.state(-1)

    @property
    def metadata(self) -> dict:
        return {
            "records": len(self),
            "runaway_gain": self.runaway_gain,
            "flagged_times": list(self.flagged_times),
            "completed": self.completed,
        }


def _kinetic_phase(grid: SpatialGrid, t: float) -> np.ndarray:
    return np.exp(-1j * grid.k ** 2 * t)


def _split_step(
    state: WaveFunction,
    plan: PropagationPlan,
    potential_factor: Callable[[float, float], np.ndarray],
    gain_threshold: float,
) -> Trajectory:
    grid = state.grid
    half_kick = _kinetic_phase(grid, plan.dt / 2)
    damping = plan.absorber.mask(grid, plan.dt) if plan.absorber else None

    psi = np.array(state.values)
    initial_peak = np.abs(psi).max()
    times = [state.time]
    snapshots = [psi.copy()]
    flagged: List[float] = []
    completed = True

    start = time.time()
    for step in range(1, plan.n_steps + 1):
        t0 = state.time + (step - 1) * plan.dt
        t1 = state.time + step * plan.dt
        psi = fft.ifft(half_kick * fft.fft(psi))
        psi *= potential_factor(t0, t1)
        psi = fft.ifft(half_kick * fft.fft(psi))
        if damping is not None:
            psi *= damping

        if not np.all(np.isfinite(psi)):
            logger.error(f"Non-finite field at t={t1:.4f}; stopping propagation")
            flagged.append(t1)
            completed = False
            break

        if step % plan.steps_per_record == 0 or step == plan.n_steps:
            peak = np.abs(psi).max()
            if initial_peak > 0 and peak > gain_threshold * initial_peak:
                flagged.append(t1)
            times.append(t1)
            snapshots.append(psi.copy())

    elapsed = (time.time() - start) * 1000
    logger.info(f"Propagated {plan.n_steps} steps on n={grid.n} in {elapsed:.2f}ms")
    if flagged:
        logger.warning(f"Runaway gain flagged at {len(flagged)} record(s), first t={flagged[0]:.4f}")

    return Trajectory(
        grid=grid,
        times=np.array(times),
        snapshots=np.array(snapshots),
        runaway_gain=bool(flagged),
        flagged_times=flagged,
        completed=completed,
    )


def propagate(
    state: WaveFunction,
    pot: PotentialSpec,
    mod: ModulationSpec,
    plan: PropagationPlan,
    gain_threshold: Optional[float] = None,
) -> Trajectory:
    plan.check_resolves(mod)
    gain_threshold = gain_threshold or settings.RUNAWAY_GAIN_THRESHOLD
    v = pot.sample(state.grid)

    def potential_factor(t0: float, t1: float) -> np.ndarray:
        return np.exp(-1j * v * integrate_modulation(mod, t0, t1))

    return _split_step(state, plan, potential_factor, gain_threshold)


def effective_propagate(
    state: WaveFunction,
    eff: EffectiveField,
    plan: PropagationPlan,
    gain_threshold: Optional[float] = None,
) -> Trajectory:
    if eff.grid != state.grid:
        raise PlanError("effective field and state live on different grids")
    gain_threshold = gain_threshold or settings.RUNAWAY_GAIN_THRESHOLD
    factor = np.exp(-1j * eff.values * plan.dt)
    return _split_step(state, plan, lambda t0, t1: factor, gain_threshold)


def free_propagate(state: WaveFunction, t: float) -> WaveFunction:
    coefficients = fft.fft(state.values) * _kinetic_phase(state.grid, t)
    return state.with_values(fft.ifft(coefficients), state.time + t)


def gauge_transform(
    state: WaveFunction,
    pot: PotentialSpec,
    mod: ModulationSpec,
    inverse: bool = False,
) -> WaveFunction:
    """psi -> phi = psi exp(+i V g(t)); inverse=True maps phi back to psi."""
    g = complex(eval_modulation(antiderivative_zero_mean(mod), state.time))
    sign = -1 if inverse else 1
    v = pot.sample(state.grid)
    return state.with_values(state.values * np.exp(sign * 1j * v * g))


def integrate_gauge_frame(
    phi: WaveFunction,
    pot: PotentialSpec,
    mod: ModulationSpec,
    t_final: float,
    rtol: float = 1e-11,
    atol: float = 1e-13,
) -> WaveFunction:
    """Reference integrator for i dphi/dt = -(d/dx - i V' g(t))^2 phi.

    Adaptive high-order Runge-Kutta on spectral derivatives. Intended for
    small grids; it is independent of the split-step machinery.
    """
    grid = phi.grid
    v = pot.sample(grid)
    dv = pot.derivative(grid)
    d2v = spectral_derivative(dv, grid, order=1)
    g_spec = antiderivative_zero_mean(mod)

    def rhs(t, y):
        g = eval_modulation(g_spec, t)
        a = dv * g
        da = d2v * g
        y_x = spectral_derivative(y, grid, order=1)
        y_xx = spectral_derivative(y, grid, order=2)
        # (d/dx - iA)^2 y = y'' - 2iA y' - iA' y - A^2 y
        return 1j * (y_xx - 2j * a * y_x - 1j * da * y - a ** 2 * y)

    start = time.time()
    solution = solve_ivp(
        rhs,
        (phi.time, phi.time + t_final),
        np.array(phi.values),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not solution.success:
        raise PlanError(f"gauge-frame reference integration failed: {solution.message}")
    logger.info(f"Gauge-frame reference took {(time.time() - start) * 1000:.2f}ms "
                f"({solution.nfev} evaluations)")
    return phi.with_values(solution.y[:, -1], phi.time + t_final)
