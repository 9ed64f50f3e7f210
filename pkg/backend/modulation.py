"""The ac amplitude f(t) as a finite sum of complex tones.

f(t) = sum_j a_j exp(i nu_j t). Spectral convention: F(w) = (1/2pi) int f(t) exp(i w t) dt,
so a tone exp(+i nu t) sits at w = -nu. A modulation whose tones all have nu >= Omega_0 > 0
is "positive one-sided" and is the invisible case.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Tuple, Union
import logging

import numpy as np

from config import settings
from exceptions import ModulationError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# relative tolerance for treating two tone frequencies as equal
FREQUENCY_RTOL = 1e-12


@dataclass(frozen=True)
class Tone:
    amplitude: complex
    frequency: float


@dataclass(frozen=True)
class ModulationSpec:
    tones: Tuple[Tone, ...] = ()

    def __post_init__(self):
        merged = {}
        order = []
        for tone in self.tones:
            amplitude = complex(tone.amplitude)
            frequency = float(tone.frequency)
            if not np.isfinite(frequency) or not np.isfinite(amplitude):
                raise ModulationError(f"non-finite tone {tone}")
            if frequency == 0.0:
                raise ModulationError("f(t) must have zero mean: tone frequency 0 is not allowed")
            key = next(
                (f for f in order if abs(f - frequency) <= FREQUENCY_RTOL * max(abs(f), abs(frequency))),
                None,
            )
            if key is None:
                order.append(frequency)
                merged[frequency] = amplitude
            else:
                merged[key] += amplitude
        canonical = tuple(
            Tone(merged[f], f) for f in sorted(order) if merged[f] != 0
        )
        object.__setattr__(self, "tones", canonical)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[complex, float]]) -> "ModulationSpec":
        return cls(tuple(Tone(complex(a), float(nu)) for a, nu in pairs))

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([t.amplitude for t in self.tones], dtype=np.complex128)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([t.frequency for t in self.tones], dtype=np.float64)

    @property
    def max_frequency(self) -> float:
        """Largest |nu|; 0 for the empty modulation."""
        return float(np.max(np.abs(self.frequencies))) if self.tones else 0.0

    @property
    def is_empty(self) -> bool:
        return not self.tones

    def __call__(self, t: ArrayLike):
        return eval_modulation(self, t)


# -----------------------------------------------------------------------------
# Named modulations
# -----------------------------------------------------------------------------

def empty() -> ModulationSpec:
    return ModulationSpec()


def cosine(omega: float, amplitude: float = 1.0) -> ModulationSpec:
    """amplitude * cos(omega t)."""
    return ModulationSpec.from_pairs([(amplitude / 2, omega), (amplitude / 2, -omega)])


def one_sided(omega: float, amplitude: complex = 0.5) -> ModulationSpec:
    """amplitude * exp(i omega t)."""
    return ModulationSpec.from_pairs([(amplitude, omega)])


def one_sided_negative(omega: float, amplitude: complex = 0.5) -> ModulationSpec:
    """amplitude * exp(-i omega t)."""
    return ModulationSpec.from_pairs([(amplitude, -omega)])


def two_tone(omega: float, amplitude: complex = 0.25) -> ModulationSpec:
    """Quasi-periodic amplitude * [exp(i omega t) + exp(i sqrt(2) omega t)]."""
    return ModulationSpec.from_pairs([(amplitude, omega), (amplitude, np.sqrt(2) * omega)])


PRESETS = {
    "cos": cosine,
    "one_sided": one_sided,
    "two_tone": two_tone,
    "one_sided_negative": one_sided_negative,
}


def from_preset(name: str, omega: float, amplitude: complex = None) -> ModulationSpec:
    if name == "none":
        return empty()
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ModulationError(f"Unknown modulation preset: {name}")
    return factory(omega) if amplitude is None else factory(omega, amplitude)


def conjugate_reflected(spec: ModulationSpec) -> ModulationSpec:
    """Spec of f*(t): each tone (a, nu) becomes (conj a, -nu)."""
    return ModulationSpec.from_pairs((np.conj(t.amplitude), -t.frequency) for t in spec.tones)


# -----------------------------------------------------------------------------
# Operations
# -----------------------------------------------------------------------------

def eval_modulation(spec: ModulationSpec, t: ArrayLike):
    t = np.asarray(t, dtype=np.float64)
    if spec.is_empty:
        return np.zeros_like(t, dtype=np.complex128)[()]
    phases = np.exp(1j * np.multiply.outer(t, spec.frequencies))
    return (phases @ spec.amplitudes)[()]


class Sidedness(str, Enum):
    POSITIVE_ONE_SIDED = "PositiveOneSided"
    NEGATIVE_ONE_SIDED = "NegativeOneSided"
    TWO_SIDED = "TwoSided"
    ZERO = "Zero"


@dataclass(frozen=True)
class SidednessReport:
    classification: Sidedness
    omega0: float
    tolerance_used: float

    @property
    def is_one_sided(self) -> bool:
        return self.classification in (Sidedness.POSITIVE_ONE_SIDED, Sidedness.NEGATIVE_ONE_SIDED)


def classify_sidedness(spec: ModulationSpec, rel_tol: float = None) -> SidednessReport:
    rel_tol = settings.SIDEDNESS_REL_TOL if rel_tol is None else rel_tol
    if not 0 < rel_tol < 1:
        raise ModulationError(f"rel_tol must lie in (0, 1), got {rel_tol}")

    if spec.is_empty:
        return SidednessReport(Sidedness.ZERO, 0.0, rel_tol)

    magnitudes = np.abs(spec.amplitudes)
    surviving = spec.frequencies[magnitudes >= rel_tol * magnitudes.max()]
    if surviving.size == 0:
        return SidednessReport(Sidedness.ZERO, 0.0, rel_tol)
    if np.all(surviving > 0):
        return SidednessReport(Sidedness.POSITIVE_ONE_SIDED, float(surviving.min()), rel_tol)
    if np.all(surviving < 0):
        return SidednessReport(Sidedness.NEGATIVE_ONE_SIDED, float(-surviving.max()), rel_tol)
    return SidednessReport(Sidedness.TWO_SIDED, 0.0, rel_tol)


def antiderivative_zero_mean(spec: ModulationSpec) -> ModulationSpec:
    return ModulationSpec.from_pairs((t.amplitude / (1j * t.frequency), t.frequency) for t in spec.tones)


def mean_square_antiderivative(spec: ModulationSpec) -> complex:
    """Long-time average of g(t)^2, g the zero-mean antiderivative of f.

    Only tone pairs whose frequencies cancel survive the average, so any
    one-sided spectrum gives exactly zero.
    """
    if spec.is_empty:
        return 0j
    g = antiderivative_zero_mean(spec)
    nu = g.frequencies
    a = g.amplitudes
    scale = np.abs(nu).max()
    resonant = np.abs(np.add.outer(nu, nu)) <= FREQUENCY_RTOL * scale
    if not resonant.any():
        return 0j
    return complex(np.sum(np.multiply.outer(a, a)[resonant]))


def integrate_modulation(spec: ModulationSpec, t0: float, t1: float) -> complex:
    """Exact integral of f over [t0, t1]."""
    if t1 < t0:
        raise ModulationError(f"integration bounds reversed: t1={t1} < t0={t0}")
    if spec.is_empty:
        return 0j
    nu = spec.frequencies
    # exp(i nu t1) - exp(i nu t0) = 2i exp(i nu tm) sin(nu h), h = (t1 - t0)/2
    tm = 0.5 * (t0 + t1)
    h = 0.5 * (t1 - t0)
    terms = spec.amplitudes * np.exp(1j * nu * tm) * 2 * np.sin(nu * h) / nu
    return complex(terms.sum())


def commensurate_base(spec: ModulationSpec, max_denominator: int = 64, rtol: float = 1e-9):
    """Base frequency w and integer harmonics n_j with nu_j = n_j * w.

    Raises ModulationError for incommensurate (quasi-periodic) tone sets.
    """
    if spec.is_empty:
        raise ModulationError("the empty modulation has no base frequency")
    nu = spec.frequencies
    smallest = np.abs(nu).min()
    for q in range(1, max_denominator + 1):
        base = smallest / q
        ratios = nu / base
        harmonics = np.rint(ratios)
        if np.all(np.abs(ratios - harmonics) <= rtol * np.maximum(1.0, np.abs(ratios))):
            return float(base), harmonics.astype(int)
    raise ModulationError(
        f"tone frequencies {nu.tolist()} are not integer multiples of a common base frequency"
    )
