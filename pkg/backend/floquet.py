"""Stationary coupled-channel (Floquet sideband) scattering off f(t) V(x).

A plane wave exp(i k0 x - i omega0 t) hits the driven potential. The scattered
field is expanded over channels omega_m = omega0 + m w (w the base frequency
of a periodic f), giving one second-order ODE per channel:

    Theta_p'' + omega_p Theta_p - V(x) sum_n f_n Theta_{p+n} = V(x) exp(i k0 x) f_{-p}

Channels with omega_p > 0 propagate (k = sqrt(omega)); channels with
omega_p < 0 are evanescent (k = i sqrt(|omega|)). The system is discretized
with the matrix Numerov scheme on a uniform window and closed by discrete
outgoing-wave conditions, then solved as one sparse block-tridiagonal system.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import logging
import time

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from config import settings
from exceptions import (
    FloquetConvergenceError,
    FloquetError,
    FloquetSingularError,
    ModulationError,
)
from modulation import ModulationSpec, commensurate_base
from potential import EDGE_DECAY, GaussianPotential, PotentialSpec, SampledPotential

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Channel:
    m: int
    omega: float
    k: complex

    @property
    def propagating(self) -> bool:
        return self.omega > 0


@dataclass(frozen=True)
class ChannelSet:
    omega0: float
    base_frequency: float
    m_min: int
    m_max: int
    channels: Tuple[Channel, ...]
    coupling: np.ndarray = field(compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.channels)

    def index(self, m: int) -> int:
        if not self.m_min <= m <= self.m_max:
            raise FloquetError(f"sideband {m} outside [{self.m_min}, {self.m_max}]")
        return m - self.m_min

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.m_min, self.m_max + 1)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([c.omega for c in self.channels])

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.array([c.k for c in self.channels])

    @property
    def propagating(self) -> np.ndarray:
        return self.omegas > 0


def channel_wavenumber(omega: float) -> complex:
    if omega > 0:
        return complex(np.sqrt(omega), 0.0)
    return complex(0.0, np.sqrt(-omega))


def _ladder_order(strength: float, tol: float) -> int:
    """Smallest m with strength^m / m! below tol."""
    m, term = 0, 1.0
    while term >= tol:
        m += 1
        term *= strength / m
    return m


def default_sideband_range(pot: PotentialSpec, mod: ModulationSpec) -> Tuple[int, int]:
    """Symmetric range wide enough for the sideband ladder to have died out.

    Near the potential the field carries the phase exp(-i V g(t)). The m-th
    rung of its Fourier ladder is bounded by c^m / m!, with c = max|V| times
    the larger one-sided sum of |a / nu|.
    """
    floor = settings.FLOQUET_MIN_SIDEBANDS
    if mod.is_empty:
        return 0, 0
    try:
        _, harmonics = commensurate_base(mod)
    except ModulationError as e:
        raise FloquetError(f"Floquet channels need a periodic modulation: {e}")
    weights = np.abs(mod.amplitudes / mod.frequencies)
    positive = mod.frequencies > 0
    strength = _potential_peak(pot) * max(weights[positive].sum(), weights[~positive].sum())
    order = _ladder_order(strength, settings.FLOQUET_TRUNCATION_TOL * 1e-3)
    half = max(floor, int(np.max(np.abs(harmonics))) * (order + settings.FLOQUET_SIDEBAND_MARGIN))
    return -half, half


def _potential_peak(pot: PotentialSpec) -> float:
    if isinstance(pot, GaussianPotential):
        return abs(pot.v0)
    return float(np.abs(pot.values).max())


def build_channels(
    omega0: float,
    mod: ModulationSpec,
    m_min: Optional[int] = None,
    m_max: Optional[int] = None,
) -> ChannelSet:
    if not omega0 > 0:
        raise FloquetError(f"incident frequency must be positive, got {omega0}")

    if mod.is_empty:
        # nothing couples: the incident channel alone
        return ChannelSet(
            omega0, 0.0, 0, 0, (Channel(0, omega0, channel_wavenumber(omega0)),),
            np.zeros((1, 1), dtype=np.complex128),
        )

    try:
        base, harmonics = commensurate_base(mod)
    except ModulationError as e:
        raise FloquetError(f"Floquet channels need a periodic modulation: {e}")

    m_min = -settings.FLOQUET_MIN_SIDEBANDS if m_min is None else m_min
    m_max = settings.FLOQUET_MIN_SIDEBANDS if m_max is None else m_max
    if not m_min <= 0 <= m_max:
        raise FloquetError(f"sideband range [{m_min}, {m_max}] must contain 0")

    indices = np.arange(m_min, m_max + 1)
    omegas = omega0 + indices * base
    threshold = np.abs(omegas) <= 1e-12 * max(omega0, base)
    if threshold.any():
        raise FloquetError(
            f"sideband m={int(indices[threshold][0])} sits exactly at threshold (omega_m = 0)"
        )

    size = indices.size
    coupling = np.zeros((size, size), dtype=np.complex128)
    # channel p is fed by channel p + n through the tone a exp(i n w t)
    for amplitude, n in zip(mod.amplitudes, harmonics):
        for row, p in enumerate(indices):
            q = p + n
            if m_min <= q <= m_max:
                coupling[row, q - m_min] += amplitude

    channels = tuple(Channel(int(m), float(w), channel_wavenumber(w)) for m, w in zip(indices, omegas))
    return ChannelSet(omega0, float(base), int(m_min), int(m_max), channels, coupling)


@dataclass
class FloquetScatteringResult:
    channels: ChannelSet
    r: np.ndarray
    t: np.ndarray
    residual: float
    flux_balance: float
    flux_balance_continuum: float
    direction: int
    x: np.ndarray = field(repr=False)
    profiles: np.ndarray = field(repr=False)
    truncation_warning: bool = False
    max_sideband_kh: float = 0.0

    def channel_profile(self, m: int) -> np.ndarray:
        return self.profiles[self.channels.index(m)]

    def to_frame(self) -> pd.DataFrame:
        k = self.channels.wavenumbers
        return pd.DataFrame({
            "m": self.channels.indices,
            "omega_m": self.channels.omegas,
            "k_re": k.real,
            "k_im": k.imag,
            "r_re": self.r.real,
            "r_im": self.r.imag,
            "t_re": self.t.real,
            "t_im": self.t.imag,
            "propagating": self.channels.propagating,
        })

    @property
    def metadata(self) -> dict:
        return {
            "omega0": self.channels.omega0,
            "base_frequency": self.channels.base_frequency,
            "m_min": self.channels.m_min,
            "m_max": self.channels.m_max,
            "direction": self.direction,
            "residual": self.residual,
            "flux_balance": self.flux_balance,
            "flux_balance_continuum": self.flux_balance_continuum,
            "truncation_warning": self.truncation_warning,
            "n_x": int(self.x.size),
            "x_window": [float(self.x[0]), float(self.x[-1])],
        }

    @property
    def reflected_flux(self) -> float:
        """Incident flux carried back by all propagating sidebands."""
        prop = self.channels.propagating
        k = self.channels.wavenumbers.real
        zero = self.channels.index(0)
        return float(np.sum((np.abs(self.r) ** 2 * k / k[zero])[prop]))


def _window_nodes(pot: PotentialSpec, x_window: Optional[Sequence[float]], n_x: Optional[int]):
    if isinstance(pot, SampledPotential):
        if x_window is not None or n_x is not None:
            logger.info("Sampled potential: solving on its own grid, x_window/n_x ignored")
        nodes = np.array(pot.grid.x)
        return nodes, np.array(pot.values)

    n_x = n_x or settings.FLOQUET_N_X
    if x_window is None:
        half = settings.FLOQUET_WINDOW_DECAY / np.sqrt(pot.beta)
        x_window = (-half, half)
    left, right = float(x_window[0]), float(x_window[1])
    if not right > left or n_x < 16:
        raise FloquetError(f"invalid window [{left}, {right}] with n_x={n_x}")
    nodes = np.linspace(left, right, n_x)
    return nodes, pot.at(nodes)


def _numerov_wavenumbers(omegas: np.ndarray, h: float) -> np.ndarray:
    """Wavenumbers of free discrete plane waves under the Numerov recursion."""
    eps = h ** 2 * omegas / 12
    c = (1 - 5 * eps) / (1 + eps)
    k = np.empty(omegas.shape, dtype=np.complex128)
    prop = omegas > 0
    if np.any(np.abs(c[prop]) >= 1) or np.any(1 + eps <= 0):
        raise FloquetError("window spacing does not resolve the fastest sideband; increase n_x")
    k[prop] = np.arccos(c[prop]) / h
    k[~prop] = 1j * np.arccosh(c[~prop]) / h
    return k


def solve_floquet_scattering(
    pot: PotentialSpec,
    mod: ModulationSpec,
    omega0: float,
    channels: Optional[ChannelSet] = None,
    x_window: Optional[Sequence[float]] = None,
    n_x: Optional[int] = None,
    direction: int = 1,
) -> FloquetScatteringResult:
    if direction not in (1, -1):
        raise FloquetError("direction must be +1 (from the left) or -1 (from the right)")
    if channels is None:
        channels = build_channels(omega0, mod, *default_sideband_range(pot, mod))
    elif not np.isclose(channels.omega0, omega0, rtol=1e-14, atol=0):
        raise FloquetError("channel set was built for a different incident frequency")

    x, v = _window_nodes(pot, x_window, n_x)
    peak = np.abs(v).max()
    if peak > 0 and max(abs(v[0]), abs(v[-1])) >= EDGE_DECAY * peak:
        raise FloquetError(
            f"potential at the x_window edges is not below {EDGE_DECAY:g} x its peak; widen x_window"
        )

    n, size = x.size, len(channels)
    h = x[1] - x[0]
    omegas = channels.omegas
    k_num = _numerov_wavenumbers(omegas, h)
    max_kh = float(np.sqrt(np.abs(omegas).max()) * h)
    if max_kh > 0.6:
        logger.warning(f"Coarse sideband resolution: max k*h = {max_kh:.3f}")

    start = time.time()
    eps = h ** 2 * omegas / 12
    coupling = sp.csr_matrix(channels.coupling)
    upper = sp.diags(np.ones(n - 1), 1)
    lower = sp.diags(np.ones(n - 1), -1)
    v_diag = sp.diags(v)
    c12 = h ** 2 / 12

    free = (
        sp.kron(upper + lower, sp.diags(1 + eps))
        - 2 * sp.kron(sp.identity(n), sp.diags(1 - 5 * eps))
    )
    coupled = (
        c12 * sp.kron(upper @ v_diag + lower @ v_diag, coupling)
        + 10 * c12 * sp.kron(v_diag, coupling)
    )
    keep = np.ones(n * size)
    keep[:size] = 0
    keep[-size:] = 0
    keep = sp.diags(keep)
    coupled = (keep @ coupled).tocsr()
    interior = (keep @ free).tocsr() - coupled

    # outgoing ghost node: Theta_{-1} = exp(i k h) Theta_0 (and mirror at the right edge)
    edge_diag = (1 + eps) * np.exp(1j * k_num * h) - 2 * (1 - 5 * eps)
    rows = np.concatenate([np.arange(size), np.arange(size), (n - 1) * size + np.arange(size),
                           (n - 1) * size + np.arange(size)])
    cols = np.concatenate([np.arange(size), size + np.arange(size), (n - 1) * size + np.arange(size),
                           (n - 2) * size + np.arange(size)])
    data = np.concatenate([edge_diag, 1 + eps, edge_diag, 1 + eps])
    boundary = sp.coo_matrix((data, (rows, cols)), shape=(n * size, n * size))
    matrix = (interior + boundary).tocsc()

    incident = np.zeros((n, size), dtype=np.complex128)
    zero = channels.index(0)
    k0 = k_num[zero].real
    incident[:, zero] = np.exp(1j * direction * k0 * x)
    # the free recursion annihilates the discrete incident wave; only coupling sources it
    rhs = coupled @ incident.ravel()

    try:
        lu = splu(matrix)
        solution = lu.solve(rhs)
    except RuntimeError as e:
        raise FloquetSingularError(f"coupled-channel system is singular: {e}")
    if not np.all(np.isfinite(solution)):
        raise FloquetSingularError("coupled-channel solve produced non-finite amplitudes")

    defect = np.abs(matrix @ solution - rhs).max()
    scale = abs(matrix).sum(axis=1).max() * np.abs(solution).max() + np.abs(rhs).max()
    residual = float(defect / scale) if scale > 0 else 0.0
    if residual > settings.FLOQUET_RESIDUAL_TOL:
        raise FloquetConvergenceError(f"residual {residual:.3e} above tolerance", residual)

    profiles = solution.reshape(n, size).T
    elapsed = (time.time() - start) * 1000
    logger.info(f"Floquet solve: {size} channels x {n} nodes in {elapsed:.2f}ms, residual={residual:.2e}")

    r, t = _outgoing_amplitudes(profiles, x, k_num, omegas, direction)
    t[zero] += 1.0

    prop = omegas > 0
    weights = np.zeros(size)
    weights[prop] = ((1 + eps[prop]) ** 2 * np.sin(k_num[prop].real * h)) / (
        (1 + eps[zero]) ** 2 * np.sin(k0 * h)
    )
    flux = float(np.sum((np.abs(r) ** 2 + np.abs(t) ** 2) * weights))
    k_cont = channels.wavenumbers.real
    flux_continuum = float(np.sum(((np.abs(r) ** 2 + np.abs(t) ** 2) * k_cont / k_cont[zero])[prop]))

    edge_amplitude = max(np.abs(profiles[0]).max(), np.abs(profiles[-1]).max()) if size > 1 else 0.0
    truncated = bool(edge_amplitude > settings.FLOQUET_TRUNCATION_TOL)
    if truncated:
        logger.warning(
            f"Sideband truncation: edge channels carry |Theta| = {edge_amplitude:.2e}; "
            f"widen [{channels.m_min}, {channels.m_max}]"
        )

    return FloquetScatteringResult(
        channels=channels,
        r=r,
        t=t,
        residual=residual,
        flux_balance=flux,
        flux_balance_continuum=flux_continuum,
        direction=direction,
        x=x,
        profiles=profiles,
        truncation_warning=truncated,
        max_sideband_kh=max_kh,
    )


def _outgoing_amplitudes(profiles, x, k_num, omegas, direction):
    """Left/right outgoing amplitudes, mapped to (reflected, transmitted).

    Propagating amplitudes are phase-referenced to x = 0. Evanescent ones are
    the tail values at the window edge.
    """
    left = profiles[:, 0].copy()
    right = profiles[:, -1].copy()
    prop = omegas > 0
    left[prop] *= np.exp(1j * k_num[prop] * x[0])
    right[prop] *= np.exp(-1j * k_num[prop] * x[-1])
    if direction == 1:
        return left, right
    return right, left


@dataclass(frozen=True)
class InvisibilityReport:
    tolerance: float
    reflectionless: bool
    transmission_unit: bool
    no_sideband_transmission: bool
    max_reflection: float
    transmission_defect: float
    max_sideband_transmission: float
    propagating_closure: float
    evanescent_profile: Dict[int, float]

    @property
    def invisible(self) -> bool:
        return self.reflectionless and self.transmission_unit and self.no_sideband_transmission

    def as_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "invisible": self.invisible,
            "reflectionless": self.reflectionless,
            "transmission_unit": self.transmission_unit,
            "no_sideband_transmission": self.no_sideband_transmission,
            "max_reflection": self.max_reflection,
            "transmission_defect": self.transmission_defect,
            "max_sideband_transmission": self.max_sideband_transmission,
            "propagating_closure": self.propagating_closure,
            "evanescent_profile": {str(m): v for m, v in self.evanescent_profile.items()},
        }


def verify_invisibility(result: FloquetScatteringResult, tol: float = 1e-6) -> InvisibilityReport:
    channels = result.channels
    prop = channels.propagating
    zero = channels.index(0)
    sidebands = prop.copy()
    sidebands[zero] = False

    max_r = float(np.abs(result.r[prop]).max())
    defect = float(abs(result.t[zero] - 1))
    max_side = float(np.abs(result.t[sidebands]).max()) if sidebands.any() else 0.0
    peaks = np.abs(result.profiles).max(axis=1)
    closure = float(peaks[prop].max())
    evanescent = {int(m): float(p) for m, p, is_prop in zip(channels.indices, peaks, prop) if not is_prop}

    return InvisibilityReport(
        tolerance=tol,
        reflectionless=max_r < tol,
        transmission_unit=defect < tol,
        no_sideband_transmission=max_side < tol,
        max_reflection=max_r,
        transmission_defect=defect,
        max_sideband_transmission=max_side,
        propagating_closure=closure,
        evanescent_profile=evanescent,
    )


def evanescent_decay_length(result: FloquetScatteringResult, m: int, fraction: float = 0.25) -> float:
    """Fit log|Theta_m| over the outer `fraction` of the right half-window; return 1/|slope|."""
    profile = np.abs(result.channel_profile(m))
    x = result.x
    start = x[-1] - fraction * (x[-1] - x[0]) / 2
    mask = (x >= start) & (profile > 1e-290)
    if mask.sum() < 3:
        raise FloquetError(f"channel {m} has no resolvable tail to fit")
    slope, _ = np.polyfit(x[mask], np.log(profile[mask]), 1)
    return float(1 / abs(slope))


def scan_transmission(
    pot: PotentialSpec,
    mod: ModulationSpec,
    omega0_values: Iterable[float],
    **solve_kwargs,
) -> pd.DataFrame:
    """|t0|, reflection and sideband transmission across incident energies."""
    rows: List[dict] = []
    for omega0 in omega0_values:
        try:
            result = solve_floquet_scattering(pot, mod, float(omega0), **solve_kwargs)
        except FloquetError as e:
            logger.warning(f"Skipping omega0={omega0}: {e}")
            rows.append({"omega0": float(omega0), "t0_abs": np.nan, "transmission_defect": np.nan,
                         "max_reflection": np.nan, "max_sideband_transmission": np.nan,
                         "flux_balance": np.nan})
            continue
        report = verify_invisibility(result)
        zero = result.channels.index(0)
        rows.append({
            "omega0": float(omega0),
            "t0_abs": float(abs(result.t[zero])),
            "transmission_defect": report.transmission_defect,
            "max_reflection": report.max_reflection,
            "max_sideband_transmission": report.max_sideband_transmission,
            "flux_balance": result.flux_balance,
        })
    return pd.DataFrame(rows)


def packet_reflection(
    pot: PotentialSpec,
    mod: ModulationSpec,
    carrier: float,
    width: float,
    n_nodes: int = 20,
    **solve_kwargs,
) -> float:
    """Reflected probability of the packet exp(-(x - c)^2 / width^2 + i carrier x).

    Averages the sideband-summed reflected flux over the packet's momentum
    weight exp(-width^2 (k - carrier)^2 / 2) with Gauss-Hermite nodes, each
    node solved at omega0 = k^2.
    """
    if not width > 0:
        raise FloquetError(f"packet width must be positive, got {width}")
    nodes, weights = hermegauss(n_nodes)
    k = carrier + nodes / width
    if np.any(k <= 0):
        raise FloquetError("packet momentum spread reaches k <= 0; use a wider packet or larger carrier")
    flux = np.array([
        solve_floquet_scattering(pot, mod, float(ki) ** 2, **solve_kwargs).reflected_flux for ki in k
    ])
    reflected = float(np.sum(weights * flux) / np.sum(weights))
    logger.info(f"Packet reflection at carrier {carrier} (width {width}): {reflected:.4f}")
    return reflected
