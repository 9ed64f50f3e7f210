"""Scenario runner: config resolution, fail-fast preparation, execution and CSV output."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence
import asyncio
import contextlib
import json
import logging
import math
import time

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from config import settings
from diagnostics import (
    DiagnosticsRecord,
    compute_diagnostics,
    cycle_average,
    free_reference,
    intensity_frame,
    oscillation_amplitude,
)
from exceptions import ConfigError, FloquetError, ModulationError, WaveSimError
from floquet import (
    ChannelSet,
    build_channels,
    default_sideband_range,
    solve_floquet_scattering,
    verify_invisibility,
)
from grid import SpatialGrid, WaveFunction, make_gaussian_packet
from modulation import (
    ModulationSpec,
    classify_sidedness,
    commensurate_base,
    from_preset,
    mean_square_antiderivative,
)
from potential import (
    GaussianPotential,
    PotentialSpec,
    SampledPotential,
    effective_barrier_height,
    effective_potential,
    effective_potential_gaussian_analytic,
    load_sampled_potential,
)
from presets import PRESETS, get_preset
from propagator import (
    Absorber,
    PropagationPlan,
    Trajectory,
    effective_propagate,
    propagate,
)
from schemas import ModulationConfig, PotentialConfig, ScenarioConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FLAG = 3


# -----------------------------------------------------------------------------
# Config resolution
# -----------------------------------------------------------------------------

def load_config_source(source: str) -> dict:
    """A preset name or a path to a YAML scenario file."""
    if source in PRESETS:
        return get_preset(source)
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"'{source}' is neither a preset nor a readable file", path="source")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML: {e}", path=str(path))
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", path=str(path))
    return raw


def apply_overrides(raw: dict, assignments: Iterable[str]) -> dict:
    """Apply dotted `key.sub=value` assignments; values are parsed as YAML scalars."""
    for assignment in assignments:
        key, sep, text = assignment.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override '{assignment}' is not of the form key=value", path="--set")
        parts = key.strip().split(".")
        node = raw
        for depth, part in enumerate(parts[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError("cannot descend into a scalar", path=".".join(parts[:depth + 1]))
            node = child
        node[parts[-1]] = yaml.safe_load(text)
    return raw


def validate_config(raw: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as e:
        errors = e.errors()
        paths = [".".join(str(part) for part in error["loc"]) or "<root>" for error in errors]
        detail = "; ".join(f"{path}: {error['msg']}" for path, error in zip(paths, errors))
        raise ConfigError(detail, path=paths[0]) from e


def resolve_config(
    source: str,
    overrides: Sequence[str] = (),
    out: Optional[Path] = None,
    dt: Optional[float] = None,
    grid_n: Optional[int] = None,
) -> ScenarioConfig:
    raw = apply_overrides(load_config_source(source), overrides)
    if dt is not None:
        if "plan" not in raw:
            raise ConfigError("--dt needs a time-domain scenario with a plan section", path="plan.dt")
        raw["plan"]["dt"] = dt
    if grid_n is not None:
        if "grid" not in raw:
            raise ConfigError("--grid-n needs a scenario with a grid section", path="grid.n")
        raw["grid"]["n"] = grid_n
    if out is not None:
        raw.setdefault("outputs", {})["directory"] = str(out)
    return validate_config(raw)


# -----------------------------------------------------------------------------
# Preparation and execution
# -----------------------------------------------------------------------------

@contextlib.contextmanager
def _section(path: str):
    """Re-raise downstream validation failures as ConfigError tagged with `path`."""
    try:
        yield
    except ConfigError:
        raise
    except WaveSimError as e:
        raise ConfigError(str(e), path=path) from e


@dataclass
class PreparedScenario:
    config: ScenarioConfig
    potential: PotentialSpec
    modulation: ModulationSpec
    grid: Optional[SpatialGrid] = None
    state: Optional[WaveFunction] = None
    plan: Optional[PropagationPlan] = None
    channels: Optional[ChannelSet] = None


@dataclass
class ScenarioOutcome:
    config: ScenarioConfig
    exit_code: int
    output_directory: Path
    files: List[str] = field(default_factory=list)
    flags: Dict[str, Any] = field(default_factory=dict)
    results: Dict[str, Any] = field(default_factory=dict)
    wall_clock_ms: float = 0.0

    def summary(self) -> dict:
        return {
            "scenario": self.config.name,
            "mode": self.config.mode,
            "exit_code": self.exit_code,
            "output_directory": str(self.output_directory),
            "files": list(self.files),
            "flags": self.flags,
            "results": self.results,
        }


def build_modulation(mod: ModulationConfig) -> ModulationSpec:
    with _section("modulation"):
        if mod.tones is not None:
            return ModulationSpec.from_pairs((complex(t.re, t.im), t.frequency) for t in mod.tones)
        return from_preset(mod.preset, mod.omega, mod.amplitude)


def build_potential(pot: PotentialConfig) -> PotentialSpec:
    with _section("potential"):
        if pot.type == "gaussian":
            return GaussianPotential(pot.v0, pot.beta)
        return load_sampled_potential(pot.file)


def modulation_period(mod: ModulationSpec) -> Optional[float]:
    """Period of a commensurate tone set, else that of the fastest tone."""
    if mod.is_empty:
        return None
    try:
        base, _ = commensurate_base(mod)
    except ModulationError:
        base = mod.max_frequency
    return 2 * np.pi / base


def record_times(plan: PropagationPlan, t0: float = 0.0) -> np.ndarray:
    """The record times the split-step loop produces for `plan`."""
    steps = list(range(0, plan.n_steps + 1, plan.steps_per_record))
    if steps[-1] != plan.n_steps:
        steps.append(plan.n_steps)
    return t0 + np.array(steps, dtype=np.float64) * plan.dt


def _finite(value):
    """JSON-safe scalar: numpy types unwrapped, NaN/inf mapped to None."""
    if isinstance(value, (np.generic,)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


class ScenarioService:
    def __init__(self, float_format: Optional[str] = None):
        self.float_format = float_format or settings.CSV_FLOAT_FORMAT

    def prepare(self, config: ScenarioConfig) -> PreparedScenario:
        """Build every downstream object before any compute starts."""
        potential = build_potential(config.potential)
        modulation = build_modulation(config.modulation)
        prepared = PreparedScenario(config, potential, modulation)

        if config.mode == "floquet":
            fl = config.floquet
            with _section("floquet"):
                if fl.m_min is None:
                    m_min, m_max = default_sideband_range(potential, modulation)
                else:
                    m_min, m_max = fl.m_min, fl.m_max
                prepared.channels = build_channels(fl.omega0, modulation, m_min, m_max)
            return prepared

        g = config.grid
        with _section("grid"):
            prepared.grid = SpatialGrid(g.x_min, g.x_max, g.n)
            if isinstance(potential, SampledPotential) and potential.grid != prepared.grid:
                raise ConfigError(
                    f"sampled potential lives on [{potential.grid.x_min}, {potential.grid.x_max}) "
                    f"with n={potential.grid.n}; the scenario grid must match it",
                    path="grid",
                )
        p = config.packet
        with _section("packet"):
            prepared.state = make_gaussian_packet(prepared.grid, p.center, p.width, p.carrier, p.normalize)
        if config.outputs.x_split is not None and not prepared.grid.contains(config.outputs.x_split):
            raise ConfigError("x_split lies outside the grid", path="outputs.x_split")

        plan = config.plan
        with _section("plan"):
            absorber = Absorber(plan.absorber.ramp_width, plan.absorber.strength) if plan.absorber else None
            prepared.plan = PropagationPlan.for_modulation(
                modulation,
                plan.total_time,
                dt=plan.dt,
                steps_per_record=plan.steps_per_record,
                record_interval=plan.record_interval,
                absorber=absorber,
            )
            if config.mode == "time_domain":
                prepared.plan.check_resolves(modulation)
        return prepared

    def run(self, config: ScenarioConfig) -> ScenarioOutcome:
        prepared = self.prepare(config)
        directory = Path(config.outputs.directory)
        try:
            directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"cannot create output directory: {e}", path="outputs.directory")

        outcome = ScenarioOutcome(config=config, exit_code=EXIT_OK, output_directory=directory)
        logger.info(f"Running scenario '{config.name}' ({config.mode}) into {directory}")
        start = time.time()
        extra: Dict[str, Any] = {}
        if config.mode == "floquet":
            extra = self._run_floquet(prepared, outcome)
        else:
            extra = self._run_time_domain(prepared, outcome)
        outcome.wall_clock_ms = (time.time() - start) * 1000

        if any(outcome.flags.values()):
            outcome.exit_code = EXIT_NUMERICAL_FLAG
            logger.warning(f"Scenario '{config.name}' raised numerical flag(s): "
                           f"{[k for k, v in outcome.flags.items() if v]}")
        self._write_metadata(outcome, extra)
        logger.info(f"Scenario '{config.name}' finished in {outcome.wall_clock_ms:.2f}ms "
                    f"(exit {outcome.exit_code})")
        return outcome

    def run_source(
        self,
        source: str,
        overrides: Sequence[str] = (),
        out: Optional[Path] = None,
        dt: Optional[float] = None,
        grid_n: Optional[int] = None,
    ) -> ScenarioOutcome:
        return self.run(resolve_config(source, overrides, out, dt, grid_n))

    async def run_batch(
        self,
        sources: Sequence[str],
        out_root: Optional[Path] = None,
        overrides: Sequence[str] = (),
        concurrency: Optional[int] = None,
    ) -> List[ScenarioOutcome]:
        """Run independent scenarios concurrently, each into `out_root/<name>`."""
        out_root = Path(out_root or settings.OUTPUT_DIR)
        configs = [
            resolve_config(source, overrides, out=out_root / Path(source).stem)
            for source in sources
        ]
        for config in configs:
            self.prepare(config)

        semaphore = asyncio.Semaphore(concurrency or settings.BATCH_MAX_CONCURRENCY)

        async def run_one(config: ScenarioConfig) -> ScenarioOutcome:
            async with semaphore:
                return await asyncio.to_thread(self.run, config)

        return list(await asyncio.gather(*(run_one(config) for config in configs)))

    # -------------------------------------------------------------------------
    # Modes
    # -------------------------------------------------------------------------

    def _run_time_domain(self, prepared: PreparedScenario, outcome: ScenarioOutcome) -> dict:
        config = prepared.config
        which = set(config.outputs.which)
        state, plan, mod = prepared.state, prepared.plan, prepared.modulation

        effective = None
        if config.mode == "time_domain":
            traj = propagate(state, prepared.potential, mod, plan)
        elif config.mode == "effective":
            effective = effective_potential(prepared.potential, prepared.grid, mod)
            traj = effective_propagate(state, effective, plan)
        else:
            traj = free_reference(state, record_times(plan, state.time))

        outcome.flags["runaway_gain"] = traj.runaway_gain
        outcome.flags["incomplete"] = not traj.completed

        reference = None
        if "invisibility" in which and config.mode != "free_reference":
            reference = free_reference(state, traj.times)
        record = compute_diagnostics(
            traj,
            reference=reference,
            x_split=config.outputs.x_split,
            include_intensity="intensity" in which,
        )

        self._write_diagnostics(record, which, outcome)
        if "intensity" in which:
            self._write_frame(intensity_frame(traj), "intensity.csv", outcome)
        if "final_profile" in which:
            self._write_final_profile(traj.final_state, outcome)
        if "effective_potential" in which:
            self._write_effective_potential(prepared, outcome)

        outcome.results.update(self._summarize(prepared, traj, record, effective))
        return {"trajectory": traj.metadata}

    def _run_floquet(self, prepared: PreparedScenario, outcome: ScenarioOutcome) -> dict:
        fl = prepared.config.floquet
        try:
            result = solve_floquet_scattering(
                prepared.potential,
                prepared.modulation,
                fl.omega0,
                channels=prepared.channels,
                x_window=fl.x_window,
                n_x=fl.n_x,
                direction=fl.direction,
            )
        except FloquetError as e:
            logger.error(f"Floquet solve failed: {e}")
            outcome.flags["solver_error"] = str(e)
            return {}

        report = verify_invisibility(result, fl.tolerance)
        outcome.flags["truncation_warning"] = result.truncation_warning
        self._write_frame(result.to_frame(), "channels.csv", outcome)

        zero = result.channels.index(0)
        outcome.results.update({
            "t0_re": float(result.t[zero].real),
            "t0_im": float(result.t[zero].imag),
            "invisible": report.invisible,
            "max_reflection": report.max_reflection,
            "transmission_defect": report.transmission_defect,
            "max_sideband_transmission": report.max_sideband_transmission,
            "flux_balance": result.flux_balance,
            "flux_balance_continuum": result.flux_balance_continuum,
            "residual": result.residual,
            "sidedness": classify_sidedness(prepared.modulation).classification.value,
        })
        return {"floquet": result.metadata, "invisibility": report.as_dict()}

    # -------------------------------------------------------------------------
    # Output
    # -------------------------------------------------------------------------

    def _write_frame(self, frame: pd.DataFrame, name: str, outcome: ScenarioOutcome) -> None:
        path = outcome.output_directory / name
        frame.to_csv(path, index=False, float_format=self.float_format)
        outcome.files.append(name)

    def _write_diagnostics(self, record: DiagnosticsRecord, which: set, outcome: ScenarioOutcome) -> None:
        frame = record.to_frame()
        columns = ["time"]
        columns += [name for name in ("norm", "width") if name in which]
        if "invisibility" in which and "invisibility_error" in frame:
            columns.append("invisibility_error")
        if "reflected_fraction" in frame:
            columns.append("reflected_fraction")
        if len(columns) > 1:
            self._write_frame(frame[columns], "diagnostics.csv", outcome)

    def _write_final_profile(self, state: WaveFunction, outcome: ScenarioOutcome) -> None:
        frame = pd.DataFrame({
            "x": state.grid.x,
            "re": state.values.real,
            "im": state.values.imag,
            "intensity": state.intensity,
        })
        self._write_frame(frame, "final_profile.csv", outcome)

    def _write_effective_potential(self, prepared: PreparedScenario, outcome: ScenarioOutcome) -> None:
        grid = prepared.grid
        field_ = effective_potential(prepared.potential, grid, prepared.modulation)
        frame = pd.DataFrame({"x": grid.x, "v_eff_re": field_.values.real, "v_eff_im": field_.values.imag})
        closed_form = self._cos_drive(prepared)
        if closed_form is not None:
            pot, omega = closed_form
            frame["v_eff_closed_form"] = effective_potential_gaussian_analytic(pot.v0, pot.beta, omega, grid.x)
        self._write_frame(frame, "effective_potential.csv", outcome)

    @staticmethod
    def _cos_drive(prepared: PreparedScenario):
        """(potential, omega) when the run is a unit cos drive on a Gaussian, else None."""
        mod = prepared.config.modulation
        if (
            isinstance(prepared.potential, GaussianPotential)
            and mod.preset == "cos"
            and mod.amplitude in (None, 1.0)
        ):
            return prepared.potential, mod.omega
        return None

    def _summarize(
        self,
        prepared: PreparedScenario,
        traj: Trajectory,
        record: DiagnosticsRecord,
        effective,
    ) -> dict:
        mod = prepared.modulation
        results: Dict[str, Any] = {
            "records": len(traj),
            "final_time": float(traj.times[-1]),
            "final_norm": float(record.norm[-1]),
            "final_width": float(record.width[-1]),
            "norm_oscillation": oscillation_amplitude(record.norm),
            "width_oscillation": oscillation_amplitude(record.width),
            "sidedness": classify_sidedness(mod).classification.value,
        }
        period = modulation_period(mod)
        if period is not None and traj.times[-1] - traj.times[0] >= period:
            results["cycle_averaged_final_width"] = _finite(cycle_average(traj.times, record.width, period)[-1])
            results["cycle_averaged_final_norm"] = _finite(cycle_average(traj.times, record.norm, period)[-1])
        if record.invisibility_error is not None:
            results["final_invisibility_error"] = float(record.invisibility_error[-1])
            results["max_invisibility_error"] = float(record.invisibility_error.max())
        if record.reflected_fraction is not None:
            results["final_reflected_fraction"] = float(record.reflected_fraction[-1])
        scale = effective.scale if effective is not None else mean_square_antiderivative(mod)
        results["mean_square_antiderivative_re"] = float(np.real(scale))
        results["mean_square_antiderivative_im"] = float(np.imag(scale))
        closed_form = self._cos_drive(prepared)
        if closed_form is not None:
            pot, omega = closed_form
            results["effective_barrier_height"] = effective_barrier_height(pot.v0, pot.beta, omega)
        return {key: _finite(value) for key, value in results.items()}

    def _write_metadata(self, outcome: ScenarioOutcome, extra: dict) -> None:
        metadata = {
            "scenario": outcome.config.name,
            "description": outcome.config.description,
            "mode": outcome.config.mode,
            "config": outcome.config.model_dump(mode="json"),
            "exit_code": outcome.exit_code,
            "flags": outcome.flags,
            "results": outcome.results,
            "files": list(outcome.files),
            "wall_clock_ms": outcome.wall_clock_ms,
            **extra,
        }
        path = outcome.output_directory / "metadata.json"
        path.write_text(json.dumps(metadata, indent=2, default=_json_default))
        outcome.files.append("metadata.json")


def run_scenario(config: ScenarioConfig) -> ScenarioOutcome:
    return ScenarioService().run(config)
