from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Annotated, List, Literal, Optional, Tuple, Union
from pathlib import Path


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# Scenario sections
class GridConfig(StrictModel):
    x_min: float
    x_max: float
    n: int = Field(..., ge=8)


class PacketConfig(StrictModel):
    center: float = 0.0
    width: float = Field(..., gt=0)
    carrier: float = 0.0
    normalize: bool = True


class GaussianPotentialConfig(StrictModel):
    type: Literal["gaussian"] = "gaussian"
    v0: float
    beta: float = Field(..., gt=0)


class SampledPotentialConfig(StrictModel):
    type: Literal["sampled"]
    file: Path


PotentialConfig = Annotated[
    Union[GaussianPotentialConfig, SampledPotentialConfig], Field(discriminator="type")
]


class ToneConfig(StrictModel):
    re: float
    im: float = 0.0
    frequency: float

    @field_validator("frequency")
    @classmethod
    def nonzero_frequency(cls, value: float) -> float:
        if value == 0:
            raise ValueError("tone frequency must be nonzero (f has zero mean)")
        return value


class ModulationConfig(StrictModel):
    preset: Optional[Literal["cos", "one_sided", "two_tone", "one_sided_negative", "none"]] = None
    omega: Optional[float] = Field(default=None, gt=0)
    amplitude: Optional[float] = None
    tones: Optional[List[ToneConfig]] = None

    @model_validator(mode="after")
    def preset_or_tones(self):
        if (self.preset is None) == (self.tones is None):
            raise ValueError("give exactly one of 'preset' or 'tones'")
        if self.preset not in (None, "none") and self.omega is None:
            raise ValueError(f"preset '{self.preset}' needs 'omega'")
        return self


class AbsorberConfig(StrictModel):
    ramp_width: float = Field(..., gt=0)
    strength: float = Field(..., gt=0)


class PlanConfig(StrictModel):
    dt: Optional[float] = Field(default=None, gt=0)
    total_time: float = Field(..., gt=0)
    steps_per_record: Optional[int] = Field(default=None, ge=1)
    record_interval: Optional[float] = Field(default=None, gt=0)
    absorber: Optional[AbsorberConfig] = None


class FloquetConfig(StrictModel):
    omega0: float = Field(..., gt=0)
    m_min: Optional[int] = Field(default=None, le=0)
    m_max: Optional[int] = Field(default=None, ge=0)
    x_window: Optional[Tuple[float, float]] = None
    n_x: Optional[int] = Field(default=None, ge=16)
    direction: Literal[1, -1] = 1
    tolerance: float = Field(default=1e-6, gt=0)

    @model_validator(mode="after")
    def paired_range(self):
        if (self.m_min is None) != (self.m_max is None):
            raise ValueError("give both m_min and m_max, or neither")
        return self


OutputName = Literal["norm", "width", "intensity", "invisibility", "final_profile", "effective_potential"]


class OutputsConfig(StrictModel):
    directory: Path = Path("runs/scenario")
    which: List[OutputName] = Field(default_factory=lambda: ["norm", "width", "invisibility", "final_profile"])
    x_split: Optional[float] = None


class ScenarioConfig(StrictModel):
    name: str = Field(default="custom", pattern=r"^[A-Za-z0-9_][A-Za-z0-9_.-]*$")
    description: str = ""
    mode: Literal["time_domain", "effective", "floquet", "free_reference"]
    grid: Optional[GridConfig] = None
    packet: Optional[PacketConfig] = None
    potential: PotentialConfig
    modulation: ModulationConfig
    plan: Optional[PlanConfig] = None
    floquet: Optional[FloquetConfig] = None
    outputs: OutputsConfig = Field(default_factory=OutputsConfig)

    @model_validator(mode="after")
    def sections_for_mode(self):
        if self.mode == "floquet":
            if self.floquet is None:
                raise ValueError("mode 'floquet' needs a 'floquet' section")
        else:
            missing = [name for name in ("grid", "packet", "plan") if getattr(self, name) is None]
            if missing:
                raise ValueError(f"mode '{self.mode}' needs section(s): {', '.join(missing)}")
        return self


# API request/response schemas
class ScenarioRunRequest(BaseModel):
    preset: Optional[str] = None
    config: Optional[dict] = None
    overrides: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def preset_or_config(self):
        if (self.preset is None) == (self.config is None):
            raise ValueError("give exactly one of 'preset' or 'config'")
        return self


class FloquetSolveRequest(BaseModel):
    potential: GaussianPotentialConfig
    modulation: ModulationConfig
    floquet: FloquetConfig


class ModulationClassifyRequest(BaseModel):
    modulation: ModulationConfig
    rel_tol: Optional[float] = Field(default=None, gt=0, lt=1)


class SidednessResponse(BaseModel):
    classification: str
    omega0: float
    tolerance_used: float
    mean_square_antiderivative_re: float
    mean_square_antiderivative_im: float


class PresetInfo(BaseModel):
    name: str
    description: str
    mode: str


class RunSummary(BaseModel):
    scenario: str
    mode: str
    exit_code: int
    output_directory: str
    files: List[str]
    flags: dict
    results: dict
