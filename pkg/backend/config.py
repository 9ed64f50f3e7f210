from pydantic_settings import BaseSettings
from functools import lru_cache
from pathlib import Path


class Settings(BaseSettings):
    # Output
    OUTPUT_DIR: Path = Path("runs")
    CSV_FLOAT_FORMAT: str = "%.17g"  # round-trip exact
    DEFAULT_RECORD_COUNT: int = 200

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = False

    # Modulation
    SIDEDNESS_REL_TOL: float = 1e-12

    # Time stepping
    STEPS_PER_PERIOD: int = 128      # default dt = period / STEPS_PER_PERIOD
    MIN_STEPS_PER_PERIOD: int = 32   # dt must resolve the fastest tone
    RUNAWAY_GAIN_THRESHOLD: float = 1e6

    # Floquet solver
    FLOQUET_MIN_SIDEBANDS: int = 8
    FLOQUET_SIDEBAND_MARGIN: int = 2
    FLOQUET_N_X: int = 2001
    FLOQUET_WINDOW_DECAY: float = 6.0  # window half-width = decay / sqrt(beta)
    FLOQUET_TRUNCATION_TOL: float = 1e-8
    FLOQUET_RESIDUAL_TOL: float = 1e-8

    # Batch runs
    BATCH_MAX_CONCURRENCY: int = 4

    class Config:
        env_file = ".env"
        env_prefix = "WAVESIM_"


@lru_cache()
def get_settings() -> Settings:
    return Settings()


settings = get_settings()
