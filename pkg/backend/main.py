from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.concurrency import run_in_threadpool
from contextlib import asynccontextmanager
from pathlib import Path
from typing import List
import logging

from config import settings
from exceptions import ConfigError, FloquetError
from floquet import build_channels, solve_floquet_scattering, verify_invisibility
from logging_config import configure_logging
from modulation import classify_sidedness, mean_square_antiderivative
from potential import GaussianPotential
from presets import PRESETS, list_presets
from scenario_service import (
    ScenarioService,
    apply_overrides,
    build_modulation,
    load_config_source,
    validate_config,
)
from schemas import (
    FloquetSolveRequest,
    ModulationClassifyRequest,
    PresetInfo,
    RunSummary,
    ScenarioRunRequest,
    SidednessResponse,
)

configure_logging()
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info(f"Starting up Wave Simulator API (outputs under {settings.OUTPUT_DIR})")
    yield
    logger.info("Shutting down")

app = FastAPI(
    title="Time-Modulated Potential Simulator API",
    version="1.0.0",
    lifespan=lifespan
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# =============================================================================
# API ENDPOINTS
# =============================================================================

@app.get("/")
async def root():
    return {
        "message": "Time-Modulated Potential Simulator API",
        "docs": "/docs",
        "version": "1.0.0"
    }

@app.get("/health")
async def health_check():
    return {"status": "healthy", "presets": len(PRESETS)}

@app.get("/presets", response_model=List[PresetInfo])
async def get_presets():
    return [
        PresetInfo(name=name, description=description, mode=PRESETS[name]["mode"])
        for name, description in list_presets()
    ]

# -----------------------------------------------------------------------------
# Scenario runs
# -----------------------------------------------------------------------------

@app.post("/scenarios/run", response_model=RunSummary)
async def run_scenario(request: ScenarioRunRequest):
    """Run a preset or inline config into OUTPUT_DIR/<name>"""
    try:
        raw = load_config_source(request.preset) if request.preset else dict(request.config)
        raw = apply_overrides(raw, request.overrides)
        config = validate_config(raw)
        root = Path(settings.OUTPUT_DIR).resolve()
        directory = (root / config.name).resolve()
        if root not in directory.parents:
            raise ConfigError("run name must stay inside the output directory", path="name")
        config.outputs.directory = directory
        outcome = await run_in_threadpool(ScenarioService().run, config)
        return outcome.summary()
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error running scenario: {e}")
        raise HTTPException(status_code=500, detail=str(e))

# -----------------------------------------------------------------------------
# Floquet and modulation analysis
# -----------------------------------------------------------------------------

@app.post("/floquet/solve")
async def floquet_solve(request: FloquetSolveRequest):
    """Coupled-channel solve plus invisibility report"""
    try:
        pot = GaussianPotential(request.potential.v0, request.potential.beta)
        mod = build_modulation(request.modulation)
        fl = request.floquet
        channels = None
        if fl.m_min is not None:
            channels = build_channels(fl.omega0, mod, fl.m_min, fl.m_max)
        result = await run_in_threadpool(
            solve_floquet_scattering, pot, mod, fl.omega0,
            channels=channels, x_window=fl.x_window, n_x=fl.n_x, direction=fl.direction,
        )
        report = verify_invisibility(result, fl.tolerance)
        return {
            "channels": result.to_frame().to_dict(orient="records"),
            "metadata": result.metadata,
            "invisibility": report.as_dict(),
            "invisible": report.invisible,
        }
    except FloquetError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

@app.post("/modulation/classify", response_model=SidednessResponse)
async def classify_modulation(request: ModulationClassifyRequest):
    """Sidedness of a tone set and the average of its squared antiderivative"""
    try:
        mod = build_modulation(request.modulation)
        report = classify_sidedness(mod, request.rel_tol)
        scale = mean_square_antiderivative(mod)
        return SidednessResponse(
            classification=report.classification.value,
            omega0=report.omega0,
            tolerance_used=report.tolerance_used,
            mean_square_antiderivative_re=scale.real,
            mean_square_antiderivative_im=scale.imag,
        )
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
