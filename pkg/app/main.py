from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from typing import Any, Dict, List

from app.config import configure_logging, settings
from app.engine import commands
from app.errors import PseudogapError
from app.models import CommandName, IDSCurve, LyapunovPoint, RunConfig, SpectralHistogram, VerifyReport

# Initialize FastAPI app
app = FastAPI(
    title="Pseudogap Lab API",
    description="Random polymer Jacobi operators near a hyperbolic critical energy",
    version="1.0.0",
)


app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.on_event("startup")
async def startup_event():
    configure_logging(settings.LOG_LEVEL)


@app.exception_handler(PseudogapError)
async def pseudogap_error_handler(request: Request, exc: PseudogapError):
    return JSONResponse(
        status_code=exc.http_status,
        content={"detail": exc.message, "error": type(exc).__name__, "details": exc.details},
    )


# Health check endpoint
@app.get("/")
async def root():
    return {"message": "Pseudogap Lab API is running!", "status": "healthy", "env": settings.ENV}


@app.post("/nu")
def solve_nu(config: RunConfig) -> Dict[str, Any]:
    """nu, its bracket and residual, plus the hypothesis report."""
    return commands.run_nu(commands.RunContext(config, CommandName.NU))


@app.post("/criticaldata")
def critical_data(config: RunConfig) -> Dict[str, Any]:
    return commands.run_criticaldata(commands.RunContext(config, CommandName.CRITICALDATA))


@app.post("/ids", response_model=IDSCurve)
def integrated_density_of_states(config: RunConfig):
    """IDS by Sturm counting on the configured energy grid."""
    return commands.run_ids(commands.RunContext(config, CommandName.IDS))


@app.post("/lyapunov", response_model=List[LyapunovPoint])
def lyapunov_exponent(config: RunConfig):
    points, _ = commands.run_lyapunov(commands.RunContext(config.model_copy(update={"thouless_sizes": []}), CommandName.LYAPUNOV))
    return points


@app.post("/spectrum", response_model=SpectralHistogram)
def spectrum(config: RunConfig):
    """Histogram of the eigenvalues; the raw spectra stay server side."""
    _, hist = commands.run_spectrum(commands.RunContext(config, CommandName.SPECTRUM))
    return hist


@app.post("/verify", response_model=VerifyReport)
def verify(config: RunConfig):
    return commands.run_verify(commands.RunContext(config, CommandName.VERIFY))


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
