import os
import logging
from pydantic_settings import BaseSettings

class Settings(BaseSettings):
    L_MAX: int = int(os.getenv("L_MAX", "8"))
    DEFAULT_WORKERS: int = int(os.getenv("DEFAULT_WORKERS", "1"))
    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "results")
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    ENV: str = os.getenv("ENV", "development")

    # Numerical tolerances
    WEIGHT_TOL: float = 1e-12
    DET_TOL: float = 1e-10
    CRITICAL_TOL: float = 1e-9
    DIAG_TOL: float = 1e-8
    C_SIGMA_TOL: float = 1e-8
    GAP_LABEL_TOL: float = 1e-6
    GAMMA0_TOL: float = 1e-9
    ROOT_XTOL: float = 1e-14
    EIGEN_TOL: float = 1e-10

    RENORM_EVERY: int = 8
    ALLOW_C_SIGMA: bool = False

settings = Settings()


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str | None = None) -> None:
    """Install one stream handler on the root logger (idempotent)."""
    root = logging.getLogger()
    root.setLevel((level or settings.LOG_LEVEL).upper())
    if not any(getattr(h, "_pseudogap", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._pseudogap = True
        root.addHandler(handler)
