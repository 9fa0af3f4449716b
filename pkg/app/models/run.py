from pydantic import BaseModel, Field, computed_field, field_validator
from typing import List, Optional, Union
from enum import Enum

from app.config import settings
from app.models.analytics import (
    HypothesisReport,
    LDBoundReport,
    MeanInterarrivalReport,
    RotationBoundReport,
)
from app.models.polymer import ModelConfig
from app.models.pruefer import ConeConditionSweep, OscillationReport, RegionCheckReport


class CommandName(str, Enum):
    SPECTRUM = "spectrum"
    IDS = "ids"
    ROTATION = "rotation"
    NU = "nu"
    LYAPUNOV = "lyapunov"
    RENEWAL = "renewal"
    HOLDER = "holder"
    VERIFY = "verify"
    CRITICALDATA = "criticaldata"
    TRAJECTORY = "trajectory"

    @property
    def stochastic(self) -> bool:
        return self not in (CommandName.NU, CommandName.CRITICALDATA)


class RunConfig(BaseModel):
    """One run: the model plus the parameters of every command."""
    model: ModelConfig
    seed: Optional[int] = Field(None, ge=0)
    workers: int = Field(default_factory=lambda: settings.DEFAULT_WORKERS, ge=1)
    out: str = Field(default_factory=lambda: settings.OUTPUT_DIR)

    energy_critical: float = 0.0
    discretization: int = Field(16, ge=2, le=256)
    allow_c_sigma: bool = Field(default_factory=lambda: settings.ALLOW_C_SIGMA)

    # system sizes
    n_sites: int = Field(5000, ge=1)
    n_polymers: int = Field(100_000, ge=1)
    reps: int = Field(1, ge=1)

    # grids
    energies: List[float] = []
    epsilons: List[float] = [0.02]
    bins: Union[int, str] = "fd"
    normalized: bool = False
    thouless_sizes: List[int] = [1000, 4000]

    # region and large-deviation parameters
    k: float = Field(2.0, gt=1.0)
    k_rho: Optional[float] = Field(None, gt=1.0)
    xi: Optional[float] = Field(None, gt=0.0)
    delta: Optional[float] = Field(None, gt=0.0)
    zetas: List[float] = [1e-4, 1e-3, 1e-2]
    ld_lengths: List[int] = [50, 100, 200]
    samples: int = Field(10_000, ge=1)
    interarrival_samples: int = Field(1000, ge=1)
    max_steps: int = Field(100_000, ge=3)

    # phases
    theta0: Optional[float] = None

    # verify
    oscillation_triples: int = Field(1000, ge=1)
    oscillation_max_sites: int = Field(500, ge=1)
    sweep_ensembles: int = Field(50, ge=1)

    @field_validator("epsilons")
    @classmethod
    def _nonzero_epsilons(cls, value: List[float]) -> List[float]:
        if any(e == 0 for e in value):
            raise ValueError("epsilons must be nonzero")
        return value

    @field_validator("zetas")
    @classmethod
    def _positive_zetas(cls, value: List[float]) -> List[float]:
        if any(z <= 0 for z in value):
            raise ValueError("zetas must be positive")
        return value

    @field_validator("ld_lengths")
    @classmethod
    def _long_enough(cls, value: List[int]) -> List[int]:
        if any(n < 4 for n in value):
            raise ValueError("ld_lengths must be at least 4")
        return value

    def grid(self) -> List[float]:
        """Energies for the energy-grid commands; E_c + epsilons when none given."""
        return self.energies or [self.energy_critical + e for e in self.epsilons]


class VerifyReport(BaseModel):
    hypotheses: Optional[HypothesisReport] = None
    maximum_factor: List[RegionCheckReport] = []
    no_large_jump: List[RegionCheckReport] = []
    oscillation: Optional[OscillationReport] = None
    cone_condition: Optional[ConeConditionSweep] = None
    ld_bounds: List[LDBoundReport] = []
    mean_interarrival: List[MeanInterarrivalReport] = []
    rotation_bounds: List[RotationBoundReport] = []

    @computed_field
    @property
    def failures(self) -> List[str]:
        failed = []
        for name in ("maximum_factor", "no_large_jump", "ld_bounds", "mean_interarrival", "rotation_bounds"):
            for report in getattr(self, name):
                if not getattr(report, "verified", True):
                    continue
                if not report.passed and not getattr(report, "above_validity", False):
                    failed.append(f"{name}@{getattr(report, 'epsilon', None) or getattr(report, 'zeta', None)}")
        for name in ("oscillation", "cone_condition"):
            report = getattr(self, name)
            if report is not None and not report.passed:
                failed.append(name)
        return failed

    @computed_field
    @property
    def unverified(self) -> List[str]:
        """Mean-interarrival checks at epsilons where no loop completed."""
        return [f"mean_interarrival@{r.epsilon}" for r in self.mean_interarrival if not r.verified]

    @computed_field
    @property
    def passed(self) -> bool:
        return not self.failures
