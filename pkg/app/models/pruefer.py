from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Dict, Optional
from enum import Enum

from app.errors import DomainError


class Region(str, Enum):
    I = "I"
    II = "II"
    III_LOW = "III<"
    III_HIGH = "III>"
    IV = "IV"


class RegionParams(BaseModel):
    """Partition of projective space used to bound rotations near E_c."""
    model_config = ConfigDict(frozen=True)

    k: float = Field(..., gt=1.0)
    epsilon: float = Field(..., gt=0.0)
    C1: float
    C2: float = Field(..., gt=0.0)
    C3: float = 0.0
    C4: float = Field(..., gt=0.0)

    @model_validator(mode="after")
    def _boundaries_ordered(self):
        lower, middle, upper = self.lower, self.split, self.upper
        if not (0.0 < lower < middle < upper):
            raise ValueError(
                f"region boundaries not ordered for epsilon={self.epsilon}: "
                f"K eps={lower:.4g}, 2 C4^2 K eps={middle:.4g}, 1/(K eps)={upper:.4g}"
            )
        return self

    @classmethod
    def build(cls, k: float, epsilon: float, critical) -> "RegionParams":
        """RegionParams from critical data, raising DomainError when invalid."""
        if k <= 1.0:
            raise DomainError(f"k must exceed 1, got {k}")
        K = 2.0 * critical.C2 / (1.0 - 1.0 / k)
        lower = K * epsilon
        if not (0.0 < lower < 2.0 * critical.C4**2 * lower < 1.0 / lower):
            raise DomainError(
                f"epsilon={epsilon} too large for ordered regions at k={k}",
                max_epsilon=max_epsilon(k, critical.C2, critical.C4),
            )
        return cls(k=k, epsilon=epsilon, C1=critical.C1, C2=critical.C2, C3=critical.C3, C4=critical.C4)

    @property
    def K(self) -> float:
        return 2.0 * self.C2 / (1.0 - 1.0 / self.k)

    @property
    def lower(self) -> float:
        return self.K * self.epsilon

    @property
    def split(self) -> float:
        return 2.0 * self.C4**2 * self.lower

    @property
    def upper(self) -> float:
        return 1.0 / self.lower


def max_epsilon(k: float, C2: float, C4: float) -> float:
    """Supremum of epsilon keeping 2 C4^2 K eps < 1/(K eps)."""
    K = 2.0 * C2 / (1.0 - 1.0 / k)
    return 1.0 / (K * C4 * 2.0**0.5)


class RegionCheckReport(BaseModel):
    name: str
    samples: int
    violations: Dict[str, int]
    margin: Optional[float] = None
    epsilon: Optional[float] = None
    above_validity: bool = False

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())

    @property
    def passed(self) -> bool:
        return self.total_violations == 0


class OscillationReport(BaseModel):
    triples: int
    free_max_deviation: float
    modified_max_deviation: float
    free_violations: int
    modified_violations: int

    @property
    def passed(self) -> bool:
        return self.free_violations == 0 and self.modified_violations == 0


class ConeConditionSweep(BaseModel):
    ensembles: int
    atoms: int
    min_a: float
    min_discriminant: float
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0
